#include "aipoll/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "aipoll/error.hpp"

namespace aipoll {

std::string embedding_column(std::size_t dim) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "emb_%03zu", dim);
  return buf;
}

std::vector<std::string> feature_names(bool with_interactions) {
  std::vector<std::string> names(kBaseColumns.begin(), kBaseColumns.end());
  for (std::size_t d = 0; d < kEmbeddingDims; ++d) names.push_back(embedding_column(d));
  if (with_interactions) {
    for (auto demo : kInteractionDemographics) {
      for (std::size_t d = 0; d < kEmbeddingDims; ++d) names.push_back("ix_" + std::string(demo) + "_" + embedding_column(d));
    }
  }
  return names;
}

std::array<double, kBaseWidth> base_features(const PermutationKey& key, int cardinality) {
  require_supported_cardinality(cardinality);
  std::array<double, kBaseWidth> f{};
  const auto& c = key.cell;
  f[0] = c.ideology == Ideology::VeryConservative;
  f[1] = c.ideology == Ideology::Conservative;
  f[2] = c.ideology == Ideology::Liberal;
  f[3] = c.ideology == Ideology::VeryLiberal;
  f[4] = c.race == Race::NonWhite;
  f[5] = c.gender == Gender::Woman;
  const bool dd = key.variant.framework() == Framework::DD;
  f[6] = dd && key.variant.cot_reminder();
  f[7] = dd && key.variant.dist_reminder();
  f[8] = cardinality == 2;
  f[9] = cardinality == 4;
  return f;
}

nlohmann::json ScalerState::to_json() const {
  return {{"mean", mean}, {"sd", sd}, {"degenerate", degenerate}, {"sd_kind", "population"}};
}

ScalerState ScalerState::from_json(const nlohmann::json& j) {
  ScalerState s;
  try {
    s.mean = j.at("mean").get<std::vector<double>>();
    s.sd = j.at("sd").get<std::vector<double>>();
    s.degenerate = j.at("degenerate").get<std::vector<bool>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("scaler: ") + e.what());
  }
  if (s.sd.size() != s.mean.size() || s.degenerate.size() != s.mean.size()) {
    throw Error(ErrorCode::Shape, "scaler: inconsistent lengths");
  }
  return s;
}

ScalerState fit_scaler(const Eigen::MatrixXd& train_rows) {
  if (train_rows.rows() == 0) throw Error(ErrorCode::InvalidArgument, "fit_scaler: no training rows");
  const auto n = static_cast<double>(train_rows.rows());
  ScalerState s;
  for (Eigen::Index d = 0; d < train_rows.cols(); ++d) {
    const double m = train_rows.col(d).sum() / n;
    const double var = (train_rows.col(d).array() - m).square().sum() / n;
    const double sd = std::sqrt(var);
    const bool degenerate = !(sd > 1e-12);
    s.mean.push_back(m);
    s.sd.push_back(degenerate ? 1.0 : sd);
    s.degenerate.push_back(degenerate);
  }
  return s;
}

Eigen::MatrixXd apply_scaler(const ScalerState& state, const Eigen::MatrixXd& rows) {
  if (static_cast<std::size_t>(rows.cols()) != state.mean.size()) {
    throw Error(ErrorCode::Shape, "apply_scaler: expected " + std::to_string(state.mean.size()) + " columns, got " +
                                      std::to_string(rows.cols()));
  }
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index d = 0; d < rows.cols(); ++d) {
    const auto du = static_cast<std::size_t>(d);
    out.col(d) = (rows.col(d).array() - state.mean[du]) / state.sd[du];
  }
  return out;
}

std::vector<double> build_features(const PermutationKey& key, int cardinality,
                                   std::span<const double> scaled_embedding, bool with_interactions) {
  if (scaled_embedding.size() != kEmbeddingDims) {
    throw Error(ErrorCode::Shape, "embedding must have " + std::to_string(kEmbeddingDims) + " dims");
  }
  const auto base = base_features(key, cardinality);
  std::vector<double> f(base.begin(), base.end());
  f.insert(f.end(), scaled_embedding.begin(), scaled_embedding.end());
  if (with_interactions) {
    // Demographic one-hots are base columns 0..5.
    for (std::size_t k = 0; k < kInteractionDemographics.size(); ++k) {
      for (double e : scaled_embedding) f.push_back(base[k] * e);
    }
  }
  return f;
}

EmbeddingIndex index_embeddings(std::span<const EmbeddingRecord> records) {
  EmbeddingIndex idx;
  for (const auto& r : records) idx[r.question_id] = r.vector;
  return idx;
}

Eigen::MatrixXd embedding_matrix(std::span<const FeatureRow> rows, const EmbeddingIndex& embeddings) {
  Eigen::MatrixXd E(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kEmbeddingDims));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto it = embeddings.find(rows[i].key.question_id);
    if (it == embeddings.end()) {
      throw Error(ErrorCode::MissingEmbedding, "no embedding for question " + rows[i].key.question_id);
    }
    if (it->second.size() != kEmbeddingDims) throw Error(ErrorCode::Shape, "embedding for " + it->first + " has wrong length");
    for (std::size_t d = 0; d < kEmbeddingDims; ++d) {
      E(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = it->second[d];
    }
  }
  return E;
}

Eigen::MatrixXd build_design(std::span<const FeatureRow> rows, const Eigen::MatrixXd& scaled_embeddings,
                             bool with_interactions) {
  if (static_cast<std::size_t>(scaled_embeddings.rows()) != rows.size()) {
    throw Error(ErrorCode::Shape, "build_design: row count mismatch");
  }
  const auto width = static_cast<Eigen::Index>(with_interactions ? kInteractionWidth : kPlainWidth);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), width);
  std::vector<double> emb(kEmbeddingDims);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t d = 0; d < kEmbeddingDims; ++d) emb[d] = scaled_embeddings(ii, static_cast<Eigen::Index>(d));
    const auto f = build_features(rows[i].key, rows[i].cardinality, emb, with_interactions);
    X.row(ii) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), width);
  }
  return X;
}

void write_design_csv(const std::filesystem::path& path, std::span<const FeatureRow> rows, const Eigen::MatrixXd& X,
                      bool with_interactions, const std::vector<std::pair<std::string, std::vector<double>>>& targets,
                      const Provenance& provenance) {
  const auto names = feature_names(with_interactions);
  if (static_cast<std::size_t>(X.cols()) != names.size() || static_cast<std::size_t>(X.rows()) != rows.size()) {
    throw Error(ErrorCode::Shape, "write_design_csv: matrix does not match layout");
  }
  std::ostringstream out;
  out << provenance.comment_header() << '\n';
  std::vector<std::string> header{"key"};
  header.insert(header.end(), names.begin(), names.end());
  for (const auto& [name, values] : targets) {
    if (values.size() != rows.size()) throw Error(ErrorCode::Shape, "target " + name + " has wrong length");
    header.push_back("target_" + name);
  }
  out << join_csv(header) << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> fields{rows[i].key.to_string()};
    for (Eigen::Index j = 0; j < X.cols(); ++j) fields.push_back(format_double(X(static_cast<Eigen::Index>(i), j)));
    for (const auto& t : targets) fields.push_back(format_double(t.second[i]));
    out << join_csv(fields) << '\n';
  }
  write_text_file(path, out.str());
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::Shape, "pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  // Relative threshold: a constant input leaves only rounding residue here.
  const double eps = 1e-24 * static_cast<double>(n);
  if (sxx <= eps * (1.0 + mx * mx) || syy <= eps * (1.0 + my * my)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

TagCorrelations tag_correlations(const QuestionCorpus& corpus, const EmbeddingIndex& embeddings) {
  TagCorrelations out;
  out.tags = corpus.tags();
  std::vector<const std::vector<double>*> vecs;
  for (const auto& q : corpus.questions()) {
    const auto it = embeddings.find(q.id());
    if (it == embeddings.end()) throw Error(ErrorCode::MissingEmbedding, "no embedding for question " + q.id());
    vecs.push_back(&it->second);
  }
  std::vector<double> column(vecs.size());
  std::vector<double> indicator(vecs.size());
  for (const auto& tag : out.tags) {
    for (std::size_t i = 0; i < vecs.size(); ++i) indicator[i] = corpus.questions()[i].tag() == tag ? 1.0 : 0.0;
    std::vector<std::optional<double>> row;
    for (std::size_t d = 0; d < kEmbeddingDims; ++d) {
      for (std::size_t i = 0; i < vecs.size(); ++i) column[i] = (*vecs[i])[d];
      row.push_back(pearson(indicator, column));
    }
    out.r.push_back(std::move(row));
  }
  return out;
}

void write_tag_correlations_csv(const std::filesystem::path& path, const TagCorrelations& t,
                                const Provenance& provenance) {
  std::ostringstream out;
  out << provenance.comment_header() << '\n';
  std::vector<std::string> header{"tag"};
  for (std::size_t d = 0; d < kEmbeddingDims; ++d) header.push_back(embedding_column(d));
  out << join_csv(header) << '\n';
  for (std::size_t k = 0; k < t.tags.size(); ++k) {
    std::vector<std::string> fields{t.tags[k]};
    for (const auto& r : t.r[k]) fields.push_back(r ? format_double(*r) : "");
    out << join_csv(fields) << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace aipoll
