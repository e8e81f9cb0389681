#include "aipoll/study.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "aipoll/error.hpp"

namespace aipoll {
namespace {

std::size_t metric_index(Metric m) {
  return static_cast<std::size_t>(std::find(kMetrics.begin(), kMetrics.end(), m) - kMetrics.begin());
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

Eigen::VectorXd to_vector(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <typename T>
std::vector<T> pick(std::span<const T> all, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

}  // namespace

std::string_view to_string(StudyFramework f) noexcept {
  switch (f) {
    case StudyFramework::DD: return "DD";
    case StudyFramework::SI: return "SI";
    case StudyFramework::Difference: return "SI-DD";
  }
  return "?";
}

std::optional<StudyFramework> parse_study_framework(std::string_view s) noexcept {
  for (auto f : kStudyFrameworks) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

std::string_view to_string(ModelKind m) noexcept {
  switch (m) {
    case ModelKind::Ridge: return "ridge";
    case ModelKind::RidgeInteractions: return "ridge_ix";
    case ModelKind::Gbm: return "gbm";
  }
  return "?";
}

std::string_view display_name(ModelKind m) noexcept {
  switch (m) {
    case ModelKind::Ridge: return "Bayesian Ridge";
    case ModelKind::RidgeInteractions: return "Bayesian with Interactions";
    case ModelKind::Gbm: return "Gradient Boosting";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) noexcept {
  for (auto m : kModelKinds) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

StudyDataset study_dataset(StudyFramework framework, std::span<const ComparisonRow> rows) {
  StudyDataset ds;
  auto add = [&](const PermutationKey& key, int cardinality, std::array<double, 3> values) {
    ds.rows.push_back({key, cardinality});
    for (std::size_t m = 0; m < 3; ++m) ds.targets[m].push_back(values[m]);
  };
  auto values_of = [](const ComparisonRow& r) {
    return std::array<double, 3>{r.value(kMetrics[0]), r.value(kMetrics[1]), r.value(kMetrics[2])};
  };

  if (framework != StudyFramework::Difference) {
    const auto want = framework == StudyFramework::DD ? Framework::DD : Framework::SI;
    for (const auto& r : rows) {
      if (r.key.variant.framework() == want) add(r.key, r.cardinality, values_of(r));
    }
    return ds;
  }

  std::map<std::pair<std::string, std::size_t>, const ComparisonRow*> dd;
  for (const auto& r : rows) {
    if (r.key.variant == comparison_dd_variant()) dd[{r.key.question_id, r.key.cell.index()}] = &r;
  }
  for (const auto& r : rows) {
    if (r.key.variant.framework() != Framework::SI) continue;
    const auto it = dd.find({r.key.question_id, r.key.cell.index()});
    if (it == dd.end()) continue;
    const auto si = values_of(r);
    const auto d = values_of(*it->second);
    add(r.key, r.cardinality, {si[0] - d[0], si[1] - d[1], si[2] - d[2]});
  }
  return ds;
}

const StudyCell& StudyReport::at(StudyFramework f, ModelKind m, Metric metric) const {
  for (const auto& c : cells) {
    if (c.framework == f && c.model == m && c.metric == metric) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "no such study cell");
}

nlohmann::json StudyReport::to_json() const {
  nlohmann::json cells_json = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json j{{"framework", std::string(to_string(c.framework))},
                     {"model", std::string(to_string(c.model))},
                     {"metric", std::string(to_string(c.metric))},
                     {"n_train", c.n_train},
                     {"n_test", c.n_test},
                     {"train_r2", optional_json(c.train_r2)},
                     {"test_r2", optional_json(c.test_r2)}};
    if (!c.unavailable.empty()) j["unavailable"] = c.unavailable;
    cells_json.push_back(std::move(j));
  }
  return {{"split", {{"test_fraction", test_fraction}, {"train_questions", split.train}, {"test_questions", split.test}}},
          {"cells", cells_json}};
}

StudyReport StudyReport::from_json(const nlohmann::json& j) {
  StudyReport r;
  try {
    const auto& split = j.at("split");
    r.test_fraction = split.at("test_fraction").get<double>();
    r.split.train = split.at("train_questions").get<std::vector<std::string>>();
    r.split.test = split.at("test_questions").get<std::vector<std::string>>();
    for (const auto& c : j.at("cells")) {
      const auto fw = parse_study_framework(c.at("framework").get<std::string>());
      const auto kind = parse_model_kind(c.at("model").get<std::string>());
      const auto metric = parse_metric(c.at("metric").get<std::string>());
      if (!fw || !kind || !metric) throw Error(ErrorCode::Schema, "study: unknown cell label");
      r.cells.push_back({*fw, *kind, *metric, c.at("n_train").get<std::size_t>(), c.at("n_test").get<std::size_t>(),
                         optional_from(c.at("train_r2")), optional_from(c.at("test_r2")), c.value("unavailable", "")});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("study: ") + e.what());
  }
  return r;
}

TrainedModel::Prediction TrainedModel::predict(std::span<const FeatureRow> rows,
                                               const Eigen::MatrixXd& raw_embeddings) const {
  const bool ix = features.size() == kInteractionWidth;
  const auto X = build_design(rows, apply_scaler(scaler, raw_embeddings), ix);
  Prediction p;
  if (ridge) {
    auto r = predict_ridge(*ridge, X);
    p.mean = std::move(r.mean);
    p.sd = std::move(r.sd);
  } else if (gbm) {
    p.mean = predict_gbm(*gbm, X);
  } else {
    throw Error(ErrorCode::MissingArtifact, "model has no fitted parameters");
  }
  return p;
}

nlohmann::json TrainedModel::to_json() const {
  nlohmann::json j{{"kind", std::string(to_string(kind))},
                   {"target", std::string(to_string(target))},
                   {"framework", std::string(to_string(framework))},
                   {"features", features},
                   {"scaler", scaler.to_json()}};
  if (ridge) j["ridge"] = ridge->to_json();
  if (gbm) j["gbm"] = gbm->to_json();
  return j;
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
  TrainedModel m;
  try {
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto target = parse_metric(j.at("target").get<std::string>());
    if (!kind || !target) throw Error(ErrorCode::Schema, "model artifact: unknown kind or target");
    m.kind = *kind;
    m.target = *target;
    const auto fw = parse_study_framework(j.at("framework").get<std::string>());
    if (!fw) throw Error(ErrorCode::Schema, "model artifact: unknown framework");
    m.framework = *fw;
    m.features = j.at("features").get<std::vector<std::string>>();
    m.scaler = ScalerState::from_json(j.at("scaler"));
    if (j.contains("ridge")) m.ridge = RidgeFit::from_json(j.at("ridge"));
    if (j.contains("gbm")) m.gbm = GbmFit::from_json(j.at("gbm"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("model artifact: ") + e.what());
  }
  if (m.features != feature_names(uses_interactions(m.kind))) {
    throw Error(ErrorCode::Schema, "model artifact: feature layout does not match this build");
  }
  return m;
}

TrainedModel train_model(ModelKind kind, Metric target, StudyFramework framework, std::span<const FeatureRow> rows,
                         const Eigen::MatrixXd& raw_embeddings, std::span<const double> y, const StudyOptions& options) {
  TrainedModel m;
  m.kind = kind;
  m.target = target;
  m.framework = framework;
  m.features = feature_names(uses_interactions(kind));
  m.scaler = fit_scaler(raw_embeddings);
  const auto X = build_design(rows, apply_scaler(m.scaler, raw_embeddings), uses_interactions(kind));
  const auto yv = to_vector(y);
  if (kind == ModelKind::Gbm) {
    m.gbm = fit_gbm(X, yv, options.gbm);
  } else {
    m.ridge = fit_bayesian_ridge(X, yv, options.ridge);
  }
  return m;
}

StudyReport run_study(std::span<const ComparisonRow> rows, const EmbeddingIndex& embeddings,
                      const StudyOptions& options) {
  std::vector<std::string> qids;
  for (const auto& r : rows) qids.push_back(r.key.question_id);
  StudyReport report;
  report.test_fraction = options.split.test_fraction;
  report.split = split_questions(qids, options.split);
  for (const auto& q : report.split.train) {
    if (report.split.in_test(q)) throw Error(ErrorCode::Alignment, "question " + q + " is on both sides of the split");
  }

  for (auto fw : kStudyFrameworks) {
    const auto ds = study_dataset(fw, rows);
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
      (report.split.in_test(ds.rows[i].key.question_id) ? test_idx : train_idx).push_back(i);
    }
    const auto train_rows = pick<FeatureRow>(ds.rows, train_idx);
    const auto test_rows = pick<FeatureRow>(ds.rows, test_idx);
    std::string unavailable;
    if (ds.rows.empty()) {
      unavailable = "no rows for this framework";
    } else if (train_rows.size() < 2 || test_rows.empty()) {
      unavailable = "split leaves too few rows";
    }
    Eigen::MatrixXd train_emb, test_emb;
    if (unavailable.empty()) {
      train_emb = embedding_matrix(train_rows, embeddings);
      test_emb = embedding_matrix(test_rows, embeddings);
    }

    for (auto kind : kModelKinds) {
      for (auto metric : kMetrics) {
        StudyCell cell{fw, kind, metric, train_rows.size(), test_rows.size(), std::nullopt, std::nullopt, unavailable};
        if (unavailable.empty()) {
          const auto& all_y = ds.targets[metric_index(metric)];
          const auto y_train = pick<double>(all_y, train_idx);
          const auto y_test = pick<double>(all_y, test_idx);
          if (!r_squared(y_train, y_train)) {
            cell.unavailable = "training target has no variance";
          } else {
            const auto model = train_model(kind, metric, fw, train_rows, train_emb, y_train, options);
            cell.train_r2 = r_squared(to_vector(y_train), model.predict(train_rows, train_emb).mean);
            cell.test_r2 = r_squared(to_vector(y_test), model.predict(test_rows, test_emb).mean);
          }
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

nlohmann::json CoefficientTable::to_json() const {
  nlohmann::json j{{"n_rows", n_rows}, {"metrics", nlohmann::json::object()}};
  for (std::size_t m = 0; m < kMetrics.size(); ++m) {
    nlohmann::json coefs = nlohmann::json::array();
    for (const auto& c : coefficients[m]) {
      coefs.push_back({{"feature", c.name}, {"mean", c.mean}, {"sd", c.sd}, {"significant", c.significant}});
    }
    j["metrics"][std::string(to_string(kMetrics[m]))] = {
        {"coefficients", coefs},
        {"mean", stats[m].mean},
        {"sd", stats[m].sd},
        {"min", stats[m].min},
        {"max", stats[m].max},
        {"r2", optional_json(r2[m])}};
  }
  return j;
}

CoefficientTable CoefficientTable::from_json(const nlohmann::json& j) {
  CoefficientTable t;
  try {
    t.n_rows = j.at("n_rows").get<std::size_t>();
    for (std::size_t m = 0; m < kMetrics.size(); ++m) {
      const auto& mj = j.at("metrics").at(std::string(to_string(kMetrics[m])));
      for (const auto& c : mj.at("coefficients")) {
        t.coefficients[m].push_back({c.at("feature").get<std::string>(), c.at("mean").get<double>(),
                                     c.at("sd").get<double>(), c.at("significant").get<bool>()});
      }
      t.stats[m] = {mj.at("mean").get<double>(), mj.at("sd").get<double>(), mj.at("min").get<double>(),
                    mj.at("max").get<double>()};
      t.r2[m] = optional_from(mj.at("r2"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("coefficients: ") + e.what());
  }
  return t;
}

CoefficientTable coefficient_table(std::span<const ComparisonRow> rows, const EmbeddingIndex& embeddings,
                                   const RidgeOptions& options) {
  const auto ds = study_dataset(StudyFramework::DD, rows);
  if (ds.rows.size() < 2) throw Error(ErrorCode::MissingDistribution, "coefficient table needs DD metric rows");
  CoefficientTable t;
  t.n_rows = ds.rows.size();
  const auto emb = embedding_matrix(ds.rows, embeddings);
  const auto scaler = fit_scaler(emb);
  const auto X = build_design(ds.rows, apply_scaler(scaler, emb), false);
  const auto names = feature_names(false);
  for (std::size_t m = 0; m < kMetrics.size(); ++m) {
    const auto& y = ds.targets[m];
    const auto s = sample_stats(y);
    t.stats[m] = {s.mean, s.sd, *std::min_element(y.begin(), y.end()), *std::max_element(y.begin(), y.end())};
    if (!r_squared(y, y)) {
      for (const auto& name : names) t.coefficients[m].push_back({name, 0.0, 0.0, false});
      continue;
    }
    const auto yv = to_vector(y);
    const auto fit = fit_bayesian_ridge(X, yv, options);
    t.coefficients[m] = significant_coefficients(fit, names);
    t.r2[m] = r_squared(yv, predict_ridge(fit, X).mean);
  }
  return t;
}

}  // namespace aipoll
