#include "aipoll/config.hpp"

#include <set>

#include "aipoll/error.hpp"
#include "aipoll/util/io.hpp"

namespace aipoll {
namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::Schema, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw Error(ErrorCode::Schema, "unknown key '" + k + "' in " + where);
  }
}

const nlohmann::json& section(const nlohmann::json& j, const char* name) {
  static const nlohmann::json empty = nlohmann::json::object();
  return j.contains(name) ? j.at(name) : empty;
}

}  // namespace

nlohmann::json MockConfig::to_json() const {
  return {{"script", script},
          {"truth", truth_from_human ? "human" : "none"},
          {"dd_noise_sd", dd_noise_sd},
          {"si_mode_collapse", si_mode_collapse}};
}

MockConfig MockConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"script", "truth", "dd_noise_sd", "si_mode_collapse"}, "mock");
  MockConfig m;
  m.script = j.value("script", m.script);
  const auto truth = j.value("truth", std::string("none"));
  if (truth != "human" && truth != "none") throw Error(ErrorCode::InvalidArgument, "mock.truth must be 'human' or 'none'");
  m.truth_from_human = truth == "human";
  m.dd_noise_sd = j.value("dd_noise_sd", m.dd_noise_sd);
  m.si_mode_collapse = j.value("si_mode_collapse", m.si_mode_collapse);
  if (m.dd_noise_sd < 0.0) throw Error(ErrorCode::InvalidArgument, "mock.dd_noise_sd must be >= 0");
  if (m.si_mode_collapse < 0.0 || m.si_mode_collapse > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "mock.si_mode_collapse must lie in [0, 1]");
  }
  return m;
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j,
                 {"inputs", "out_dir", "seed", "poll", "backend", "mock", "embedding", "split", "ridge", "gbm",
                  "features", "report", "predict"},
                 "config");
  RunConfig c;
  c.base_dir = base_dir;
  try {
    const auto& in = section(j, "inputs");
    reject_unknown(in, {"questions", "respondents", "mapping", "weight_column", "weighted"}, "inputs");
    c.questions = in.value("questions", "");
    c.respondents = in.value("respondents", "");
    c.mapping = in.value("mapping", nlohmann::json());
    if (in.contains("weight_column") && !in.at("weight_column").is_null()) {
      c.weight_column = in.at("weight_column").get<std::string>();
    }
    c.weighted = in.value("weighted", false);

    c.out_dir = j.value("out_dir", c.out_dir);
    c.seed = j.value("seed", c.seed);

    const auto& poll = section(j, "poll");
    reject_unknown(poll, {"backend", "frameworks", "dd_variants"}, "poll");
    c.backend_kind = poll.value("backend", c.backend_kind);
    if (c.backend_kind != "http" && c.backend_kind != "mock") {
      throw Error(ErrorCode::InvalidArgument, "poll.backend must be 'http' or 'mock'");
    }
    if (poll.contains("frameworks")) {
      c.frameworks.clear();
      for (const auto& f : poll.at("frameworks")) {
        const auto fw = parse_framework(f.get<std::string>());
        if (!fw) throw Error(ErrorCode::InvalidArgument, "unknown framework " + f.dump());
        c.frameworks.push_back(*fw);
      }
    }
    if (poll.contains("dd_variants")) {
      c.dd_variants.clear();
      for (const auto& v : poll.at("dd_variants")) {
        c.dd_variants.push_back(PromptVariant::direct_distribution(v.at("cot").get<bool>(), v.at("dist").get<bool>()));
      }
    }

    if (j.contains("backend")) c.backend = BackendConfig::from_json(j.at("backend"));
    if (j.contains("mock")) c.mock = MockConfig::from_json(j.at("mock"));
    if (j.contains("embedding")) c.embedding = EmbeddingConfig::from_json(j.at("embedding"));

    const auto& split = section(j, "split");
    reject_unknown(split, {"test_fraction", "unit"}, "split");
    c.test_fraction = split.value("test_fraction", c.test_fraction);

    const auto& ridge = section(j, "ridge");
    reject_unknown(ridge, {"max_iter", "tol"}, "ridge");
    c.ridge.max_iter = ridge.value("max_iter", c.ridge.max_iter);
    c.ridge.tol = ridge.value("tol", c.ridge.tol);

    const auto& gbm = section(j, "gbm");
    reject_unknown(gbm, {"n_trees", "learning_rate", "max_depth", "min_samples_leaf"}, "gbm");
    c.gbm.n_trees = gbm.value("n_trees", c.gbm.n_trees);
    c.gbm.learning_rate = gbm.value("learning_rate", c.gbm.learning_rate);
    c.gbm.max_depth = gbm.value("max_depth", c.gbm.max_depth);
    c.gbm.min_samples_leaf = gbm.value("min_samples_leaf", c.gbm.min_samples_leaf);

    const auto& features = section(j, "features");
    reject_unknown(features, {"export_interactions", "embedding_scaler_sd"}, "features");
    c.export_interactions = features.value("export_interactions", c.export_interactions);

    const auto& report = section(j, "report");
    reject_unknown(report, {"band_window"}, "report");
    c.band_window = report.value("band_window", c.band_window);

    const auto& predict = section(j, "predict");
    reject_unknown(predict, {"model"}, "predict");
    const auto model = parse_model_kind(predict.value("model", std::string(to_string(c.predict_model))));
    if (!model || *model == ModelKind::Gbm) {
      throw Error(ErrorCode::InvalidArgument, "predict.model must be 'ridge' or 'ridge_ix'");
    }
    c.predict_model = *model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("config: ") + e.what());
  }

  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw Error(ErrorCode::InvalidArgument, "split.test_fraction must lie in (0, 1)");
  if (c.ridge.max_iter < 1 || !(c.ridge.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge options out of range");
  if (!(c.band_window > 0.0)) throw Error(ErrorCode::InvalidArgument, "report.band_window must be positive");
  c.backend.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return from_json(doc, base);
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json variants = nlohmann::json::array();
  for (const auto& v : dd_variants) variants.push_back({{"cot", v.cot_reminder()}, {"dist", v.dist_reminder()}});
  nlohmann::json fws = nlohmann::json::array();
  for (auto f : frameworks) fws.push_back(std::string(to_string(f)));
  return {{"inputs",
           {{"questions", questions},
            {"respondents", respondents},
            {"mapping", mapping},
            {"weight_column", weight_column ? nlohmann::json(*weight_column) : nlohmann::json()},
            {"weighted", weighted}}},
          {"out_dir", out_dir},
          {"seed", seed},
          {"poll", {{"backend", backend_kind}, {"frameworks", fws}, {"dd_variants", variants}}},
          {"backend", backend.to_json()},
          {"mock", mock.to_json()},
          {"embedding", embedding.to_json()},
          {"split", {{"test_fraction", test_fraction}, {"unit", "question"}}},
          {"ridge", {{"max_iter", ridge.max_iter}, {"tol", ridge.tol}}},
          {"gbm",
           {{"n_trees", gbm.n_trees},
            {"learning_rate", gbm.learning_rate},
            {"max_depth", gbm.max_depth},
            {"min_samples_leaf", gbm.min_samples_leaf}}},
          {"features", {{"export_interactions", export_interactions}, {"embedding_scaler_sd", "population"}}},
          {"report", {{"band_window", band_window}}},
          {"predict", {{"model", std::string(to_string(predict_model))}}}};
}

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  std::filesystem::path p = path;
  return p.is_relative() ? base_dir / p : p;
}

std::vector<PromptVariant> RunConfig::variants() const {
  std::vector<PromptVariant> out;
  for (auto f : frameworks) {
    if (f == Framework::SI) out.push_back(PromptVariant::single_individual());
  }
  for (auto f : frameworks) {
    if (f == Framework::DD) out.insert(out.end(), dd_variants.begin(), dd_variants.end());
  }
  return out;
}

}  // namespace aipoll
