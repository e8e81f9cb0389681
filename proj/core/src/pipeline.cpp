#include "aipoll/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ctime>
#include <map>
#include <sstream>

#include "aipoll/cache.hpp"
#include "aipoll/error.hpp"
#include "aipoll/mock_backend.hpp"
#include "aipoll/prompt.hpp"
#include "aipoll/report.hpp"
#include "aipoll/study.hpp"
#include "aipoll/survey.hpp"
#include "aipoll/util/hash.hpp"
#include "aipoll/util/rng.hpp"

namespace aipoll {

namespace fs = std::filesystem;

namespace artifacts {

std::string model_distributions(Framework f) { return "model_distributions_" + std::string(to_string(f)) + ".jsonl"; }
std::string poll_report(Framework f) { return "poll_report_" + std::string(to_string(f)) + ".json"; }
std::string model_file(ModelKind kind, Metric target) {
  return std::string(kModels) + "/" + std::string(to_string(kind)) + "_" + std::string(to_string(target)) + ".json";
}

}  // namespace artifacts

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string with_header(const Provenance& prov, const std::string& body) { return prov.comment_header() + "\n" + body; }

nlohmann::json with_meta(const Provenance& prov, nlohmann::json body) {
  nlohmann::json out{{"meta", prov.to_json()}};
  for (auto& [k, v] : body.items()) out[k] = v;
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text_file(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

DemographicMapping load_mapping(const RunConfig& config) {
  if (config.mapping.is_string()) {
    const auto path = config.resolve(config.mapping.get<std::string>());
    try {
      return DemographicMapping::from_json(nlohmann::json::parse(read_text_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
    }
  }
  if (config.mapping.is_object()) return DemographicMapping::from_json(config.mapping);
  throw Error(ErrorCode::InvalidArgument, "inputs.mapping must be a file path or an object");
}

void write_model_distributions(const fs::path& path, std::span<const ModelDistribution> ds, const Provenance& prov) {
  std::ostringstream out;
  out << prov.jsonl_header() << '\n';
  for (const auto& d : ds) out << to_json(d).dump() << '\n';
  write_text_file(path, out.str());
}

std::vector<ModelDistribution> read_model_distributions(const fs::path& path) {
  std::vector<ModelDistribution> out;
  for_each_jsonl(path, [&](const nlohmann::json& j) { out.push_back(model_distribution_from_json(j)); });
  return out;
}

std::string relative_name(const fs::path& p, const fs::path& base) {
  auto rel = p.lexically_relative(base);
  return rel.empty() ? p.string() : rel.generic_string();
}

}  // namespace

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {}

const QuestionCorpus& Pipeline::corpus() const {
  if (!corpus_) {
    if (config_.questions.empty()) throw Error(ErrorCode::InvalidArgument, "inputs.questions is not set");
    corpus_ = QuestionCorpus::load(config_.resolve(config_.questions));
  }
  return *corpus_;
}

const Provenance& Pipeline::provenance() const {
  if (!provenance_) {
    nlohmann::json hashes = nlohmann::json::object();
    hashes["questions"] = sha256_file(config_.resolve(config_.questions));
    if (!config_.respondents.empty() && fs::exists(config_.resolve(config_.respondents))) {
      hashes["respondents"] = sha256_file(config_.resolve(config_.respondents));
    }
    if (config_.mapping.is_string()) {
      hashes["mapping"] = sha256_file(config_.resolve(config_.mapping.get<std::string>()));
    } else if (!config_.mapping.is_null()) {
      hashes["mapping"] = sha256_hex(config_.mapping.dump());
    }
    hashes["tags"] = sha256_hex(nlohmann::json(corpus().tags()).dump());

    auto snapshot = config_.to_json();
    snapshot.erase("out_dir");
    Provenance p;
    p.run_id = sha256_hex(snapshot.dump() + "\n" + hashes.dump()).substr(0, 16);
    p.corpus_hashes = std::move(hashes);
    provenance_ = std::move(p);
  }
  return *provenance_;
}

const std::string& Pipeline::run_id() const { return provenance().run_id; }

fs::path Pipeline::require(const std::string& name, const char* producer) const {
  const auto path = artifact(name);
  if (!fs::exists(path)) {
    throw Error(ErrorCode::MissingArtifact,
                "missing " + path.string() + "; run `aipoll " + producer + "` with the same config first");
  }
  return path;
}

void Pipeline::record_stage(const std::string& stage, const StageResult& result, const std::string& started) const {
  const auto path = artifact(artifacts::kManifest);
  nlohmann::json manifest;
  if (fs::exists(path)) {
    try {
      manifest = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception&) {
      manifest = nlohmann::json();
    }
    if (!manifest.is_object() || manifest.value("run_id", "") != run_id()) manifest = nlohmann::json();
  }
  if (manifest.is_null()) {
    manifest = {{"run_id", run_id()},
                {"config", config_.to_json()},
                {"corpus", provenance().corpus_hashes},
                {"stages", nlohmann::json::object()}};
  }
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& o : result.outputs) outputs.push_back(relative_name(o, out_dir()));
  manifest["stages"][stage] = {
      {"started_at", started}, {"finished_at", utc_now()}, {"counts", result.counts}, {"outputs", outputs}};
  write_json(path, manifest);
}

std::unique_ptr<EmbeddingBackend> Pipeline::embedding_backend() const {
  return make_embedding_backend(config_.embedding, config_.base_dir);
}

StageResult Pipeline::ingest() {
  const auto started = utc_now();
  if (config_.respondents.empty()) throw Error(ErrorCode::InvalidArgument, "inputs.respondents is not set");
  const auto& c = corpus();
  const auto records = read_respondents_csv(config_.resolve(config_.respondents), c, config_.weight_column);
  if (records.empty()) throw Error(ErrorCode::Schema, "respondents file has no rows");
  const auto mapping = load_mapping(config_);
  const auto agg = aggregate(records, c, mapping, {config_.weighted});
  const auto drops = drop_report(records, mapping);
  const auto& prov = provenance();

  fs::create_directories(out_dir());
  StageResult r;
  r.outputs.push_back(artifact(artifacts::kHuman));
  write_human_distributions(r.outputs.back(), agg.distributions, prov);

  auto drop_json = drops.to_json();
  nlohmann::json empty = nlohmann::json::array();
  for (const auto& e : agg.empty_cells) {
    empty.push_back({{"question_id", e.question_id}, {"cell", cell_to_json(e.cell)}});
  }
  drop_json["empty_cells"] = empty;
  r.outputs.push_back(artifact(artifacts::kDropJson));
  write_json(r.outputs.back(), with_meta(prov, drop_json));
  r.outputs.push_back(artifact(artifacts::kDropText));
  write_text_file(r.outputs.back(), with_header(prov, drops.to_text() + "empty cells: " +
                                                          std::to_string(agg.empty_cells.size()) + "\n"));

  r.counts = {{"respondents", drops.total},
              {"classified", drops.classified},
              {"dropped", drops.dropped},
              {"distributions", agg.distributions.size()},
              {"empty_cells", agg.empty_cells.size()}};
  record_stage("ingest", r, started);
  return r;
}

StageResult Pipeline::render() {
  const auto started = utc_now();
  const auto& prov = provenance();
  std::ostringstream out;
  out << prov.jsonl_header() << '\n';
  std::size_t n = 0;
  const auto variants = config_.variants();
  for (const auto& q : corpus().questions()) {
    for (const auto& cell : all_cells()) {
      for (const auto& v : variants) {
        const auto p = aipoll::render(q, cell, v);
        out << nlohmann::json{{"key", p.key.to_string()},
                              {"schema", std::string(to_string(p.expected_schema))},
                              {"cardinality", p.cardinality},
                              {"prompt_sha256", sha256_hex(p.text)},
                              {"text", p.text}}
                   .dump()
            << '\n';
        ++n;
      }
    }
  }
  fs::create_directories(out_dir());
  StageResult r;
  r.outputs.push_back(artifact(artifacts::kPrompts));
  write_text_file(r.outputs.back(), out.str());
  r.counts = {{"prompts", n}};
  record_stage("render", r, started);
  return r;
}

StageResult Pipeline::poll(const PollOptions& options) {
  const auto started = utc_now();
  const auto& c = corpus();
  const auto& prov = provenance();
  fs::create_directories(out_dir() / "cache");

  std::unique_ptr<ChatBackend> owned;
  ChatBackend* backend = options.backend;
  const bool mock = config_.backend_kind == "mock";
  if (!backend) {
    if (mock) {
      auto m = std::make_unique<MockChatBackend>();
      if (!config_.mock.script.empty()) m->load_script_file(config_.resolve(config_.mock.script));
      if (config_.mock.truth_from_human) {
        std::map<std::string, OpinionDistribution> truth;
        for (const auto& h : read_human_distributions(require(artifacts::kHuman, "ingest"))) {
          truth.emplace(truth_key(h.question_id, h.cell), h.distribution);
        }
        m->set_truth(std::move(truth),
                     {derive_seed(config_.seed, "mock"), config_.mock.dd_noise_sd, config_.mock.si_mode_collapse});
      }
      m->set_abort_after(options.abort_after_calls);
      owned = std::move(m);
    } else {
      if (options.abort_after_calls) {
        throw Error(ErrorCode::InvalidArgument, "--abort-after only applies to the mock backend");
      }
      owned = std::make_unique<HttpChatBackend>(config_.backend);
    }
    backend = owned.get();
  }

  QueryCache cache(artifact(artifacts::kQueryCache));
  std::optional<RateLimiter> limiter;
  if (config_.backend.requests_per_second > 0.0 && !mock) limiter.emplace(config_.backend.requests_per_second);
  std::atomic<std::size_t> calls{0};
  ExecutionContext ctx;
  ctx.config = &config_.backend;
  ctx.backend = backend;
  ctx.cache = &cache;
  ctx.sleep = mock ? Sleeper([](std::chrono::duration<double>) {}) : real_sleeper();
  ctx.limiter = limiter ? &*limiter : nullptr;
  ctx.backend_calls = &calls;
  ctx.retry_failed = options.retry_failed;

  std::vector<Framework> frameworks;
  for (auto f : config_.frameworks) {
    if (!options.framework || *options.framework == f) frameworks.push_back(f);
  }
  if (frameworks.empty()) throw Error(ErrorCode::InvalidArgument, "requested framework is not enabled in the config");

  StageResult r;
  for (auto f : frameworks) {
    std::vector<PromptVariant> variants;
    if (f == Framework::SI) {
      variants.push_back(PromptVariant::single_individual());
    } else {
      variants = options.dd_variants ? *options.dd_variants : config_.dd_variants;
    }
    if (variants.empty()) continue;
    const auto summary = aipoll::poll(c, variants, ctx);

    std::size_t failed_perms = 0;
    for (const auto& d : summary.distributions) {
      if (!d.distribution) ++failed_perms;
    }
    r.outputs.push_back(artifact(artifacts::model_distributions(f)));
    write_model_distributions(r.outputs.back(), summary.distributions, prov);
    nlohmann::json counts{{"jobs", summary.jobs},
                          {"cache_hits", summary.cache_hits},
                          {"backend_calls", summary.backend_calls},
                          {"failed_queries", summary.failed_queries},
                          {"permutations", summary.distributions.size()},
                          {"permutations_succeeded", summary.distributions.size() - failed_perms},
                          {"permutations_failed", failed_perms}};
    r.outputs.push_back(artifact(artifacts::poll_report(f)));
    write_json(r.outputs.back(), with_meta(prov, counts));
    r.counts[std::string(to_string(f))] = counts;
  }
  r.counts["cache_records"] = cache.size();
  r.counts["backend_calls"] = calls.load();
  record_stage("poll", r, started);
  return r;
}

StageResult Pipeline::metrics() {
  const auto started = utc_now();
  const auto human = read_human_distributions(require(artifacts::kHuman, "ingest"));
  std::vector<ModelDistribution> model;
  for (auto f : {Framework::SI, Framework::DD}) {
    const auto path = artifact(artifacts::model_distributions(f));
    if (!fs::exists(path)) continue;
    auto part = read_model_distributions(path);
    model.insert(model.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (model.empty()) {
    throw Error(ErrorCode::MissingArtifact, "no model distributions under " + out_dir().string() +
                                                "; run `aipoll poll` with the same config first");
  }
  const auto result = compute_metrics(human, model);
  const auto& prov = provenance();

  StageResult r;
  r.outputs.push_back(artifact(artifacts::kMetrics));
  write_metrics_csv(r.outputs.back(), result.rows, prov);
  std::ostringstream skipped;
  for (const auto& s : result.skipped) skipped << s.key.to_string() << '\t' << s.reason << '\n';
  r.outputs.push_back(artifact(artifacts::kMetricsSkipped));
  write_text_file(r.outputs.back(), with_header(prov, skipped.str()));
  r.counts = {{"rows", result.rows.size()}, {"skipped", result.skipped.size()}};
  record_stage("metrics", r, started);
  return r;
}

StageResult Pipeline::compare() {
  const auto started = utc_now();
  const auto rows = read_metrics_csv(require(artifacts::kMetrics, "metrics"));
  const auto report = build_comparison(rows);
  if (report.paired.empty()) {
    throw Error(ErrorCode::MissingDistribution,
                "no SI/DD pairs in metrics.csv; run `aipoll poll` for both SI and DD (cot=1, dist=0), then `aipoll metrics`");
  }
  const auto& prov = provenance();
  StageResult r;
  r.outputs.push_back(artifact(artifacts::kComparisonJson));
  write_json(r.outputs.back(), with_meta(prov, report.to_json()));
  r.outputs.push_back(artifact(artifacts::kComparisonText));
  write_text_file(r.outputs.back(), with_header(prov, report.to_text()));
  r.counts = {{"pairs", report.paired.front().n_pairs}, {"unpaired", report.n_unpaired}};
  record_stage("compare", r, started);
  return r;
}

StageResult Pipeline::features(EmbeddingBackend* backend) {
  const auto started = utc_now();
  const auto& c = corpus();
  const auto& prov = provenance();
  std::unique_ptr<EmbeddingBackend> owned;
  if (!backend) {
    owned = embedding_backend();
    backend = owned.get();
  }
  fs::create_directories(out_dir() / "cache");
  EmbeddingCache cache(artifact(artifacts::kEmbeddingCache));
  const auto records = embed_questions(c, *backend, &cache);
  const auto idx = index_embeddings(records);

  StageResult r;
  r.outputs.push_back(artifact(artifacts::kEmbeddings));
  write_embeddings(r.outputs.back(), records, prov);
  r.outputs.push_back(artifact(artifacts::kTagCorrelations));
  write_tag_correlations_csv(r.outputs.back(), tag_correlations(c, idx), prov);
  r.counts = {{"questions", records.size()}, {"embedding_model", backend->model_tag()}};

  // The design matrix needs metric targets; skip it when metrics have not run.
  const auto metrics_path = artifact(artifacts::kMetrics);
  if (fs::exists(metrics_path)) {
    const auto rows = read_metrics_csv(metrics_path);
    const auto ds = study_dataset(StudyFramework::DD, rows);
    if (!ds.rows.empty()) {
      const auto raw = embedding_matrix(ds.rows, idx);
      const auto X = build_design(ds.rows, apply_scaler(fit_scaler(raw), raw), config_.export_interactions);
      std::vector<std::pair<std::string, std::vector<double>>> targets;
      for (std::size_t m = 0; m < kMetrics.size(); ++m) {
        targets.emplace_back(std::string(to_string(kMetrics[m])), ds.targets[m]);
      }
      r.outputs.push_back(artifact(artifacts::kDesign));
      write_design_csv(r.outputs.back(), ds.rows, X, config_.export_interactions, targets, prov);
    }
    r.counts["design_rows"] = ds.rows.size();
    r.counts["design_columns"] = config_.export_interactions ? kInteractionWidth : kPlainWidth;
  }
  record_stage("features", r, started);
  return r;
}

StageResult Pipeline::fit() {
  const auto started = utc_now();
  const auto rows = read_metrics_csv(require(artifacts::kMetrics, "metrics"));
  const auto idx = index_embeddings(read_embeddings(require(artifacts::kEmbeddings, "features")));
  const auto& prov = provenance();

  StudyOptions opts;
  opts.split = {config_.seed, config_.test_fraction};
  opts.ridge = config_.ridge;
  opts.gbm = config_.gbm;

  StageResult r;
  const auto study = run_study(rows, idx, opts);
  r.outputs.push_back(artifact(artifacts::kStudy));
  write_json(r.outputs.back(), with_meta(prov, study.to_json()));

  const auto dd = study_dataset(StudyFramework::DD, rows);
  if (dd.rows.empty()) {
    throw Error(ErrorCode::MissingDistribution, "metrics.csv has no DD rows; run `aipoll poll --framework DD` first");
  }
  const auto coef = coefficient_table(rows, idx, config_.ridge);
  r.outputs.push_back(artifact(artifacts::kCoefficients));
  write_json(r.outputs.back(), with_meta(prov, coef.to_json()));

  fs::create_directories(artifact(artifacts::kModels));
  const auto raw = embedding_matrix(dd.rows, idx);
  std::size_t saved = 0;
  for (auto kind : kModelKinds) {
    for (std::size_t m = 0; m < kMetrics.size(); ++m) {
      const auto& y = dd.targets[m];
      const auto sd = sample_stats(y).sd;
      if (!(sd > 0.0)) continue;
      const auto model = train_model(kind, kMetrics[m], StudyFramework::DD, dd.rows, raw, y, opts);
      r.outputs.push_back(artifact(artifacts::model_file(kind, kMetrics[m])));
      write_json(r.outputs.back(), with_meta(prov, model.to_json()));
      ++saved;
    }
  }
  std::size_t available = 0;
  for (const auto& cell : study.cells) {
    if (cell.unavailable.empty()) ++available;
  }
  r.counts = {{"rows", rows.size()},
              {"train_questions", study.split.train.size()},
              {"test_questions", study.split.test.size()},
              {"cells", study.cells.size()},
              {"cells_fitted", available},
              {"models_saved", saved}};
  record_stage("fit", r, started);
  return r;
}

PredictResult Pipeline::predict(const PredictRequest& request, EmbeddingBackend* backend) {
  require_supported_cardinality(request.cardinality);
  if (request.question_text.empty()) throw Error(ErrorCode::InvalidArgument, "question text is empty");

  PredictResult out;
  out.model = config_.predict_model;
  std::array<std::optional<TrainedModel>, 3> models;
  for (std::size_t m = 0; m < kMetrics.size(); ++m) {
    const auto path = require(artifacts::model_file(out.model, kMetrics[m]), "fit");
    models[m] = TrainedModel::from_json(read_json(path));
  }

  std::unique_ptr<EmbeddingBackend> owned;
  if (!backend) {
    owned = embedding_backend();
    backend = owned.get();
  }
  fs::create_directories(out_dir() / "cache");
  EmbeddingCache cache(artifact(artifacts::kEmbeddingCache));
  auto raw = cache.find(request.question_text, backend->model_tag());
  if (!raw) {
    raw = backend->embed(request.question_text);
    cache.put(request.question_text, backend->model_tag(), *raw);
  }
  const auto emb = truncate_renormalize(*raw);
  Eigen::MatrixXd E(1, static_cast<Eigen::Index>(emb.size()));
  for (std::size_t j = 0; j < emb.size(); ++j) E(0, static_cast<Eigen::Index>(j)) = emb[j];

  const std::vector<FeatureRow> rows{{PermutationKey{"query", request.cell, request.variant}, request.cardinality}};
  for (std::size_t m = 0; m < kMetrics.size(); ++m) {
    const auto p = models[m]->predict(rows, E);
    out.mean[m] = p.mean(0);
    out.sd[m] = p.sd.size() ? p.sd(0) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

nlohmann::json PredictResult::to_json() const {
  nlohmann::json j{{"model", std::string(to_string(model))}};
  for (std::size_t m = 0; m < kMetrics.size(); ++m) {
    j[std::string(to_string(kMetrics[m]))] = {{"mean", mean[m]}, {"sd", std::isfinite(sd[m]) ? nlohmann::json(sd[m]) : nlohmann::json()}};
  }
  return j;
}

std::string PredictResult::to_text() const {
  TextTable t({"Metric", "Predicted", "Predictive SD"});
  for (std::size_t m = 0; m < kMetrics.size(); ++m) {
    t.add_row({std::string(to_string(kMetrics[m])), fmt(mean[m], 4), fmt(sd[m], 4)});
  }
  return "model: " + std::string(display_name(model)) + "\n" + t.to_text();
}

StageResult Pipeline::report() {
  const auto started = utc_now();
  const auto rows = read_metrics_csv(require(artifacts::kMetrics, "metrics"));
  const auto study = StudyReport::from_json(read_json(require(artifacts::kStudy, "fit")));
  const auto coef = CoefficientTable::from_json(read_json(require(artifacts::kCoefficients, "fit")));
  const auto idx = index_embeddings(read_embeddings(require(artifacts::kEmbeddings, "features")));
  const auto& prov = provenance();

  const auto dir = artifact(artifacts::kReport);
  fs::remove_all(dir);
  fs::create_directories(dir);
  StageResult r;
  auto emit = [&](const std::string& name, const std::string& body) {
    r.outputs.push_back(dir / name);
    write_text_file(r.outputs.back(), with_header(prov, body));
  };
  nlohmann::json summary{{"meta", prov.to_json()}};

  // Framework comparison.
  const auto cmp = build_comparison(rows);
  emit("comparison.txt", cmp.to_text());
  {
    TextTable t({"metric", "pairs", "dd_win_fraction", "mean_diff", "se", "ci_lo", "ci_hi"});
    for (const auto& p : cmp.paired) {
      t.add_row({std::string(to_string(p.metric)), std::to_string(p.n_pairs), format_double(p.win_fraction),
                 format_double(p.mean_diff), format_double(p.se), format_double(p.ci_lo), format_double(p.ci_hi)});
    }
    emit("comparison.csv", t.to_csv());
    TextTable v({"variant", "metric", "n", "mean", "sd", "se"});
    for (const auto& s : cmp.variants) {
      for (const auto& m : s.metrics) {
        v.add_row({variant_label(s.variant), std::string(to_string(m.metric)), std::to_string(m.n),
                   format_double(m.mean), format_double(m.sd), format_double(m.se)});
      }
    }
    emit("variants.csv", v.to_csv());
  }
  summary["comparison"] = cmp.to_json();

  // Coefficients on all DD rows.
  const auto ct = coefficient_table_text(coef);
  emit("coefficients.txt", "Bayesian ridge on all DD rows (n=" + std::to_string(coef.n_rows) +
                               "); * marks |mean| >= 1.96 posterior SD\n\n" + ct.to_text());
  {
    TextTable t({"metric", "feature", "mean", "sd", "significant"});
    for (std::size_t m = 0; m < kMetrics.size(); ++m) {
      for (const auto& c : coef.coefficients[m]) {
        t.add_row({std::string(to_string(kMetrics[m])), c.name, format_double(c.mean), format_double(c.sd),
                   c.significant ? "1" : "0"});
      }
    }
    emit("coefficients.csv", t.to_csv());
  }
  const auto et = embedding_coefficients_text(coef);
  emit("embedding_coefficients.txt", et.to_text());
  emit("embedding_coefficients.csv", et.to_csv());
  summary["coefficients"] = coef.to_json();

  // Predictive performance per framework.
  {
    std::string text;
    TextTable csv({"framework", "model", "metric", "n_train", "n_test", "train_r2", "test_r2", "unavailable"});
    for (auto f : kStudyFrameworks) {
      text += std::string(to_string(f)) + "\n\n" + study_table_text(study, f).to_text() + "\n";
      for (const auto& c : study.cells) {
        if (c.framework != f) continue;
        auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
        csv.add_row({std::string(to_string(f)), std::string(to_string(c.model)), std::string(to_string(c.metric)),
                     std::to_string(c.n_train), std::to_string(c.n_test), opt(c.train_r2), opt(c.test_r2),
                     c.unavailable});
      }
    }
    text += "split: " + std::to_string(study.split.train.size()) + " train / " +
            std::to_string(study.split.test.size()) + " test questions\n";
    emit("performance.txt", text);
    emit("performance.csv", csv.to_csv());
  }
  summary["study"] = study.to_json();

  // Tag correlations for the strongest significant NEMD dimensions.
  {
    const auto tc = tag_correlations(corpus(), idx);
    auto dims = significant_embedding_dims(coef, Metric::NEMD, 5);
    std::string note = "significant NEMD embedding dimensions; * marks |r| > 0.25\n\n";
    if (dims.empty()) note = "no significant NEMD embedding dimensions\n";
    const auto tt = tag_table_text(tc, dims);
    emit("tag_correlations.txt", note + (dims.empty() ? std::string() : tt.to_text()));
    emit("tag_correlations.csv", tt.to_csv());
    nlohmann::json dj = nlohmann::json::array();
    for (auto d : dims) dj.push_back(embedding_column(d));
    summary["tag_dimensions"] = dj;
  }

  // Heterogeneity: model SD against human SD.
  {
    std::vector<PromptVariant> order{PromptVariant::single_individual()};
    order.insert(order.end(), all_dd_variants().begin(), all_dd_variants().end());
    std::string text = "model SD vs human SD, moving average (window " + format_double(config_.band_window) +
                       ") with 2 SE band\n";
    TextTable csv({"variant", "x", "n", "mean", "se", "lo_2se", "hi_2se"});
    nlohmann::json bands = nlohmann::json::object();
    for (const auto& v : order) {
      const auto sel = select_variant(rows, v);
      if (sel.empty()) continue;
      std::vector<double> x, y;
      for (const auto& row : sel) {
        x.push_back(row.human_sd);
        y.push_back(row.model_sd);
      }
      const auto band = moving_average_band(x, y, config_.band_window);
      text += "\n" + variant_label(v) + "\n\n" + band_table_text(band).to_text();
      nlohmann::json bj = nlohmann::json::array();
      for (const auto& b : band) {
        csv.add_row({variant_label(v), format_double(b.x), std::to_string(b.n), format_double(b.mean),
                     format_double(b.se), format_double(b.lo), format_double(b.hi)});
        bj.push_back({{"x", b.x}, {"n", b.n}, {"mean", b.mean}, {"se", b.se}});
      }
      bands[variant_label(v)] = bj;
    }
    emit("heterogeneity.txt", text);
    emit("heterogeneity.csv", csv.to_csv());
    summary["heterogeneity"] = bands;
  }

  // Respondent drops.
  if (fs::exists(artifact(artifacts::kDropJson))) {
    auto drops = read_json(artifact(artifacts::kDropJson));
    drops.erase("meta");
    std::ostringstream text;
    text << "respondents: " << drops.value("total", 0) << "  classified: " << drops.value("classified", 0)
         << "  dropped: " << drops.value("dropped", 0) << "\n";
    emit("drop_report.txt", text.str());
    summary["drops"] = drops;
  }

  summary["metric_rows"] = rows.size();
  r.outputs.push_back(dir / "summary.json");
  write_json(r.outputs.back(), summary);

  r.counts = {{"files", r.outputs.size()}};
  record_stage("report", r, started);
  return r;
}

}  // namespace aipoll
