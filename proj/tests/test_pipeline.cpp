#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <sys/wait.h>

#include "aipoll/error.hpp"
#include "aipoll/pipeline.hpp"
#include "aipoll/survey.hpp"
#include "support.hpp"

using namespace aipoll;
namespace fs = std::filesystem;

namespace {

RunConfig e2e_config(const fs::path& out) {
  auto cfg = RunConfig::load(test::fixture("e2e/config.json"));
  cfg.out_dir = out.string();
  cfg.gbm.n_trees = 30;
  return cfg;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty() && line[0] != '#';
  return n;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string("\"") + AIPOLL_CLI + "\" " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  if (output) *output = out;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// One full mock run shared by the read-only tests below.
class PipelineRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new test::TempDir("aipoll-pipe");
    Pipeline p(e2e_config(dir_->path()));
    p.ingest();
    p.render();
    poll_ = new StageResult(p.poll());
    p.metrics();
    p.compare();
    p.features();
    p.fit();
    p.report();
  }
  static void TearDownTestSuite() {
    delete poll_;
    delete dir_;
  }
  static fs::path out(const std::string& rel = "") { return rel.empty() ? dir_->path() : dir_->path() / rel; }

  static test::TempDir* dir_;
  static StageResult* poll_;
};

test::TempDir* PipelineRun::dir_ = nullptr;
StageResult* PipelineRun::poll_ = nullptr;

}  // namespace

TEST_F(PipelineRun, WritesEveryStageArtifact) {
  for (const char* name : {artifacts::kHuman, artifacts::kDropJson, artifacts::kDropText, artifacts::kPrompts,
                           artifacts::kQueryCache, artifacts::kMetrics, artifacts::kComparisonJson,
                           artifacts::kEmbeddings, artifacts::kTagCorrelations, artifacts::kDesign, artifacts::kStudy,
                           artifacts::kCoefficients, artifacts::kManifest}) {
    EXPECT_TRUE(fs::exists(out(name))) << name;
  }
  EXPECT_TRUE(fs::exists(out(artifacts::model_distributions(Framework::SI))));
  EXPECT_TRUE(fs::exists(out(artifacts::model_file(ModelKind::RidgeInteractions, Metric::NEMD))));
  EXPECT_TRUE(fs::exists(out("report/summary.json")));
}

TEST_F(PipelineRun, PollCountsMatchPermutations) {
  // 5 questions x 20 cells: 4 DD variants each, 20 SI repeats each.
  EXPECT_EQ(poll_->counts["DD"]["jobs"], 400);
  EXPECT_EQ(poll_->counts["SI"]["jobs"], 2000);
  EXPECT_EQ(poll_->counts["cache_records"], 2400);
  EXPECT_EQ(count_lines(out(artifacts::kQueryCache)), 2400u);
  // Meta line plus one per permutation.
  EXPECT_EQ(count_lines(out(artifacts::kPrompts)), 501u);
}

TEST_F(PipelineRun, ManifestCarriesRunIdAndStages) {
  const auto m = nlohmann::json::parse(slurp(out(artifacts::kManifest)));
  Pipeline p(e2e_config(out()));
  EXPECT_EQ(m.at("run_id"), p.run_id());
  EXPECT_EQ(p.run_id().size(), 16u);
  for (const char* s : {"ingest", "render", "poll", "metrics", "compare", "features", "fit", "report"}) {
    EXPECT_TRUE(m.at("stages").contains(s)) << s;
  }
}

TEST_F(PipelineRun, StageFilesCarryProvenance) {
  const auto run_id = Pipeline(e2e_config(out())).run_id();
  EXPECT_NE(slurp(out(artifacts::kMetrics)).find(run_id), std::string::npos);
  EXPECT_NE(slurp(out("report/comparison.txt")).find(run_id), std::string::npos);
  const auto study = nlohmann::json::parse(slurp(out(artifacts::kStudy)));
  EXPECT_EQ(study.at("meta").at("run_id"), run_id);
}

TEST_F(PipelineRun, RunIdIgnoresOutDirButTracksSeed) {
  auto a = e2e_config(out());
  auto b = e2e_config(out() / "elsewhere");
  EXPECT_EQ(Pipeline(a).run_id(), Pipeline(b).run_id());
  b.seed = 8;
  EXPECT_NE(Pipeline(a).run_id(), Pipeline(b).run_id());
}

TEST_F(PipelineRun, DesignMatrixHasInteractionColumns) {
  std::ifstream in(out(artifacts::kDesign));
  std::string header;
  while (std::getline(in, header) && header.starts_with("#")) {
  }
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) rows += !line.empty();
  EXPECT_EQ(rows, 400u);
  EXPECT_NE(header.find("ix_woman_emb_099"), std::string::npos);
}

TEST_F(PipelineRun, PredictOnTrainingQuestion) {
  Pipeline p(e2e_config(out()));
  const auto& q = p.corpus().questions().front();
  PredictRequest req;
  req.question_text = q.text();
  req.cardinality = q.cardinality();
  req.low_label = q.low_label();
  req.high_label = q.high_label();
  req.cell = {Ideology::Moderate, Gender::Man, Race::White};
  const auto r = p.predict(req);
  for (std::size_t m = 0; m < 3; ++m) {
    EXPECT_TRUE(std::isfinite(r.mean[m]));
    EXPECT_GT(r.sd[m], 0.0);
  }
  EXPECT_NE(r.to_text().find("NEMD"), std::string::npos);
  EXPECT_EQ(r.to_json().at("model"), "ridge_ix");

  req.cardinality = 3;
  EXPECT_THROW(p.predict(req), Error);
}

TEST_F(PipelineRun, RerunOfIngestIsByteIdentical) {
  const auto before = slurp(out(artifacts::kHuman));
  const auto drop = slurp(out(artifacts::kDropText));
  Pipeline(e2e_config(out())).ingest();
  EXPECT_EQ(slurp(out(artifacts::kHuman)), before);
  EXPECT_EQ(slurp(out(artifacts::kDropText)), drop);
}

TEST(Pipeline, MissingArtifactNamesProducer) {
  test::TempDir tmp;
  Pipeline p(e2e_config(tmp.path()));
  auto expect_missing = [](auto&& fn, const std::string& producer) {
    try {
      fn();
      ADD_FAILURE() << "expected MissingArtifact";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MissingArtifact);
      EXPECT_NE(std::string(e.what()).find("aipoll " + producer), std::string::npos) << e.what();
    }
  };
  expect_missing([&] { p.metrics(); }, "ingest");
  expect_missing([&] { p.poll(); }, "ingest");
  expect_missing([&] { p.fit(); }, "metrics");
  expect_missing([&] { p.report(); }, "metrics");
  PredictRequest req;
  req.question_text = "x";
  expect_missing([&] { p.predict(req); }, "fit");
}

TEST(Pipeline, EmptyRespondentsFileIsAnError) {
  test::TempDir tmp;
  auto cfg = e2e_config(tmp / "out");
  {
    std::ifstream in(test::fixture("e2e/respondents.csv"));
    std::string header;
    std::getline(in, header);
    std::ofstream(tmp / "empty.csv") << header << "\n";
  }
  cfg.respondents = (tmp / "empty.csv").string();
  EXPECT_THROW(Pipeline(cfg).ingest(), Error);
}

TEST(Pipeline, UnknownConfigKeyIsRejected) {
  auto j = nlohmann::json::parse(read_text_file(test::fixture("e2e/config.json")));
  j["pol"] = {{"backend", "mock"}};
  EXPECT_THROW(RunConfig::from_json(j, test::fixture("e2e")), Error);
  j.erase("pol");
  j["backend"]["api_key"] = "sk-inline";
  EXPECT_THROW(RunConfig::from_json(j, test::fixture("e2e")), Error);
}

TEST(Pipeline, ResumeAfterAbortIssuesNoDuplicateQueries) {
  test::TempDir tmp;
  Pipeline p(e2e_config(tmp.path()));
  p.ingest();
  PollOptions crash;
  crash.framework = Framework::DD;
  crash.abort_after_calls = 150;
  EXPECT_THROW(p.poll(crash), Error);
  const auto cached = count_lines(tmp / artifacts::kQueryCache);
  EXPECT_GT(cached, 0u);
  EXPECT_LE(cached, 150u);

  PollOptions resume;
  resume.framework = Framework::DD;
  const auto r = p.poll(resume);
  EXPECT_EQ(r.counts["DD"]["backend_calls"], 400 - static_cast<int>(cached));
  EXPECT_EQ(r.counts["DD"]["cache_hits"], static_cast<int>(cached));

  std::ifstream in(tmp / artifacts::kQueryCache);
  std::set<std::string> seen;
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    ++lines;
    const auto rec = query_record_from_json(nlohmann::json::parse(line));
    EXPECT_TRUE(seen.insert(rec.key.to_string() + "#" + std::to_string(rec.repeat_index)).second);
  }
  EXPECT_EQ(lines, 400u);
}

TEST(Pipeline, ApiKeyValueNeverReachesOutputs) {
  test::TempDir tmp;
  const std::string secret = "sk-test-value-that-must-not-leak";
  setenv("OPENAI_API_KEY", secret.c_str(), 1);
  Pipeline p(e2e_config(tmp.path()));
  p.ingest();
  p.render();
  PollOptions opt;
  opt.framework = Framework::DD;
  p.poll(opt);
  unsetenv("OPENAI_API_KEY");
  for (const auto& [rel, bytes] : test::snapshot_tree(tmp.path())) {
    EXPECT_EQ(bytes.find(secret), std::string::npos) << rel;
  }
  EXPECT_NE(slurp(tmp / artifacts::kManifest).find("OPENAI_API_KEY"), std::string::npos);
}

TEST(Cli, ExitCodesAndRender) {
  test::TempDir tmp;
  const std::string cfg = test::fixture("e2e/config.json").string();
  const std::string common = "--config \"" + cfg + "\" --out-dir \"" + tmp.path().string() + "\"";
  std::string out;
  EXPECT_EQ(run_cli("metrics " + common, &out), 3) << out;
  EXPECT_NE(out.find("aipoll ingest"), std::string::npos) << out;
  EXPECT_EQ(run_cli("ingest " + common, &out), 0) << out;
  EXPECT_EQ(run_cli("render " + common + " --key \"q_guns|Moderate|Man|White|DD|cot=1|dist=0\"", &out), 0) << out;
  EXPECT_NE(out.find("Ban assault"), std::string::npos) << out;
  EXPECT_EQ(run_cli("poll " + common + " --framework XX", &out), 2) << out;
  EXPECT_NE(run_cli("ingest --config /nonexistent.json", &out), 0);
}
