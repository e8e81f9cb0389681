// aipoll: stage-file pipeline for polling language models as survey panels.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "aipoll/error.hpp"
#include "aipoll/pipeline.hpp"
#include "aipoll/prompt.hpp"
#include "aipoll/report.hpp"
#include "aipoll/util/io.hpp"

namespace fs = std::filesystem;
using namespace aipoll;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the configured seed");
  cmd->add_option("--out-dir", c.out_dir, "Override the configured output directory");
}

Pipeline make_pipeline(const Common& c) {
  auto cfg = RunConfig::load(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out_dir) cfg.out_dir = fs::absolute(*c.out_dir).string();
  return Pipeline(std::move(cfg));
}

void print_stage(const Pipeline& p, const std::string& name, const StageResult& r) {
  std::cout << name << ": run " << p.run_id() << '\n';
  for (const auto& o : r.outputs) std::cout << "  wrote " << o.string() << '\n';
  std::cout << "  " << r.counts.dump() << '\n';
}

// "cot=1,dist=0"
PromptVariant parse_dd_variant(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw Error(ErrorCode::InvalidArgument, "variant must look like cot=1,dist=0");
  auto flag = [&](const std::string& field, const std::string& name) {
    if (field != name + "=0" && field != name + "=1") {
      throw Error(ErrorCode::InvalidArgument, "variant must look like cot=1,dist=0");
    }
    return field.back() == '1';
  };
  return PromptVariant::direct_distribution(flag(text.substr(0, comma), "cot"), flag(text.substr(comma + 1), "dist"));
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
      return 2;
    case ErrorCode::MissingArtifact:
      return 3;
    case ErrorCode::Auth:
      return 4;
    case ErrorCode::Parse:
    case ErrorCode::Schema:
      return 5;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poll language models as survey panels and model where they match human opinion"};
  app.require_subcommand(1);

  Common ingest_o, render_o, poll_o, metrics_o, features_o, fit_o, predict_o, compare_o, report_o;

  auto* ingest = app.add_subcommand("ingest", "Aggregate respondents into human distributions");
  add_common(ingest, ingest_o);

  auto* render = app.add_subcommand("render", "Render every prompt, or print one with --key");
  add_common(render, render_o);
  std::string render_key;
  render->add_option("--key", render_key, "Permutation key, e.g. q1|Liberal|Woman|White|DD|cot=1|dist=0");

  auto* poll = app.add_subcommand("poll", "Query the backend (resumable from the cache)");
  add_common(poll, poll_o);
  std::string poll_framework;
  std::vector<std::string> poll_variants;
  bool retry_failed = false;
  std::optional<std::size_t> abort_after;
  poll->add_option("--framework", poll_framework, "SI or DD (default: all configured)")
      ->check(CLI::IsMember({"SI", "DD"}));
  poll->add_option("--variant", poll_variants, "DD variant as cot=<0|1>,dist=<0|1>; repeatable");
  poll->add_flag("--retry-failed", retry_failed, "Re-issue queries whose cached record is a failure");
  poll->add_option("--abort-after", abort_after, "Mock backend: fail with an auth error after N calls");

  auto* metrics = app.add_subcommand("metrics", "Score model distributions against human ones");
  add_common(metrics, metrics_o);

  auto* compare = app.add_subcommand("compare", "Paired SI vs DD comparison");
  add_common(compare, compare_o);
  bool compare_json = false;
  compare->add_flag("--json", compare_json, "Print JSON instead of text");

  auto* features = app.add_subcommand("features", "Embed questions and export the design matrix");
  add_common(features, features_o);

  auto* fit = app.add_subcommand("fit", "Fit regression models on the question split");
  add_common(fit, fit_o);

  auto* predict = app.add_subcommand("predict", "Predict NEMD/MD/SDD for a new question");
  add_common(predict, predict_o);
  PredictRequest req;
  std::string ideology = "Moderate", gender = "Man", race = "White";
  bool cot = true, dist = false, predict_json = false;
  predict->add_option("--text", req.question_text, "Question text")->required();
  predict->add_option("--cardinality", req.cardinality, "Number of response options (2, 4 or 5)");
  predict->add_option("--low", req.low_label, "Label of the lowest option");
  predict->add_option("--high", req.high_label, "Label of the highest option");
  predict->add_option("--ideology", ideology, "VeryLiberal, Liberal, Moderate, Conservative, VeryConservative");
  predict->add_option("--gender", gender, "Man or Woman");
  predict->add_option("--race", race, "White or NonWhite");
  predict->add_option("--cot", cot, "Chain-of-thought reminder (0/1)");
  predict->add_option("--dist", dist, "Distribution reminder (0/1)");
  predict->add_flag("--json", predict_json, "Print JSON instead of text");

  auto* report = app.add_subcommand("report", "Write every table into <out>/report");
  add_common(report, report_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (ingest->parsed()) {
      auto p = make_pipeline(ingest_o);
      print_stage(p, "ingest", p.ingest());
    } else if (render->parsed()) {
      auto p = make_pipeline(render_o);
      if (render_key.empty()) {
        print_stage(p, "render", p.render());
      } else {
        const auto key = PermutationKey::parse(render_key);
        const auto prompt = aipoll::render(p.corpus().at(key.question_id), key.cell, key.variant);
        std::cout << prompt.text;
        if (prompt.text.empty() || prompt.text.back() != '\n') std::cout << '\n';
      }
    } else if (poll->parsed()) {
      auto p = make_pipeline(poll_o);
      PollOptions o;
      if (!poll_framework.empty()) o.framework = parse_framework(poll_framework);
      if (!poll_variants.empty()) {
        std::vector<PromptVariant> vs;
        for (const auto& v : poll_variants) vs.push_back(parse_dd_variant(v));
        o.dd_variants = vs;
      }
      o.retry_failed = retry_failed;
      o.abort_after_calls = abort_after;
      print_stage(p, "poll", p.poll(o));
    } else if (metrics->parsed()) {
      auto p = make_pipeline(metrics_o);
      print_stage(p, "metrics", p.metrics());
    } else if (compare->parsed()) {
      auto p = make_pipeline(compare_o);
      p.compare();
      std::cout << read_text_file(p.out_dir() / (compare_json ? artifacts::kComparisonJson : artifacts::kComparisonText));
    } else if (features->parsed()) {
      auto p = make_pipeline(features_o);
      print_stage(p, "features", p.features());
    } else if (fit->parsed()) {
      auto p = make_pipeline(fit_o);
      print_stage(p, "fit", p.fit());
    } else if (predict->parsed()) {
      auto p = make_pipeline(predict_o);
      const auto i = parse_ideology(ideology);
      const auto g = parse_gender(gender);
      const auto rc = parse_race(race);
      if (!i || !g || !rc) throw Error(ErrorCode::InvalidArgument, "unknown ideology, gender or race");
      req.cell = {*i, *g, *rc};
      req.variant = PromptVariant::direct_distribution(cot, dist);
      const auto result = p.predict(req);
      std::cout << (predict_json ? result.to_json().dump(2) + "\n" : result.to_text());
    } else if (report->parsed()) {
      auto p = make_pipeline(report_o);
      print_stage(p, "report", p.report());
    }
  } catch (const Error& e) {
    std::cerr << "aipoll: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "aipoll: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
