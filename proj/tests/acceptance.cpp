// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "aipoll/error.hpp"
#include "aipoll/features.hpp"
#include "aipoll/metrics.hpp"
#include "aipoll/pipeline.hpp"
#include "aipoll/prompt.hpp"
#include "aipoll/regression.hpp"
#include "aipoll/report.hpp"
#include "support.hpp"

using namespace aipoll;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int prec = 6) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome ac1() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 gen(20240501);
  double worst_c2 = 0.0;
  for (int c : {2, 4, 5}) {
    for (int i = 0; i < 1000; ++i) {
      const auto a = test::random_distribution(gen, c);
      const auto b = test::random_distribution(gen, c);
      const auto m = test::random_distribution(gen, c);
      const double ab = nemd(a, b);
      if (c == 2) worst_c2 = std::max(worst_c2, std::abs(ab - md(a, b)));
      o.check(md(a, b) <= ab + 1e-12, "md > nemd at C=" + std::to_string(c));
      o.check(std::abs(ab - nemd(b, a)) <= 1e-12, "nemd asymmetric at C=" + std::to_string(c));
      o.check(ab <= nemd(a, m) + nemd(m, b) + 1e-12, "triangle inequality fails at C=" + std::to_string(c));
      o.check(nemd(a, a) == 0.0, "nemd(a, a) != 0");
      o.check(ab > 0.0 || a == b, "nemd zero for distinct distributions");
    }
  }
  o.check(worst_c2 <= 1e-12, "nemd != md at C=2 by " + num(worst_c2));
  const double secs = seconds_since(t0);
  o.check(secs < 5.0, "runtime " + num(secs) + " s");
  if (o.pass) o.detail = "1000 pairs per cardinality, max |nemd-md| at C=2 " + num(worst_c2) + ", " + num(secs, 3) + " s";
  return o;
}

Outcome ac2() {
  Outcome o;
  const auto uniform = test::dist({0.2, 0.2, 0.2, 0.2, 0.2});
  const auto point = test::dist({0, 0, 1, 0, 0});
  const double n = nemd(point, uniform), m = md(point, uniform), s = sdd(point, uniform);
  o.check(std::abs(n - 0.3) <= 1e-9, "NEMD " + num(n, 12));
  o.check(std::abs(m) <= 1e-9, "MD " + num(m, 12));
  o.check(std::abs(s - std::sqrt(0.125)) <= 1e-9, "SDD " + num(s, 12));
  if (o.pass) o.detail = "NEMD " + num(n, 10) + " MD " + num(m, 10) + " SDD " + num(s, 10);
  return o;
}

Outcome ac3() {
  Outcome o;
  const Question q("q_guns", "Ban assault rifles", 5, "Strongly disagree", "Strongly agree");
  const DemographicCell cell{Ideology::VeryConservative, Gender::Woman, Race::NonWhite};
  const std::pair<PromptVariant, const char*> goldens[] = {
      {PromptVariant::single_individual(), "golden/si.txt"},
      {PromptVariant::direct_distribution(false, false), "golden/dd_cot0_dist0.txt"},
      {PromptVariant::direct_distribution(true, false), "golden/dd_cot1_dist0.txt"},
      {PromptVariant::direct_distribution(false, true), "golden/dd_cot0_dist1.txt"},
      {PromptVariant::direct_distribution(true, true), "golden/dd_cot1_dist1.txt"},
  };
  const std::string dist_sentence =
      "Note the distribution need not be normal, symmetric, or encompass all category options.";
  const std::string sum_sentence = "such that the sum of all decimals is 100";
  for (const auto& [variant, file] : goldens) {
    const auto golden = read_text_file(test::fixture(file));
    o.check(render(q, cell, variant).text == golden, std::string(file) + " differs");
    if (variant.framework() == Framework::DD) {
      o.check(golden.find(sum_sentence) != std::string::npos, std::string(file) + " lacks the sum sentence");
      o.check((golden.find(dist_sentence) != std::string::npos) == variant.dist_reminder(),
              std::string(file) + " distribution reminder mismatch");
    }
  }
  if (o.pass) o.detail = "5 goldens byte-identical";
  return o;
}

// ---------------------------------------------------------------------------

struct Problem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

Problem random_problem(int n, int p, double noise, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0, 1);
  Problem pr{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  Eigen::VectorXd w(p);
  for (int j = 0; j < p; ++j) w(j) = z(gen);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) pr.X(i, j) = z(gen);
    pr.y(i) = 0.7 + pr.X.row(i).dot(w) + noise * z(gen);
  }
  return pr;
}

Eigen::VectorXd closed_form_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double penalty) {
  const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const Eigen::MatrixXd A = Xc.transpose() * Xc + penalty * Eigen::MatrixXd::Identity(X.cols(), X.cols());
  return A.ldlt().solve(Xc.transpose() * yc);
}

double grid_optimum(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  double best = -std::numeric_limits<double>::infinity(), la = 0, ll = 0;
  for (double a = -8; a <= 12; a += 0.25) {
    for (double l = -8; l <= 12; l += 0.25) {
      const double v = log_marginal_likelihood(X, y, std::exp(a), std::exp(l));
      if (v > best) best = v, la = a, ll = l;
    }
  }
  for (double step = 0.25; step > 1e-7; step /= 2) {
    for (bool moved = true; moved;) {
      moved = false;
      for (auto [da, dl] : {std::pair{step, 0.0}, {-step, 0.0}, {0.0, step}, {0.0, -step}}) {
        const double v = log_marginal_likelihood(X, y, std::exp(la + da), std::exp(ll + dl));
        if (v > best) best = v, la += da, ll += dl, moved = true;
      }
    }
  }
  return best;
}

Outcome ac4() {
  Outcome o;
  const auto t0 = Clock::now();
  double worst_w = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto pr = random_problem(30, 5, 0.5, 1000 + s);
    const double lambda = 0.5 + 0.25 * static_cast<double>(s);
    RidgeOptions opt;
    opt.fixed_lambda = lambda;
    const auto fit = fit_bayesian_ridge(pr.X, pr.y, opt);
    const auto w = closed_form_ridge(pr.X, pr.y, lambda / fit.alpha);
    worst_w = std::max(worst_w, (fit.weights - w).cwiseAbs().maxCoeff());
  }
  o.check(worst_w <= 1e-8, "fixed-lambda weights off by " + num(worst_w));
  double worst_gap = -std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto pr = random_problem(30, 5, 0.3 + 0.2 * static_cast<double>(s), 2000 + s);
    const auto fit = fit_bayesian_ridge(pr.X, pr.y);
    const double gap = grid_optimum(pr.X, pr.y) - log_marginal_likelihood(pr.X, pr.y, fit.alpha, fit.lambda);
    worst_gap = std::max(worst_gap, gap);
  }
  o.check(worst_gap <= 1e-3, "evidence below grid optimum by " + num(worst_gap));
  const double secs = seconds_since(t0);
  o.check(secs < 30.0, "runtime " + num(secs) + " s");
  if (o.pass) {
    o.detail = "max weight error " + num(worst_w, 3) + ", max evidence gap " + num(worst_gap, 3) + ", " + num(secs, 3) + " s";
  }
  return o;
}

Outcome ac5() {
  Outcome o;
  // 20 groups of 10 rows, split by group.
  const auto pr = random_problem(200, 6, 0.0, 77);
  std::vector<std::string> group(200);
  for (int i = 0; i < 200; ++i) group[static_cast<std::size_t>(i)] = "g" + std::to_string(i / 10);
  const auto split = split_questions(group, {5, 0.2});
  std::vector<int> tr, te;
  for (int i = 0; i < 200; ++i) (split.in_test(group[static_cast<std::size_t>(i)]) ? te : tr).push_back(i);
  auto take = [](const Eigen::MatrixXd& m, const std::vector<int>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(idx[k]);
    return out;
  };
  const Eigen::MatrixXd Xtr = take(pr.X, tr), Xte = take(pr.X, te);
  const Eigen::VectorXd ytr = take(pr.y, tr), yte = take(pr.y, te);
  const auto fit = fit_bayesian_ridge(Xtr, ytr);
  const auto r2 = r_squared(yte, predict_ridge(fit, Xte).mean);
  o.check(r2 && *r2 >= 0.999, "noiseless test R^2 " + (r2 ? num(*r2) : std::string("n/a")));

  const Eigen::VectorXd mean_only = Eigen::VectorXd::Constant(yte.size(), yte.mean());
  const auto r2_mean = r_squared(yte, mean_only);
  o.check(r2_mean && std::abs(*r2_mean) <= 1e-12, "mean-only R^2 " + (r2_mean ? num(*r2_mean) : std::string("n/a")));

  const Eigen::VectorXd adversarial = 2.0 * yte.mean() - yte.array();
  const auto r2_adv = r_squared(yte, adversarial);
  o.check(r2_adv && *r2_adv < 0.0, "adversarial R^2 not negative");
  if (o.pass) {
    o.detail = "test R^2 " + num(*r2, 8) + ", mean-only " + num(*r2_mean, 3) + ", adversarial " + num(*r2_adv, 4);
  }
  return o;
}

// ---------------------------------------------------------------------------

RunConfig e2e_config(const fs::path& out) {
  auto cfg = RunConfig::load(test::fixture("e2e/config.json"));
  cfg.out_dir = out.string();
  return cfg;
}

void full_run(const fs::path& out) {
  Pipeline p(e2e_config(out));
  p.ingest();
  p.render();
  p.poll();
  p.metrics();
  p.compare();
  p.features();
  p.fit();
  p.report();
}

Outcome ac6(const fs::path& dir) {
  Outcome o;
  const auto t0 = Clock::now();
  Pipeline p(e2e_config(dir));
  p.ingest();
  p.poll();
  p.metrics();
  p.compare();
  const auto rows = read_metrics_csv(dir / artifacts::kMetrics);
  const auto report = build_comparison(rows);
  const double secs = seconds_since(t0);
  if (report.paired.empty()) {
    o.check(false, "no SI/DD pairs");
    return o;
  }
  const auto& nemd_pair = report.paired[0];
  double sdd_si = std::nan(""), sdd_dd = std::nan("");
  for (const auto& v : report.variants) {
    if (v.variant == PromptVariant::single_individual()) sdd_si = v.metrics[2].mean;
    if (v.variant == comparison_dd_variant()) sdd_dd = v.metrics[2].mean;
  }
  o.check(nemd_pair.win_fraction > 0.6, "DD NEMD win fraction " + num(nemd_pair.win_fraction));
  o.check(sdd_si < sdd_dd, "mean SDD(SI) " + num(sdd_si) + " not below SDD(DD) " + num(sdd_dd));
  o.check(sdd_si < 0.0, "mean SDD(SI) " + num(sdd_si) + " not negative");
  o.check(secs < 60.0, "runtime " + num(secs) + " s");
  if (o.pass) {
    o.detail = "DD NEMD win " + num(nemd_pair.win_fraction, 3) + " over " + std::to_string(nemd_pair.n_pairs) +
               " pairs, mean SDD SI " + num(sdd_si, 4) + " vs DD " + num(sdd_dd, 4) + ", " + num(secs, 3) + " s";
  }
  return o;
}

Outcome ac7() {
  Outcome o;
  o.check(feature_names(false).size() == 110, "plain width " + std::to_string(feature_names(false).size()));
  o.check(feature_names(true).size() == 710, "interaction width " + std::to_string(feature_names(true).size()));
  std::mt19937_64 gen(9);
  std::normal_distribution<double> z(0, 1);
  const auto dims = static_cast<Eigen::Index>(kEmbeddingDims);
  Eigen::MatrixXd train(60, dims), test_rows(15, dims);
  for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = 0.3 * z(gen) + 0.05;
  for (Eigen::Index i = 0; i < test_rows.size(); ++i) test_rows.data()[i] = 2.0 * z(gen) - 1.0;
  const auto state = fit_scaler(train);
  const auto zt = apply_scaler(state, train);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < dims; ++j) {
    const double m = zt.col(j).mean();
    const double sd = std::sqrt((zt.col(j).array() - m).square().mean());
    worst = std::max({worst, std::abs(m), std::abs(sd - 1.0)});
  }
  o.check(worst <= 1e-9, "training dims off by " + num(worst));
  const auto before = state.to_json();
  const auto zs = apply_scaler(state, test_rows);
  double test_err = 0.0;
  for (Eigen::Index i = 0; i < zs.rows(); ++i) {
    for (Eigen::Index j = 0; j < dims; ++j) {
      const auto k = static_cast<std::size_t>(j);
      test_err = std::max(test_err, std::abs(zs(i, j) - (test_rows(i, j) - state.mean[k]) / state.sd[k]));
    }
  }
  o.check(test_err <= 1e-12, "test rows not scaled with training statistics");
  o.check(state.to_json() == before, "scaler state changed by applying it");
  if (o.pass) o.detail = "110/710 columns, max train deviation " + num(worst, 3);
  return o;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

Outcome ac8(const fs::path& a, const fs::path& b, const fs::path& resume_dir) {
  Outcome o;
  full_run(a);
  full_run(b);
  const auto ta = test::snapshot_tree(a / artifacts::kReport);
  const auto tb = test::snapshot_tree(b / artifacts::kReport);
  o.check(!ta.empty(), "empty report directory");
  o.check(ta.size() == tb.size(), "report file sets differ");
  for (const auto& [rel, bytes] : ta) {
    const auto it = tb.find(rel);
    o.check(it != tb.end() && it->second == bytes, "report/" + rel + " differs between runs");
  }

  // Interrupt a poll, then resume through a backend that records every prompt.
  Pipeline p(e2e_config(resume_dir));
  p.ingest();
  PollOptions crash;
  crash.abort_after_calls = 777;
  bool aborted = false;
  try {
    p.poll(crash);
  } catch (const Error&) {
    aborted = true;
  }
  o.check(aborted, "interrupted poll did not abort");
  const auto cached = count_lines(resume_dir / artifacts::kQueryCache);
  const auto r = p.poll();
  const std::size_t calls = r.counts.at("backend_calls").get<std::size_t>();
  std::set<std::string> seen;
  std::size_t lines = 0, dups = 0;
  std::ifstream in(resume_dir / artifacts::kQueryCache);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    ++lines;
    const auto rec = query_record_from_json(nlohmann::json::parse(line));
    dups += !seen.insert(rec.key.to_string() + "#" + std::to_string(rec.repeat_index)).second;
  }
  o.check(cached > 0 && cached < 2400, "unexpected pre-resume cache size " + std::to_string(cached));
  o.check(calls == 2400 - cached, "resume issued " + std::to_string(calls) + " calls for " +
                                      std::to_string(2400 - cached) + " missing queries");
  o.check(dups == 0 && lines == 2400, std::to_string(dups) + " duplicate cache records");
  if (o.pass) {
    o.detail = std::to_string(ta.size()) + " report files identical; resume after " + std::to_string(cached) +
               " cached issued " + std::to_string(calls) + " calls, 0 duplicates";
  }
  return o;
}

Outcome ac9(const fs::path& dir) {
  Outcome o;
  std::map<Framework, std::size_t> by_framework;
  std::ifstream in(dir / artifacts::kQueryCache);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    ++by_framework[query_record_from_json(nlohmann::json::parse(line)).key.variant.framework()];
  }
  o.check(by_framework[Framework::DD] == 400, "DD records " + std::to_string(by_framework[Framework::DD]));
  o.check(by_framework[Framework::SI] == 2000, "SI records " + std::to_string(by_framework[Framework::SI]));
  if (o.pass) o.detail = "400 DD and 2000 SI cache records";
  return o;
}

}  // namespace

int main() {
  test::TempDir tmp("aipoll-acceptance");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1", ac1},
      {"AC2", ac2},
      {"AC3", ac3},
      {"AC4", ac4},
      {"AC5", ac5},
      {"AC6", [&] { return ac6(tmp / "contrast"); }},
      {"AC7", ac7},
      {"AC8", [&] { return ac8(tmp / "run_a", tmp / "run_b", tmp / "resume"); }},
      {"AC9", [&] { return ac9(tmp / "run_a"); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s %s\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
