#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "aipoll/error.hpp"
#include "aipoll/metrics.hpp"
#include "support.hpp"

using namespace aipoll;

namespace {

// Optimal 1-D transport by walking both mass sequences left to right.
double transport_oracle(const OpinionDistribution& a, const OpinionDistribution& b) {
  const int c = a.cardinality();
  std::vector<double> ra(a.probs().begin(), a.probs().end()), rb(b.probs().begin(), b.probs().end());
  std::size_t i = 0, j = 0;
  double cost = 0.0;
  while (i < ra.size() && j < rb.size()) {
    if (ra[i] <= 1e-300) {
      ++i;
      continue;
    }
    if (rb[j] <= 1e-300) {
      ++j;
      continue;
    }
    const double m = std::min(ra[i], rb[j]);
    cost += m * std::abs(static_cast<double>(i) - static_cast<double>(j)) / (c - 1);
    ra[i] -= m;
    rb[j] -= m;
  }
  return cost;
}

double mean_oracle(const OpinionDistribution& d) {
  double s = 0;
  for (int i = 0; i < d.cardinality(); ++i) s += d[static_cast<std::size_t>(i)] * i / (d.cardinality() - 1.0);
  return s;
}

double sd_oracle(const OpinionDistribution& d) {
  const double m = mean_oracle(d);
  double s = 0;
  for (int i = 0; i < d.cardinality(); ++i) {
    const double x = i / (d.cardinality() - 1.0);
    s += d[static_cast<std::size_t>(i)] * (x - m) * (x - m);
  }
  return std::sqrt(s);
}

ComparisonRow row(const std::string& q, std::size_t cell, const PromptVariant& v, double nemd_v, double md_v,
                  double sdd_v) {
  ComparisonRow r;
  r.key = {q, DemographicCell::from_index(cell), v};
  r.cardinality = 5;
  r.n_human = 10;
  r.nemd = nemd_v;
  r.md = md_v;
  r.sdd = sdd_v;
  return r;
}

}  // namespace

TEST(Metrics, ScaledMeanExamples) {
  EXPECT_DOUBLE_EQ(scaled_mean(test::dist({1, 0, 0, 0, 0})), 0.0);
  EXPECT_DOUBLE_EQ(scaled_mean(test::dist({0.5, 0.5})), 0.5);
  EXPECT_NEAR(scaled_mean(test::dist({0.2, 0.3, 0.4, 0.1})), 0.3 / 3 + 0.8 / 3 + 0.1, 1e-12);
  EXPECT_NEAR(scaled_mean(test::dist({0.2, 0.3, 0.4, 0.1})), 0.46666666666666667, 1e-12);
}

TEST(Metrics, HandOracles) {
  const auto uniform = test::dist({0.2, 0.2, 0.2, 0.2, 0.2});
  const auto point = test::dist({0, 0, 1, 0, 0});
  EXPECT_NEAR(nemd(point, uniform), 0.3, 1e-9);
  EXPECT_NEAR(md(point, uniform), 0.0, 1e-9);
  EXPECT_NEAR(sdd(point, uniform), std::sqrt(0.125), 1e-9);
  EXPECT_NEAR(sdd(point, uniform), 0.3536, 5e-5);
  EXPECT_NEAR(sdd(test::dist({0.5, 0.5}), test::dist({1, 0})), -0.5, 1e-12);
  EXPECT_NEAR(md(test::dist({1, 0}), test::dist({0, 1})), 1.0, 1e-12);
  for (int c : {2, 4, 5}) {
    std::vector<double> lo(static_cast<std::size_t>(c), 0.0), hi(static_cast<std::size_t>(c), 0.0);
    lo.front() = 1;
    hi.back() = 1;
    EXPECT_NEAR(nemd(test::dist(lo), test::dist(hi)), 1.0, 1e-12) << c;
  }
}

TEST(Metrics, CardinalityMismatchIsShapeError) {
  try {
    nemd(test::dist({0.5, 0.5}), test::dist({0.25, 0.25, 0.25, 0.25}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Shape);
  }
  EXPECT_THROW(md(test::dist({0.5, 0.5}), test::dist({0.2, 0.2, 0.2, 0.2, 0.2})), Error);
  EXPECT_THROW(sdd(test::dist({0.5, 0.5}), test::dist({0.2, 0.2, 0.2, 0.2, 0.2})), Error);
}

TEST(Metrics, AgreesWithIndependentOracles) {
  std::mt19937_64 gen(11);
  for (int c : {2, 4, 5}) {
    for (int t = 0; t < 200; ++t) {
      const auto a = test::random_distribution(gen, c);
      const auto b = test::random_distribution(gen, c);
      EXPECT_NEAR(nemd(a, b), transport_oracle(a, b), 1e-12);
      EXPECT_NEAR(scaled_mean(a), mean_oracle(a), 1e-12);
      EXPECT_NEAR(scaled_sd(a), sd_oracle(a), 1e-12);
      EXPECT_NEAR(sdd(a, b), sd_oracle(b) - sd_oracle(a), 1e-12);
    }
  }
}

TEST(Metrics, Properties) {
  std::mt19937_64 gen(12);
  for (int c : {2, 4, 5}) {
    for (int t = 0; t < 300; ++t) {
      const auto a = test::random_distribution(gen, c);
      const auto b = test::random_distribution(gen, c);
      const auto x = test::random_distribution(gen, c);
      EXPECT_LE(md(a, b), nemd(a, b) + 1e-12);
      EXPECT_DOUBLE_EQ(nemd(a, b), nemd(b, a));
      EXPECT_LE(nemd(a, b), nemd(a, x) + nemd(x, b) + 1e-12);
      EXPECT_GE(nemd(a, b), 0.0);
      EXPECT_LE(nemd(a, b), 1.0 + 1e-12);
      EXPECT_EQ(nemd(a, a), 0.0);
      if (c == 2) EXPECT_NEAR(nemd(a, b), md(a, b), 1e-12);
      EXPECT_DOUBLE_EQ(sdd(a, b), -sdd(b, a));
    }
  }
}

TEST(Metrics, PairedCompareTwoPairs) {
  const auto si = PromptVariant::single_individual();
  const auto dd = comparison_dd_variant();
  std::vector<ComparisonRow> s{row("q", 0, si, 0.5, 0.1, 0.0), row("q", 1, si, 0.6, 0.1, 0.0)};
  std::vector<ComparisonRow> d{row("q", 0, dd, 0.3, 0.1, 0.0), row("q", 1, dd, 0.2, 0.1, 0.0)};
  const auto p = paired_compare(s, d, Metric::NEMD);
  EXPECT_EQ(p.n_pairs, 2u);
  EXPECT_NEAR(p.mean_diff, 0.3, 1e-12);
  EXPECT_NEAR(p.se, 0.1, 1e-12);
  EXPECT_NEAR(p.ci_lo, 0.1, 1e-12);
  EXPECT_NEAR(p.ci_hi, 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(p.win_fraction, 1.0);

  const auto tie = paired_compare(s, s, Metric::MD);
  EXPECT_EQ(tie.mean_diff, 0.0);
  EXPECT_EQ(tie.win_fraction, 0.0);
}

TEST(Metrics, PairedCompareTenScriptedPairs) {
  const auto si = PromptVariant::single_individual();
  const auto dd = comparison_dd_variant();
  const double si_sdd[10] = {-0.30, -0.10, 0.05, -0.20, -0.25, 0.00, -0.15, 0.10, -0.05, -0.40};
  const double dd_sdd[10] = {-0.05, 0.12, -0.02, 0.20, -0.01, 0.00, 0.03, -0.20, 0.04, -0.10};
  std::vector<ComparisonRow> s, d;
  // Deliberately shuffled DD order; pairing is by (question, cell).
  for (int i = 0; i < 10; ++i) s.push_back(row("q" + std::to_string(i % 3), static_cast<std::size_t>(i), si, 0, 0, si_sdd[i]));
  for (int i = 9; i >= 0; --i) d.push_back(row("q" + std::to_string(i % 3), static_cast<std::size_t>(i), dd, 0, 0, dd_sdd[i]));

  double sum = 0;
  int wins = 0;
  double diffs[10];
  for (int i = 0; i < 10; ++i) {
    diffs[i] = si_sdd[i] - dd_sdd[i];
    sum += diffs[i];
    if (std::abs(dd_sdd[i]) < std::abs(si_sdd[i])) ++wins;
  }
  const double mean = sum / 10;
  double ss = 0;
  for (double x : diffs) ss += (x - mean) * (x - mean);
  const double se = std::sqrt(ss / 9) / std::sqrt(10.0);

  const auto p = paired_compare(s, d, Metric::SDD);
  EXPECT_EQ(p.n_pairs, 10u);
  EXPECT_NEAR(p.mean_diff, mean, 1e-12);
  EXPECT_NEAR(p.se, se, 1e-12);
  EXPECT_NEAR(p.ci_lo, mean - 2 * se, 1e-12);
  EXPECT_NEAR(p.win_fraction, wins / 10.0, 1e-12);
  EXPECT_EQ(wins, 6);
}

TEST(Metrics, PairedCompareAlignmentErrors) {
  const auto si = PromptVariant::single_individual();
  const auto dd = comparison_dd_variant();
  std::vector<ComparisonRow> s{row("q", 0, si, 0.5, 0, 0)};
  std::vector<ComparisonRow> d{row("q", 1, dd, 0.3, 0, 0)};
  try {
    paired_compare(s, d, Metric::NEMD);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Alignment);
  }
  std::vector<ComparisonRow> dup{row("q", 0, dd, 0.3, 0, 0), row("q", 0, dd, 0.2, 0, 0)};
  EXPECT_THROW(paired_compare(s, dup, Metric::NEMD), Error);
  EXPECT_THROW(paired_compare({}, {}, Metric::NEMD), Error);
}

TEST(Metrics, BandConstantAndFullWindow) {
  const std::vector<double> x{0.0, 0.1, 0.2, 0.3, 0.4};
  const std::vector<double> c(5, 0.7);
  for (const auto& b : moving_average_band(x, c, 0.2)) {
    EXPECT_DOUBLE_EQ(b.mean, 0.7);
    EXPECT_NEAR(b.se, 0.0, 1e-15);
  }
  const auto full = moving_average_band(x, x, 10.0);
  ASSERT_EQ(full.size(), 5u);
  for (const auto& b : full) EXPECT_NEAR(b.mean, 0.2, 1e-12);
  EXPECT_TRUE(moving_average_band(std::vector<double>{}, std::vector<double>{}, 0.1).empty());
}

TEST(Metrics, BandMatchesBruteForce) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> x(20), y(20);
  for (int i = 0; i < 20; ++i) {
    x[static_cast<std::size_t>(i)] = std::round(u(gen) * 20) / 20;
    y[static_cast<std::size_t>(i)] = u(gen);
  }
  const double w = 0.2;
  const auto band = moving_average_band(x, y, w);
  std::vector<double> centers(x);
  std::sort(centers.begin(), centers.end());
  centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
  std::size_t k = 0;
  for (double c : centers) {
    std::vector<double> in;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] >= c - w / 2 && x[i] <= c + w / 2) in.push_back(y[i]);
    }
    if (in.size() < 2) continue;
    double m = 0;
    for (double v : in) m += v;
    m /= static_cast<double>(in.size());
    double ss = 0;
    for (double v : in) ss += (v - m) * (v - m);
    const double se = std::sqrt(ss / static_cast<double>(in.size() - 1)) / std::sqrt(static_cast<double>(in.size()));
    ASSERT_LT(k, band.size());
    EXPECT_DOUBLE_EQ(band[k].x, c);
    EXPECT_EQ(band[k].n, in.size());
    EXPECT_NEAR(band[k].mean, m, 1e-12);
    EXPECT_NEAR(band[k].se, se, 1e-12);
    EXPECT_NEAR(band[k].lo, m - 2 * se, 1e-12);
    ++k;
  }
  EXPECT_EQ(k, band.size());
}

TEST(Metrics, ComputeMetricsSkipsAndCsvRoundTrips) {
  HumanCellDistribution h{"q", DemographicCell::from_index(0), 12, {6, 6}, test::dist({0.5, 0.5})};
  ModelDistribution ok;
  ok.key = {"q", DemographicCell::from_index(0), comparison_dd_variant()};
  ok.cardinality = 2;
  ok.distribution = test::dist({0.8, 0.2});
  ModelDistribution failed = ok;
  failed.key.variant = PromptVariant::direct_distribution(false, false);
  failed.distribution.reset();
  failed.failure = "Parse: bad";
  ModelDistribution no_human = ok;
  no_human.key.cell = DemographicCell::from_index(5);

  const std::vector<HumanCellDistribution> hs{h};
  const std::vector<ModelDistribution> ms{ok, failed, no_human};
  const auto r = compute_metrics(hs, ms);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.skipped.size(), 2u);
  EXPECT_NEAR(r.rows[0].md, 0.3, 1e-12);
  EXPECT_NEAR(r.rows[0].nemd, 0.3, 1e-12);
  EXPECT_NEAR(r.rows[0].sdd, 0.4 - 0.5, 1e-12);
  EXPECT_EQ(r.rows[0].n_human, 12);

  test::TempDir tmp;
  write_metrics_csv(tmp / "m.csv", r.rows, Provenance{"rid", {{"questions", "x"}}});
  const auto text = read_text_file(tmp / "m.csv");
  EXPECT_EQ(text.rfind("# run_id=rid", 0), 0u);
  const auto back = read_metrics_csv(tmp / "m.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].key, r.rows[0].key);
  EXPECT_EQ(back[0].nemd, r.rows[0].nemd);
  EXPECT_EQ(back[0].sdd, r.rows[0].sdd);
}

TEST(Metrics, SampleStats) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto s = sample_stats(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.sd, std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_NEAR(s.se, std::sqrt(5.0 / 3.0) / 2.0, 1e-12);
  const std::vector<double> one{1};
  EXPECT_TRUE(std::isnan(sample_stats(one).se));
}
