#include "aipoll/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "aipoll/error.hpp"

namespace aipoll {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_same_cardinality(const OpinionDistribution& a, const OpinionDistribution& b) {
  if (a.cardinality() != b.cardinality()) {
    throw Error(ErrorCode::Shape, "cardinality mismatch: " + std::to_string(a.cardinality()) + " vs " +
                                      std::to_string(b.cardinality()));
  }
}

using PairKey = std::pair<std::string, std::size_t>;

PairKey pair_key(const PermutationKey& k) { return {k.question_id, k.cell.index()}; }

const char* kMetricsHeader = "key,cardinality,n_human,nemd,md,sdd,human_sd,model_sd";

}  // namespace

double scaled_mean(const OpinionDistribution& d) {
  const auto pos = scaled_positions(d.cardinality());
  double m = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) m += d[i] * pos[i];
  return m;
}

double scaled_sd(const OpinionDistribution& d) {
  const auto pos = scaled_positions(d.cardinality());
  const double m = scaled_mean(d);
  double v = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) v += d[i] * (pos[i] - m) * (pos[i] - m);
  return std::sqrt(v);
}

double md(const OpinionDistribution& human, const OpinionDistribution& model) {
  require_same_cardinality(human, model);
  return std::abs(scaled_mean(human) - scaled_mean(model));
}

double sdd(const OpinionDistribution& human, const OpinionDistribution& model) {
  require_same_cardinality(human, model);
  return scaled_sd(model) - scaled_sd(human);
}

double nemd(const OpinionDistribution& human, const OpinionDistribution& model) {
  require_same_cardinality(human, model);
  const int c = human.cardinality();
  double fh = 0.0, fm = 0.0, total = 0.0;
  for (int k = 0; k + 1 < c; ++k) {
    fh += human[static_cast<std::size_t>(k)];
    fm += model[static_cast<std::size_t>(k)];
    total += std::abs(fh - fm);
  }
  return total / static_cast<double>(c - 1);
}

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::NEMD: return "NEMD";
    case Metric::MD: return "MD";
    case Metric::SDD: return "SDD";
  }
  return "?";
}

std::optional<Metric> parse_metric(std::string_view s) noexcept {
  for (auto m : kMetrics) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

double ComparisonRow::value(Metric m) const noexcept {
  switch (m) {
    case Metric::NEMD: return nemd;
    case Metric::MD: return md;
    case Metric::SDD: return sdd;
  }
  return kNaN;
}

ComparisonRow compare(const PermutationKey& key, int n_human, const OpinionDistribution& human,
                      const OpinionDistribution& model) {
  ComparisonRow row;
  row.key = key;
  row.cardinality = human.cardinality();
  row.n_human = n_human;
  row.nemd = nemd(human, model);
  row.md = md(human, model);
  row.human_sd = scaled_sd(human);
  row.model_sd = scaled_sd(model);
  row.sdd = row.model_sd - row.human_sd;
  return row;
}

MetricsResult compute_metrics(std::span<const HumanCellDistribution> human,
                              std::span<const ModelDistribution> model) {
  std::map<PairKey, const HumanCellDistribution*> by_cell;
  for (const auto& h : human) by_cell[{h.question_id, h.cell.index()}] = &h;

  MetricsResult out;
  for (const auto& m : model) {
    if (!m.distribution) {
      out.skipped.push_back({m.key, "model: " + (m.failure.empty() ? std::string("no distribution") : m.failure)});
      continue;
    }
    const auto it = by_cell.find(pair_key(m.key));
    if (it == by_cell.end()) {
      out.skipped.push_back({m.key, "no human respondents in cell"});
      continue;
    }
    out.rows.push_back(compare(m.key, it->second->n_respondents, it->second->distribution, *m.distribution));
  }
  return out;
}

std::vector<ComparisonRow> select_variant(std::span<const ComparisonRow> rows, const PromptVariant& variant) {
  std::vector<ComparisonRow> out;
  for (const auto& r : rows) {
    if (r.key.variant == variant) out.push_back(r);
  }
  return out;
}

nlohmann::json PairedComparison::to_json() const {
  return {{"metric", std::string(to_string(metric))},
          {"n_pairs", n_pairs},
          {"win_fraction", win_fraction},
          {"mean_diff", mean_diff},
          {"se", se},
          {"ci_2sigma", {ci_lo, ci_hi}}};
}

SampleStats sample_stats(std::span<const double> values) {
  SampleStats s;
  s.n = values.size();
  if (s.n == 0) {
    s.mean = s.sd = s.se = kNaN;
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n < 2) {
    s.sd = s.se = kNaN;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  s.se = s.sd / std::sqrt(static_cast<double>(s.n));
  return s;
}

PairedComparison paired_compare(std::span<const ComparisonRow> si, std::span<const ComparisonRow> dd, Metric metric) {
  std::map<PairKey, const ComparisonRow*> dd_by_cell;
  for (const auto& r : dd) {
    if (!dd_by_cell.emplace(pair_key(r.key), &r).second) {
      throw Error(ErrorCode::Alignment, "duplicate DD row for " + r.key.to_string());
    }
  }
  std::map<PairKey, bool> seen;
  std::vector<double> diffs;
  std::size_t wins = 0;
  for (const auto& s : si) {
    const auto pk = pair_key(s.key);
    if (!seen.emplace(pk, true).second) throw Error(ErrorCode::Alignment, "duplicate SI row for " + s.key.to_string());
    const auto it = dd_by_cell.find(pk);
    if (it == dd_by_cell.end()) throw Error(ErrorCode::Alignment, "no DD partner for " + s.key.to_string());
    const double a = s.value(metric);
    const double b = it->second->value(metric);
    diffs.push_back(a - b);
    const bool win = metric == Metric::SDD ? std::abs(b) < std::abs(a) : b < a;
    if (win) ++wins;
  }
  if (seen.size() != dd_by_cell.size()) {
    for (const auto& [pk, row] : dd_by_cell) {
      if (!seen.contains(pk)) throw Error(ErrorCode::Alignment, "no SI partner for " + row->key.to_string());
    }
  }
  if (diffs.empty()) throw Error(ErrorCode::Alignment, "no SI/DD pairs to compare");

  const auto stats = sample_stats(diffs);
  PairedComparison out;
  out.metric = metric;
  out.n_pairs = diffs.size();
  out.win_fraction = static_cast<double>(wins) / static_cast<double>(diffs.size());
  out.mean_diff = stats.mean;
  out.se = stats.se;
  out.ci_lo = stats.mean - 2.0 * stats.se;
  out.ci_hi = stats.mean + 2.0 * stats.se;
  return out;
}

MetricSummary summarize(std::span<const ComparisonRow> rows, Metric metric) {
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& r : rows) v.push_back(r.value(metric));
  const auto s = sample_stats(v);
  return {metric, s.n, s.mean, s.sd, s.se};
}

std::vector<BandPoint> moving_average_band(std::span<const double> x, std::span<const double> y, double window) {
  if (x.size() != y.size()) throw Error(ErrorCode::Shape, "moving_average_band: x and y differ in length");
  if (!(window > 0.0)) throw Error(ErrorCode::InvalidArgument, "moving_average_band: window must be positive");
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

  const double half = window / 2.0;
  std::vector<BandPoint> out;
  std::vector<double> in_window;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double c = x[order[i]];
    if (i > 0 && x[order[i - 1]] == c) continue;
    while (lo < order.size() && x[order[lo]] < c - half) ++lo;
    in_window.clear();
    for (std::size_t j = lo; j < order.size() && x[order[j]] <= c + half; ++j) in_window.push_back(y[order[j]]);
    if (in_window.size() < 2) continue;
    const auto s = sample_stats(in_window);
    out.push_back({c, s.n, s.mean, s.se, s.mean - 2.0 * s.se, s.mean + 2.0 * s.se});
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const ComparisonRow> rows,
                       const Provenance& provenance) {
  std::ostringstream out;
  out << provenance.comment_header() << '\n' << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << join_csv({r.key.to_string(), std::to_string(r.cardinality), std::to_string(r.n_human),
                     format_double(r.nemd), format_double(r.md), format_double(r.sdd), format_double(r.human_sd),
                     format_double(r.model_sd)})
        << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<ComparisonRow> read_metrics_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  bool header_seen = false;
  std::vector<ComparisonRow> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kMetricsHeader) throw Error(ErrorCode::Schema, path.string() + ": unexpected metrics header");
      header_seen = true;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw Error(ErrorCode::Schema, path.string() + ":" + std::to_string(line_no) + ": expected 8 fields");
    try {
      ComparisonRow r;
      r.key = PermutationKey::parse(f[0]);
      r.cardinality = std::stoi(f[1]);
      r.n_human = std::stoi(f[2]);
      r.nemd = std::stod(f[3]);
      r.md = std::stod(f[4]);
      r.sdd = std::stod(f[5]);
      r.human_sd = std::stod(f[6]);
      r.model_sd = std::stod(f[7]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  if (!header_seen) throw Error(ErrorCode::Schema, path.string() + ": missing metrics header");
  return rows;
}

}  // namespace aipoll
