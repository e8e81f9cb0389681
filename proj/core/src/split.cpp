#include <algorithm>
#include <cmath>

#include "aipoll/error.hpp"
#include "aipoll/regression.hpp"
#include "aipoll/util/rng.hpp"

namespace aipoll {

bool QuestionSplit::in_test(const std::string& question_id) const {
  return std::binary_search(test.begin(), test.end(), question_id);
}

QuestionSplit split_questions(std::span<const std::string> question_ids, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "test_fraction must lie in (0, 1)");
  }
  std::vector<std::string> ids(question_ids.begin(), question_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const std::size_t n = ids.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "a question split needs at least 2 questions");

  Rng rng(derive_seed(spec.seed, "split"));
  rng.shuffle(std::span<std::string>(ids));
  auto n_test = static_cast<std::size_t>(std::ceil(spec.test_fraction * static_cast<double>(n) - 1e-9));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  QuestionSplit out;
  out.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

std::optional<double> r_squared(std::span<const double> y, std::span<const double> prediction) {
  if (y.size() != prediction.size()) throw Error(ErrorCode::Shape, "r_squared: length mismatch");
  if (y.empty()) return std::nullopt;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sst = 0.0, sse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sst += (y[i] - mean) * (y[i] - mean);
    sse += (y[i] - prediction[i]) * (y[i] - prediction[i]);
  }
  if (sst <= 1e-24 * static_cast<double>(y.size()) * (1.0 + mean * mean)) return std::nullopt;
  return 1.0 - sse / sst;
}

std::optional<double> r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& prediction) {
  return r_squared(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                   std::span<const double>(prediction.data(), static_cast<std::size_t>(prediction.size())));
}

}  // namespace aipoll
