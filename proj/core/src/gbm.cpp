#include <algorithm>
#include <numeric>

#include "aipoll/error.hpp"
#include "aipoll/regression.hpp"

namespace aipoll {
namespace {

struct NodeStats {
  double sum = 0.0;
  int count = 0;
};

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

/// Grows one tree on `residual` level by level. Every level makes a single
/// pass over each feature's presorted order, so the cost is
/// O(depth * features * rows) regardless of tree shape.
RegressionTree grow_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& residual,
                         const std::vector<std::vector<int>>& presorted, const GbmOptions& opt, double min_gain,
                         std::vector<int>& node_of) {
  const auto n = static_cast<int>(X.rows());
  const auto p = static_cast<int>(X.cols());
  RegressionTree tree;
  tree.nodes.push_back({});
  std::fill(node_of.begin(), node_of.end(), 0);
  std::vector<int> frontier{0};

  for (int depth = 0; depth < opt.max_depth && !frontier.empty(); ++depth) {
    const auto n_nodes = tree.nodes.size();
    std::vector<NodeStats> total(n_nodes);
    for (int i = 0; i < n; ++i) {
      total[static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)])].sum += residual(i);
      total[static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)])].count += 1;
    }
    std::vector<char> open(n_nodes, 0);
    for (int nd : frontier) {
      if (total[static_cast<std::size_t>(nd)].count >= 2 * opt.min_samples_leaf) open[static_cast<std::size_t>(nd)] = 1;
    }
    std::vector<Candidate> best(n_nodes);
    std::vector<NodeStats> left(n_nodes);
    std::vector<double> last(n_nodes);

    for (int f = 0; f < p; ++f) {
      std::fill(left.begin(), left.end(), NodeStats{});
      for (int i : presorted[static_cast<std::size_t>(f)]) {
        const auto nd = static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)]);
        if (!open[nd]) continue;
        const double x = X(i, f);
        auto& l = left[nd];
        const auto& t = total[nd];
        if (l.count >= opt.min_samples_leaf && t.count - l.count >= opt.min_samples_leaf && x > last[nd]) {
          const double rs = t.sum - l.sum;
          const int rc = t.count - l.count;
          const double gain = l.sum * l.sum / l.count + rs * rs / rc - t.sum * t.sum / t.count;
          if (gain > best[nd].gain) {
            double thr = last[nd] + (x - last[nd]) / 2.0;
            if (!(thr < x)) thr = last[nd];
            best[nd] = {gain, f, thr};
          }
        }
        l.sum += residual(i);
        l.count += 1;
        last[nd] = x;
      }
    }

    std::vector<int> next;
    std::vector<int> split_feature(n_nodes, -1);
    for (int nd : frontier) {
      const auto& b = best[static_cast<std::size_t>(nd)];
      if (b.feature < 0 || !(b.gain > min_gain)) continue;
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      auto& node = tree.nodes[static_cast<std::size_t>(nd)];
      node.feature = b.feature;
      node.threshold = b.threshold;
      node.left = l;
      node.right = l + 1;
      split_feature[static_cast<std::size_t>(nd)] = b.feature;
      next.push_back(l);
      next.push_back(l + 1);
    }
    for (int i = 0; i < n; ++i) {
      auto& nd = node_of[static_cast<std::size_t>(i)];
      if (static_cast<std::size_t>(nd) >= n_nodes || split_feature[static_cast<std::size_t>(nd)] < 0) continue;
      const auto& node = tree.nodes[static_cast<std::size_t>(nd)];
      nd = X(i, node.feature) <= node.threshold ? node.left : node.right;
    }
    frontier = std::move(next);
  }

  std::vector<NodeStats> leaf(tree.nodes.size());
  for (int i = 0; i < n; ++i) {
    leaf[static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)])].sum += residual(i);
    leaf[static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)])].count += 1;
  }
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    if (tree.nodes[k].feature < 0 && leaf[k].count > 0) tree.nodes[k].value = leaf[k].sum / leaf[k].count;
  }
  return tree;
}

}  // namespace

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  std::size_t k = 0;
  while (nodes[k].feature >= 0) {
    k = static_cast<std::size_t>(row(nodes[k].feature) <= nodes[k].threshold ? nodes[k].left : nodes[k].right);
  }
  return nodes[k].value;
}

GbmFit fit_gbm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GbmOptions& options) {
  if (X.rows() != y.size()) throw Error(ErrorCode::Shape, "X and y differ in row count");
  if (X.rows() == 0) throw Error(ErrorCode::InvalidArgument, "fit_gbm: no rows");
  if (options.n_trees < 0 || options.max_depth < 1 || options.min_samples_leaf < 1 ||
      !(options.learning_rate > 0.0 && options.learning_rate <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "fit_gbm: invalid options");
  }
  const auto n = static_cast<std::size_t>(X.rows());

  std::vector<std::vector<int>> presorted(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    auto& order = presorted[static_cast<std::size_t>(f)];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return X(a, f) < X(b, f); });
  }

  GbmFit fit;
  fit.options = options;
  fit.n_features = static_cast<int>(X.cols());
  fit.init = y.mean();
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(X.rows(), fit.init);
  Eigen::VectorXd residual = y - pred;
  const double floor = 1e-24 * static_cast<double>(n) * (1.0 + fit.init * fit.init);
  fit.train_loss.push_back(residual.squaredNorm() / static_cast<double>(n));

  std::vector<int> node_of(n);
  for (int t = 0; t < options.n_trees; ++t) {
    const double sse = residual.squaredNorm();
    if (sse <= floor) break;
    auto tree = grow_tree(X, residual, presorted, options, 1e-12 * sse, node_of);
    if (tree.nodes.size() == 1) break;
    for (std::size_t i = 0; i < n; ++i) {
      pred(static_cast<Eigen::Index>(i)) += options.learning_rate * tree.nodes[static_cast<std::size_t>(node_of[i])].value;
    }
    residual = y - pred;
    fit.train_loss.push_back(residual.squaredNorm() / static_cast<double>(n));
    fit.trees.push_back(std::move(tree));
  }
  return fit;
}

Eigen::VectorXd predict_gbm(const GbmFit& fit, const Eigen::MatrixXd& X) {
  if (X.cols() != fit.n_features) {
    throw Error(ErrorCode::Shape, "predict_gbm: expected " + std::to_string(fit.n_features) + " columns, got " +
                                      std::to_string(X.cols()));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), fit.init);
  for (const auto& tree : fit.trees) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) += fit.options.learning_rate * tree.predict(X.row(i));
  }
  return out;
}

nlohmann::json GbmFit::to_json() const {
  nlohmann::json trees_json = nlohmann::json::array();
  for (const auto& t : trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes) nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
    trees_json.push_back(std::move(nodes));
  }
  return {{"n_trees", options.n_trees},
          {"learning_rate", options.learning_rate},
          {"max_depth", options.max_depth},
          {"min_samples_leaf", options.min_samples_leaf},
          {"n_features", n_features},
          {"init", init},
          {"train_loss", train_loss},
          {"trees", trees_json}};
}

GbmFit GbmFit::from_json(const nlohmann::json& j) {
  GbmFit f;
  try {
    f.options.n_trees = j.at("n_trees").get<int>();
    f.options.learning_rate = j.at("learning_rate").get<double>();
    f.options.max_depth = j.at("max_depth").get<int>();
    f.options.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    f.n_features = j.at("n_features").get<int>();
    f.init = j.at("init").get<double>();
    f.train_loss = j.at("train_loss").get<std::vector<double>>();
    for (const auto& t : j.at("trees")) {
      RegressionTree tree;
      for (const auto& nd : t) {
        tree.nodes.push_back({nd.at(0).get<int>(), nd.at(1).get<double>(), nd.at(2).get<int>(), nd.at(3).get<int>(),
                              nd.at(4).get<double>()});
      }
      const auto size = static_cast<int>(tree.nodes.size());
      // Children always follow their parent, which also rules out cycles.
      for (int k = 0; k < size; ++k) {
        const auto& nd = tree.nodes[static_cast<std::size_t>(k)];
        if (nd.feature >= f.n_features ||
            (nd.feature >= 0 && (nd.left <= k || nd.left >= size || nd.right <= k || nd.right >= size))) {
          throw Error(ErrorCode::Schema, "gbm model: malformed tree");
        }
      }
      if (tree.nodes.empty()) throw Error(ErrorCode::Schema, "gbm model: empty tree");
      f.trees.push_back(std::move(tree));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("gbm model: ") + e.what());
  }
  return f;
}

}  // namespace aipoll
