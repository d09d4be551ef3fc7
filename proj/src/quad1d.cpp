#include "hsq/quad1d.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace hsq {

namespace {

void check_level(int level) {
  if (level < 0) throw std::invalid_argument("quadrature level must be nonnegative");
  if (level > kMaxRuleLevel) {
    throw std::invalid_argument("quadrature level " + std::to_string(level) +
                                " unsupported (max " + std::to_string(kMaxRuleLevel) + ")");
  }
}

template <class Rule>
class RuleCache {
 public:
  template <class Make>
  const Rule& get(int level, Make&& make) {
    {
      std::shared_lock lock(mutex_);
      auto it = rules_.find(level);
      if (it != rules_.end()) return *it->second;
    }
    auto rule = std::make_unique<Rule>(make(level));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = rules_.try_emplace(level, std::move(rule));
    return *it->second;
  }

 private:
  std::shared_mutex mutex_;
  std::unordered_map<int, std::unique_ptr<Rule>> rules_;
};

}  // namespace

int points_for_level(int level) { return level + 1; }

UnivariateRule compute_hermite_rule(int level) {
  check_level(level);
  const int n = points_for_level(level);
  UnivariateRule rule;
  rule.level = level;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  if (n == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = 1.0;
    return rule;
  }

  // Jacobi matrix of He_k: zero diagonal, off-diagonal sqrt(k).
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw std::runtime_error("Golub-Welsch eigensolve failed");

  const Eigen::VectorXd& x = es.eigenvalues();
  Eigen::VectorXd w = es.eigenvectors().row(0).transpose().array().square();

  // Enforce exact symmetry; the middle node of an odd rule is exactly 0.
  for (int i = 0; i < n; ++i) {
    const int k = n - 1 - i;
    if (i > k) break;
    const double node = 0.5 * (x(k) - x(i));
    const double weight = 0.5 * (w(i) + w(k));
    rule.nodes[static_cast<std::size_t>(i)] = -node;
    rule.nodes[static_cast<std::size_t>(k)] = node;
    rule.weights[static_cast<std::size_t>(i)] = weight;
    rule.weights[static_cast<std::size_t>(k)] = weight;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;

  double total = 0.0;
  for (int i = 0; i < n / 2; ++i) total += 2.0 * rule.weights[static_cast<std::size_t>(i)];
  if (n % 2 == 1) total += rule.weights[static_cast<std::size_t>(n / 2)];
  for (double& wi : rule.weights) wi /= total;
  return rule;
}

DifferenceRule compute_difference_rule(int level) {
  check_level(level);
  const UnivariateRule& hi = hermite_rule(level);
  DifferenceRule diff;
  diff.level = level;
  if (level == 0) {
    diff.nodes = hi.nodes;
    diff.signed_weights = hi.weights;
    return diff;
  }
  const UnivariateRule& lo = hermite_rule(level - 1);
  // Merge the two ascending node lists.
  std::size_t i = 0, j = 0;
  while (i < hi.nodes.size() || j < lo.nodes.size()) {
    const bool take_hi = j == lo.nodes.size() || (i < hi.nodes.size() && hi.nodes[i] < lo.nodes[j]);
    const bool same = i < hi.nodes.size() && j < lo.nodes.size() &&
                      std::abs(hi.nodes[i] - lo.nodes[j]) <= 1e-12;
    if (same) {
      diff.nodes.push_back(hi.nodes[i]);
      diff.signed_weights.push_back(hi.weights[i] - lo.weights[j]);
      ++i;
      ++j;
    } else if (take_hi) {
      diff.nodes.push_back(hi.nodes[i]);
      diff.signed_weights.push_back(hi.weights[i]);
      ++i;
    } else {
      diff.nodes.push_back(lo.nodes[j]);
      diff.signed_weights.push_back(-lo.weights[j]);
      ++j;
    }
  }
  return diff;
}

const UnivariateRule& hermite_rule(int level) {
  static RuleCache<UnivariateRule> cache;
  check_level(level);
  return cache.get(level, compute_hermite_rule);
}

const DifferenceRule& difference_rule(int level) {
  static RuleCache<DifferenceRule> cache;
  check_level(level);
  return cache.get(level, compute_difference_rule);
}

}  // namespace hsq
