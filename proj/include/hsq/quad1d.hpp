#pragma once

#include <memory>
#include <vector>

namespace hsq {

// Gauss–Hermite rules for the standard normal density.
struct UnivariateRule {
  int level = 0;
  std::vector<double> nodes;    // ascending
  std::vector<double> weights;  // sum to 1
};

// Q_ν − Q_{ν−1} on the union of both node sets.
struct DifferenceRule {
  int level = 0;
  std::vector<double> nodes;  // ascending, coincident nodes merged
  std::vector<double> signed_weights;
};

inline constexpr int kMaxRuleLevel = 200;

// m_ν = ν + 1. Kept separate so a different growth rule only touches one place.
int points_for_level(int level);

// Both return references into a process-wide cache; entries are never evicted.
// Throws std::invalid_argument for level < 0 or level > kMaxRuleLevel.
const UnivariateRule& hermite_rule(int level);
const DifferenceRule& difference_rule(int level);

// Uncached Golub–Welsch computation, used by the cache and by tests.
UnivariateRule compute_hermite_rule(int level);
DifferenceRule compute_difference_rule(int level);

template <class F>
double apply(const UnivariateRule& rule, F&& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * g(rule.nodes[i]);
  return s;
}

template <class F>
double apply(const DifferenceRule& rule, F&& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.signed_weights[i] * g(rule.nodes[i]);
  return s;
}

}  // namespace hsq
