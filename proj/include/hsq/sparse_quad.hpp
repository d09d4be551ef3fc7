#pragma once

#include "hsq/multiindex.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

namespace hsq {

// Sparse parameter point: (dimension, coordinate) pairs sorted by dimension.
// Zero coordinates are omitted so every point has one canonical form.
using SparsePoint = std::vector<std::pair<int, double>>;

std::string to_string(const SparsePoint& xi);

struct Integrand {
  // Must be pure and, when threads > 1, safe to call concurrently.
  std::function<std::vector<double>(const SparsePoint&)> eval;
  int n_outputs = 1;
  int dim_hint = 0;  // largest usable dimension, 0 = unbounded
};

// Point -> integrand value store. Keys round coordinates to 15 significant digits.
class PointCache {
 public:
  const std::vector<double>* find(const SparsePoint& xi) const;
  void insert(const SparsePoint& xi, std::vector<double> value);
  std::size_t size() const { return values_.size(); }
  std::size_t evaluations() const { return evaluations_; }
  void count_evaluation(std::size_t n = 1) { evaluations_ += n; }

 private:
  struct KeyHash {
    std::size_t operator()(const SparsePoint& p) const noexcept;
  };
  std::unordered_map<SparsePoint, std::vector<double>, KeyHash> values_;
  std::size_t evaluations_ = 0;
};

double round_significant(double x, int digits = 15);

// Number of nodes in the tensor difference grid of ν.
std::size_t delta_grid_size(const MultiIndex& nu);

// Δ_ν(g), filling the cache with any new points. `threads` > 1 evaluates the
// uncached points concurrently; the summation order does not depend on it.
std::vector<double> tensor_delta(const MultiIndex& nu, const Integrand& g, PointCache& cache,
                                 int threads = 1);

struct TraceRecord {
  std::size_t step = 0;
  MultiIndex chosen;
  double indicator = 0.0;
  std::size_t n_indices = 0;
  std::size_t n_points = 0;
  std::vector<double> value;
};

enum class StopReason { Tolerance, MaxIndices, MaxPoints, Exhausted };
const char* to_string(StopReason r);

struct QuadratureResult {
  std::vector<double> value;
  std::size_t n_indices = 0;
  std::size_t n_points = 0;
  std::vector<TraceRecord> trace;
  std::vector<MultiIndex> indices;  // adoption order
  bool converged = false;
  StopReason stop_reason = StopReason::Exhausted;
};

// Q_Λ(g) summed in lexicographic index order.
QuadratureResult evaluate(const IndexSet& set, const Integrand& g, int threads = 1);

enum class Construction { APriori, APosteriori };

struct AdaptConfig {
  double tolerance = 0.0;  // <= 0 disables the tolerance test
  std::size_t max_indices = 20000;
  std::size_t max_points = 100000;
  BNuConfig bnu;
  bool work_normalized = false;
  // A posteriori only: when the candidate in the newest open dimension, or every
  // pending candidate, has an indicator at roundoff level the next dimension is
  // opened instead of spending points on noise. The threshold is relative to
  // the largest indicator seen so far.
  bool skip_inert_dimensions = true;
  double inert_threshold = 1e-11;
  int max_inert_run = 8;  // consecutive inert dimensions opened before giving up
  int threads = 1;
};

double indicator(const std::vector<double>& delta, const std::vector<double>& value);

QuadratureResult adapt(const Integrand& g, Construction mode, const AdaptConfig& cfg);

}  // namespace hsq
