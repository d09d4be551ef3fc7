#include "hsq/sparse_quad.hpp"

#include "hsq/quad1d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace hsq {

std::string to_string(const SparsePoint& xi) {
  std::ostringstream os;
  os.precision(17);
  os << '{';
  for (std::size_t i = 0; i < xi.size(); ++i) {
    if (i) os << ", ";
    os << xi[i].first << ':' << xi[i].second;
  }
  os << '}';
  return os.str();
}

double round_significant(double x, int digits) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return std::strtod(buf, nullptr);
}

namespace {

SparsePoint rounded(const SparsePoint& xi) {
  SparsePoint key = xi;
  for (auto& [d, x] : key) x = round_significant(x);
  return key;
}

}  // namespace

std::size_t PointCache::KeyHash::operator()(const SparsePoint& p) const noexcept {
  std::size_t h = 0x84222325cbf29ce4ULL;
  for (auto [d, x] : p) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    h ^= static_cast<std::size_t>(d) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::size_t>(bits) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

const std::vector<double>* PointCache::find(const SparsePoint& xi) const {
  auto it = values_.find(rounded(xi));
  return it == values_.end() ? nullptr : &it->second;
}

void PointCache::insert(const SparsePoint& xi, std::vector<double> value) {
  values_.insert_or_assign(rounded(xi), std::move(value));
}

std::size_t delta_grid_size(const MultiIndex& nu) {
  std::size_t n = 1;
  for (auto [d, level] : nu.entries()) n *= difference_rule(level).nodes.size();
  return n;
}

namespace {

std::vector<std::vector<double>> evaluate_points(const Integrand& g,
                                                 const std::vector<SparsePoint>& points,
                                                 int threads) {
  std::vector<std::vector<double>> out(points.size());
  auto run_one = [&](std::size_t i) {
    try {
      out[i] = g.eval(points[i]);
    } catch (const std::exception& e) {
      throw std::runtime_error("integrand evaluation failed at xi = " + to_string(points[i]) +
                               ": " + e.what());
    }
    if (out[i].size() != static_cast<std::size_t>(g.n_outputs)) {
      throw std::runtime_error("integrand returned " + std::to_string(out[i].size()) +
                               " outputs, expected " + std::to_string(g.n_outputs));
    }
  };
  const std::size_t nt =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), points.size());
  if (nt <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) run_one(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(nt);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < nt; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < points.size(); i += nt) run_one(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace

std::vector<double> tensor_delta(const MultiIndex& nu, const Integrand& g, PointCache& cache,
                                 int threads) {
  const auto entries = nu.entries();
  std::vector<const DifferenceRule*> rules;
  for (auto [d, level] : entries) rules.push_back(&difference_rule(level));

  // Enumerate the grid in a fixed order (last dimension fastest).
  std::vector<SparsePoint> points;
  std::vector<double> weights;
  std::vector<std::size_t> counter(rules.size(), 0);
  const std::size_t total = delta_grid_size(nu);
  points.reserve(total);
  weights.reserve(total);
  for (std::size_t n = 0; n < total; ++n) {
    SparsePoint xi;
    double w = 1.0;
    for (std::size_t k = 0; k < rules.size(); ++k) {
      const double x = rules[k]->nodes[counter[k]];
      if (x != 0.0) xi.emplace_back(entries[k].first, x);
      w *= rules[k]->signed_weights[counter[k]];
    }
    points.push_back(std::move(xi));
    weights.push_back(w);
    for (std::size_t k = rules.size(); k-- > 0;) {
      if (++counter[k] < rules[k]->nodes.size()) break;
      counter[k] = 0;
    }
  }

  std::vector<SparsePoint> missing;
  for (const auto& xi : points) {
    if (!cache.find(xi)) missing.push_back(xi);
  }
  if (!missing.empty()) {
    auto values = evaluate_points(g, missing, threads);
    cache.count_evaluation(missing.size());
    for (std::size_t i = 0; i < missing.size(); ++i) cache.insert(missing[i], std::move(values[i]));
  }

  std::vector<double> delta(static_cast<std::size_t>(g.n_outputs), 0.0);
  for (std::size_t n = 0; n < points.size(); ++n) {
    const auto& v = *cache.find(points[n]);
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += weights[n] * v[i];
  }
  return delta;
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::Tolerance: return "tolerance";
    case StopReason::MaxIndices: return "max_indices";
    case StopReason::MaxPoints: return "max_points";
    case StopReason::Exhausted: return "exhausted";
  }
  return "unknown";
}

QuadratureResult evaluate(const IndexSet& set, const Integrand& g, int threads) {
  PointCache cache;
  QuadratureResult res;
  res.value.assign(static_cast<std::size_t>(g.n_outputs), 0.0);
  for (const auto& nu : set.sorted_members()) {
    auto d = tensor_delta(nu, g, cache, threads);
    for (std::size_t i = 0; i < d.size(); ++i) res.value[i] += d[i];
  }
  res.n_indices = set.size();
  res.n_points = cache.size();
  res.indices = set.members();
  res.converged = true;
  return res;
}

double indicator(const std::vector<double>& delta, const std::vector<double>& value) {
  double m = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    m = std::max(m, std::abs(delta[i]) / std::max(1.0, std::abs(value[i])));
  }
  return m;
}

namespace {

struct Candidate {
  std::vector<double> delta;
  bool has_delta = false;
  double ind = 0.0;
  double priority = 0.0;
};

struct QueueKey {
  double priority;
  MultiIndex nu;
};

struct QueueOrder {
  bool operator()(const QueueKey& a, const QueueKey& b) const {
    if (a.priority != b.priority) return a.priority > b.priority;
    return lex_less(a.nu, b.nu);
  }
};

class Adaptive {
 public:
  Adaptive(const Integrand& g, Construction mode, const AdaptConfig& cfg)
      : g_(g), mode_(mode), cfg_(cfg) {
    need_deltas_ = mode == Construction::APosteriori || cfg.tolerance > 0.0;
  }

  QuadratureResult run() {
    QuadratureResult res;
    value_ = tensor_delta(MultiIndex{}, g_, cache_, cfg_.threads);
    res.indices.push_back(MultiIndex{});
    scale_ = indicator(value_, value_);
    record(res, MultiIndex{}, scale_);

    add_candidate(MultiIndex::unit(1));
    check_inert();

    while (true) {
      if (candidates_.empty()) {
        res.stop_reason = StopReason::Exhausted;
        break;
      }
      if (cfg_.tolerance > 0.0 && indicators_.rbegin()->priority <= cfg_.tolerance) {
        res.stop_reason = StopReason::Tolerance;
        res.converged = true;
        break;
      }
      if (cfg_.max_indices > 0 && set_.size() >= cfg_.max_indices) {
        res.stop_reason = StopReason::MaxIndices;
        break;
      }
      if (cfg_.max_points > 0 && cache_.size() >= cfg_.max_points) {
        res.stop_reason = StopReason::MaxPoints;
        break;
      }

      const MultiIndex nu = queue_.begin()->nu;
      Candidate cand = std::move(candidates_.at(nu));
      remove_candidate(nu, cand);
      if (!cand.has_delta) {
        cand.delta = tensor_delta(nu, g_, cache_, cfg_.threads);
        cand.ind = indicator(cand.delta, value_);
      }
      for (std::size_t i = 0; i < value_.size(); ++i) value_[i] += cand.delta[i];
      set_.insert(nu);
      res.indices.push_back(nu);

      if (nu.max_dim() == dim_cap_) {
        inert_run_ = 0;
        open_dimension();
      }
      for (auto& mu : neighbors_created_by(set_, nu, dim_cap_)) {
        if (!candidates_.contains(mu)) add_candidate(mu);
      }
      check_inert();
      record(res, nu, cand.ind);
    }

    res.value = value_;
    res.n_indices = set_.size();
    res.n_points = cache_.size();
    return res;
  }

 private:
  void record(QuadratureResult& res, const MultiIndex& nu, double ind) {
    TraceRecord rec;
    rec.step = res.trace.size();
    rec.chosen = nu;
    rec.indicator = ind;
    rec.n_indices = set_.size();
    rec.n_points = cache_.size();
    rec.value = value_;
    res.trace.push_back(std::move(rec));
  }

  bool dimension_allowed(int d) const { return g_.dim_hint <= 0 || d <= g_.dim_hint; }

  void open_dimension() {
    if (!dimension_allowed(dim_cap_ + 1)) return;
    ++dim_cap_;
    add_candidate(MultiIndex::unit(dim_cap_));
  }

  void add_candidate(const MultiIndex& mu) {
    if (!dimension_allowed(mu.max_dim())) return;
    // Beyond the tabulated rules a direction is simply closed.
    if (mu.linf() > kMaxRuleLevel) return;
    Candidate c;
    if (need_deltas_) {
      c.delta = tensor_delta(mu, g_, cache_, cfg_.threads);
      c.has_delta = true;
      c.ind = indicator(c.delta, value_);
      scale_ = std::max(scale_, c.ind);
    }
    if (mode_ == Construction::APriori) {
      c.priority = -b_coefficient(mu, cfg_.bnu);
    } else if (cfg_.work_normalized) {
      c.priority = c.ind / static_cast<double>(delta_grid_size(mu));
    } else {
      c.priority = c.ind;
    }
    queue_.insert({c.priority, mu});
    if (c.has_delta) indicators_.insert({c.ind, mu});
    candidates_.emplace(mu, std::move(c));
  }

  void remove_candidate(const MultiIndex& mu, const Candidate& c) {
    queue_.erase({c.priority, mu});
    if (c.has_delta) indicators_.erase({c.ind, mu});
    candidates_.erase(mu);
  }

  // Open further dimensions while the newest one looks inert, or every pending
  // indicator is at noise level, and the loop is still going to run.
  void check_inert() {
    if (mode_ != Construction::APosteriori || !cfg_.skip_inert_dimensions) return;
    while (!indicators_.empty()) {
      auto it = candidates_.find(MultiIndex::unit(dim_cap_));
      // Noise level is relative to the largest contribution seen, since an
      // integrand may be tiny everywhere.
      const double noise = cfg_.inert_threshold * scale_;
      const bool newest_inert = it != candidates_.end() && it->second.ind <= noise;
      const bool all_noise = indicators_.rbegin()->priority <= noise;
      if (!newest_inert && !all_noise) return;
      // A met tolerance is trusted only once the newest dimension has shown a signal.
      if (!newest_inert && cfg_.tolerance > 0.0 && indicators_.rbegin()->priority <= cfg_.tolerance) return;
      if (inert_run_ >= cfg_.max_inert_run) return;
      if (!dimension_allowed(dim_cap_ + 1)) return;
      ++inert_run_;
      open_dimension();
    }
  }

  struct IndicatorOrder {
    bool operator()(const QueueKey& a, const QueueKey& b) const {
      if (a.priority != b.priority) return a.priority < b.priority;
      return lex_less(a.nu, b.nu);
    }
  };

  const Integrand& g_;
  Construction mode_;
  const AdaptConfig& cfg_;
  bool need_deltas_ = true;
  IndexSet set_;
  PointCache cache_;
  std::vector<double> value_;
  std::unordered_map<MultiIndex, Candidate, MultiIndexHash> candidates_;
  std::set<QueueKey, QueueOrder> queue_;
  std::set<QueueKey, IndicatorOrder> indicators_;
  int dim_cap_ = 1;
  int inert_run_ = 0;
  double scale_ = 0.0;
};

}  // namespace

QuadratureResult adapt(const Integrand& g, Construction mode, const AdaptConfig& cfg) {
  if (!g.eval) throw std::invalid_argument("adapt: integrand has no eval");
  if (cfg.tolerance <= 0.0 && cfg.max_indices == 0 && cfg.max_points == 0) {
    throw std::invalid_argument("adapt: need a tolerance or a budget");
  }
  Adaptive a(g, mode, cfg);
  return a.run();
}

}  // namespace hsq
