#include "hsq/multiindex.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace hsq {

MultiIndex::MultiIndex(std::vector<Entry> entries) {
  for (auto [dim, level] : entries) {
    if (dim < 1) throw std::invalid_argument("MultiIndex: dimensions are 1-based");
    if (level < 0) throw std::invalid_argument("MultiIndex: negative level");
  }
  std::sort(entries.begin(), entries.end());
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].first == entries[i - 1].first) {
      throw std::invalid_argument("MultiIndex: duplicate dimension");
    }
  }
  std::erase_if(entries, [](const Entry& e) { return e.second == 0; });
  entries_ = std::move(entries);
}

MultiIndex MultiIndex::unit(int dim, int level) {
  MultiIndex nu;
  nu.set(dim, level);
  return nu;
}

int MultiIndex::operator[](int dim) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), dim,
                             [](const Entry& e, int d) { return e.first < d; });
  return (it != entries_.end() && it->first == dim) ? it->second : 0;
}

void MultiIndex::set(int dim, int level) {
  if (dim < 1) throw std::invalid_argument("MultiIndex: dimensions are 1-based");
  if (level < 0) throw std::invalid_argument("MultiIndex: negative level");
  auto it = std::lower_bound(entries_.begin(), entries_.end(), dim,
                             [](const Entry& e, int d) { return e.first < d; });
  if (it != entries_.end() && it->first == dim) {
    if (level == 0) {
      entries_.erase(it);
    } else {
      it->second = level;
    }
  } else if (level > 0) {
    entries_.insert(it, {dim, level});
  }
}

MultiIndex MultiIndex::plus_unit(int dim) const {
  MultiIndex nu = *this;
  nu.set(dim, (*this)[dim] + 1);
  return nu;
}

MultiIndex MultiIndex::minus_unit(int dim) const {
  const int level = (*this)[dim];
  if (level == 0) throw std::invalid_argument("MultiIndex: minus_unit on a zero entry");
  MultiIndex nu = *this;
  nu.set(dim, level - 1);
  return nu;
}

int MultiIndex::linf() const {
  int m = 0;
  for (auto [d, l] : entries_) m = std::max(m, l);
  return m;
}

int MultiIndex::l1() const {
  int s = 0;
  for (auto [d, l] : entries_) s += l;
  return s;
}

bool MultiIndex::precedes(const MultiIndex& other) const {
  for (auto [d, l] : entries_) {
    if (l > other[d]) return false;
  }
  return true;
}

bool lex_less(const MultiIndex& a, const MultiIndex& b) {
  // Walk both sparse lists; the first dimension where the levels differ decides.
  auto ia = a.entries_.begin();
  auto ib = b.entries_.begin();
  while (ia != a.entries_.end() || ib != b.entries_.end()) {
    int da = ia != a.entries_.end() ? ia->first : INT32_MAX;
    int db = ib != b.entries_.end() ? ib->first : INT32_MAX;
    if (da == db) {
      if (ia->second != ib->second) return ia->second < ib->second;
      ++ia;
      ++ib;
    } else if (da < db) {
      return false;  // a has a positive level where b has 0
    } else {
      return true;
    }
  }
  return false;
}

std::string MultiIndex::to_string() const {
  if (entries_.empty()) return "0";
  std::string out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(entries_[i].first);
    out += ':';
    out += std::to_string(entries_[i].second);
  }
  return out;
}

MultiIndex MultiIndex::parse(std::string_view text) {
  if (text == "0" || text.empty()) return {};
  std::vector<Entry> entries;
  while (!text.empty()) {
    auto comma = text.find(',');
    auto item = text.substr(0, comma);
    auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw std::invalid_argument("MultiIndex::parse: expected j:level");
    }
    int dim = 0, level = 0;
    auto r1 = std::from_chars(item.data(), item.data() + colon, dim);
    auto r2 = std::from_chars(item.data() + colon + 1, item.data() + item.size(), level);
    if (r1.ec != std::errc{} || r2.ec != std::errc{} || r1.ptr != item.data() + colon ||
        r2.ptr != item.data() + item.size()) {
      throw std::invalid_argument("MultiIndex::parse: malformed entry");
    }
    entries.emplace_back(dim, level);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return MultiIndex(std::move(entries));
}

std::size_t MultiIndexHash::operator()(const MultiIndex& nu) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (auto [d, l] : nu.entries()) {
    std::size_t v = (static_cast<std::size_t>(d) << 20) ^ static_cast<std::size_t>(l);
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

bool is_admissible(std::span<const MultiIndex> set) {
  std::unordered_set<MultiIndex, MultiIndexHash> lookup(set.begin(), set.end());
  for (const auto& nu : set) {
    for (auto [d, l] : nu.entries()) {
      if (!lookup.contains(nu.minus_unit(d))) return false;
    }
  }
  return true;
}

IndexSet::IndexSet() {
  members_.emplace_back();
  lookup_.insert(members_.back());
}

IndexSet IndexSet::from(std::span<const MultiIndex> members) {
  std::vector<MultiIndex> all(members.begin(), members.end());
  all.emplace_back();
  if (!is_admissible(all)) throw std::invalid_argument("IndexSet::from: set is not admissible");
  // Insert by increasing |ν|_1 so every backward neighbour is already present.
  std::stable_sort(all.begin(), all.end(), [](const MultiIndex& a, const MultiIndex& b) {
    return a.l1() < b.l1() || (a.l1() == b.l1() && lex_less(a, b));
  });
  IndexSet out;
  for (const auto& nu : all) {
    if (!out.contains(nu)) out.insert(nu);
  }
  return out;
}

bool IndexSet::can_add(const MultiIndex& nu) const {
  if (contains(nu)) return false;
  for (auto [d, l] : nu.entries()) {
    if (!contains(nu.minus_unit(d))) return false;
  }
  return true;
}

void IndexSet::insert(const MultiIndex& nu) {
  if (!can_add(nu)) throw std::invalid_argument("IndexSet::insert: " + nu.to_string() +
                                                " would break admissibility");
  members_.push_back(nu);
  lookup_.insert(nu);
  max_active_dim_ = std::max(max_active_dim_, nu.max_dim());
}

std::vector<MultiIndex> IndexSet::sorted_members() const {
  std::vector<MultiIndex> out = members_;
  std::sort(out.begin(), out.end(), LexLess{});
  return out;
}

std::vector<int> IndexSet::max_levels() const {
  std::vector<int> levels(static_cast<std::size_t>(max_active_dim_), 0);
  for (const auto& nu : members_) {
    for (auto [d, l] : nu.entries()) {
      levels[static_cast<std::size_t>(d - 1)] = std::max(levels[static_cast<std::size_t>(d - 1)], l);
    }
  }
  return levels;
}

std::vector<MultiIndex> forward_neighbors(const IndexSet& set) {
  return forward_neighbors(set, set.max_active_dim() + 1);
}

std::vector<MultiIndex> forward_neighbors(const IndexSet& set, int dim_cap) {
  std::unordered_set<MultiIndex, MultiIndexHash> found;
  for (const auto& nu : set.members()) {
    for (int j = 1; j <= dim_cap; ++j) {
      MultiIndex cand = nu.plus_unit(j);
      if (!found.contains(cand) && set.can_add(cand)) found.insert(std::move(cand));
    }
  }
  std::vector<MultiIndex> out(found.begin(), found.end());
  std::sort(out.begin(), out.end(), LexLess{});
  return out;
}

std::vector<MultiIndex> neighbors_created_by(const IndexSet& set, const MultiIndex& added,
                                             int dim_cap) {
  std::vector<MultiIndex> out;
  for (int j = 1; j <= dim_cap; ++j) {
    MultiIndex cand = added.plus_unit(j);
    if (set.can_add(cand)) out.push_back(std::move(cand));
  }
  return out;
}

double BNuConfig::tau(int j) const { return c * std::pow(static_cast<double>(j), beta); }

BNuConfig BNuConfig::for_smoothness(double alpha, int physical_dim) {
  BNuConfig cfg;
  cfg.beta = alpha / physical_dim - 0.5 - 0.05;
  return cfg;
}

double b_coefficient(const MultiIndex& nu, const BNuConfig& cfg) {
  if (cfg.r_cap < 1) throw std::invalid_argument("b_coefficient: r_cap must be >= 1");
  double b = 1.0;
  for (auto [j, level] : nu.entries()) {
    const double t2 = std::pow(cfg.tau(j), 2);
    // Σ_{k=0}^{min(ν_j, r)} C(ν_j, k) τ_j^{2k}
    double factor = 0.0;
    double binom = 1.0;
    double power = 1.0;
    const int kmax = std::min(level, cfg.r_cap);
    for (int k = 0; k <= kmax; ++k) {
      factor += binom * power;
      binom = binom * (level - k) / (k + 1);
      power *= t2;
    }
    b *= factor;
    if (!std::isfinite(b)) {
      throw std::range_error("b_coefficient: overflow for " + nu.to_string());
    }
  }
  return b;
}

}  // namespace hsq
