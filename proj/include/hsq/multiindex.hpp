#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace hsq {

/// Finitely supported multi-index ν = (ν_1, ν_2, ...). Dimensions are 1-based;
/// only strictly positive levels are stored, sorted by dimension.
class MultiIndex {
 public:
  using Entry = std::pair<int, int>;  // (dimension, level)

  MultiIndex() = default;
  explicit MultiIndex(std::vector<Entry> entries);

  static MultiIndex unit(int dim, int level = 1);

  /// Level in dimension `dim` (0 when absent).
  int operator[](int dim) const;
  void set(int dim, int level);

  MultiIndex plus_unit(int dim) const;
  MultiIndex minus_unit(int dim) const;

  std::span<const Entry> entries() const { return entries_; }
  bool is_zero() const { return entries_.empty(); }
  std::size_t support_size() const { return entries_.size(); }
  int max_dim() const { return entries_.empty() ? 0 : entries_.back().first; }
  int linf() const;
  int l1() const;

  /// μ ⪯ ν componentwise.
  bool precedes(const MultiIndex& other) const;

  /// Lexicographic comparison of the dense sequences (ν_1, ν_2, ...).
  friend bool lex_less(const MultiIndex& a, const MultiIndex& b);

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

  /// Canonical "j:ν_j" rendering, e.g. "1:2,3:1"; the zero index renders as "0".
  std::string to_string() const;
  static MultiIndex parse(std::string_view text);

 private:
  std::vector<Entry> entries_;
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& nu) const noexcept;
};

struct LexLess {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const { return lex_less(a, b); }
};

/// True iff every ν in the collection has all backward neighbours ν - e_j in it.
bool is_admissible(std::span<const MultiIndex> set);

/// Downward-closed index set Λ. Always contains the zero index.
class IndexSet {
 public:
  IndexSet();

  /// Builds a set from an arbitrary collection; throws std::invalid_argument
  /// unless the collection (plus 0) is admissible.
  static IndexSet from(std::span<const MultiIndex> members);

  bool contains(const MultiIndex& nu) const { return lookup_.contains(nu); }

  /// ν can be added while keeping the set admissible (ν ∉ Λ, backward neighbours in Λ).
  bool can_add(const MultiIndex& nu) const;

  /// Adds ν; throws std::invalid_argument if that would break admissibility.
  void insert(const MultiIndex& nu);

  std::size_t size() const { return members_.size(); }
  /// Members in insertion order.
  const std::vector<MultiIndex>& members() const { return members_; }
  /// Members in canonical (lexicographic) order.
  std::vector<MultiIndex> sorted_members() const;

  /// j(Λ): largest dimension with a nonzero level in any member.
  int max_active_dim() const { return max_active_dim_; }

  /// Largest level reached in each dimension 1..max_active_dim() (index 0 is dimension 1).
  std::vector<int> max_levels() const;

 private:
  std::vector<MultiIndex> members_;
  std::unordered_set<MultiIndex, MultiIndexHash> lookup_;
  int max_active_dim_ = 0;
};

/// 𝒩(Λ): {ν ∉ Λ : ν - e_j ∈ Λ ∀ j ∈ supp ν, ν_j = 0 ∀ j > j(Λ)+1},
/// returned in lexicographic order.
std::vector<MultiIndex> forward_neighbors(const IndexSet& set);

/// Same rule with the dimension cap given explicitly (ν_j = 0 for j > dim_cap).
std::vector<MultiIndex> forward_neighbors(const IndexSet& set, int dim_cap);

/// Candidates that can become forward neighbours right after `added` joined the
/// set: every admissible `added + e_j` with j ≤ dim_cap. Lexicographic order.
std::vector<MultiIndex> neighbors_created_by(const IndexSet& set, const MultiIndex& added,
                                             int dim_cap);

/// Priority weights τ_j = c·j^β for the a priori construction.
struct BNuConfig {
  double c = 0.5;
  double beta = 0.45;
  int r_cap = 2;

  double tau(int j) const;

  /// β = α/d − 1/2 − 0.05 with c = 0.5.
  static BNuConfig for_smoothness(double alpha, int physical_dim = 1);
};

/// b_ν = Σ_{μ ⪯ ν, |μ|_∞ ≤ r} Π_j C(ν_j, μ_j) τ_j^{2 μ_j}. The sum factorizes over
/// dimensions. Throws std::range_error on overflow.
double b_coefficient(const MultiIndex& nu, const BNuConfig& cfg);

}  // namespace hsq
