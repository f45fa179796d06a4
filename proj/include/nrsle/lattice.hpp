#pragma once

// Random-walk loop measure and lambda-SAW weights on finite subsets of Z^2.
//
// A rooted loop of length m gets mass 4^{-m}/m, so with Q = adjacency/4
//   log F_V(A) = log det(I - Q_{A\V}) - log det(I - Q_A).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nrsle/executor.hpp"

namespace nrsle {

struct Site {
  int x = 0;
  int y = 0;
  auto operator<=>(const Site&) const = default;
};

constexpr int kMaxLatticeSites = 400;

class LatticeDomain {
 public:
  /// Sorted, deduplicated. Throws ValidationError when empty or above 400 sites.
  explicit LatticeDomain(std::vector<Site> sites);

  /// {x0, .., x0 + w - 1} x {y0, .., y0 + h - 1}.
  static LatticeDomain rect(int w, int h, Site corner = {0, 0});
  /// "rect WxH" shorthand.
  static LatticeDomain parse(const std::string& text);

  std::size_t size() const { return sites_.size(); }
  const std::vector<Site>& sites() const { return sites_; }
  std::optional<int> index_of(Site s) const;
  bool contains(Site s) const { return index_of(s).has_value(); }
  /// Outer boundary: sites outside A with a neighbor in A.
  std::vector<Site> boundary() const;
  /// Neighbor indices of site i inside A.
  const std::vector<int>& neighbors(int i) const { return neighbors_[static_cast<std::size_t>(i)]; }
  Eigen::MatrixXd transition() const;
  /// Perron-Frobenius bound on the spectral radius of Q from the bounding box.
  double spectral_radius_bound() const;

 private:
  std::vector<Site> sites_;
  std::vector<std::vector<int>> neighbors_;
};

/// log det(I - Q) restricted to the sites with keep[i] set.
double log_det_green_inverse(const LatticeDomain& domain, const std::vector<bool>& keep);

/// log F_V(A). Throws ValidationError when V is not a subset of A.
double loop_mass(const LatticeDomain& domain, const std::vector<Site>& V);

struct LoopEnumeration {
  /// Sum of rooted loop masses in A hitting V with length <= max_len.
  double value = 0.0;
  /// Certified bound on the omitted lengths; the full mass lies in [value, value + tail_bound].
  double tail_bound = 0.0;
  int max_len = 0;
};

/// Counts closed walks by integer powers of the adjacency matrix. max_len even, at most 24.
LoopEnumeration enumerate_loops_cutoff(const LatticeDomain& domain, const std::vector<Site>& V, int max_len);

struct Saw {
  std::vector<Site> vertices;
  std::size_t length() const { return vertices.empty() ? 0 : vertices.size() - 1; }
};

struct SawOptions {
  std::optional<int> max_length;
  /// Walks visited (complete or not) before BudgetExceededError.
  std::size_t budget = 50'000'000;
  /// start == target yields the zero-length walk when set, nothing otherwise.
  bool allow_trivial = true;
};

/// Self-avoiding walks from `start` to `target`; `start` may be in A or on
/// its outer boundary, every later vertex is in A. Depth first, moves in the
/// order +x, +y, -x, -y.
std::vector<Saw> enumerate_saws(const LatticeDomain& domain, Site start, Site target, const SawOptions& options = {});

/// Pairwise disjoint except for a shared final vertex.
bool non_intersecting(const std::vector<Saw>& tuple);

/// exp(-beta |eta|) I(eta) F_eta(A)^{c/2}, eta's vertices in A forming V.
double measure_nu(const std::vector<Saw>& tuple, const LatticeDomain& domain, double c, double beta);

struct PartitionResult {
  double sum = 0.0;
  std::vector<std::size_t> walks_per_start;
  std::size_t disjoint_tuples = 0;
  /// Shortest total length among disjoint tuples.
  std::size_t min_length = 0;
};

/// Sum of measure_nu over non-intersecting tuples with eta^j from starts[j].
/// n <= 4 and |A| <= 64.
PartitionResult partition_sum(const LatticeDomain& domain, const std::vector<Site>& starts, Site target, double c,
                              double beta, const SawOptions& options = {}, Executor& executor = serial_executor());

/// Calls visit(sites) once for every fixed polyomino with at most
/// `max_size` cells, translated so (0, 0) is its lowest-then-leftmost cell
/// (Redelmeier's algorithm).
void for_each_polyomino(int max_size, const std::function<void(const std::vector<Site>&)>& visit);

}  // namespace nrsle
