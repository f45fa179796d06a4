#include "nrsle/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <regex>
#include <set>
#include <unordered_map>

#include "nrsle/errors.hpp"

namespace nrsle {

namespace {

constexpr Site kMoves[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};

Site operator+(Site a, Site b) { return {a.x + b.x, a.y + b.y}; }

// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

std::vector<bool> keep_outside(const LatticeDomain& domain, const std::vector<Site>& V) {
  std::vector<bool> keep(domain.size(), true);
  for (const Site s : V) {
    const auto i = domain.index_of(s);
    if (!i) throw ValidationError("V", "must be a subset of the domain");
    keep[static_cast<std::size_t>(*i)] = false;
  }
  return keep;
}

// tr(adjacency^m) over the kept sites for m = 0..max_len.
std::vector<std::int64_t> closed_walk_counts(const LatticeDomain& domain, const std::vector<bool>& keep, int max_len) {
  const std::size_t n = domain.size();
  std::vector<std::int64_t> traces(static_cast<std::size_t>(max_len) + 1, 0);
  std::vector<std::int64_t> v(n), w(n);
  for (std::size_t root = 0; root < n; ++root) {
    if (!keep[root]) continue;
    std::fill(v.begin(), v.end(), 0);
    v[root] = 1;
    for (int m = 1; m <= max_len; ++m) {
      std::fill(w.begin(), w.end(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        if (v[i] == 0) continue;
        for (const int j : domain.neighbors(static_cast<int>(i)))
          if (keep[static_cast<std::size_t>(j)]) w[static_cast<std::size_t>(j)] += v[i];
      }
      std::swap(v, w);
      traces[static_cast<std::size_t>(m)] += v[root];
    }
  }
  return traces;
}

}  // namespace

LatticeDomain::LatticeDomain(std::vector<Site> sites) : sites_(std::move(sites)) {
  std::sort(sites_.begin(), sites_.end());
  sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
  if (sites_.empty()) throw ValidationError("sites", "domain is empty");
  if (sites_.size() > static_cast<std::size_t>(kMaxLatticeSites))
    throw ValidationError("sites", "at most 400 sites");
  neighbors_.resize(sites_.size());
  for (std::size_t i = 0; i < sites_.size(); ++i)
    for (const Site d : kMoves)
      if (const auto j = index_of(sites_[i] + d)) neighbors_[i].push_back(*j);
}

LatticeDomain LatticeDomain::rect(int w, int h, Site corner) {
  if (w < 1 || h < 1) throw ValidationError("rect", "width and height must be positive");
  std::vector<Site> sites;
  for (int x = 0; x < w; ++x)
    for (int y = 0; y < h; ++y) sites.push_back({corner.x + x, corner.y + y});
  return LatticeDomain(std::move(sites));
}

LatticeDomain LatticeDomain::parse(const std::string& text) {
  static const std::regex pattern(R"(\s*rect\s+(\d+)\s*[xX]\s*(\d+)\s*)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) throw ValidationError("domain", "expected \"rect WxH\"");
  return rect(std::stoi(m[1]), std::stoi(m[2]));
}

std::optional<int> LatticeDomain::index_of(Site s) const {
  const auto it = std::lower_bound(sites_.begin(), sites_.end(), s);
  if (it == sites_.end() || *it != s) return std::nullopt;
  return static_cast<int>(it - sites_.begin());
}

std::vector<Site> LatticeDomain::boundary() const {
  std::set<Site> out;
  for (const Site s : sites_)
    for (const Site d : kMoves)
      if (!contains(s + d)) out.insert(s + d);
  return {out.begin(), out.end()};
}

Eigen::MatrixXd LatticeDomain::transition() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (const int j : neighbors(static_cast<int>(i))) q(i, j) = 0.25;
  return q;
}

double LatticeDomain::spectral_radius_bound() const {
  int x0 = sites_.front().x, x1 = x0, y0 = sites_.front().y, y1 = y0;
  for (const Site s : sites_) {
    x0 = std::min(x0, s.x), x1 = std::max(x1, s.x);
    y0 = std::min(y0, s.y), y1 = std::max(y1, s.y);
  }
  const double pi = std::numbers::pi;
  // Adjacency of a subgraph is dominated by the box's, 2cos(pi/(W+1)) + 2cos(pi/(H+1)).
  const double rho = 0.5 * (std::cos(pi / (x1 - x0 + 2)) + std::cos(pi / (y1 - y0 + 2)));
  return std::min(1.0, rho * (1.0 + 1e-12));
}

double log_det_green_inverse(const LatticeDomain& domain, const std::vector<bool>& keep) {
  std::vector<int> kept;
  for (std::size_t i = 0; i < domain.size(); ++i)
    if (keep[i]) kept.push_back(static_cast<int>(i));
  if (kept.empty()) return 0.0;
  const auto n = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (const int j : domain.neighbors(kept[static_cast<std::size_t>(a)])) {
      const auto b = std::lower_bound(kept.begin(), kept.end(), j);
      if (b != kept.end() && *b == j) m(a, b - kept.begin()) = -0.25;
    }
  const Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw DegenerateConfigError("I - Q is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double loop_mass(const LatticeDomain& domain, const std::vector<Site>& V) {
  const std::vector<bool> keep = keep_outside(domain, V);
  return log_det_green_inverse(domain, keep) - log_det_green_inverse(domain, std::vector<bool>(domain.size(), true));
}

LoopEnumeration enumerate_loops_cutoff(const LatticeDomain& domain, const std::vector<Site>& V, int max_len) {
  if (max_len < 0 || max_len % 2 != 0 || max_len > 24)
    throw ValidationError("max_len", "must be even and at most 24");
  const std::vector<bool> keep = keep_outside(domain, V);
  const auto all = closed_walk_counts(domain, std::vector<bool>(domain.size(), true), max_len);
  const auto avoiding = closed_walk_counts(domain, keep, max_len);
  CompensatedSum sum;
  for (int m = 2; m <= max_len; m += 2) {
    const auto hitting = all[static_cast<std::size_t>(m)] - avoiding[static_cast<std::size_t>(m)];
    sum.add(static_cast<double>(hitting) * std::pow(0.25, m) / m);
  }
  // tr Q^m <= |A| rho^m, summed over even m > max_len.
  const double rho = domain.spectral_radius_bound();
  LoopEnumeration out;
  out.value = sum.value();
  out.max_len = max_len;
  out.tail_bound = rho < 1.0 ? static_cast<double>(domain.size()) * std::pow(rho, max_len + 2) /
                                   ((max_len + 2) * (1.0 - rho * rho))
                             : INFINITY;
  return out;
}

std::vector<Saw> enumerate_saws(const LatticeDomain& domain, Site start, Site target, const SawOptions& options) {
  const auto target_index = domain.index_of(target);
  if (!target_index) throw ValidationError("target", "must lie in the domain");
  const auto start_index = domain.index_of(start);
  if (!start_index) {
    const auto b = domain.boundary();
    if (!std::binary_search(b.begin(), b.end(), start))
      throw ValidationError("start", "must lie in the domain or on its outer boundary");
  }
  if (options.max_length && *options.max_length < 0) throw ValidationError("max_length", "must be non-negative");

  std::vector<Saw> out;
  if (start == target) {
    if (options.allow_trivial) out.push_back({{start}});
    return out;
  }
  const std::size_t cap = options.max_length ? static_cast<std::size_t>(*options.max_length) : domain.size();
  std::vector<char> used(domain.size(), 0);
  if (start_index) used[static_cast<std::size_t>(*start_index)] = 1;
  std::vector<Site> walk{start};
  std::size_t visited = 0;

  const auto extend = [&](auto&& self) -> void {
    if (++visited > options.budget)
      throw BudgetExceededError("SAW enumeration exceeded its budget", out.size());
    if (walk.size() - 1 >= cap) return;
    for (const Site d : kMoves) {
      const Site next = walk.back() + d;
      const auto i = domain.index_of(next);
      if (!i || used[static_cast<std::size_t>(*i)]) continue;
      walk.push_back(next);
      if (next == target) {
        out.push_back({walk});
      } else {
        used[static_cast<std::size_t>(*i)] = 1;
        self(self);
        used[static_cast<std::size_t>(*i)] = 0;
      }
      walk.pop_back();
    }
  };
  extend(extend);
  return out;
}

bool non_intersecting(const std::vector<Saw>& tuple) {
  std::set<Site> seen;
  std::set<Site> terminals;
  for (const Saw& w : tuple)
    if (!w.vertices.empty()) terminals.insert(w.vertices.back());
  const bool common_end = terminals.size() == 1;
  for (const Saw& w : tuple) {
    for (std::size_t k = 0; k < w.vertices.size(); ++k) {
      const Site s = w.vertices[k];
      if (common_end && k + 1 == w.vertices.size()) continue;
      if (!seen.insert(s).second) return false;
    }
  }
  if (common_end && seen.count(*terminals.begin())) return false;
  return true;
}

double measure_nu(const std::vector<Saw>& tuple, const LatticeDomain& domain, double c, double beta) {
  std::size_t length = 0;
  std::set<Site> in_domain;
  for (const Saw& w : tuple) {
    length += w.length();
    for (std::size_t k = 0; k < w.vertices.size(); ++k) {
      if (domain.contains(w.vertices[k]))
        in_domain.insert(w.vertices[k]);
      else if (k > 0)
        throw ValidationError("tuple", "walks must stay in the domain after their first vertex");
    }
  }
  if (!non_intersecting(tuple)) return 0.0;
  const double log_f = c == 0.0 ? 0.0 : loop_mass(domain, {in_domain.begin(), in_domain.end()});
  return std::exp(-beta * static_cast<double>(length) + 0.5 * c * log_f);
}

PartitionResult partition_sum(const LatticeDomain& domain, const std::vector<Site>& starts, Site target, double c,
                              double beta, const SawOptions& options, Executor& executor) {
  const std::size_t n = starts.size();
  if (n < 1 || n > 4) throw ValidationError("starts", "need 1 to 4 walks");
  if (domain.size() > 64) throw ValidationError("domain", "exhaustive sums need at most 64 sites");
  if (std::set<Site>(starts.begin(), starts.end()).size() != n)
    throw ValidationError("starts", "must be distinct");
  const auto target_index = domain.index_of(target);
  if (!target_index) throw ValidationError("target", "must lie in the domain");

  struct Walk {
    std::uint64_t mask;  // sites in A other than the target
    std::size_t length;
  };
  std::vector<std::vector<Walk>> walks(n);
  PartitionResult result;
  for (std::size_t j = 0; j < n; ++j) {
    for (const Saw& w : enumerate_saws(domain, starts[j], target, options)) {
      std::uint64_t mask = 0;
      for (const Site s : w.vertices)
        if (const auto i = domain.index_of(s); i && *i != *target_index) mask |= std::uint64_t{1} << *i;
      walks[j].push_back({mask, w.length()});
    }
    result.walks_per_start.push_back(walks[j].size());
  }

  const std::uint64_t target_bit = std::uint64_t{1} << *target_index;
  const double log_det_all = log_det_green_inverse(domain, std::vector<bool>(domain.size(), true));
  struct Partial {
    CompensatedSum sum;
    std::size_t tuples = 0;
    std::size_t min_length = SIZE_MAX;
  };
  std::vector<Partial> partials(walks[0].size());
  executor.for_each(walks[0].size(), [&](std::size_t first) {
    Partial& p = partials[first];
    std::unordered_map<std::uint64_t, double> cache;
    const auto log_f = [&](std::uint64_t mask) {
      const auto it = cache.find(mask);
      if (it != cache.end()) return it->second;
      std::vector<bool> keep(domain.size());
      for (std::size_t i = 0; i < domain.size(); ++i) keep[i] = !((mask >> i) & 1U);
      const double v = log_det_green_inverse(domain, keep) - log_det_all;
      cache.emplace(mask, v);
      return v;
    };
    const auto descend = [&](auto&& self, std::size_t j, std::uint64_t mask, std::size_t length) -> void {
      if (j == n) {
        const double lf = c == 0.0 ? 0.0 : log_f(mask | target_bit);
        p.sum.add(std::exp(-beta * static_cast<double>(length) + 0.5 * c * lf));
        ++p.tuples;
        p.min_length = std::min(p.min_length, length);
        return;
      }
      for (const Walk& w : walks[j])
        if ((w.mask & mask) == 0) self(self, j + 1, mask | w.mask, length + w.length);
    };
    descend(descend, 1, walks[0][first].mask, walks[0][first].length);
  });

  CompensatedSum total;
  std::size_t min_length = SIZE_MAX;
  for (const Partial& p : partials) {
    total.add(p.sum.value());
    result.disjoint_tuples += p.tuples;
    min_length = std::min(min_length, p.min_length);
  }
  result.sum = total.value();
  result.min_length = result.disjoint_tuples ? min_length : 0;
  return result;
}

void for_each_polyomino(int max_size, const std::function<void(const std::vector<Site>&)>& visit) {
  if (max_size < 1) return;
  // Cells with y > 0, or y == 0 and x >= 0; offsets keep the marks in a box.
  const int width = 2 * max_size + 1;
  std::vector<char> seen(static_cast<std::size_t>(width * (max_size + 1)), 0);
  const auto slot = [&](Site s) -> char& {
    return seen[static_cast<std::size_t>((s.y) * width + (s.x + max_size))];
  };
  const auto valid = [&](Site s) {
    return (s.y > 0 || (s.y == 0 && s.x >= 0)) && s.y <= max_size && std::abs(s.x) <= max_size;
  };
  std::vector<Site> poly;
  const auto grow = [&](auto&& self, std::vector<Site> untried) -> void {
    while (!untried.empty()) {
      const Site cell = untried.back();
      untried.pop_back();
      poly.push_back(cell);
      visit(poly);
      if (static_cast<int>(poly.size()) < max_size) {
        std::vector<Site> next = untried;
        std::vector<Site> added;
        for (const Site d : kMoves) {
          const Site nb = cell + d;
          if (!valid(nb) || slot(nb)) continue;
          slot(nb) = 1;
          added.push_back(nb);
          next.push_back(nb);
        }
        self(self, std::move(next));
        for (const Site s : added) slot(s) = 0;
      }
      poly.pop_back();
    }
  };
  slot({0, 0}) = 1;
  grow(grow, {{0, 0}});
}

}  // namespace nrsle
