#include "gsmile/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>

#include "gsmile/error.hpp"

namespace gsmile::transport {
namespace {

constexpr double kMassTolerance = 1e-9;
constexpr std::size_t kParallelCostThreshold = 4096;

double ground_cost(std::span<const double> x, std::span<const double> y, int p) {
  double sq = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    sq += d * d;
  }
  return p == 2 ? sq : std::sqrt(sq);
}

void check_same_dim(const embed::WeightedPointCloud& a, const embed::WeightedPointCloud& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyCloud, "transport between empty clouds");
  if (a.dim() != b.dim())
    throw Error(ErrorCode::DimensionMismatch, "clouds have dimensions " + std::to_string(a.dim()) +
                                                  " and " + std::to_string(b.dim()));
}

// Transportation simplex on a spanning-tree basis of exactly rows+cols-1
// cells. Row node i is i, column node j is rows+j.
class TransportSimplex {
 public:
  TransportSimplex(std::span<const double> supply, std::span<const double> demand,
                   std::span<const double> cost)
      : n_(supply.size()), m_(demand.size()), cost_(cost),
        in_basis_(n_ * m_, -1), u_(n_), v_(m_) {
    double cmax = 0.0;
    for (double c : cost_) cmax = std::max(cmax, std::abs(c));
    tol_ = 1e-12 * (1.0 + cmax);
    northwest_corner(supply, demand);
  }

  TransportPlan solve() {
    const std::size_t max_iter = 50 * (n_ + m_) * (n_ + m_) + 1000;
    std::size_t degenerate_streak = 0;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
      compute_potentials();
      const bool bland = degenerate_streak > 10 * (n_ + m_);
      auto entering = price(bland);
      if (!entering) return plan();
      const double theta = pivot(entering->first, entering->second);
      degenerate_streak = theta > 0.0 ? 0 : degenerate_streak + 1;
    }
    throw Error(ErrorCode::InvalidArgument, "transport simplex did not converge");
  }

 private:
  struct Cell {
    std::size_t i, j;
    double flow;
  };

  std::size_t cell_index(std::size_t i, std::size_t j) const { return i * m_ + j; }

  void add_basic(std::size_t i, std::size_t j, double flow) {
    in_basis_[cell_index(i, j)] = static_cast<std::int64_t>(basis_.size());
    basis_.push_back({i, j, std::max(flow, 0.0)});
  }

  // Staircase path from (0,0) to (n-1,m-1): always rows+cols-1 cells, a tree.
  void northwest_corner(std::span<const double> supply, std::span<const double> demand) {
    std::vector<double> s(supply.begin(), supply.end());
    std::vector<double> d(demand.begin(), demand.end());
    std::size_t i = 0, j = 0;
    basis_.reserve(n_ + m_ - 1);
    for (;;) {
      const double f = std::min(s[i], d[j]);
      add_basic(i, j, f);
      s[i] -= f;
      d[j] -= f;
      if (i == n_ - 1 && j == m_ - 1) break;
      if (j == m_ - 1) ++i;
      else if (i == n_ - 1) ++j;
      else if (s[i] <= d[j]) ++i;
      else ++j;
    }
  }

  void build_adjacency() {
    adj_.assign(n_ + m_, {});
    for (std::size_t e = 0; e < basis_.size(); ++e) {
      adj_[basis_[e].i].push_back(e);
      adj_[n_ + basis_[e].j].push_back(e);
    }
  }

  std::size_t other_end(std::size_t node, const Cell& c) const {
    return node < n_ ? n_ + c.j : c.i;
  }

  void compute_potentials() {
    build_adjacency();
    std::vector<std::uint8_t> seen(n_ + m_, 0);
    std::vector<std::size_t> stack{0};
    u_[0] = 0.0;
    seen[0] = 1;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t e : adj_[node]) {
        const Cell& c = basis_[e];
        const std::size_t next = other_end(node, c);
        if (seen[next]) continue;
        seen[next] = 1;
        const double cij = cost_[cell_index(c.i, c.j)];
        if (next < n_) u_[next] = cij - v_[c.j];
        else v_[c.j] = cij - u_[c.i];
        stack.push_back(next);
      }
    }
  }

  std::optional<std::pair<std::size_t, std::size_t>> price(bool bland) const {
    double best = -tol_;
    std::optional<std::pair<std::size_t, std::size_t>> pick;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        if (in_basis_[cell_index(i, j)] >= 0) continue;
        const double rc = cost_[cell_index(i, j)] - u_[i] - v_[j];
        if (rc < best) {
          pick = {i, j};
          if (bland) return pick;
          best = rc;
        }
      }
    }
    return pick;
  }

  // Path of basis edges from row node i to column node n_+j in the tree.
  std::vector<std::size_t> tree_path(std::size_t from, std::size_t to) const {
    constexpr auto kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> parent_edge(n_ + m_, kNone);
    std::vector<std::uint8_t> seen(n_ + m_, 0);
    std::vector<std::size_t> stack{from};
    seen[from] = 1;
    while (!stack.empty() && !seen[to]) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t e : adj_[node]) {
        const std::size_t next = other_end(node, basis_[e]);
        if (seen[next]) continue;
        seen[next] = 1;
        parent_edge[next] = e;
        stack.push_back(next);
      }
    }
    std::vector<std::size_t> path;  // ordered from `to` back toward `from`
    for (std::size_t node = to; node != from;) {
      const std::size_t e = parent_edge[node];
      path.push_back(e);
      node = other_end(node, basis_[e]);
    }
    return path;
  }

  double pivot(std::size_t ei, std::size_t ej) {
    // Cycle: entering (+), then edges from column ej back to row ei
    // alternating (-), (+), ..., ending with (-) at row ei.
    const auto path = tree_path(ei, n_ + ej);
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = 0;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Cell& c = basis_[path[k]];
      const bool better =
          c.flow < theta ||
          (c.flow == theta && cell_index(c.i, c.j) < cell_index(basis_[leaving].i, basis_[leaving].j));
      if (better) {
        theta = c.flow;
        leaving = path[k];
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      Cell& c = basis_[path[k]];
      c.flow = (k % 2 == 0) ? c.flow - theta : c.flow + theta;
    }
    Cell& out = basis_[leaving];
    in_basis_[cell_index(out.i, out.j)] = -1;
    out = {ei, ej, theta};
    in_basis_[cell_index(ei, ej)] = static_cast<std::int64_t>(leaving);
    return theta;
  }

  TransportPlan plan() const {
    TransportPlan p;
    p.rows = n_;
    p.cols = m_;
    p.flows.assign(n_ * m_, 0.0);
    for (const Cell& c : basis_) p.flows[cell_index(c.i, c.j)] = c.flow;
    // Accumulate in row-major order so the cost does not depend on basis order.
    for (std::size_t k = 0; k < p.flows.size(); ++k)
      if (p.flows[k] > 0.0) p.cost += p.flows[k] * cost_[k];
    return p;
  }

  std::size_t n_, m_;
  std::span<const double> cost_;
  std::vector<Cell> basis_;
  std::vector<std::int64_t> in_basis_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<double> u_, v_;
  double tol_ = 0.0;
};

}  // namespace

void check_norm_order(int p) {
  if (p != 1 && p != 2)
    throw Error(ErrorCode::InvalidArgument, "norm order p must be 1 or 2, got " + std::to_string(p));
}

std::vector<double> pairwise_cost_serial(const embed::WeightedPointCloud& a,
                                         const embed::WeightedPointCloud& b, int p) {
  check_same_dim(a, b);
  check_norm_order(p);
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = ground_cost(a.point(i), b.point(j), p);
  return cost;
}

std::vector<double> pairwise_cost(const embed::WeightedPointCloud& a,
                                  const embed::WeightedPointCloud& b, int p) {
  check_same_dim(a, b);
  check_norm_order(p);
  const std::int64_t n = static_cast<std::int64_t>(a.size());
  const std::size_t m = b.size();
  std::vector<double> cost(a.size() * m);
#pragma omp parallel for schedule(static) if (a.size() * m * a.dim() > kParallelCostThreshold)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < m; ++j) cost[row * m + j] = ground_cost(a.point(row), b.point(j), p);
  }
  return cost;
}

TransportPlan solve_transport(std::span<const double> supply, std::span<const double> demand,
                              std::span<const double> cost) {
  if (supply.empty() || demand.empty())
    throw Error(ErrorCode::EmptyInput, "transport problem needs at least one source and sink");
  if (cost.size() != supply.size() * demand.size())
    throw Error(ErrorCode::ShapeMismatch, "cost matrix does not match supply x demand");
  const double s = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double d = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::abs(s - 1.0) > kMassTolerance || std::abs(d - 1.0) > kMassTolerance)
    throw Error(ErrorCode::InvalidArgument, "supply and demand must each sum to 1");
  return TransportSimplex(supply, demand, cost).solve();
}

EmdResult emd(const embed::WeightedPointCloud& a, const embed::WeightedPointCloud& b, int p) {
  const auto cost = pairwise_cost(a, b, p);
  EmdResult r;
  r.plan = solve_transport(a.weights(), b.weights(), cost);
  r.distance = p == 1 ? r.plan.cost : std::sqrt(r.plan.cost);
  return r;
}

double wmd(std::span<const std::string> tokens_a, std::span<const std::string> tokens_b,
           const embed::EmbeddingTable& table) {
  return emd(embed::doc_to_nbow(tokens_a, table), embed::doc_to_nbow(tokens_b, table), 1).distance;
}

double wasserstein_1d(std::span<const double> xs, std::span<const double> ys, int p) {
  if (xs.empty() || ys.empty()) throw Error(ErrorCode::EmptyInput, "wasserstein_1d needs samples");
  check_norm_order(p);
  std::vector<double> x(xs.begin(), xs.end()), y(ys.begin(), ys.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  // Quantile breakpoints live on the grid k / (n*m); walk them with integers.
  const std::uint64_t n = x.size(), m = y.size();
  const double total = static_cast<double>(n) * static_cast<double>(m);
  std::uint64_t i = 0, j = 0, at = 0;
  double acc = 0.0;
  while (i < n && j < m) {
    const std::uint64_t next = std::min((i + 1) * m, (j + 1) * n);
    const double gap = std::abs(x[i] - y[j]);
    acc += (p == 1 ? gap : gap * gap) * static_cast<double>(next - at);
    at = next;
    if ((i + 1) * m == next) ++i;
    if ((j + 1) * n == next) ++j;
  }
  acc /= total;
  return p == 1 ? acc : std::sqrt(acc);
}

double gaussian_weight(double delta, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw Error(ErrorCode::NonPositiveSigma, "sigma must be positive and finite");
  if (!(delta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be nonnegative");
  const double r = delta / sigma;
  return std::exp(-(r * r));
}

double median_sigma(std::span<const double> deltas) {
  if (deltas.empty()) throw Error(ErrorCode::EmptyInput, "median_sigma needs at least one delta");
  std::vector<double> pos;
  for (double d : deltas)
    if (d > 0.0) pos.push_back(d);
  if (pos.empty()) return 1.0;
  std::sort(pos.begin(), pos.end());
  const std::size_t k = pos.size();
  return k % 2 ? pos[k / 2] : 0.5 * (pos[k / 2 - 1] + pos[k / 2]);
}

}  // namespace gsmile::transport
