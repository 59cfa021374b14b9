#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rotlab/coupling.hpp"
#include "rotlab/errors.hpp"
#include "rotlab/measure.hpp"
#include "rotlab/metric.hpp"

namespace rotlab {
namespace detail {

// Transportation simplex: min <c,x> over row sums = a, col sums = b, x >= 0.
// Entering variable and min-ratio ties are broken lexicographically (Bland),
// so the returned basic solution is a vertex and fully deterministic.
class TransportSimplex {
 public:
  TransportSimplex(const std::vector<double>& cost, std::vector<double> a, std::vector<double> b)
      : m_(a.size()), n_(b.size()), c_(cost), a_(std::move(a)), b_(std::move(b)) {
    flow_.assign(m_ * n_, 0.0);
    basic_.assign(m_ * n_, 0);
  }

  double solve() {
    if (m_ == 1) {
      for (std::size_t j = 0; j < n_; ++j) flow_[j] = b_[j];
      return objective();
    }
    if (n_ == 1) {
      for (std::size_t i = 0; i < m_; ++i) flow_[i] = a_[i];
      return objective();
    }
    northwest_corner();
    double scale = 1.0;
    for (double v : c_) scale = std::max(scale, std::abs(v));
    const double tol = 1e-11 * scale;
    const std::size_t max_pivots = 1000 + 64 * (m_ + n_) * (m_ + n_);
    std::vector<double> u(m_), v(n_);
    for (std::size_t pivot = 0;; ++pivot) {
      require(pivot < max_pivots, errc::solver_failure, "transport simplex failed to converge");
      compute_duals(u, v);
      std::size_t ei = m_, ej = n_;
      for (std::size_t i = 0; i < m_ && ei == m_; ++i)
        for (std::size_t j = 0; j < n_; ++j) {
          if (basic_[i * n_ + j]) continue;
          if (c_[i * n_ + j] - u[i] - v[j] < -tol) {
            ei = i;
            ej = j;
            break;
          }
        }
      if (ei == m_) break;  // optimal
      pivot_on(ei, ej);
    }
    for (double& f : flow_) {
      if (f < 0.0) f = 0.0;
    }
    return objective();
  }

  const std::vector<double>& flow() const { return flow_; }

 private:
  double objective() const {
    double s = 0.0;
    for (std::size_t k = 0; k < flow_.size(); ++k) s += flow_[k] * c_[k];
    return s;
  }

  void northwest_corner() {
    std::vector<double> ra = a_, rb = b_;
    std::size_t i = 0, j = 0;
    while (true) {
      const double t = std::min(ra[i], rb[j]);
      flow_[i * n_ + j] = t;
      basic_[i * n_ + j] = 1;
      ra[i] -= t;
      rb[j] -= t;
      if (i == m_ - 1 && j == n_ - 1) break;
      if (i == m_ - 1)
        ++j;
      else if (j == n_ - 1)
        ++i;
      else if (ra[i] <= rb[j])
        ++i;
      else
        ++j;
    }
  }

  // Dual potentials from the basis tree; u[0] anchored at 0.
  void compute_duals(std::vector<double>& u, std::vector<double>& v) const {
    std::vector<char> udone(m_, 0), vdone(n_, 0);
    std::vector<std::size_t> stack;
    u[0] = 0.0;
    udone[0] = 1;
    stack.push_back(0);  // row nodes: [0,m), col nodes: m + j
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      if (node < m_) {
        const std::size_t i = node;
        for (std::size_t j = 0; j < n_; ++j)
          if (basic_[i * n_ + j] && !vdone[j]) {
            v[j] = c_[i * n_ + j] - u[i];
            vdone[j] = 1;
            stack.push_back(m_ + j);
          }
      } else {
        const std::size_t j = node - m_;
        for (std::size_t i = 0; i < m_; ++i)
          if (basic_[i * n_ + j] && !udone[i]) {
            u[i] = c_[i * n_ + j] - v[j];
            udone[i] = 1;
            stack.push_back(i);
          }
      }
    }
  }

  // Unique alternating cycle created by the entering cell: the tree path from
  // col ej back to row ei, then the entering cell closes the loop.
  void pivot_on(std::size_t ei, std::size_t ej) {
    const std::size_t nodes = m_ + n_;
    std::vector<std::int64_t> parent(nodes, -1);
    std::vector<char> seen(nodes, 0);
    std::vector<std::size_t> queue;
    seen[ei] = 1;
    queue.push_back(ei);
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const std::size_t node = queue[qi];
      if (node == m_ + ej) break;
      if (node < m_) {
        const std::size_t i = node;
        for (std::size_t j = 0; j < n_; ++j)
          if (basic_[i * n_ + j] && !seen[m_ + j]) {
            seen[m_ + j] = 1;
            parent[m_ + j] = static_cast<std::int64_t>(node);
            queue.push_back(m_ + j);
          }
      } else {
        const std::size_t j = node - m_;
        for (std::size_t i = 0; i < m_; ++i)
          if (basic_[i * n_ + j] && !seen[i]) {
            seen[i] = 1;
            parent[i] = static_cast<std::int64_t>(node);
            queue.push_back(i);
          }
      }
    }
    require(seen[m_ + ej], errc::solver_failure, "basis lost tree connectivity");

    // Walk ej -> ei; cells along the path alternate -,+,-,... after the
    // entering (+) cell.
    std::vector<std::size_t> path_cells;
    std::size_t node = m_ + ej;
    while (node != ei) {
      const std::size_t par = static_cast<std::size_t>(parent[node]);
      const std::size_t i = node < m_ ? node : par;
      const std::size_t j = node < m_ ? par - m_ : node - m_;
      path_cells.push_back(i * n_ + j);
      node = par;
    }

    double theta = kInf;
    std::size_t leave = flow_.size();
    for (std::size_t t = 0; t < path_cells.size(); t += 2) {  // minus positions
      const std::size_t cell = path_cells[t];
      if (flow_[cell] < theta - 1e-15) {
        theta = flow_[cell];
        leave = cell;
      } else if (flow_[cell] < theta + 1e-15) {
        theta = std::min(theta, flow_[cell]);
        leave = std::min(leave, cell);
      }
    }
    require(leave < flow_.size(), errc::solver_failure, "degenerate pivot cycle");

    flow_[ei * n_ + ej] += theta;
    for (std::size_t t = 0; t < path_cells.size(); ++t) {
      if (t % 2 == 0)
        flow_[path_cells[t]] -= theta;
      else
        flow_[path_cells[t]] += theta;
    }
    basic_[ei * n_ + ej] = 1;
    basic_[leave] = 0;
    flow_[leave] = 0.0;
  }

  std::size_t m_, n_;
  std::vector<double> c_;
  std::vector<double> a_, b_;
  std::vector<double> flow_;
  std::vector<char> basic_;
};

// Dinic max-flow with real capacities, used for W_inf feasibility checks.
class Dinic {
 public:
  explicit Dinic(std::size_t nodes) : head_(nodes, -1), level_(nodes), it_(nodes) {}

  void add_edge(std::size_t from, std::size_t to, double cap) {
    edges_.push_back({to, head_[from], cap});
    head_[from] = static_cast<std::int64_t>(edges_.size()) - 1;
    edges_.push_back({from, head_[to], 0.0});
    head_[to] = static_cast<std::int64_t>(edges_.size()) - 1;
  }

  double max_flow(std::size_t s, std::size_t t) {
    double total = 0.0;
    while (bfs(s, t)) {
      it_ = head_;
      while (true) {
        const double pushed = dfs(s, t, kInf);
        if (pushed <= 1e-15) break;
        total += pushed;
      }
    }
    return total;
  }

  double edge_flow(std::size_t edge_id) const { return edges_[2 * edge_id + 1].cap; }

 private:
  struct Edge {
    std::size_t to;
    std::int64_t next;
    double cap;
  };

  bool bfs(std::size_t s, std::size_t t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::vector<std::size_t> queue{s};
    level_[s] = 0;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const std::size_t u = queue[qi];
      for (std::int64_t e = head_[u]; e >= 0; e = edges_[e].next) {
        if (edges_[e].cap > 1e-15 && level_[edges_[e].to] < 0) {
          level_[edges_[e].to] = level_[u] + 1;
          queue.push_back(edges_[e].to);
        }
      }
    }
    return level_[t] >= 0;
  }

  double dfs(std::size_t u, std::size_t t, double limit) {
    if (u == t) return limit;
    for (std::int64_t& e = it_[u]; e >= 0; e = edges_[e].next) {
      Edge& ed = edges_[e];
      if (ed.cap > 1e-15 && level_[ed.to] == level_[u] + 1) {
        const double pushed = dfs(ed.to, t, std::min(limit, ed.cap));
        if (pushed > 1e-15) {
          ed.cap -= pushed;
          edges_[e ^ 1].cap += pushed;
          return pushed;
        }
      }
    }
    return 0.0;
  }

  std::vector<std::int64_t> head_;
  std::vector<int> level_;
  std::vector<std::int64_t> it_;
  std::vector<Edge> edges_;
};

// Shared driver: exact OT for a dense cost-of-distances matrix between two
// weight vectors. Zero-weight atoms take no part in the LP but stay in the
// returned plan as zero rows/columns.
struct ExactPlan {
  std::vector<double> flow;  // m*n, row-major
  double cost_value = 0.0;   // sum c*flow (p-th powers for finite p)
  double max_dist = 0.0;     // max distance on the support of the plan
};

inline ExactPlan solve_finite_p(const std::vector<double>& dist, const std::vector<double>& a,
                                const std::vector<double>& b, double p) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<std::size_t> ri, cj;
  for (std::size_t i = 0; i < m; ++i)
    if (a[i] > 0.0) ri.push_back(i);
  for (std::size_t j = 0; j < n; ++j)
    if (b[j] > 0.0) cj.push_back(j);
  std::vector<double> cost(ri.size() * cj.size());
  std::vector<double> ra(ri.size()), rb(cj.size());
  for (std::size_t i = 0; i < ri.size(); ++i) ra[i] = a[ri[i]];
  for (std::size_t j = 0; j < cj.size(); ++j) rb[j] = b[cj[j]];
  for (std::size_t i = 0; i < ri.size(); ++i)
    for (std::size_t j = 0; j < cj.size(); ++j)
      cost[i * cj.size() + j] = std::pow(dist[ri[i] * n + cj[j]], p);
  TransportSimplex simplex(cost, ra, rb);
  ExactPlan out;
  out.cost_value = simplex.solve();
  out.flow.assign(m * n, 0.0);
  for (std::size_t i = 0; i < ri.size(); ++i)
    for (std::size_t j = 0; j < cj.size(); ++j) {
      const double f = simplex.flow()[i * cj.size() + j];
      out.flow[ri[i] * n + cj[j]] = f;
      if (f > 0.0) out.max_dist = std::max(out.max_dist, dist[ri[i] * n + cj[j]]);
    }
  return out;
}

inline bool bottleneck_feasible(const std::vector<double>& dist, const std::vector<std::size_t>& ri,
                                const std::vector<std::size_t>& cj, const std::vector<double>& a,
                                const std::vector<double>& b, std::size_t n, double threshold,
                                std::vector<double>* flow_out) {
  const std::size_t nr = ri.size(), nc = cj.size();
  Dinic dinic(2 + nr + nc);
  for (std::size_t i = 0; i < nr; ++i) dinic.add_edge(0, 2 + i, a[ri[i]]);
  for (std::size_t j = 0; j < nc; ++j) dinic.add_edge(2 + nr + j, 1, b[cj[j]]);
  std::vector<std::pair<std::size_t, std::size_t>> pair_edges;  // (edge id, flat cell)
  std::size_t edge_id = nr + nc;
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j)
      if (dist[ri[i] * n + cj[j]] <= threshold + 1e-15) {
        dinic.add_edge(2 + i, 2 + nr + j, 2.0);
        pair_edges.push_back({edge_id++, ri[i] * n + cj[j]});
      }
  const double flow = dinic.max_flow(0, 1);
  if (flow < 1.0 - 1e-12) return false;
  if (flow_out) {
    flow_out->assign(a.size() * n, 0.0);
    for (auto [eid, cell] : pair_edges) (*flow_out)[cell] = std::max(0.0, dinic.edge_flow(eid));
  }
  return true;
}

// Smallest threshold t among the pairwise distances such that a coupling
// supported on {d <= t} exists.
inline ExactPlan solve_bottleneck(const std::vector<double>& dist, const std::vector<double>& a,
                                  const std::vector<double>& b) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<std::size_t> ri, cj;
  for (std::size_t i = 0; i < m; ++i)
    if (a[i] > 0.0) ri.push_back(i);
  for (std::size_t j = 0; j < n; ++j)
    if (b[j] > 0.0) cj.push_back(j);
  std::vector<double> candidates;
  for (auto i : ri)
    for (auto j : cj) candidates.push_back(dist[i * n + j]);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::size_t lo = 0, hi = candidates.size() - 1;
  require(bottleneck_feasible(dist, ri, cj, a, b, n, candidates[hi], nullptr),
          errc::solver_failure, "bottleneck infeasible at max distance");
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (bottleneck_feasible(dist, ri, cj, a, b, n, candidates[mid], nullptr))
      hi = mid;
    else
      lo = mid + 1;
  }
  ExactPlan out;
  bottleneck_feasible(dist, ri, cj, a, b, n, candidates[lo], &out.flow);
  out.max_dist = 0.0;
  for (auto i : ri)
    for (auto j : cj)
      if (out.flow[i * n + j] > 0.0) out.max_dist = std::max(out.max_dist, dist[i * n + j]);
  out.cost_value = out.max_dist;
  return out;
}

inline std::vector<double> cross_distance_matrix(const MetricSpace& sa, const MetricSpace& sb) {
  require(compatible(sa, sb), errc::incompatible_spaces, "measures on incompatible spaces");
  std::vector<double> d(sa.size() * sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i)
    for (std::size_t j = 0; j < sb.size(); ++j) d[i * sb.size() + j] = cross_dist(sa, i, sb, j);
  return d;
}

}  // namespace detail

struct TransportPlanResult {
  double value = 0.0;
  Coupling plan;
  double p = 1.0;
  bool exact_flag = true;  // exact LP / bottleneck solve (vs. an entropic approximation)
};

// W_p(mu, nu) with an optimal plan. p < inf solves the linear program exactly
// (vertex solution, deterministic tie-break); p = inf solves the bottleneck
// problem via max-flow feasibility over the sorted pairwise distances. The
// p-th root is taken once at the end.
inline TransportPlanResult wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                       double p) {
  require(p >= 1.0, errc::bad_order, "wasserstein requires p >= 1");
  const auto dist = detail::cross_distance_matrix(mu.space(), nu.space());
  detail::ExactPlan ep = is_inf(p) ? detail::solve_bottleneck(dist, mu.weights(), nu.weights())
                                   : detail::solve_finite_p(dist, mu.weights(), nu.weights(), p);
  const double value = is_inf(p) ? ep.max_dist : std::pow(ep.cost_value, 1.0 / p);
  ProductSpace ps({mu.space_ptr(), nu.space_ptr()}, p);
  return TransportPlanResult{value, Coupling(std::move(ps), std::move(ep.flow)), p, true};
}

// (1/2) sum |mu - nu| over the common support; equals sup_A |mu(A) - nu(A)|.
inline double total_variation(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require(mu.space().content_equal(nu.space()), errc::incompatible_spaces,
          "total variation needs a common support universe");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += std::abs(mu.weight(i) - nu.weight(i));
  return 0.5 * s;
}

// W_p(mu_1,...,mu_N; nu_1,...,nu_N): l^p aggregation of componentwise W_p.
inline double marginal_tuple_distance(const std::vector<DiscreteMeasure>& mus,
                                      const std::vector<DiscreteMeasure>& nus, double p) {
  require(mus.size() == nus.size() && !mus.empty(), errc::length_mismatch,
          "marginal tuples must have equal nonzero length");
  std::vector<double> parts(mus.size());
  for (std::size_t i = 0; i < mus.size(); ++i) parts[i] = wasserstein(mus[i], nus[i], p).value;
  return aggregate_lp(parts, p);
}

// W_p between two couplings viewed as measures on (X, d_{X,p}).
inline double coupling_distance(const Coupling& pi, const Coupling& rho, double p) {
  require(pi.arity() == rho.arity(), errc::incompatible_spaces, "coupling arity mismatch");
  const std::size_t nax = pi.arity();
  std::vector<std::vector<double>> axis_dist(nax);
  for (std::size_t ax = 0; ax < nax; ++ax)
    axis_dist[ax] =
        detail::cross_distance_matrix(pi.product().factor(ax), rho.product().factor(ax));
  const std::size_t m = pi.total(), n = rho.total();
  std::vector<double> dist(m * n);
  std::vector<double> parts(nax);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t l = 0; l < n; ++l) {
      for (std::size_t ax = 0; ax < nax; ++ax) {
        const std::size_t i = pi.shape().coord(k, ax);
        const std::size_t j = rho.shape().coord(l, ax);
        parts[ax] = axis_dist[ax][i * rho.shape().dims[ax] + j];
      }
      dist[k * n + l] = aggregate_lp(parts, p);
    }
  detail::ExactPlan ep = is_inf(p) ? detail::solve_bottleneck(dist, pi.tensor(), rho.tensor())
                                   : detail::solve_finite_p(dist, pi.tensor(), rho.tensor(), p);
  return is_inf(p) ? ep.max_dist : std::pow(ep.cost_value, 1.0 / p);
}

}  // namespace rotlab
