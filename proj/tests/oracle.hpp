// Test-side oracles, deliberately independent of the library's solver paths:
// transport by basic-solution enumeration, bottleneck by Hall/Gale subset
// feasibility, total variation by subset enumeration, 1-D transport by the
// sorted quantile coupling, and regularized transport by coordinate descent
// in a null-space parameterization of the coupling polytope.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

constexpr double kInf = std::numeric_limits<double>::infinity();

// min <c, x> over the transportation polytope by enumerating all spanning
// trees of the bipartite support graph (every vertex of the polytope is such
// a basic solution). Exponential; fine for supports <= 4.
inline double transport_by_enumeration(const std::vector<double>& cost,
                                       const std::vector<double>& a,
                                       const std::vector<double>& b) {
  const std::size_t m = a.size(), n = b.size();
  const std::size_t cells = m * n, nodes = m + n;
  const std::size_t basis = nodes - 1;
  std::vector<std::size_t> pick;
  double best = kInf;

  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    if (pick.size() == basis) {
      // leaf elimination solves the flows on the candidate tree
      std::vector<double> need(nodes);
      for (std::size_t i = 0; i < m; ++i) need[i] = a[i];
      for (std::size_t j = 0; j < n; ++j) need[m + j] = b[j];
      std::vector<int> deg(nodes, 0);
      std::vector<char> alive(basis, 1);
      for (auto cell : pick) {
        ++deg[cell / n];
        ++deg[m + cell % n];
      }
      std::vector<double> flow(basis, 0.0);
      bool ok = true;
      for (std::size_t round = 0; round < basis && ok; ++round) {
        bool progressed = false;
        for (std::size_t e = 0; e < basis && !progressed; ++e) {
          if (!alive[e]) continue;
          const std::size_t i = pick[e] / n, j = m + pick[e] % n;
          std::size_t leaf = nodes, other = nodes;
          if (deg[i] == 1) {
            leaf = i;
            other = j;
          } else if (deg[j] == 1) {
            leaf = j;
            other = i;
          }
          if (leaf == nodes) continue;
          flow[e] = need[leaf];
          need[other] -= flow[e];
          need[leaf] = 0.0;
          --deg[leaf];
          --deg[other];
          alive[e] = 0;
          progressed = true;
        }
        if (!progressed) {
          ok = false;  // not a spanning tree
        }
      }
      if (!ok) return;
      double value = 0.0;
      for (std::size_t e = 0; e < basis; ++e) {
        if (flow[e] < -1e-12) return;  // infeasible basic solution
        value += std::max(flow[e], 0.0) * cost[pick[e]];
      }
      best = std::min(best, value);
      return;
    }
    for (std::size_t cell = from; cell < cells; ++cell) {
      pick.push_back(cell);
      rec(cell + 1);
      pick.pop_back();
    }
  };
  rec(0);
  return best;
}

// W_inf by threshold scan: a coupling supported on {d <= t} exists iff for
// every subset S of positive-mass rows, a(S) <= b(neighbors of S).
inline double bottleneck_by_subsets(const std::vector<double>& dist, const std::vector<double>& a,
                                    const std::vector<double>& b) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<double> thresholds;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (a[i] > 0.0 && b[j] > 0.0) thresholds.push_back(dist[i * n + j]);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  for (double t : thresholds) {
    bool feasible = true;
    for (std::size_t mask = 1; mask < (1u << m) && feasible; ++mask) {
      double need = 0.0, avail = 0.0;
      std::vector<char> reach(n, 0);
      for (std::size_t i = 0; i < m; ++i) {
        if (!(mask & (1u << i)) || a[i] <= 0.0) continue;
        need += a[i];
        for (std::size_t j = 0; j < n; ++j)
          if (dist[i * n + j] <= t + 1e-15) reach[j] = 1;
      }
      for (std::size_t j = 0; j < n; ++j)
        if (reach[j]) avail += b[j];
      feasible = need <= avail + 1e-12;
    }
    if (feasible) return t;
  }
  return kInf;
}

// sup_A |mu(A) - nu(A)| over all subsets
inline double tv_by_subsets(const std::vector<double>& mu, const std::vector<double>& nu) {
  const std::size_t n = mu.size();
  double best = 0.0;
  for (std::size_t mask = 0; mask < (1u << n); ++mask) {
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) d += mu[i] - nu[i];
    best = std::max(best, std::abs(d));
  }
  return best;
}

// W_p on the line between equal-size uniform supports: sorted pairing.
inline double w1d_uniform_quantile(std::vector<double> xs, std::vector<double> ys, double p) {
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const double w = 1.0 / static_cast<double>(xs.size());
  if (p == kInf) {
    double m = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) m = std::max(m, std::abs(xs[i] - ys[i]));
    return m;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) acc += w * std::pow(std::abs(xs[i] - ys[i]), p);
  return std::pow(acc, 1.0 / p);
}

// W_p on the line for arbitrary weighted supports: the monotone (quantile)
// coupling is optimal for every p in [1, inf]. Two-pointer CDF matching.
inline double w1d_quantile_general(std::vector<std::pair<double, double>> a,
                                   std::vector<std::pair<double, double>> b, double p) {
  auto by_point = [](const auto& l, const auto& r) { return l.first < r.first; };
  std::sort(a.begin(), a.end(), by_point);
  std::sort(b.begin(), b.end(), by_point);
  std::size_t i = 0, j = 0;
  double ra = 0.0, rb = 0.0;  // consumed mass of the current atoms
  double acc = 0.0, worst = 0.0;
  // atoms are treated as exhausted below the mass tolerance; at p = inf a
  // leftover rounding sliver would otherwise count at full weight
  while (i < a.size() && j < b.size()) {
    if (a[i].second - ra <= 1e-12) {
      ++i;
      ra = 0.0;
      continue;
    }
    if (b[j].second - rb <= 1e-12) {
      ++j;
      rb = 0.0;
      continue;
    }
    const double step = std::min(a[i].second - ra, b[j].second - rb);
    const double d = std::abs(a[i].first - b[j].first);
    if (p == kInf)
      worst = std::max(worst, d);
    else
      acc += step * std::pow(d, p);
    ra += step;
    rb += step;
  }
  return p == kInf ? worst : std::pow(acc, 1.0 / p);
}

// Brute-force minimization of pi -> sum c*pi + sum f(pi/P)P over the coupling
// polytope: cyclic coordinate descent along a null-space basis of the
// marginal constraints, with golden-section line searches. Start point must
// be feasible (e.g. the product measure).
struct PolytopeProblem {
  std::vector<std::size_t> dims;
  std::vector<double> cost;
  std::vector<double> product;  // reference product weights
  std::function<double(double)> f;
};

inline double polytope_objective(const PolytopeProblem& prob, const std::vector<double>& x) {
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] < -1e-14) return kInf;
    if (prob.product[k] > 0.0)
      acc += prob.cost[k] * x[k] + prob.f(std::max(x[k], 0.0) / prob.product[k]) * prob.product[k];
    else if (x[k] > 1e-14)
      return kInf;
  }
  return acc;
}

// null-space moves: +1/-1 on a 2x2 rectangle in a pair of axes, localized to
// one fixed assignment of every remaining axis (bulk moves across slices do
// not span the null space once N >= 3)
inline std::vector<std::vector<double>> polytope_moves(const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> strides(dims.size(), 1);
  for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i)
    strides[i] = strides[i + 1] * dims[i + 1];
  const std::size_t total = strides[0] * dims[0];
  auto coord = [&](std::size_t k, std::size_t ax) { return (k / strides[ax]) % dims[ax]; };
  std::vector<std::vector<double>> moves;
  for (std::size_t ax1 = 0; ax1 < dims.size(); ++ax1)
    for (std::size_t ax2 = ax1 + 1; ax2 < dims.size(); ++ax2)
      for (std::size_t i1 = 0; i1 < dims[ax1]; ++i1)
        for (std::size_t i2 = i1 + 1; i2 < dims[ax1]; ++i2)
          for (std::size_t j1 = 0; j1 < dims[ax2]; ++j1)
            for (std::size_t j2 = j1 + 1; j2 < dims[ax2]; ++j2) {
              // one move per slice of the remaining axes
              for (std::size_t slice = 0; slice < total; ++slice) {
                if (coord(slice, ax1) != 0 || coord(slice, ax2) != 0) continue;
                std::vector<double> mv(total, 0.0);
                mv[slice + i1 * strides[ax1] + j1 * strides[ax2]] += 1.0;
                mv[slice + i1 * strides[ax1] + j2 * strides[ax2]] -= 1.0;
                mv[slice + i2 * strides[ax1] + j1 * strides[ax2]] -= 1.0;
                mv[slice + i2 * strides[ax1] + j2 * strides[ax2]] += 1.0;
                moves.push_back(std::move(mv));
              }
            }
  return moves;
}

inline std::vector<double> minimize_over_polytope(const PolytopeProblem& prob,
                                                  std::vector<double> start,
                                                  int sweeps = 4000) {
  const auto moves = polytope_moves(prob.dims);
  std::vector<double> x = std::move(start);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double improved = 0.0;
    for (const auto& mv : moves) {
      // feasible t-range keeping x + t*mv >= 0
      double lo = -kInf, hi = kInf;
      for (std::size_t k = 0; k < x.size(); ++k) {
        if (mv[k] > 0.5)
          lo = std::max(lo, -x[k]);
        else if (mv[k] < -0.5)
          hi = std::min(hi, x[k]);
      }
      if (!(hi - lo > 1e-16)) continue;
      auto eval = [&](double t) {
        std::vector<double> y = x;
        for (std::size_t k = 0; k < y.size(); ++k) y[k] = std::max(0.0, y[k] + t * mv[k]);
        return polytope_objective(prob, y);
      };
      // golden-section on [lo, hi]
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double a = lo, b = hi;
      double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
      double f1 = eval(c1), f2 = eval(c2);
      for (int it = 0; it < 120; ++it) {
        if (f1 <= f2) {
          b = c2;
          c2 = c1;
          f2 = f1;
          c1 = b - gr * (b - a);
          f1 = eval(c1);
        } else {
          a = c1;
          c1 = c2;
          f1 = f2;
          c2 = a + gr * (b - a);
          f2 = eval(c2);
        }
      }
      const double t = 0.5 * (a + b);
      const double before = polytope_objective(prob, x);
      const double after = eval(t);
      if (after < before - 1e-16) {
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::max(0.0, x[k] + t * mv[k]);
        improved += before - after;
      }
    }
    if (improved < 1e-15 && sweep > 8) break;
  }
  return x;
}

}  // namespace oracle
