#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rotlab/cost.hpp"
#include "rotlab/coupling.hpp"
#include "rotlab/divergence.hpp"
#include "rotlab/exact.hpp"
#include "rotlab/measure.hpp"

namespace rotlab {

struct BoundInputs {
  int N = 2;
  double p = 2.0;
  double q = 1.0;
  double L = 0.0;         // cost-condition constant
  double C_q = 0.0;       // transport inequality (I_q)
  double C_q_prime = 0.0; // transport inequality (I_q')
  double delta = 0.0;     // marginal-tuple distance
  double a = 0.0;         // cost-stability constant
  double lip = 0.0;       // Lipschitz constant of the cost
  double cost_gap = 0.0;  // ||c - c~||_{L^p(P)}
};

struct StabilityCertificate {
  std::string theorem;
  double bound = 0.0;
  double measured = 0.0;
  bool holds = false;
  double looseness = 0.0;  // bound / measured, inf when measured is 0
  BoundInputs constants;
};

inline StabilityCertificate make_certificate(std::string theorem, double bound, double measured,
                                             BoundInputs constants, double tol = 1e-7) {
  StabilityCertificate cert;
  cert.theorem = std::move(theorem);
  cert.bound = bound;
  cert.measured = measured;
  cert.holds = measured <= bound + tol;
  cert.looseness = measured > 0.0 ? bound / measured : kInf;
  cert.constants = constants;
  return cert;
}

namespace detail {

// x^e with the 0^e = 0 convention, so that bounds vanish cleanly at delta=0
// even when a multiplying constant is infinite.
inline double pow0(double x, double e) { return x <= 0.0 ? 0.0 : std::pow(x, e); }

// N^(1/q - 1/p); 1/p reads as 0 at p = inf
inline double jensen_factor(double n, double q, double p) {
  const double inv_p = is_inf(p) ? 0.0 : 1.0 / p;
  return std::pow(n, 1.0 / q - inv_p);
}

}  // namespace detail

// ---- cost condition (A_L) constants ----

// Quadratic cost on R^d x R^d at p = 2: L = sqrt(2) [M(mu1)+M(mu~1)+M(mu2)+M(mu~2)],
// M the second moment about the origin.
inline double cost_condition_constant_quadratic(const std::vector<DiscreteMeasure>& mus,
                                                const std::vector<DiscreteMeasure>& tildes) {
  require(mus.size() == 2 && tildes.size() == 2, errc::bad_order,
          "quadratic cost condition is two-marginal");
  double s = 0.0;
  for (const auto* tuple : {&mus, &tildes})
    for (const auto& m : *tuple) {
      require(m.space().is_euclidean(), errc::bad_input, "quadratic variant needs euclidean spaces");
      s += p_moment(m, 2.0, Anchor::origin(m.space().dim()));
    }
  return std::sqrt(2.0) * s;
}

// Power cost |x1-x2|^p: L = C_p (sum of p-th moments)^(p-1); C_p is not
// derivable from the statement and must be supplied by the caller.
inline double cost_condition_constant_power(double p, double C_p,
                                            const std::vector<DiscreteMeasure>& mus,
                                            const std::vector<DiscreteMeasure>& tildes) {
  require(p > 1.0 && !is_inf(p), errc::bad_order, "power cost condition needs p in (1, inf)");
  require(C_p > 0.0, errc::bad_input, "caller-supplied C_p must be positive");
  double s = 0.0;
  for (const auto* tuple : {&mus, &tildes})
    for (const auto& m : *tuple) {
      require(m.space().is_euclidean(), errc::bad_input, "power variant needs euclidean spaces");
      s += p_moment(m, p, Anchor::origin(m.space().dim()));
    }
  return C_p * std::pow(s, p - 1.0);
}

namespace detail {

// ||f||_{L^q(pi)} <= a + b sum_i M_p(mu_i, anchor_i)^l for every coupling pi
// of the tuple, from the growth envelope and Jensen (l q <= p). For q = inf
// (p = 1) and p = inf the sup norm on the support is used instead.
inline double factor_lq_bound(const CostFactor& f, const ProductSpace& space,
                              const std::vector<DiscreteMeasure>& tuple, double p) {
  if (is_inf(p) || p == 1.0 || f.growth.b == 0.0) {
    if (f.growth.b == 0.0 && !is_inf(p) && p != 1.0) return f.growth.a;
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
  }
  require(f.growth.l <= p - 1.0 + 1e-12, errc::bad_order,
          "factor growth order exceeds p - 1");
  double s = 0.0;
  for (std::size_t i = 0; i < tuple.size(); ++i)
    s += std::pow(p_moment(tuple[i], p, f.growth.anchors[i]), f.growth.l);
  (void)space;
  return f.growth.a + f.growth.b * s;
}

}  // namespace detail

// Product cost c = f*g with Lipschitz factors: the two Hoelder terms of the
// proof, L = ||f||_{L^q, mu-tuple} Lip_p(g) + ||g||_{L^q, mu~-tuple} Lip_p(f).
// Reproduces the quadratic example exactly when f = g = |x1 - x2|.
inline double cost_condition_constant_product(const CostSpec& c,
                                              const std::vector<DiscreteMeasure>& mus,
                                              const std::vector<DiscreteMeasure>& tildes,
                                              double p) {
  require(c.has_factors(), errc::missing_factors, "product cost condition needs a factorization");
  const auto& [f, g] = c.factors();
  const double bf = detail::factor_lq_bound(f, c.space(), mus, p);
  const double bg = detail::factor_lq_bound(g, c.space(), tildes, p);
  return bf * c.factor_lip(1, p) + bg * c.factor_lip(0, p);
}

namespace detail {

// Uniform variant of the factor bound: valid for every probability measure
// on the given factor supports, via M_p(nu, anchor) <= max_x d(x, anchor).
inline double factor_lq_bound_uniform(const CostFactor& f, const ProductSpace& space, double p) {
  if (is_inf(p) || p == 1.0 || f.growth.b == 0.0) {
    if (f.growth.b == 0.0 && !is_inf(p) && p != 1.0) return f.growth.a;
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
  }
  require(f.growth.l <= p - 1.0 + 1e-12, errc::bad_order, "factor growth order exceeds p - 1");
  double s = 0.0;
  for (std::size_t ax = 0; ax < space.arity(); ++ax) {
    double radius = 0.0;
    for (std::size_t i = 0; i < space.factor(ax).size(); ++i)
      radius = std::max(radius, dist_to_anchor(space.factor(ax), i, f.growth.anchors[ax]));
    s += std::pow(radius, f.growth.l);
  }
  return f.growth.a + f.growth.b * s;
}

}  // namespace detail

// (A_L) constant valid for all marginal tuples supported on the cost's
// factor spaces; used where a single L must cover every Sinkhorn iterate.
inline double cost_condition_constant_product_uniform(const CostSpec& c, double p) {
  require(c.has_factors(), errc::missing_factors, "product cost condition needs a factorization");
  const auto& [f, g] = c.factors();
  const double bf = detail::factor_lq_bound_uniform(f, c.space(), p);
  const double bg = detail::factor_lq_bound_uniform(g, c.space(), p);
  return bf * c.factor_lip(1, p) + bg * c.factor_lip(0, p);
}

// |int c d(pi - rho)| / W_p(pi, rho); 0 when the couplings coincide.
inline double empirical_AL_ratio(const CostSpec& c, const Coupling& pi, const Coupling& rho,
                                 double p) {
  require(pi.total() == c.shape().total && rho.total() == c.shape().total, errc::bad_input,
          "couplings must live on the cost's product space");
  double ci = 0.0, cr = 0.0;
  for (std::size_t k = 0; k < pi.total(); ++k) {
    ci += c.value(k) * pi.at(k);
    cr += c.value(k) * rho.at(k);
  }
  const double w = coupling_distance(pi, rho, p);
  if (w <= 0.0) return 0.0;
  return std::abs(ci - cr) / w;
}

// ---- value and optimizer stability ----

inline double value_stability_bound(double L, double delta) {
  require(L >= 0.0 && delta >= 0.0, errc::bad_input, "constants must be nonnegative");
  return L * delta;
}

// W_q(pi*, pi~*) <= N^(1/q-1/p) Delta + C_q (2 L Delta)^(1/2q). With the
// half-L flag (both tuples satisfy the transport inequality) 2L becomes L.
inline double optimizer_stability_bound_Iq(const BoundInputs& in, bool half_L = false) {
  require(in.q <= in.p + 1e-12 && !is_inf(in.q), errc::bad_order, "requires q <= p, q finite");
  const double factor = half_L ? 1.0 : 2.0;
  return detail::jensen_factor(in.N, in.q, in.p) * in.delta +
         in.C_q * detail::pow0(factor * in.L * in.delta, 1.0 / (2.0 * in.q));
}

inline double optimizer_stability_bound_Iq_prime(const BoundInputs& in, bool half_L = false) {
  require(in.q <= in.p + 1e-12 && !is_inf(in.q), errc::bad_order, "requires q <= p, q finite");
  const double factor = half_L ? 1.0 : 2.0;
  const double d = factor * in.L * in.delta;  // D_KL(shadow, pi~*) bound
  return detail::jensen_factor(in.N, in.q, in.p) * in.delta +
         in.C_q_prime * (detail::pow0(d, 1.0 / in.q) + detail::pow0(d / 2.0, 1.0 / (2.0 * in.q)));
}

// ---- stability with respect to the cost ----

struct CostStabilityBounds {
  double tv = 0.0;
  double kl_sym = 0.0;
  double wq_Iq = 0.0;
  double wq_Iq_prime = 0.0;
  double a = 0.0;        // exp(N|c|_inf) + exp(N|c~|_inf)
  double cost_gap = 0.0; // ||c - c~||_{L^p(P)}
};

inline double cost_gap_lp(const CostSpec& c, const CostSpec& c_tilde, const Coupling& P, double p) {
  require(c.shape().total == c_tilde.shape().total && c.shape().total == P.total(),
          errc::bad_input, "cost/product shape mismatch");
  if (is_inf(p)) {
    double m = 0.0;
    for (std::size_t k = 0; k < P.total(); ++k)
      if (P.at(k) > 0.0) m = std::max(m, std::abs(c.value(k) - c_tilde.value(k)));
    return m;
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < P.total(); ++k)
    acc += P.at(k) * std::pow(std::abs(c.value(k) - c_tilde.value(k)), p);
  return std::pow(acc, 1.0 / p);
}

// For p = inf the exponent p/((p+1)q) reads as 1/q and a^(1/p), a^(1/(p+1))
// read as 1.
inline CostStabilityBounds cost_stability_bounds(const CostSpec& c, const CostSpec& c_tilde,
                                                 const Coupling& P, double p, double q,
                                                 double C_q, double C_q_prime) {
  require(q >= 1.0 && !is_inf(q), errc::bad_order, "q must be finite");
  CostStabilityBounds out;
  const double n = static_cast<double>(P.arity());
  out.a = std::exp(n * c.sup_norm()) + std::exp(n * c_tilde.sup_norm());
  out.cost_gap = cost_gap_lp(c, c_tilde, P, p);
  const double g = out.cost_gap;
  if (is_inf(p)) {
    out.tv = 0.5 * g;
    out.kl_sym = g * g;
    out.wq_Iq = std::pow(2.0, -1.0 / (2.0 * q)) * C_q * detail::pow0(g, 1.0 / q);
    out.wq_Iq_prime = C_q_prime * (detail::pow0(g, 2.0 / q) +
                                   std::pow(2.0, -1.0 / (2.0 * q)) * detail::pow0(g, 1.0 / q));
    return out;
  }
  out.tv = 0.5 * std::pow(out.a, 1.0 / (p + 1.0)) * detail::pow0(g, p / (p + 1.0));
  out.kl_sym = std::pow(out.a, 2.0 / (p + 1.0)) * detail::pow0(g, 2.0 * p / (p + 1.0));
  const double base = std::pow(out.a, 1.0 / p) * g;
  const double e1 = p / ((p + 1.0) * q);
  out.wq_Iq = std::pow(2.0, -1.0 / (2.0 * q)) * C_q * detail::pow0(base, e1);
  out.wq_Iq_prime =
      C_q_prime * (detail::pow0(base, 2.0 * e1) +
                   std::pow(2.0, -1.0 / (2.0 * q)) * detail::pow0(base, e1));
  return out;
}

// ---- stability of optimizers for bounded cost ----

// a := 2 exp(N|c|_inf); stored in BoundInputs::a and entering only through
// a^(1/p), so for p = inf the dependence on |c|_inf disappears.
inline double bounded_cost_a(int N, double sup_norm) {
  return 2.0 * std::exp(static_cast<double>(N) * sup_norm);
}

inline double bounded_cost_stability_bound_Iq(const BoundInputs& in) {
  require(in.q <= in.p + 1e-12 && !is_inf(in.q), errc::bad_order, "requires q <= p, q finite");
  const double af = is_inf(in.p) ? 1.0 : std::pow(in.a, 1.0 / in.p);
  const double e1 = is_inf(in.p) ? 1.0 / in.q : in.p / ((in.p + 1.0) * in.q);
  return detail::jensen_factor(in.N, in.q, in.p) * in.delta +
         std::pow(2.0, -1.0 / (2.0 * in.q)) * in.C_q * detail::pow0(af * in.lip * in.delta, e1);
}

inline double bounded_cost_stability_bound_Iq_prime(const BoundInputs& in) {
  require(in.q <= in.p + 1e-12 && !is_inf(in.q), errc::bad_order, "requires q <= p, q finite");
  const double af = is_inf(in.p) ? 1.0 : std::pow(in.a, 1.0 / in.p);
  const double e1 = is_inf(in.p) ? 1.0 / in.q : in.p / ((in.p + 1.0) * in.q);
  const double base = af * in.lip * in.delta;
  return detail::jensen_factor(in.N, in.q, in.p) * in.delta +
         std::pow(2.0, -1.0 / in.q) * in.C_q_prime *
             (detail::pow0(base, 2.0 * e1) +
              std::pow(2.0, -1.0 / (2.0 * in.q)) * detail::pow0(base, e1));
}

// ell = N + (C_1/sqrt(2)) Lip_inf(c); sharp. Requires q = 1, p = inf.
inline double bounded_cost_lipschitz_ell(int N, double C_1, double lip_inf) {
  return static_cast<double>(N) + (C_1 / std::sqrt(2.0)) * lip_inf;
}

inline double bounded_cost_stability_bound_lipschitz(const BoundInputs& in) {
  require(in.q == 1.0 && is_inf(in.p), errc::bad_order, "lipschitz mode requires q = 1, p = inf");
  return bounded_cost_lipschitz_ell(in.N, in.C_q, in.lip) * in.delta;
}

// ---- Sinkhorn rate constants ----

// Pieces from the convergence proof: C_0 from D_KL(pi*, P_c), C_mu_i the
// grid minimum of the exponential-moment constant (with d(x0, x)^p in the
// exponent, matching the single-space transport inequality the proof cites),
// and the composed marginal-distance bound
//   Delta(n) = C_0 max_i C_mu_i (n^{-1/p} + n^{-1/(2p)}).
struct SinkhornRateConstants {
  double p = 2.0;
  double q = 1.0;
  double kl_star = 0.0;
  double C0 = 0.0;
  std::vector<double> C_mu;
  double C_max = 0.0;
  double L = 0.0;         // uniform cost-condition constant over the iterate marginals
  double C_q_prime = 0.0; // (I_q') constant of the true marginals
  double c0_value = 0.0;  // smallest scalar with value-gap bound <= c0 n^{-1/(2p)} on the range
  double c0_wq = 0.0;     // smallest scalar with W_q bound <= c0 n^{-1/(4pq)} on the range
};

inline double sinkhorn_delta_bound(const SinkhornRateConstants& k, double n) {
  return k.C0 * k.C_max * (std::pow(n, -1.0 / k.p) + std::pow(n, -1.0 / (2.0 * k.p)));
}

inline double sinkhorn_value_gap_bound(const SinkhornRateConstants& k, double n) {
  return k.L * sinkhorn_delta_bound(k, n) + 2.0 * k.kl_star / n;
}

// W_q(pi*, pi^n) bound: the optimizer-stability display with (I_q') for the
// true marginals and Delta = Delta(n), N = 2.
inline double sinkhorn_wq_bound(const SinkhornRateConstants& k, double n) {
  const double d = sinkhorn_delta_bound(k, n);
  return detail::jensen_factor(2.0, k.q, k.p) * d +
         k.C_q_prime * (detail::pow0(2.0 * k.L * d, 1.0 / k.q) +
                        detail::pow0(k.L * d, 1.0 / (2.0 * k.q)));
}

inline SinkhornRateConstants sinkhorn_rate_constants(double p, double q, double kl_star,
                                                     const std::vector<DiscreteMeasure>& mus,
                                                     const ExpMomentGrid& grid, double L,
                                                     double C_q_prime, long n_min, long n_max) {
  require(p >= 1.0 && !is_inf(p), errc::bad_order, "sinkhorn rates need p in [1, inf)");
  require(kl_star >= 0.0, errc::bad_input, "kl_star must be nonnegative");
  SinkhornRateConstants out;
  out.p = p;
  out.q = q;
  out.kl_star = kl_star;
  out.L = L;
  out.C_q_prime = C_q_prime;
  out.C0 = std::max(detail::pow0(2.0 * kl_star, 1.0 / p), detail::pow0(2.0 * kl_star, 1.0 / (2.0 * p)));
  for (std::size_t i = 0; i < mus.size(); ++i) {
    ExpMomentGrid single;
    single.alphas = grid.alphas;
    for (const auto& anchor : grid.anchors) single.anchors.push_back({anchor[i]});
    out.C_mu.push_back(transport_constant_exp_moment(ExpMomentMode::expq, p, {mus[i]}, single));
  }
  out.C_max = *std::max_element(out.C_mu.begin(), out.C_mu.end());
  for (long n = n_min; n <= n_max; ++n) {
    const double nn = static_cast<double>(n);
    out.c0_value = std::max(out.c0_value,
                            sinkhorn_value_gap_bound(out, nn) * std::pow(nn, 1.0 / (2.0 * p)));
    out.c0_wq = std::max(out.c0_wq,
                         sinkhorn_wq_bound(out, nn) * std::pow(nn, 1.0 / (4.0 * p * q)));
  }
  return out;
}

}  // namespace rotlab
