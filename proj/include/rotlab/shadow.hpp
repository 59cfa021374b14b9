#pragma once

#include <cmath>
#include <vector>

#include "rotlab/cost.hpp"
#include "rotlab/coupling.hpp"
#include "rotlab/divergence.hpp"
#include "rotlab/exact.hpp"

namespace rotlab {

// Shadow of a coupling onto another marginal tuple: glue W_p-optimal plans
// kappa_i = mu_i (x) K_i between corresponding marginals and push pi through
// the product kernel K(x) = K_1(x_1) (x) ... (x) K_N(x_N).
struct ShadowResult {
  Coupling shadow;
  std::vector<MarkovKernel> kernels;     // K_i
  std::vector<Coupling> plans;           // kappa_i attaining W_p(mu_i, target_i)
  std::vector<DiscreteMeasure> targets;  // mu~_i
  double p = 2.0;
};

namespace detail {

// Disintegration of an optimal plan from its first marginal. Rows at
// zero-weight source atoms are set to the target measure, which keeps the
// kernel total and row-stochastic (any choice works for the shadow).
inline MarkovKernel disintegrate(const Coupling& plan, const DiscreteMeasure& mu,
                                 const DiscreteMeasure& target) {
  const std::size_t m = mu.size(), n = target.size();
  std::vector<double> rows(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (mu.weight(i) > 0.0) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += plan.at(i * n + j);
      for (std::size_t j = 0; j < n; ++j) rows[i * n + j] = plan.at(i * n + j) / s;
    } else {
      for (std::size_t j = 0; j < n; ++j) rows[i * n + j] = target.weight(j);
    }
  }
  return MarkovKernel(mu.space_ptr(), target.space_ptr(), std::move(rows));
}

// Mode product along one axis: out(.., y, ..) = sum_x K(x, y) in(.., x, ..).
inline std::vector<double> push_axis(const std::vector<double>& in, const TensorShape& shape,
                                     std::size_t axis, const MarkovKernel& K) {
  const std::size_t dst = K.target().size();
  std::vector<std::size_t> out_dims = shape.dims;
  out_dims[axis] = dst;
  TensorShape out_shape(out_dims);
  std::vector<double> out(out_shape.total, 0.0);
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < in.size(); ++k) {
    if (in[k] == 0.0) continue;
    shape.unflatten(k, idx);
    const std::size_t xi = idx[axis];
    for (std::size_t yi = 0; yi < dst; ++yi) {
      const double kv = K.at(xi, yi);
      if (kv == 0.0) continue;
      idx[axis] = yi;
      out[out_shape.flatten(idx)] += kv * in[k];
    }
    idx[axis] = xi;
  }
  return out;
}

}  // namespace detail

inline ShadowResult build_shadow(const Coupling& pi, const std::vector<DiscreteMeasure>& targets,
                                 double p) {
  require(targets.size() == pi.arity(), errc::length_mismatch,
          "one target measure per coupling axis");
  ShadowResult out{pi, {}, {}, targets, p};
  std::vector<double> tensor = pi.tensor();
  std::vector<std::size_t> dims = pi.shape().dims;
  std::vector<SpacePtr> out_factors;
  for (std::size_t ax = 0; ax < pi.arity(); ++ax) {
    const DiscreteMeasure mu = pi.marginal(ax);
    TransportPlanResult plan = wasserstein(mu, targets[ax], p);
    MarkovKernel K = detail::disintegrate(plan.plan, mu, targets[ax]);
    TensorShape shape(dims);
    tensor = detail::push_axis(tensor, shape, ax, K);
    dims[ax] = targets[ax].size();
    out_factors.push_back(targets[ax].space_ptr());
    out.kernels.push_back(std::move(K));
    out.plans.push_back(std::move(plan.plan));
  }
  out.shadow = Coupling(ProductSpace(std::move(out_factors), p), std::move(tensor));
  return out;
}

// The two defining relations of the shadow: W_p(pi, shadow) equals the
// marginal-tuple distance exactly, and the divergence to the target product
// does not exceed the one of pi to its own product.
struct ShadowCertificate {
  double wp_pi_shadow = 0.0;
  double tuple_distance = 0.0;
  double df_shadow = 0.0;  // D_f(shadow, (x) targets)
  double df_pi = 0.0;      // D_f(pi, (x) marginals of pi)
  bool distance_equal = false;
  bool divergence_ok = false;
};

inline ShadowCertificate verify_shadow(const Coupling& pi, const ShadowResult& result,
                                       const DivergenceSpec& spec, double p) {
  ShadowCertificate cert;
  cert.wp_pi_shadow = coupling_distance(pi, result.shadow, p);
  std::vector<DiscreteMeasure> mus;
  for (std::size_t ax = 0; ax < pi.arity(); ++ax) mus.push_back(pi.marginal(ax));
  cert.tuple_distance = marginal_tuple_distance(mus, result.targets, p);
  cert.df_shadow = f_divergence(result.shadow, product_measure(result.targets), spec);
  cert.df_pi = f_divergence(pi, product_measure(mus), spec);
  cert.distance_equal = std::abs(cert.wp_pi_shadow - cert.tuple_distance) <= 1e-7;
  cert.divergence_ok = cert.df_shadow <= cert.df_pi + 1e-9;
  return cert;
}

// ||c - Kc||_{L^p(pi)} with (Kc)(x) = sum_y K(x, y) c(y). The kernels must
// come from a shadow on pi's marginals, with source and target supports on
// the coupling's own factor spaces, so that c is defined on both sides.
inline double smoothed_cost_deviation(const CostSpec& c, const Coupling& pi,
                                      const std::vector<MarkovKernel>& kernels, double p) {
  require(kernels.size() == pi.arity(), errc::length_mismatch, "one kernel per axis");
  require(c.space().content_equal(pi.product()), errc::incompatible_spaces,
          "cost must live on the coupling's product space");
  std::vector<double> kc = c.values();
  const TensorShape& shape = c.shape();
  for (std::size_t ax = 0; ax < pi.arity(); ++ax) {
    const MarkovKernel& K = kernels[ax];
    require(K.source().size() == shape.dims[ax] && K.target().size() == shape.dims[ax],
            errc::incompatible_spaces, "kernel must be square on the shared factor space");
    // contract c over the target coordinate: next(.., x, ..) = sum_y K(x,y) kc(.., y, ..)
    std::vector<double> next(kc.size(), 0.0);
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < kc.size(); ++k) {
      if (kc[k] == 0.0) continue;
      shape.unflatten(k, idx);
      const std::size_t yi = idx[ax];
      for (std::size_t xi = 0; xi < shape.dims[ax]; ++xi) {
        const double kv = K.at(xi, yi);
        if (kv == 0.0) continue;
        idx[ax] = xi;
        next[shape.flatten(idx)] += kv * kc[k];
      }
      idx[ax] = yi;
    }
    kc = std::move(next);
  }
  if (is_inf(p)) {
    double m = 0.0;
    for (std::size_t k = 0; k < pi.total(); ++k)
      if (pi.at(k) > 0.0) m = std::max(m, std::abs(c.value(k) - kc[k]));
    return m;
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < pi.total(); ++k)
    acc += pi.at(k) * std::pow(std::abs(c.value(k) - kc[k]), p);
  return std::pow(acc, 1.0 / p);
}

}  // namespace rotlab
