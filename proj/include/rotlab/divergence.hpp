#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rotlab/coupling.hpp"
#include "rotlab/errors.hpp"
#include "rotlab/measure.hpp"

namespace rotlab {

// Generator f of an f-divergence: strictly convex, f(1) = 0, superlinear.
// The conditions are sampled at construction (second differences on a grid,
// f(x)/x increasing for large x).
class DivergenceSpec {
 public:
  static DivergenceSpec kl() {
    return DivergenceSpec("kl", [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; });
  }

  static DivergenceSpec quadratic() {
    return DivergenceSpec("quadratic", [](double x) { return (x - 1.0) * (x - 1.0); });
  }

  static DivergenceSpec custom(std::string name, std::function<double(double)> f) {
    return DivergenceSpec(std::move(name), std::move(f));
  }

  const std::string& name() const { return name_; }
  double f(double x) const { return f_(x); }

  // numeric derivative for solvers that need gradients (closed form for the
  // built-in generators)
  double f_prime(double x) const {
    if (name_ == "kl") return std::log(std::max(x, 1e-300)) + 1.0;
    if (name_ == "quadratic") return 2.0 * (x - 1.0);
    const double h = 1e-6 * std::max(1.0, std::abs(x));
    const double lo = std::max(0.0, x - h);
    return (f_(x + h) - f_(lo)) / (x + h - lo);
  }

 private:
  DivergenceSpec(std::string name, std::function<double(double)> f)
      : name_(std::move(name)), f_(std::move(f)) {
    require(std::abs(f_(1.0)) <= 1e-12, errc::bad_input, "divergence generator must have f(1)=0");
    // strict convexity on a grid
    for (double x = 0.125; x <= 8.0; x += 0.125) {
      const double h = 0.0625;
      const double second = f_(x + h) - 2.0 * f_(x) + f_(x - h);
      require(second > 0.0, errc::bad_input, "divergence generator not strictly convex");
    }
    // superlinearity, sampled
    double prev = f_(8.0) / 8.0;
    for (double x = 16.0; x <= 1024.0; x *= 2.0) {
      const double cur = f_(x) / x;
      require(cur > prev, errc::bad_input, "divergence generator not superlinear");
      prev = cur;
    }
  }

  std::string name_;
  std::function<double(double)> f_;
};

namespace detail {

// D_f over aligned weight vectors; +inf when mu is not absolutely continuous
// wrt nu. 0*f(0/0) = 0 by convention (KL's 0 log 0 = 0 falls out of r -> 0).
inline double f_divergence_weights(const std::vector<double>& mu, const std::vector<double>& nu,
                                   const DivergenceSpec& spec) {
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (nu[i] > 0.0) {
      acc += spec.f(mu[i] / nu[i]) * nu[i];
    } else if (mu[i] > 0.0) {
      return kInf;
    }
  }
  return acc;
}

inline double kl_weights(const std::vector<double>& mu, const std::vector<double>& nu) {
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] > 0.0) {
      if (nu[i] <= 0.0) return kInf;
      acc += mu[i] * std::log(mu[i] / nu[i]);
    }
  }
  return acc;
}

}  // namespace detail

inline double f_divergence(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           const DivergenceSpec& spec) {
  require(mu.space().content_equal(nu.space()), errc::incompatible_spaces,
          "f_divergence needs a common support universe");
  return detail::f_divergence_weights(mu.weights(), nu.weights(), spec);
}

inline double f_divergence(const Coupling& pi, const Coupling& rho, const DivergenceSpec& spec) {
  require(pi.product().content_equal(rho.product()), errc::incompatible_spaces,
          "f_divergence needs couplings on the same product space");
  return detail::f_divergence_weights(pi.tensor(), rho.tensor(), spec);
}

inline double kl_divergence(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require(mu.space().content_equal(nu.space()), errc::incompatible_spaces,
          "kl_divergence needs a common support universe");
  return detail::kl_weights(mu.weights(), nu.weights());
}

inline double kl_divergence(const Coupling& pi, const Coupling& rho) {
  require(pi.product().content_equal(rho.product()), errc::incompatible_spaces,
          "kl_divergence needs couplings on the same product space");
  return detail::kl_weights(pi.tensor(), rho.tensor());
}

// Row-stochastic kernel between finite spaces.
class MarkovKernel {
 public:
  MarkovKernel(SpacePtr source, SpacePtr target, std::vector<double> rows)
      : source_(std::move(source)), target_(std::move(target)), k_(std::move(rows)) {
    require(k_.size() == source_->size() * target_->size(), errc::bad_input,
            "kernel matrix size mismatch");
    for (std::size_t i = 0; i < source_->size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < target_->size(); ++j) {
        require(at(i, j) >= 0.0, errc::bad_input, "negative kernel entry");
        s += at(i, j);
      }
      require(std::abs(s - 1.0) <= 1e-12, errc::bad_input, "kernel row does not sum to 1");
    }
  }

  static MarkovKernel identity(SpacePtr space) {
    const std::size_t n = space->size();
    std::vector<double> rows(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) rows[i * n + i] = 1.0;
    return MarkovKernel(space, space, std::move(rows));
  }

  static MarkovKernel constant(SpacePtr source, const DiscreteMeasure& target) {
    std::vector<double> rows(source->size() * target.size());
    for (std::size_t i = 0; i < source->size(); ++i)
      for (std::size_t j = 0; j < target.size(); ++j) rows[i * target.size() + j] = target.weight(j);
    return MarkovKernel(std::move(source), target.space_ptr(), std::move(rows));
  }

  const MetricSpace& source() const { return *source_; }
  const MetricSpace& target() const { return *target_; }
  const SpacePtr& source_ptr() const { return source_; }
  const SpacePtr& target_ptr() const { return target_; }
  double at(std::size_t i, std::size_t j) const { return k_[i * target_->size() + j]; }

 private:
  SpacePtr source_, target_;
  std::vector<double> k_;  // source.size() x target.size()
};

// (mu K)(y) = sum_x mu(x) K(x, y)
inline DiscreteMeasure push_kernel(const DiscreteMeasure& mu, const MarkovKernel& K) {
  require(mu.space().content_equal(K.source()), errc::space_mismatch,
          "kernel source does not match the measure's space");
  std::vector<double> w(K.target().size(), 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu.weight(i) == 0.0) continue;
    for (std::size_t j = 0; j < w.size(); ++j) w[j] += mu.weight(i) * K.at(i, j);
  }
  return DiscreteMeasure(K.target_ptr(), std::move(w));
}

// ---- transport inequality constants (I_q), (I_q') ----

// (i) of the transport-inequality lemma: C_q = 2^(-1/(2q)) diam_q(X'), where
// X' is the product of all factor spaces except the first.
inline double transport_constant_bounded(double q, double diam) {
  require(q >= 1.0 && !is_inf(q), errc::bad_order, "q must be in [1, inf)");
  require(diam > 0.0, errc::bad_input, "diameter must be positive");
  return std::pow(2.0, -1.0 / (2.0 * q)) * diam;
}

namespace detail {

// log integral exp(alpha * d(anchor, x)^e) d mu, in the log domain
inline double log_exp_moment(const DiscreteMeasure& mu, std::size_t anchor, double alpha,
                             double expo) {
  double best = -kInf;
  std::vector<double> terms;
  terms.reserve(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu.weight(i) == 0.0) continue;
    const double t = std::log(mu.weight(i)) + alpha * std::pow(mu.space().dist(anchor, i), expo);
    terms.push_back(t);
    best = std::max(best, t);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - best);
  return best + std::log(acc);
}

}  // namespace detail

struct ExpMomentGrid {
  // one anchor tuple = one support index per marginal
  std::vector<std::vector<std::size_t>> anchors;
  std::vector<double> alphas;
};

inline ExpMomentGrid default_exp_moment_grid(const std::vector<DiscreteMeasure>& mus,
                                             std::size_t max_anchors = 32) {
  ExpMomentGrid grid;
  for (int k = -6; k <= 6; ++k) grid.alphas.push_back(std::pow(2.0, k));
  std::vector<std::size_t> dims;
  std::size_t total = 1;
  for (const auto& m : mus) {
    dims.push_back(m.size());
    total *= m.size();
  }
  const std::size_t step = std::max<std::size_t>(1, total / max_anchors);
  TensorShape shape(dims);
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < total && grid.anchors.size() < max_anchors; k += step) {
    shape.unflatten(k, idx);
    grid.anchors.push_back(idx);
  }
  return grid;
}

// (ii)/(iii): the infimum over (anchor, alpha) is replaced by a minimum over
// a finite grid; every grid point yields a valid constant, the grid only
// tightens it.
enum class ExpMomentMode { exp2q, expq };

inline double transport_constant_exp_moment(ExpMomentMode mode, double q,
                                            const std::vector<DiscreteMeasure>& mus,
                                            const ExpMomentGrid& grid) {
  require(q >= 1.0 && !is_inf(q), errc::bad_order, "q must be in [1, inf)");
  require(!grid.anchors.empty() && !grid.alphas.empty(), errc::empty_grid,
          "empty anchor/alpha grid");
  const double n = static_cast<double>(mus.size());
  const double expo = mode == ExpMomentMode::exp2q ? 2.0 * q : q;
  double best = kInf;
  for (const auto& anchor : grid.anchors) {
    require(anchor.size() == mus.size(), errc::bad_input, "anchor tuple arity mismatch");
    for (double alpha : grid.alphas) {
      require(alpha > 0.0, errc::nonpositive_alpha, "alpha grid entries must be positive");
      double sum = 0.0;
      for (std::size_t i = 0; i < mus.size(); ++i) {
        const double lm = detail::log_exp_moment(mus[i], anchor[i], alpha, expo);
        sum += (mode == ExpMomentMode::exp2q ? 1.0 : 1.5) + lm;
      }
      const double inner = mode == ExpMomentMode::exp2q ? n / (2.0 * alpha) * sum : sum / alpha;
      const double cand = 2.0 * std::pow(inner, 1.0 / expo);
      best = std::min(best, cand);
    }
  }
  return best;
}

struct DataProcessingCertificate {
  double lhs = 0.0;  // D_f(mu K, nu K)
  double rhs = 0.0;  // D_f(mu, nu)
  bool holds = false;
};

inline DataProcessingCertificate check_data_processing(const DiscreteMeasure& mu,
                                                       const DiscreteMeasure& nu,
                                                       const MarkovKernel& K,
                                                       const DivergenceSpec& spec) {
  require(mu.space().content_equal(nu.space()), errc::space_mismatch,
          "measures must share a space");
  DataProcessingCertificate cert;
  cert.lhs = f_divergence(push_kernel(mu, K), push_kernel(nu, K), spec);
  cert.rhs = f_divergence(mu, nu, spec);
  cert.holds = cert.lhs <= cert.rhs + 1e-10;
  return cert;
}

}  // namespace rotlab
