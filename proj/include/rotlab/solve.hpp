#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "rotlab/cost.hpp"
#include "rotlab/coupling.hpp"
#include "rotlab/divergence.hpp"
#include "rotlab/errors.hpp"

namespace rotlab {

// Gibbs reference P_c with dP_c/dP = exp(-c)/alpha, P the product of the
// marginals (or a caller-supplied full-support product). Everything runs in
// the log domain: c/epsilon for small epsilon overflows naive scaling.
struct GibbsResult {
  Coupling reference;
  double alpha = 0.0;      // integral of exp(-c) dP
  double log_alpha = 0.0;
};

namespace detail {

inline std::vector<std::vector<double>> log_weights(const std::vector<DiscreteMeasure>& mus) {
  std::vector<std::vector<double>> lw(mus.size());
  for (std::size_t i = 0; i < mus.size(); ++i) {
    lw[i].resize(mus[i].size());
    for (std::size_t k = 0; k < mus[i].size(); ++k)
      lw[i][k] = mus[i].weight(k) > 0.0 ? std::log(mus[i].weight(k)) : -kInf;
  }
  return lw;
}

inline ProductSpace product_space_of(const std::vector<DiscreteMeasure>& mus, double order = 2.0) {
  std::vector<SpacePtr> f;
  f.reserve(mus.size());
  for (const auto& m : mus) f.push_back(m.space_ptr());
  return ProductSpace(std::move(f), order);
}

inline double logsumexp(const std::vector<double>& terms) {
  double best = -kInf;
  for (double t : terms) best = std::max(best, t);
  if (best == -kInf) return -kInf;
  double acc = 0.0;
  for (double t : terms)
    if (t != -kInf) acc += std::exp(t - best);
  return best + std::log(acc);
}

}  // namespace detail

inline GibbsResult gibbs_reference(const CostSpec& c, const std::vector<DiscreteMeasure>& mus) {
  const auto lw = detail::log_weights(mus);
  const TensorShape& shape = c.shape();
  std::vector<double> logs(shape.total, 0.0);
  for (std::size_t k = 0; k < shape.total; ++k) {
    double s = -c.value(k);
    for (std::size_t ax = 0; ax < mus.size(); ++ax) s += lw[ax][shape.coord(k, ax)];
    logs[k] = s;
  }
  const double log_alpha = detail::logsumexp(logs);
  std::vector<double> tensor(shape.total);
  for (std::size_t k = 0; k < shape.total; ++k) tensor[k] = std::exp(logs[k] - log_alpha);
  return GibbsResult{Coupling(detail::product_space_of(mus), std::move(tensor)),
                     std::exp(log_alpha), log_alpha};
}

struct SinkhornOptions {
  double tol = 1e-10;             // max marginal TV error
  long max_iters = 100000;        // single-marginal fitting steps
  double reg_weight = 1.0;        // minimizes int c dpi + reg_weight * D_KL
  int dense_history_until = 64;   // record every n up to here, then powers of 2
  bool record_history = false;
  bool record_tensors = false;    // keep iterate tensors in the history
  bool run_full = false;          // take exactly max_iters steps (rate experiments)
  std::optional<std::vector<DiscreteMeasure>> reference;  // product reference, defaults to (x)mu_i
};

struct SinkhornHistoryEntry {
  long n = 0;
  double functional = 0.0;            // F(pi^n) wrt the product of the targets
  double kl_to_gibbs = 0.0;           // D_KL(pi^n, P_c)
  std::vector<double> marginal_kl;    // D_KL(pi^n_i, mu_i)
  std::vector<double> marginal_tv;
  std::vector<double> tensor;         // optional iterate copy
};

struct SinkhornState {
  std::vector<std::vector<double>> potentials;  // log-domain, one per marginal
  long n = 0;
  Coupling iterate;
  std::vector<double> marginal_tv;
  std::vector<double> marginal_kl;
};

struct SolveReport {
  explicit SolveReport(Coupling opt) : optimizer(std::move(opt)) {}

  Coupling optimizer;
  double value = 0.0;         // reported via F = D_KL(.,P_c) - log alpha for KL
  double direct_value = 0.0;  // int c dpi + D_f(pi, reference)
  long iterations = 0;
  bool converged = false;
  double gibbs_mass = 0.0;    // alpha
  double log_alpha = 0.0;
  double kl_to_gibbs = 0.0;   // D_KL(optimizer, P_c)
  std::vector<SinkhornHistoryEntry> history;
};

namespace detail {

// Shared N-marginal Sinkhorn engine (cyclic marginal fitting, log domain).
class SinkhornEngine {
 public:
  SinkhornEngine(const std::vector<DiscreteMeasure>& mus, const CostSpec& c,
                 const std::vector<DiscreteMeasure>& ref)
      : mus_(mus), c_(c), shape_(c.shape()), log_mu_(log_weights(mus)), log_ref_(log_weights(ref)) {
    require(mus.size() >= 2, errc::bad_input, "need at least two marginals");
    require(shape_.dims.size() == mus.size(), errc::bad_input, "cost arity mismatch");
    for (std::size_t ax = 0; ax < mus.size(); ++ax) {
      require(shape_.dims[ax] == mus[ax].size(), errc::bad_input, "cost dims mismatch");
      require(ref[ax].size() == mus[ax].size(), errc::bad_input, "reference dims mismatch");
      for (std::size_t k = 0; k < mus[ax].size(); ++k)
        require(!(mus[ax].weight(k) > 0.0 && ref[ax].weight(k) <= 0.0), errc::zero_marginal,
                "target atom outside the reference support");
    }
    // log pi^0 = log P_c: potentials phi with sum phi = -log alpha
    std::vector<double> logs(shape_.total);
    for (std::size_t k = 0; k < shape_.total; ++k) logs[k] = base_log(k);
    log_alpha_ = logsumexp(logs);
    phi_.resize(mus.size());
    for (std::size_t ax = 0; ax < mus.size(); ++ax) phi_[ax].assign(shape_.dims[ax], 0.0);
    for (double& v : phi_[0]) v = -log_alpha_;
    n_ = 0;
  }

  double log_alpha() const { return log_alpha_; }
  long n() const { return n_; }
  const std::vector<std::vector<double>>& potentials() const { return phi_; }
  void set_potentials(std::vector<std::vector<double>> phi, long n) {
    phi_ = std::move(phi);
    n_ = n;
  }

  // one marginal-fitting step; odd n fits marginal 1 (axis 0)
  void step() {
    const std::size_t axis = static_cast<std::size_t>(n_ % static_cast<long>(mus_.size()));
    std::vector<std::vector<double>> slices(shape_.dims[axis]);
    for (std::size_t k = 0; k < shape_.total; ++k) {
      double s = -c_.value(k);
      bool dead = false;
      for (std::size_t ax = 0; ax < mus_.size(); ++ax) {
        if (ax == axis) continue;
        const std::size_t x = shape_.coord(k, ax);
        if (log_ref_[ax][x] == -kInf || phi_[ax][x] == -kInf) {
          dead = true;
          break;
        }
        s += log_ref_[ax][x] + phi_[ax][x];
      }
      if (!dead) slices[shape_.coord(k, axis)].push_back(s);
    }
    for (std::size_t x = 0; x < shape_.dims[axis]; ++x) {
      if (log_mu_[axis][x] == -kInf) {
        phi_[axis][x] = -kInf;  // zero-mass target atom carries no coupling mass
        continue;
      }
      const double z = logsumexp(slices[x]);
      require(z != -kInf, errc::zero_marginal, "iterate marginal vanished at a target atom");
      phi_[axis][x] = log_mu_[axis][x] - log_ref_[axis][x] - z;
    }
    ++n_;
  }

  std::vector<double> iterate_tensor() const {
    std::vector<double> t(shape_.total);
    for (std::size_t k = 0; k < shape_.total; ++k) {
      double s = -c_.value(k);
      for (std::size_t ax = 0; ax < mus_.size(); ++ax) {
        const std::size_t x = shape_.coord(k, ax);
        if (log_ref_[ax][x] == -kInf || phi_[ax][x] == -kInf) {
          s = -kInf;
          break;
        }
        s += log_ref_[ax][x] + phi_[ax][x];
      }
      t[k] = s == -kInf ? 0.0 : std::exp(s);
    }
    return t;
  }

  void marginal_errors(const std::vector<double>& tensor, std::vector<double>& tv,
                       std::vector<double>& kl) const {
    tv.assign(mus_.size(), 0.0);
    kl.assign(mus_.size(), 0.0);
    for (std::size_t ax = 0; ax < mus_.size(); ++ax) {
      std::vector<double> w(shape_.dims[ax], 0.0);
      for (std::size_t k = 0; k < shape_.total; ++k) w[shape_.coord(k, ax)] += tensor[k];
      double tvv = 0.0, klv = 0.0;
      for (std::size_t x = 0; x < w.size(); ++x) {
        tvv += std::abs(w[x] - mus_[ax].weight(x));
        if (w[x] > 0.0) {
          if (mus_[ax].weight(x) <= 0.0) {
            klv = kInf;
          } else if (klv != kInf) {
            klv += w[x] * std::log(w[x] / mus_[ax].weight(x));
          }
        }
      }
      tv[ax] = 0.5 * tvv;
      kl[ax] = std::max(0.0, klv);
    }
  }

  // D_KL(pi, P_c) evaluated in the log domain from the potentials
  double kl_to_gibbs(const std::vector<double>& tensor) const {
    // log(dpi/dP_c)(x) = sum_ax phi_ax(x_ax) + log_alpha on the support
    double acc = 0.0;
    for (std::size_t k = 0; k < shape_.total; ++k) {
      if (tensor[k] <= 0.0) continue;
      double s = log_alpha_;
      for (std::size_t ax = 0; ax < mus_.size(); ++ax) s += phi_[ax][shape_.coord(k, ax)];
      acc += tensor[k] * s;
    }
    return std::max(0.0, acc);
  }

  // F(pi) = int c dpi + D_KL(pi, reference)
  double functional(const std::vector<double>& tensor) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < shape_.total; ++k) {
      if (tensor[k] <= 0.0) continue;
      double lr = 0.0;
      for (std::size_t ax = 0; ax < mus_.size(); ++ax) {
        const double v = log_ref_[ax][shape_.coord(k, ax)];
        if (v == -kInf) return kInf;
        lr += v;
      }
      acc += tensor[k] * (c_.value(k) + std::log(tensor[k]) - lr);
    }
    return acc;
  }

 private:
  double base_log(std::size_t k) const {
    double s = -c_.value(k);
    for (std::size_t ax = 0; ax < mus_.size(); ++ax) {
      const double v = log_ref_[ax][shape_.coord(k, ax)];
      if (v == -kInf) return -kInf;
      s += v;
    }
    return s;
  }

  const std::vector<DiscreteMeasure>& mus_;
  const CostSpec& c_;
  TensorShape shape_;
  std::vector<std::vector<double>> log_mu_, log_ref_;
  std::vector<std::vector<double>> phi_;
  double log_alpha_ = 0.0;
  long n_ = 0;
};

inline bool history_slot(long n, int dense_until) {
  if (n <= dense_until) return true;
  return (n & (n - 1)) == 0;
}

inline SolveReport run_sinkhorn(const std::vector<DiscreteMeasure>& mus, const CostSpec& cost,
                                const SinkhornOptions& opts) {
  require(opts.tol > 0.0, errc::bad_input, "tolerance must be positive");
  require(opts.reg_weight > 0.0, errc::bad_input, "regularization weight must be positive");
  const bool scaled = opts.reg_weight != 1.0;
  const CostSpec work = scaled ? cost.scaled(1.0 / opts.reg_weight) : cost;
  const std::vector<DiscreteMeasure>& ref = opts.reference ? *opts.reference : mus;
  SinkhornEngine engine(mus, work, ref);

  SolveReport report{Coupling(product_space_of(mus), engine.iterate_tensor())};
  auto record = [&](long n, const std::vector<double>& tensor, std::vector<double>& tv,
                    std::vector<double>& kl) {
    SinkhornHistoryEntry e;
    e.n = n;
    e.functional = engine.functional(tensor);
    e.kl_to_gibbs = engine.kl_to_gibbs(tensor);
    engine.marginal_errors(tensor, e.marginal_tv, e.marginal_kl);
    tv = e.marginal_tv;
    kl = e.marginal_kl;
    if (opts.record_tensors) e.tensor = tensor;
    if (opts.record_history) report.history.push_back(std::move(e));
  };

  std::vector<double> tv, kl;
  std::vector<double> tensor = engine.iterate_tensor();
  engine.marginal_errors(tensor, tv, kl);
  if (opts.record_history) record(0, tensor, tv, kl);

  bool converged = !opts.run_full && *std::max_element(tv.begin(), tv.end()) < opts.tol;
  while (!converged && engine.n() < opts.max_iters) {
    engine.step();
    tensor = engine.iterate_tensor();
    if (opts.record_history && history_slot(engine.n(), opts.dense_history_until)) {
      record(engine.n(), tensor, tv, kl);
    } else {
      engine.marginal_errors(tensor, tv, kl);
    }
    converged = !opts.run_full && *std::max_element(tv.begin(), tv.end()) < opts.tol;
  }
  if (opts.run_full) converged = *std::max_element(tv.begin(), tv.end()) < opts.tol;

  report.optimizer = Coupling(product_space_of(mus), tensor);
  report.iterations = engine.n();
  report.converged = converged;
  report.log_alpha = engine.log_alpha();
  report.gibbs_mass = std::exp(engine.log_alpha());
  report.kl_to_gibbs = engine.kl_to_gibbs(report.optimizer.tensor());
  const double value_scaled = report.kl_to_gibbs - engine.log_alpha();  // F = KL - log alpha
  const double direct_scaled = engine.functional(report.optimizer.tensor());
  report.value = opts.reg_weight * value_scaled;
  report.direct_value = opts.reg_weight * direct_scaled;
  return report;
}

}  // namespace detail

inline SinkhornState sinkhorn_init(const std::vector<DiscreteMeasure>& mus, const CostSpec& c) {
  detail::SinkhornEngine engine(mus, c, mus);
  SinkhornState state{engine.potentials(), 0,
                      Coupling(detail::product_space_of(mus), engine.iterate_tensor()),
                      {}, {}};
  engine.marginal_errors(state.iterate.tensor(), state.marginal_tv, state.marginal_kl);
  return state;
}

// One alternating marginal fitting in the log domain; odd steps fix marginal
// 1, even steps fix marginal 2.
inline SinkhornState sinkhorn_step(const SinkhornState& state,
                                   const std::vector<DiscreteMeasure>& mus, const CostSpec& c) {
  require(mus.size() == 2, errc::bad_input, "sinkhorn_step is the two-marginal recursion");
  detail::SinkhornEngine engine(mus, c, mus);
  engine.set_potentials(state.potentials, state.n);
  engine.step();
  SinkhornState out{engine.potentials(), engine.n(),
                    Coupling(detail::product_space_of(mus), engine.iterate_tensor()),
                    {}, {}};
  engine.marginal_errors(out.iterate.tensor(), out.marginal_tv, out.marginal_kl);
  return out;
}

inline SolveReport sinkhorn_solve(const std::vector<DiscreteMeasure>& mus, const CostSpec& c,
                                  const SinkhornOptions& opts = {}) {
  require(mus.size() == 2, errc::bad_input, "sinkhorn_solve is two-marginal; use multimarginal");
  return detail::run_sinkhorn(mus, c, opts);
}

inline SolveReport multimarginal_sinkhorn_solve(const std::vector<DiscreteMeasure>& mus,
                                                const CostSpec& c,
                                                const SinkhornOptions& opts = {}) {
  return detail::run_sinkhorn(mus, c, opts);
}

// F(pi) = int c dpi + D_KL(pi, mu_1 (x) ... (x) mu_N); +inf off the product
// support. The marginals of pi need not match the mus.
inline double entropic_functional(const Coupling& pi, const std::vector<DiscreteMeasure>& mus,
                                  const CostSpec& c) {
  require(pi.total() == c.shape().total, errc::bad_input, "cost/coupling shape mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < pi.total(); ++k) {
    const double m = pi.at(k);
    if (m <= 0.0) continue;
    double lp = 0.0;
    for (std::size_t ax = 0; ax < mus.size(); ++ax) {
      const double w = mus[ax].weight(pi.shape().coord(k, ax));
      if (w <= 0.0) return kInf;
      lp += std::log(w);
    }
    acc += m * (c.value(k) + std::log(m) - lp);
  }
  return acc;
}

// D_f-regularized problem for a general generator: projected gradient with
// alternating marginal projections (Dykstra correction on the orthant only).
// KL delegates to Sinkhorn. Answers at test sizes are cross-checked against a
// brute-force polytope oracle.
inline SolveReport f_regularized_solve(const std::vector<DiscreteMeasure>& mus, const CostSpec& c,
                                       const DivergenceSpec& spec,
                                       const SinkhornOptions& opts = {}) {
  if (spec.name() == "kl") return detail::run_sinkhorn(mus, c, opts);
  const TensorShape& shape = c.shape();
  std::vector<double> pw(shape.total, 1.0);
  std::vector<char> mask(shape.total, 1);
  for (std::size_t k = 0; k < shape.total; ++k) {
    for (std::size_t ax = 0; ax < mus.size(); ++ax) pw[k] *= mus[ax].weight(shape.coord(k, ax));
    mask[k] = pw[k] > 0.0;
  }

  auto project = [&](std::vector<double> x) {
    std::vector<double> corr(shape.total, 0.0);
    for (int round = 0; round < 4000; ++round) {
      for (std::size_t ax = 0; ax < mus.size(); ++ax) {
        std::vector<double> sums(shape.dims[ax], 0.0);
        std::vector<double> counts(shape.dims[ax], 0.0);
        for (std::size_t k = 0; k < shape.total; ++k)
          if (mask[k]) {
            sums[shape.coord(k, ax)] += x[k];
            counts[shape.coord(k, ax)] += 1.0;
          }
        for (std::size_t k = 0; k < shape.total; ++k)
          if (mask[k]) {
            const std::size_t i = shape.coord(k, ax);
            x[k] += (mus[ax].weight(i) - sums[i]) / counts[i];
          }
      }
      double change = 0.0;
      for (std::size_t k = 0; k < shape.total; ++k) {
        if (!mask[k]) {
          x[k] = 0.0;
          continue;
        }
        const double w = x[k] + corr[k];
        const double clipped = std::max(w, 0.0);
        change = std::max(change, std::abs(clipped - x[k]));
        corr[k] = w - clipped;
        x[k] = clipped;
      }
      if (change < 1e-14) break;
    }
    // finish on the affine projections so marginals are exact
    for (std::size_t ax = 0; ax < mus.size(); ++ax) {
      std::vector<double> sums(shape.dims[ax], 0.0);
      std::vector<double> counts(shape.dims[ax], 0.0);
      for (std::size_t k = 0; k < shape.total; ++k)
        if (mask[k]) {
          sums[shape.coord(k, ax)] += x[k];
          counts[shape.coord(k, ax)] += 1.0;
        }
      for (std::size_t k = 0; k < shape.total; ++k)
        if (mask[k]) {
          const std::size_t i = shape.coord(k, ax);
          x[k] += (mus[ax].weight(i) - sums[i]) / counts[i];
        }
    }
    for (double& v : x) v = std::max(v, 0.0);
    return x;
  };

  auto objective = [&](const std::vector<double>& x) {
    double acc = 0.0;
    for (std::size_t k = 0; k < shape.total; ++k) {
      if (!mask[k]) continue;
      acc += c.value(k) * x[k] + spec.f(x[k] / pw[k]) * pw[k];
    }
    return acc;
  };

  std::vector<double> x = pw;  // start at the product measure (feasible)
  double fx = objective(x);
  std::vector<double> grad(shape.total, 0.0);
  long iters = 0;
  bool converged = false;
  int stall = 0;
  double eta = 1.0;
  const long max_outer = std::max<long>(5000, opts.max_iters / 10);
  for (; iters < max_outer; ++iters) {
    for (std::size_t k = 0; k < shape.total; ++k)
      grad[k] = mask[k] ? c.value(k) + spec.f_prime(x[k] / pw[k]) : 0.0;
    eta = std::min(4.0 * eta, 1.0);
    bool accepted = false;
    for (int bt = 0; bt < 60 && !accepted; ++bt, eta *= 0.5) {
      std::vector<double> cand(shape.total, 0.0);
      for (std::size_t k = 0; k < shape.total; ++k) cand[k] = x[k] - eta * grad[k];
      cand = project(std::move(cand));
      double lin = 0.0, sq = 0.0;
      for (std::size_t k = 0; k < shape.total; ++k) {
        const double d = cand[k] - x[k];
        lin += grad[k] * d;
        sq += d * d;
      }
      const double fc = objective(cand);
      if (fc <= fx + lin + sq / (2.0 * eta) + 1e-15) {
        const double step = std::sqrt(sq);
        stall = fc >= fx - 1e-15 * std::max(1.0, std::abs(fx)) ? stall + 1 : 0;
        x = std::move(cand);
        fx = fc;
        accepted = true;
        if (step < 1e-10 || stall >= 8) converged = true;
      }
    }
    if (!accepted || converged) {
      converged = true;  // line-search exhaustion: no feasible descent left
      break;
    }
  }

  SolveReport report{Coupling(detail::product_space_of(mus), x)};
  report.iterations = iters;
  report.converged = converged;
  report.direct_value = objective(report.optimizer.tensor());
  report.value = report.direct_value;
  const GibbsResult gibbs = gibbs_reference(c, mus);
  report.gibbs_mass = gibbs.alpha;
  report.log_alpha = gibbs.log_alpha;
  report.kl_to_gibbs = kl_divergence(report.optimizer, gibbs.reference);
  return report;
}

struct PythagoreanCertificate {
  double lhs = 0.0;  // D_KL(pi, pi*)
  double rhs = 0.0;  // F(pi) - F(pi*)
  bool holds = false;
};

inline PythagoreanCertificate pythagorean_certificate(const Coupling& pi, const SolveReport& report,
                                                      const std::vector<DiscreteMeasure>& mus,
                                                      const CostSpec& c) {
  for (std::size_t ax = 0; ax < mus.size(); ++ax) {
    const DiscreteMeasure m = pi.marginal(ax);
    double tv = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) tv += std::abs(m.weight(k) - mus[ax].weight(k));
    require(0.5 * tv <= 1e-9, errc::marginal_mismatch,
            "certificate requires pi in the coupling polytope of the solve");
  }
  PythagoreanCertificate cert;
  cert.lhs = kl_divergence(pi, report.optimizer);
  cert.rhs = entropic_functional(pi, mus, c) - entropic_functional(report.optimizer, mus, c);
  cert.holds = cert.lhs <= cert.rhs + 1e-7;
  return cert;
}

}  // namespace rotlab
