#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "rotlab/bounds.hpp"
#include "rotlab/io.hpp"
#include "rotlab/rng.hpp"
#include "rotlab/shadow.hpp"
#include "rotlab/solve.hpp"

namespace rotlab {

struct PerturbationConfig {
  std::string kind = "jitter";  // jitter | reweight | translate
  std::vector<double> magnitudes = {0.2, 0.1, 0.05};
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 1;
  std::vector<int> sizes = {2, 3, 4};
  int N = 2;
  double p = 2.0;
  double q = 1.0;
  double epsilon = 1.0;
  std::string divergence = "kl";  // kl | quadratic | both
  int trials = 20;
  PerturbationConfig perturbation;
  double tol = 1e-10;
  long max_iters = 100000;
  std::string out_dir;
  std::string format = "json";
  double power_cost_Cp = 0.0;  // 0: derived default p * 2^((p-1)/p)
  long rate_n_max = 200;

  double effective_power_Cp() const {
    return power_cost_Cp > 0.0 ? power_cost_Cp : p * std::pow(2.0, (p - 1.0) / p);
  }
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "shadow_validation", "value_stability",        "optimizer_stability", "cost_stability",
      "bounded_cost_sharpness", "sinkhorn_rates",    "gamma_recovery"};
  return names;
}

// Per-experiment defaults at the scales the certification suites use.
inline ExperimentConfig default_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.name = name;
  if (name == "shadow_validation") {
    cfg.trials = 200;
    cfg.sizes = {2, 3, 4, 5};
    cfg.perturbation = {"jitter", {0.3, 0.15, 0.05}};
  } else if (name == "value_stability") {
    cfg.trials = 200;
    cfg.sizes = {2, 3};
    cfg.divergence = "both";
    cfg.perturbation = {"jitter", {0.25, 0.1, 0.05}};
  } else if (name == "optimizer_stability") {
    cfg.trials = 200;
    cfg.sizes = {2, 3, 4};
    cfg.perturbation = {"jitter", {0.2, 0.1, 0.05}};
  } else if (name == "cost_stability") {
    cfg.trials = 200;
    cfg.sizes = {2, 3, 4};
  } else if (name == "bounded_cost_sharpness") {
    cfg.trials = 3;
    cfg.perturbation = {"epsilon", {0.1, 0.01, 0.001}};
  } else if (name == "sinkhorn_rates") {
    cfg.trials = 50;
    cfg.sizes = {2, 3, 4};
    cfg.rate_n_max = 200;
  } else if (name == "gamma_recovery") {
    cfg.trials = 10;
    cfg.sizes = {2, 3};
    cfg.perturbation = {"translate", {0.4, 0.2, 0.1, 0.05, 0.025}};
  }
  return cfg;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("name")) cfg = default_config(j.at("name").get<std::string>());
  if (j.contains("name")) cfg.name = j.at("name").get<std::string>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("sizes")) cfg.sizes = j.at("sizes").get<std::vector<int>>();
  if (j.contains("N")) cfg.N = j.at("N").get<int>();
  if (j.contains("p")) cfg.p = order_from_json(j.at("p"));
  if (j.contains("q")) cfg.q = order_from_json(j.at("q"));
  if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
  if (j.contains("divergence")) cfg.divergence = j.at("divergence").get<std::string>();
  if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
  if (j.contains("perturbation")) {
    const auto& pj = j.at("perturbation");
    if (pj.contains("kind")) cfg.perturbation.kind = pj.at("kind").get<std::string>();
    if (pj.contains("magnitudes"))
      cfg.perturbation.magnitudes = pj.at("magnitudes").get<std::vector<double>>();
  }
  if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
  if (j.contains("max_iters")) cfg.max_iters = j.at("max_iters").get<long>();
  if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
  if (j.contains("format")) cfg.format = j.at("format").get<std::string>();
  if (j.contains("power_cost_Cp")) cfg.power_cost_Cp = j.at("power_cost_Cp").get<double>();
  if (j.contains("rate_n_max")) cfg.rate_n_max = j.at("rate_n_max").get<long>();
  require(!cfg.perturbation.magnitudes.empty(), errc::config_invalid, "empty magnitude grid");
  require(!cfg.sizes.empty(), errc::config_invalid, "empty size grid");
  require(cfg.trials > 0, errc::config_invalid, "trials must be positive");
  return cfg;
}

inline json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  j["sizes"] = cfg.sizes;
  j["N"] = cfg.N;
  j["p"] = order_to_json(cfg.p);
  j["q"] = order_to_json(cfg.q);
  j["epsilon"] = cfg.epsilon;
  j["divergence"] = cfg.divergence;
  j["trials"] = cfg.trials;
  j["perturbation"] = {{"kind", cfg.perturbation.kind},
                       {"magnitudes", cfg.perturbation.magnitudes}};
  j["tol"] = cfg.tol;
  j["max_iters"] = cfg.max_iters;
  j["format"] = cfg.format;
  j["power_cost_Cp"] = cfg.power_cost_Cp;
  j["rate_n_max"] = cfg.rate_n_max;
  return j;
}

// ---- random instances ----

struct StabilityInstance {
  std::vector<DiscreteMeasure> mus;
  std::vector<DiscreteMeasure> tildes;
  CostSpec cost;  // on the shared union product space
  std::string cost_kind;
  double p = 2.0;
  double L = 0.0;     // certified (A_L) constant for (mus, tildes)
  double delta = 0.0; // measured marginal-tuple distance
};

namespace detail {

inline std::vector<std::vector<double>> random_points(Rng& rng, int n, int dim) {
  std::vector<std::vector<double>> pts(n);
  for (auto& p : pts) {
    p.resize(dim);
    for (auto& x : p) x = rng.uniform(-1.0, 1.0);
  }
  return pts;
}

// McShane envelope: the tightest lambda-Lipschitz minorant-style extension
// min_y (v(y) + lambda d(x, y)); Lipschitz with constant at most lambda.
inline std::vector<double> mcshane(const std::vector<double>& v, const ProductSpace& space,
                                   const TensorShape& shape, double lambda, double p) {
  std::vector<double> out(v.size());
  std::vector<std::size_t> xi, yi;
  for (std::size_t x = 0; x < v.size(); ++x) {
    shape.unflatten(x, xi);
    double best = kInf;
    for (std::size_t y = 0; y < v.size(); ++y) {
      shape.unflatten(y, yi);
      best = std::min(best, v[y] + lambda * product_distance(space, xi, yi, p));
    }
    out[x] = best;
  }
  return out;
}

inline CostFactor bounded_factor(std::vector<double> values) {
  CostFactor f;
  f.values = std::move(values);
  f.growth.a = 0.0;
  for (double v : f.values) f.growth.a = std::max(f.growth.a, std::abs(v));
  f.growth.b = 0.0;
  f.growth.l = 0.0;
  return f;
}

}  // namespace detail

// Random coupling of a marginal tuple: mass exchanges on 2x2 rectangles of a
// pair of axes, localized to a slice of the remaining axes (marginals are
// preserved exactly).
inline Coupling random_coupling(Rng& rng, const std::vector<DiscreteMeasure>& mus, int moves = 32) {
  Coupling base = product_measure(mus);
  std::vector<double> w = base.tensor();
  const TensorShape& shape = base.shape();
  const std::size_t nax = mus.size();
  for (int m = 0; m < moves; ++m) {
    const std::size_t ax1 = rng.uniform_int(static_cast<int>(nax));
    const std::size_t ax2 = rng.uniform_int(static_cast<int>(nax));
    if (ax1 == ax2) continue;
    const std::size_t i1 = rng.uniform_int(static_cast<int>(shape.dims[ax1]));
    const std::size_t i2 = rng.uniform_int(static_cast<int>(shape.dims[ax1]));
    const std::size_t j1 = rng.uniform_int(static_cast<int>(shape.dims[ax2]));
    const std::size_t j2 = rng.uniform_int(static_cast<int>(shape.dims[ax2]));
    if (i1 == i2 || j1 == j2) continue;
    double cap = kInf;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const std::size_t c1 = shape.coord(k, ax1), c2 = shape.coord(k, ax2);
      if ((c1 == i1 && c2 == j2) || (c1 == i2 && c2 == j1)) cap = std::min(cap, w[k]);
    }
    if (!(cap > 0.0)) continue;
    const double d = rng.uniform(0.0, cap);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const std::size_t c1 = shape.coord(k, ax1), c2 = shape.coord(k, ax2);
      if (c1 == i1 && c2 == j1)
        w[k] += d;
      else if (c1 == i2 && c2 == j2)
        w[k] += d;
      else if ((c1 == i1 && c2 == j2) || (c1 == i2 && c2 == j1))
        w[k] -= d;
    }
  }
  return Coupling(base.product(), std::move(w));
}

struct GenOptions {
  int N = 2;
  std::vector<int> sizes = {2, 3, 4};
  double p = 2.0;
  std::string cost_kind = "lipschitz";  // lipschitz | product | sqeuclidean | power
  std::string perturb_kind = "jitter";
  double magnitude = 0.1;
  double power_Cp = 0.0;
  double epsilon = 1.0;  // regularization weight; the cost is scaled to c/epsilon
  int dim = 0;           // 0: draw 1 or 2
};

// Supports live in [-1,1]^d. For geometry-changing perturbations the measure
// pairs share one union space per marginal, with zero weight on the other
// tuple's atoms (zero atoms are retained by design).
inline StabilityInstance make_stability_instance(Rng& rng, const GenOptions& opt) {
  const int dim = opt.dim > 0 ? opt.dim : 1 + rng.uniform_int(2);
  std::vector<DiscreteMeasure> mus, tildes;
  std::vector<SpacePtr> factors;
  std::vector<double> shift(dim);
  if (opt.perturb_kind == "translate") {
    double norm = 0.0;
    for (auto& s : shift) {
      s = rng.uniform(-1.0, 1.0);
      norm += s * s;
    }
    norm = std::sqrt(norm);
    for (auto& s : shift) s *= opt.magnitude / std::max(norm, 1e-12);
  }
  for (int i = 0; i < opt.N; ++i) {
    const int n = opt.sizes[rng.uniform_int(static_cast<int>(opt.sizes.size()))];
    auto base = detail::random_points(rng, n, dim);
    const auto w = rng.simplex_point(n, 0.15);
    if (opt.perturb_kind == "reweight") {
      auto sp = make_space(MetricSpace::euclidean(base));
      std::vector<double> wt(w.size());
      for (std::size_t k = 0; k < w.size(); ++k)
        wt[k] = (1.0 - opt.magnitude) * w[k] + opt.magnitude / static_cast<double>(n);
      mus.emplace_back(sp, w);
      tildes.emplace_back(sp, wt);
      factors.push_back(sp);
      continue;
    }
    auto moved = base;
    for (auto& pt : moved)
      for (int d = 0; d < dim; ++d)
        pt[d] += opt.perturb_kind == "translate" ? shift[d]
                                                 : rng.uniform(-opt.magnitude, opt.magnitude);
    auto union_pts = base;
    union_pts.insert(union_pts.end(), moved.begin(), moved.end());
    auto sp = make_space(MetricSpace::euclidean(union_pts));
    std::vector<double> wmu(2 * n, 0.0), wti(2 * n, 0.0);
    for (int k = 0; k < n; ++k) {
      wmu[k] = w[k];
      wti[n + k] = w[k];
    }
    mus.emplace_back(sp, wmu);
    tildes.emplace_back(sp, wti);
    factors.push_back(sp);
  }

  ProductSpace space(factors, opt.p);
  TensorShape shape(space.dims());
  CostSpec cost = [&]() -> CostSpec {
    if (opt.cost_kind == "sqeuclidean") {
      require(opt.N == 2, errc::bad_input, "sqeuclidean instances are two-marginal");
      return CostSpec::sqeuclidean(ProductSpace(factors, opt.p));
    }
    if (opt.cost_kind == "power") {
      require(opt.N == 2 && opt.p > 1.0 && !is_inf(opt.p), errc::bad_order,
              "power instances need N=2 and p in (1, inf)");
      return CostSpec::power_cost(ProductSpace(factors, opt.p), opt.p);
    }
    std::vector<double> v(shape.total);
    for (auto& x : v) x = rng.uniform(0.0, 1.0);
    const double lambda = rng.uniform(0.5, 1.5);
    v = detail::mcshane(v, space, shape, lambda, opt.p);
    if (opt.cost_kind == "lipschitz") {
      CostSpec c(ProductSpace(factors, opt.p), v);
      CostFactor f;
      f.values = v;
      f.growth = detail::bounded_factor(v).growth;
      c.set_factors(std::move(f), detail::bounded_factor(std::vector<double>(shape.total, 1.0)));
      return c;
    }
    require(opt.cost_kind == "product", errc::config_invalid,
            "cost kind must be lipschitz, product, sqeuclidean or power");
    std::vector<double> g(shape.total);
    for (auto& x : g) x = rng.uniform(0.2, 1.0);
    g = detail::mcshane(g, space, shape, rng.uniform(0.3, 1.0), opt.p);
    std::vector<double> prod(shape.total);
    for (std::size_t k = 0; k < shape.total; ++k) prod[k] = v[k] * g[k];
    CostSpec c(ProductSpace(factors, opt.p), prod);
    c.set_factors(detail::bounded_factor(v), detail::bounded_factor(g));
    return c;
  }();

  StabilityInstance inst{std::move(mus), std::move(tildes), std::move(cost),
                         opt.cost_kind, opt.p, 0.0, 0.0};
  if (opt.cost_kind == "sqeuclidean" && opt.p == 2.0)
    inst.L = cost_condition_constant_quadratic(inst.mus, inst.tildes);
  else if (opt.cost_kind == "power")
    inst.L = cost_condition_constant_power(
        opt.p, opt.power_Cp > 0.0 ? opt.power_Cp : opt.p * std::pow(2.0, (opt.p - 1.0) / opt.p),
        inst.mus, inst.tildes);
  else
    inst.L = cost_condition_constant_product(inst.cost, inst.mus, inst.tildes, opt.p);
  if (opt.epsilon != 1.0) {
    // the weighted problem equals the weight-1 problem with cost c/epsilon;
    // the cost-condition constant rescales the same way
    inst.cost = inst.cost.scaled(1.0 / opt.epsilon);
    inst.L /= opt.epsilon;
  }
  inst.delta = marginal_tuple_distance(inst.mus, inst.tildes, opt.p);
  return inst;
}

// ---- rate fitting ----

struct RateFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// least-squares slope of log y on log x
inline RateFit fit_rate_exponent(const std::vector<std::pair<double, double>>& pairs) {
  require(pairs.size() >= 3, errc::degenerate_data, "need at least 3 pairs");
  std::vector<double> xs, ys;
  for (const auto& [x, y] : pairs) {
    require(x > 0.0 && y > 0.0, errc::degenerate_data, "pairs must be positive");
    xs.push_back(std::log(x));
    ys.push_back(std::log(y));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  require(sxx > 1e-14, errc::degenerate_data, "x values are degenerate");
  RateFit fit;
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.exponent * xs[i]);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  const double se =
      xs.size() > 2 ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
  fit.ci_low = fit.exponent - 1.96 * se;
  fit.ci_high = fit.exponent + 1.96 * se;
  return fit;
}

// ---- reports ----

struct ExperimentReport {
  explicit ExperimentReport(ExperimentConfig cfg) : config(std::move(cfg)) {}

  ExperimentConfig config;
  json trials = json::array();
  std::vector<StabilityCertificate> certificates;
  json extras;  // per-experiment diagnostics (fitted exponents etc.)
  long violations = 0;
  double wall_clock_ms = 0.0;

  void add(int trial, StabilityCertificate cert) {
    if (!cert.holds) ++violations;
    cert_rows.push_back({trial, certificates.size()});
    certificates.push_back(std::move(cert));
  }

  std::vector<std::pair<int, std::size_t>> cert_rows;  // (trial, certificate index)
};

namespace detail {

inline json certificate_to_json(const StabilityCertificate& c) {
  json j;
  j["theorem"] = c.theorem;
  j["constants"] = {
      {"N", c.constants.N}, {"p", order_to_json(c.constants.p)},
      {"q", order_to_json(c.constants.q)}, {"L", c.constants.L},
      {"C_q", c.constants.C_q}, {"C_q_prime", c.constants.C_q_prime},
      {"delta", c.constants.delta}, {"a", c.constants.a},
      {"lip", c.constants.lip}, {"cost_gap", c.constants.cost_gap}};
  j["bound"] = c.bound;
  j["measured"] = c.measured;
  j["holds"] = c.holds;
  if (std::isfinite(c.looseness))
    j["looseness"] = c.looseness;
  else
    j["looseness"] = "inf";
  return j;
}

inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline json report_to_json(const ExperimentReport& report) {
  json j;
  j["name"] = report.config.name;
  j["config"] = config_to_json(report.config);
  j["status"] = report.violations == 0 ? "ok" : "violation";
  j["summary"] = {{"certificates", report.certificates.size()},
                  {"violations", report.violations}};
  json certs = json::array();
  for (std::size_t i = 0; i < report.certificates.size(); ++i) {
    json c = detail::certificate_to_json(report.certificates[i]);
    c["trial"] = report.cert_rows[i].first;
    certs.push_back(std::move(c));
  }
  j["certificates"] = std::move(certs);
  j["trials"] = report.trials;
  if (!report.extras.is_null()) j["diagnostics"] = report.extras;
  // everything nondeterministic lives under "timing", which byte-level
  // comparisons exclude
  j["timing"] = {{"wall_clock_ms", report.wall_clock_ms}};
  return j;
}

inline std::string report_to_csv(const ExperimentReport& report) {
  std::string out =
      "trial,theorem,bound,measured,holds,looseness,N,p,q,L,C_q,C_q_prime,delta,a,lip,cost_gap\n";
  for (std::size_t i = 0; i < report.certificates.size(); ++i) {
    const auto& c = report.certificates[i];
    out += std::to_string(report.cert_rows[i].first) + "," + c.theorem + "," +
           detail::fmt_double(c.bound) + "," + detail::fmt_double(c.measured) + "," +
           (c.holds ? "true" : "false") + "," + detail::fmt_double(c.looseness) + "," +
           std::to_string(c.constants.N) + "," + detail::fmt_double(c.constants.p) + "," +
           detail::fmt_double(c.constants.q) + "," + detail::fmt_double(c.constants.L) + "," +
           detail::fmt_double(c.constants.C_q) + "," +
           detail::fmt_double(c.constants.C_q_prime) + "," +
           detail::fmt_double(c.constants.delta) + "," + detail::fmt_double(c.constants.a) + "," +
           detail::fmt_double(c.constants.lip) + "," + detail::fmt_double(c.constants.cost_gap) +
           "\n";
  }
  return out;
}

}  // namespace rotlab
