// rotlab: regularized optimal transport laboratory.
//
// Subcommands: solve, shadow, wasserstein, bounds, experiment run <name>,
// experiment list. Exit code 0 iff the command's status is ok (solves
// converged, certificates hold, experiments report zero violations).

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rotlab/rotlab.hpp"

namespace {

using rotlab::json;

double parse_order(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "infinity") return rotlab::kInf;
  return std::stod(s);
}

std::vector<rotlab::DiscreteMeasure> load_measures(const std::vector<std::string>& paths) {
  std::vector<rotlab::DiscreteMeasure> mus;
  for (const auto& path : paths)
    mus.push_back(rotlab::measure_from_json(rotlab::load_json_file(path)));
  return mus;
}

void emit(const json& j, const std::string& format) {
  if (format == "csv" && j.contains("certificates")) {
    std::printf("theorem,bound,measured,holds,looseness\n");
    for (const auto& c : j.at("certificates")) {
      const std::string loose =
          c.at("looseness").is_string() ? "inf" : c.at("looseness").dump();
      std::printf("%s,%s,%s,%s,%s\n", c.at("theorem").get<std::string>().c_str(),
                  c.at("bound").dump().c_str(), c.at("measured").dump().c_str(),
                  c.at("holds").get<bool>() ? "true" : "false", loose.c_str());
    }
    return;
  }
  std::printf("%s\n", j.dump(2).c_str());
}

json certificate_json(const rotlab::StabilityCertificate& c) {
  json j;
  j["theorem"] = c.theorem;
  j["bound"] = c.bound;
  j["measured"] = c.measured;
  j["holds"] = c.holds;
  if (std::isfinite(c.looseness))
    j["looseness"] = c.looseness;
  else
    j["looseness"] = "inf";
  return j;
}

struct CommonFlags {
  std::string p = "2";
  std::string q = "1";
  double epsilon = 1.0;
  std::string divergence = "kl";
  double tol = 1e-10;
  long max_iters = 100000;
  std::string out;
  std::string format = "json";
};

void add_common(CLI::App* app, CommonFlags& flags) {
  app->add_option("--p", flags.p, "order p (number or 'inf')");
  app->add_option("--q", flags.q, "order q");
  app->add_option("--epsilon", flags.epsilon, "regularization weight, applied as c/epsilon");
  app->add_option("--divergence", flags.divergence, "kl|quadratic")
      ->check(CLI::IsMember({"kl", "quadratic", "both"}));
  app->add_option("--tol", flags.tol, "marginal TV tolerance");
  app->add_option("--max-iters", flags.max_iters, "iteration cap");
  app->add_option("--out", flags.out, "output directory");
  app->add_option("--format", flags.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
}

rotlab::SolveReport solve_files(const std::vector<rotlab::DiscreteMeasure>& mus,
                                const rotlab::CostSpec& cost, double epsilon,
                                const CommonFlags& flags) {
  rotlab::require(flags.divergence != "both", rotlab::errc::config_invalid,
                  "pick one divergence for a single solve: kl or quadratic");
  rotlab::SinkhornOptions opts;
  opts.tol = flags.tol;
  opts.max_iters = flags.max_iters;
  opts.reg_weight = epsilon;
  if (flags.divergence == "kl") return rotlab::multimarginal_sinkhorn_solve(mus, cost, opts);
  return rotlab::f_regularized_solve(
      mus, epsilon == 1.0 ? cost : cost.scaled(1.0 / epsilon),
      rotlab::DivergenceSpec::quadratic(), opts);
}

int cmd_solve(const std::vector<std::string>& measure_paths, const std::string& cost_path,
              const CommonFlags& flags, double epsilon_flag) {
  const auto mus = load_measures(measure_paths);
  const json cj = rotlab::load_json_file(cost_path);
  const rotlab::CostSpec cost = rotlab::cost_from_json(cj, mus);
  const double epsilon =
      epsilon_flag != 1.0 ? epsilon_flag : rotlab::cost_epsilon_from_json(cj);
  const rotlab::SolveReport r = solve_files(mus, cost, epsilon, flags);

  json out;
  out["value"] = r.value;
  out["direct_value"] = r.direct_value;
  out["epsilon"] = epsilon;
  out["iterations"] = r.iterations;
  out["converged"] = r.converged;
  out["gibbs_mass"] = r.gibbs_mass;
  out["kl_to_gibbs"] = r.kl_to_gibbs;
  json tensor = json::array();
  for (std::size_t k = 0; k < r.optimizer.total(); ++k) tensor.push_back(r.optimizer.at(k));
  out["optimizer"] = std::move(tensor);
  out["dims"] = r.optimizer.shape().dims;
  json marg = json::array();
  for (std::size_t ax = 0; ax < mus.size(); ++ax)
    marg.push_back(rotlab::total_variation(r.optimizer.marginal(ax), mus[ax]));
  out["marginal_tv_errors"] = std::move(marg);
  out["status"] = r.converged ? "ok" : "not_converged";
  emit(out, flags.format);
  return r.converged ? 0 : 2;
}

int cmd_wasserstein(const std::string& a, const std::string& b, const CommonFlags& flags) {
  const auto mus = load_measures({a, b});
  const auto r = rotlab::wasserstein(mus[0], mus[1], parse_order(flags.p));
  json out;
  out["p"] = rotlab::order_to_json(parse_order(flags.p));
  out["value"] = r.value;
  json plan = json::array();
  for (std::size_t k = 0; k < r.plan.total(); ++k) plan.push_back(r.plan.at(k));
  out["plan"] = std::move(plan);
  out["dims"] = r.plan.shape().dims;
  out["exact"] = r.exact_flag;
  emit(out, flags.format);
  return 0;
}

int cmd_shadow(const std::vector<std::string>& measure_paths,
               const std::vector<std::string>& target_paths, const std::string& cost_path,
               const CommonFlags& flags) {
  const auto mus = load_measures(measure_paths);
  const auto targets = load_measures(target_paths);
  const double p = parse_order(flags.p);

  // the coupling to shadow: the entropic optimizer when a cost is given,
  // the product of the marginals otherwise
  rotlab::Coupling pi = [&]() {
    if (cost_path.empty()) return rotlab::product_measure(mus);
    const json cj = rotlab::load_json_file(cost_path);
    const rotlab::CostSpec cost = rotlab::cost_from_json(cj, mus);
    const double epsilon = rotlab::cost_epsilon_from_json(cj);
    rotlab::SolveReport r = solve_files(mus, cost, epsilon, flags);
    rotlab::require(r.converged, rotlab::errc::solver_failure, "solve did not converge");
    return r.optimizer;
  }();

  const rotlab::ShadowResult res = rotlab::build_shadow(pi, targets, p);
  const auto spec = flags.divergence == "quadratic" ? rotlab::DivergenceSpec::quadratic()
                                                    : rotlab::DivergenceSpec::kl();
  const rotlab::ShadowCertificate cert = rotlab::verify_shadow(pi, res, spec, p);

  json out;
  out["p"] = rotlab::order_to_json(p);
  out["wp_pi_shadow"] = cert.wp_pi_shadow;
  out["tuple_distance"] = cert.tuple_distance;
  out["df_shadow"] = std::isfinite(cert.df_shadow) ? json(cert.df_shadow) : json("inf");
  out["df_pi"] = std::isfinite(cert.df_pi) ? json(cert.df_pi) : json("inf");
  out["distance_equal"] = cert.distance_equal;
  out["divergence_ok"] = cert.divergence_ok;
  json tensor = json::array();
  for (std::size_t k = 0; k < res.shadow.total(); ++k) tensor.push_back(res.shadow.at(k));
  out["shadow"] = std::move(tensor);
  out["dims"] = res.shadow.shape().dims;
  out["status"] = cert.distance_equal && cert.divergence_ok ? "ok" : "violation";
  emit(out, flags.format);
  return cert.distance_equal && cert.divergence_ok ? 0 : 1;
}

int cmd_bounds(const std::vector<std::string>& measure_paths,
               const std::vector<std::string>& target_paths, const std::string& cost_path,
               const CommonFlags& flags, double power_cp) {
  const auto mus = load_measures(measure_paths);
  const auto tildes = load_measures(target_paths);
  const double p = parse_order(flags.p);
  const double q = parse_order(flags.q);
  const json cj = rotlab::load_json_file(cost_path);
  rotlab::CostSpec cost = rotlab::cost_from_json(cj, mus);
  const double epsilon = rotlab::cost_epsilon_from_json(cj);
  if (epsilon != 1.0) cost = cost.scaled(1.0 / epsilon);
  const std::string kind = cj.at("kind").get<std::string>();

  double L = 0.0;
  if (kind == "sqeuclidean" && p == 2.0) {
    L = rotlab::cost_condition_constant_quadratic(mus, tildes);
  } else if (kind == "power") {
    const double cp = power_cp > 0.0 ? power_cp
                                     : p * std::pow(2.0, (p - 1.0) / p);
    L = rotlab::cost_condition_constant_power(cj.at("p").get<double>(), cp, mus, tildes);
  } else {
    if (!cost.has_factors()) {
      rotlab::CostFactor f;
      f.values = cost.values();
      f.growth.a = cost.sup_norm();
      f.growth.b = 0.0;
      f.growth.l = 0.0;
      rotlab::CostFactor ones;
      ones.values.assign(cost.values().size(), 1.0);
      ones.growth.a = 1.0;
      cost.set_factors(std::move(f), std::move(ones));
    }
    L = rotlab::cost_condition_constant_product(cost, mus, tildes, p);
  }
  const double delta = rotlab::marginal_tuple_distance(mus, tildes, p);

  const rotlab::SolveReport a = solve_files(mus, cost, 1.0, flags);
  const rotlab::SolveReport b = solve_files(tildes, cost, 1.0, flags);
  rotlab::require(a.converged && b.converged, rotlab::errc::solver_failure,
                  "solves did not converge");
  const double gap = std::abs(a.direct_value - b.direct_value);
  const double wq = rotlab::coupling_distance(a.optimizer, b.optimizer, q);

  std::vector<const rotlab::MetricSpace*> tail;
  for (std::size_t i = 1; i < mus.size(); ++i) tail.push_back(&mus[i].space());
  rotlab::BoundInputs in;
  in.N = static_cast<int>(mus.size());
  in.p = p;
  in.q = q;
  in.L = L;
  in.delta = delta;
  in.C_q = rotlab::transport_constant_bounded(q, rotlab::product_diameter(tail, q));
  in.C_q_prime = rotlab::transport_constant_exp_moment(
      rotlab::ExpMomentMode::expq, q, tildes, rotlab::default_exp_moment_grid(tildes));

  std::vector<rotlab::StabilityCertificate> certs;
  certs.push_back(rotlab::make_certificate("value_stability",
                                           rotlab::value_stability_bound(L, delta), gap, in, 1e-7));
  certs.push_back(rotlab::make_certificate("optimizer_stability_Iq",
                                           rotlab::optimizer_stability_bound_Iq(in), wq, in, 1e-7));
  certs.push_back(rotlab::make_certificate(
      "optimizer_stability_Iq_prime", rotlab::optimizer_stability_bound_Iq_prime(in), wq, in, 1e-7));

  bool all_hold = true;
  json list = json::array();
  for (const auto& c : certs) {
    all_hold = all_hold && c.holds;
    list.push_back(certificate_json(c));
  }
  json out;
  out["p"] = rotlab::order_to_json(p);
  out["q"] = rotlab::order_to_json(q);
  out["L"] = L;
  out["delta"] = delta;
  out["value_gap"] = gap;
  out["w_q"] = wq;
  out["certificates"] = std::move(list);
  out["status"] = all_hold ? "ok" : "violation";
  emit(out, flags.format);
  return all_hold ? 0 : 1;
}

int cmd_experiment_run(const std::string& name, const std::string& config_path,
                       const CommonFlags& flags, long seed, int trials, bool seed_set,
                       bool trials_set) {
  rotlab::ExperimentConfig cfg = rotlab::default_config(name);
  if (!config_path.empty()) {
    json j = rotlab::load_json_file(config_path);
    if (!j.contains("name")) j["name"] = name;
    cfg = rotlab::config_from_json(j);
  }
  cfg.name = name;
  if (seed_set) cfg.seed = static_cast<std::uint64_t>(seed);
  if (trials_set) cfg.trials = trials;
  if (flags.p != "2") cfg.p = parse_order(flags.p);
  if (flags.q != "1") cfg.q = parse_order(flags.q);
  cfg.epsilon = flags.epsilon;
  if (flags.divergence != "kl") cfg.divergence = flags.divergence;
  cfg.tol = flags.tol;
  cfg.max_iters = flags.max_iters;
  if (!flags.out.empty()) cfg.out_dir = flags.out;
  cfg.format = flags.format;

  const json report = rotlab::run_experiment(cfg);
  if (flags.format == "csv") {
    const rotlab::ExperimentReport rep = rotlab::run_experiment_report(cfg);
    std::printf("%s", rotlab::report_to_csv(rep).c_str());
  } else {
    std::printf("%s\n", report.dump(2).c_str());
  }
  return report.at("status").get<std::string>() == "ok" ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rotlab: discrete regularized optimal transport laboratory"};
  app.require_subcommand(1);
  CommonFlags flags;

  // solve
  auto* solve = app.add_subcommand("solve", "solve a regularized transport problem");
  std::vector<std::string> solve_measures;
  std::string solve_cost;
  solve->add_option("measures", solve_measures, "marginal measure files (JSON)")
      ->required()
      ->expected(2, 8);
  solve->add_option("--cost", solve_cost, "cost file (JSON)")->required();
  add_common(solve, flags);

  // wasserstein
  auto* wass = app.add_subcommand("wasserstein", "exact W_p between two measures");
  std::string wa, wb;
  wass->add_option("a", wa, "first measure file")->required();
  wass->add_option("b", wb, "second measure file")->required();
  add_common(wass, flags);

  // shadow
  auto* shadow = app.add_subcommand("shadow", "shadow of a coupling onto target marginals");
  std::vector<std::string> shadow_measures, shadow_targets;
  std::string shadow_cost;
  shadow->add_option("measures", shadow_measures, "marginal measure files")
      ->required()
      ->expected(2, 8);
  shadow->add_option("--targets", shadow_targets, "target measure files")->required();
  shadow->add_option("--cost", shadow_cost, "optional cost file; shadows the entropic optimizer");
  add_common(shadow, flags);

  // bounds
  auto* bounds = app.add_subcommand("bounds", "stability bounds and certificates");
  std::vector<std::string> bounds_measures, bounds_targets;
  std::string bounds_cost;
  double power_cp = 0.0;
  bounds->add_option("measures", bounds_measures, "marginal measure files")
      ->required()
      ->expected(2, 8);
  bounds->add_option("--targets", bounds_targets, "target measure files")->required();
  bounds->add_option("--cost", bounds_cost, "cost file")->required();
  bounds->add_option("--power-cp", power_cp, "caller-supplied C_p for power costs");
  add_common(bounds, flags);

  // experiment
  auto* experiment = app.add_subcommand("experiment", "batch experiment harness");
  auto* exp_run = experiment->add_subcommand("run", "run a named experiment");
  std::string exp_name, exp_config;
  long seed = 1;
  int trials = 20;
  exp_run->add_option("name", exp_name, "experiment name")->required();
  exp_run->add_option("--config", exp_config, "config file (JSON)");
  auto* seed_opt = exp_run->add_option("--seed", seed, "master seed");
  auto* trials_opt = exp_run->add_option("--trials", trials, "trial count");
  add_common(exp_run, flags);
  auto* exp_list = experiment->add_subcommand("list", "list experiment names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(solve_measures, solve_cost, flags, flags.epsilon);
    if (wass->parsed()) return cmd_wasserstein(wa, wb, flags);
    if (shadow->parsed()) return cmd_shadow(shadow_measures, shadow_targets, shadow_cost, flags);
    if (bounds->parsed())
      return cmd_bounds(bounds_measures, bounds_targets, bounds_cost, flags, power_cp);
    if (experiment->parsed()) {
      if (exp_list->parsed()) {
        for (const auto& name : rotlab::experiment_names()) std::printf("%s\n", name.c_str());
        return 0;
      }
      if (exp_run->parsed())
        return cmd_experiment_run(exp_name, exp_config, flags, seed, trials, seed_opt->count() > 0,
                                  trials_opt->count() > 0);
    }
  } catch (const rotlab::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
