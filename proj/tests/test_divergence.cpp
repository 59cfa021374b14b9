#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracle.hpp"
#include "rotlab/divergence.hpp"
#include "rotlab/exact.hpp"
#include "rotlab/rng.hpp"

using namespace rotlab;

namespace {

DiscreteMeasure random_measure(Rng& rng, const SpacePtr& sp, double floor_weight = 0.05) {
  return make_discrete_measure(sp, rng.simplex_point(static_cast<int>(sp->size()), floor_weight));
}

MarkovKernel random_kernel(Rng& rng, const SpacePtr& sp) {
  const std::size_t n = sp->size();
  std::vector<double> rows;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = rng.simplex_point(static_cast<int>(n), 0.05);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return MarkovKernel(sp, sp, std::move(rows));
}

}  // namespace

TEST_CASE("divergence generators validate the defining conditions") {
  CHECK(DivergenceSpec::kl().f(1.0) == 0.0);
  CHECK(DivergenceSpec::quadratic().f(3.0) == 4.0);
  CHECK_THROWS_AS(DivergenceSpec::custom("affine", [](double x) { return x - 1.0; }), Error);
  const auto cube =
      DivergenceSpec::custom("cube", [](double x) { return x * x * x - 3.0 * x + 2.0; });
  CHECK(cube.f(1.0) == 0.0);
}

TEST_CASE("f_divergence closed forms") {
  auto two = line_space({0.0, 1.0});
  const auto kl = DivergenceSpec::kl();

  const DiscreteMeasure mu = make_discrete_measure(two, {0.3, 0.7});
  CHECK(f_divergence(mu, mu, kl) == Catch::Approx(0.0).margin(1e-15));

  CHECK(f_divergence(dirac(two, 0), dirac(two, 1), kl) == kInf);

  // D_KL(Bernoulli(0.5), Bernoulli(0.25)) = 0.5 ln 2 + 0.5 ln(2/3)
  const DiscreteMeasure half = make_discrete_measure(two, {0.5, 0.5});
  const DiscreteMeasure quarter = make_discrete_measure(two, {0.75, 0.25});
  const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  CHECK(expected == Catch::Approx(0.14384103622589042).margin(1e-15));
  CHECK(f_divergence(half, quarter, kl) == Catch::Approx(expected).margin(1e-12));
  CHECK(kl_divergence(half, quarter) == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("D_f is nonnegative, zero iff equal, jointly convex") {
  Rng rng(51);
  auto sp = line_space({0.0, 1.0, 2.0, 3.0});
  const auto kl = DivergenceSpec::kl();
  const auto quad = DivergenceSpec::quadratic();
  for (int t = 0; t < 50; ++t) {
    const DiscreteMeasure mu = random_measure(rng, sp);
    const DiscreteMeasure nu = random_measure(rng, sp);
    for (const auto* spec : {&kl, &quad}) {
      const double d = f_divergence(mu, nu, *spec);
      CHECK(d >= -1e-10);
      if (total_variation(mu, nu) > 1e-6) CHECK(d > 1e-10);
      CHECK(f_divergence(mu, mu, *spec) <= 1e-10);
    }
    // joint convexity spot-check for KL
    const DiscreteMeasure mu2 = random_measure(rng, sp);
    const DiscreteMeasure nu2 = random_measure(rng, sp);
    const double t_mix = rng.uniform();
    std::vector<double> wm(4), wn(4);
    for (int i = 0; i < 4; ++i) {
      wm[i] = t_mix * mu.weight(i) + (1.0 - t_mix) * mu2.weight(i);
      wn[i] = t_mix * nu.weight(i) + (1.0 - t_mix) * nu2.weight(i);
    }
    const double lhs = kl_divergence(make_discrete_measure(sp, wm), make_discrete_measure(sp, wn));
    const double rhs = t_mix * kl_divergence(mu, nu) + (1.0 - t_mix) * kl_divergence(mu2, nu2);
    CHECK(lhs <= rhs + 1e-10);
  }
}

TEST_CASE("push_kernel") {
  auto two = line_space({0.0, 1.0});
  const DiscreteMeasure mu = make_discrete_measure(two, {0.5, 0.5});

  const auto id = MarkovKernel::identity(two);
  const DiscreteMeasure same = push_kernel(mu, id);
  CHECK(same.weight(0) == 0.5);

  const DiscreteMeasure nu = make_discrete_measure(two, {0.2, 0.8});
  const auto constant = MarkovKernel::constant(two, nu);
  const DiscreteMeasure pushed = push_kernel(dirac(two, 0), constant);
  CHECK(pushed.weight(1) == Catch::Approx(0.8).margin(1e-15));

  const MarkovKernel K(two, two, {1.0, 0.0, 0.5, 0.5});
  const DiscreteMeasure r = push_kernel(mu, K);
  CHECK(r.weight(0) == Catch::Approx(0.75).margin(1e-15));
  CHECK(r.weight(1) == Catch::Approx(0.25).margin(1e-15));

  auto three = line_space({0.0, 1.0, 2.0});
  CHECK_THROWS_MATCHES(push_kernel(uniform_measure(three), id), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == errc::space_mismatch; }));
}

TEST_CASE("transport constants") {
  // bounded: 2^(-1/(2q)) diam
  CHECK(transport_constant_bounded(1.0, 2.0) == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
  CHECK(transport_constant_bounded(2.0, 2.0) ==
        Catch::Approx(std::pow(2.0, 0.75)).margin(1e-12));

  // expq with both marginals a point mass: all exp-moments are 1, the grid
  // minimum sits at the largest alpha = 64, giving 2 * 3/64 = 3/32
  auto one = line_space({0.0});
  std::vector<DiscreteMeasure> points{dirac(one, 0), dirac(one, 0)};
  const auto grid = default_exp_moment_grid(points);
  CHECK(transport_constant_exp_moment(ExpMomentMode::expq, 1.0, points, grid) ==
        Catch::Approx(3.0 / 32.0).margin(1e-12));
  // exp2q variant: 2 * min_alpha (N/(2 alpha) * sum_i 1)^(1/2) = 2 * (2/64)^(1/2)
  CHECK(transport_constant_exp_moment(ExpMomentMode::exp2q, 1.0, points, grid) ==
        Catch::Approx(2.0 * std::pow(2.0 / 64.0, 0.5)).margin(1e-12));

  ExpMomentGrid bad;
  CHECK_THROWS_MATCHES(transport_constant_exp_moment(ExpMomentMode::expq, 1.0, points, bad), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == errc::empty_grid; }));
  ExpMomentGrid neg = grid;
  neg.alphas = {-1.0};
  CHECK_THROWS_MATCHES(transport_constant_exp_moment(ExpMomentMode::expq, 1.0, points, neg), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == errc::nonpositive_alpha; }));
}

TEST_CASE("Pinsker chain: bounded transport inequality on shared marginals") {
  // W_q(pi, theta) <= 2^(-1/(2q)) diam_q(X_2 x ... x X_N) D_KL(theta, pi)^(1/(2q))
  // for couplings with identical marginals; the diameter of the first factor
  // does not enter.
  Rng rng(57);
  for (int t = 0; t < 12; ++t) {
    const int n1 = 2 + rng.uniform_int(3), n2 = 2 + rng.uniform_int(3);
    std::vector<double> xs, ys;
    for (int i = 0; i < n1; ++i) xs.push_back(rng.uniform(-1.0, 1.0));
    for (int i = 0; i < n2; ++i) ys.push_back(rng.uniform(-1.0, 1.0));
    auto sa = line_space(xs), sb = line_space(ys);
    const DiscreteMeasure mu = random_measure(rng, sa);
    const DiscreteMeasure nu = random_measure(rng, sb);
    // two random couplings with the same marginals, built from null-space moves
    auto perturb = [&](Coupling base) {
      std::vector<double> w(base.tensor());
      for (int moves = 0; moves < 8; ++moves) {
        const std::size_t i1 = rng.uniform_int(n1), i2 = rng.uniform_int(n1);
        const std::size_t j1 = rng.uniform_int(n2), j2 = rng.uniform_int(n2);
        if (i1 == i2 || j1 == j2) continue;
        const double cap = std::min(w[i1 * n2 + j2], w[i2 * n2 + j1]);
        const double d = rng.uniform(0.0, cap);
        w[i1 * n2 + j1] += d;
        w[i2 * n2 + j2] += d;
        w[i1 * n2 + j2] -= d;
        w[i2 * n2 + j1] -= d;
      }
      return Coupling(base.product(), std::move(w));
    };
    const Coupling base = product_measure({mu, nu});
    const Coupling pi = perturb(base);
    const Coupling theta = perturb(base);
    for (double q : {1.0, 2.0}) {
      const double cq = transport_constant_bounded(q, sb->diameter());
      const double wq = coupling_distance(pi, theta, q);
      const double kl = kl_divergence(theta, pi);
      if (kl == kInf) continue;
      CHECK(wq <= cq * std::pow(kl, 1.0 / (2.0 * q)) + 1e-9);
      // the exponential-moment constant is also valid for (I_q)
      const double cq2 = transport_constant_exp_moment(ExpMomentMode::exp2q, q, {mu, nu},
                                                       default_exp_moment_grid({mu, nu}));
      CHECK(wq <= cq2 * std::pow(kl, 1.0 / (2.0 * q)) + 1e-9);
    }
  }
}

TEST_CASE("data processing inequality") {
  auto sp = line_space({0.0, 1.0, 2.0, 3.0});
  const auto kl = DivergenceSpec::kl();
  Rng rng(61);

  const DiscreteMeasure mu = random_measure(rng, sp);
  const DiscreteMeasure nu = random_measure(rng, sp);
  const auto id_cert = check_data_processing(mu, nu, MarkovKernel::identity(sp), kl);
  CHECK(id_cert.holds);
  CHECK(id_cert.lhs == Catch::Approx(id_cert.rhs).margin(1e-12));

  const auto constant = MarkovKernel::constant(sp, uniform_measure(sp));
  const auto const_cert = check_data_processing(mu, nu, constant, kl);
  CHECK(const_cert.holds);
  CHECK(const_cert.lhs == Catch::Approx(0.0).margin(1e-12));

  const auto quad = DivergenceSpec::quadratic();
  for (int t = 0; t < 200; ++t) {
    const DiscreteMeasure a = random_measure(rng, sp, 0.0);
    const DiscreteMeasure b = random_measure(rng, sp, 0.01);
    const MarkovKernel K = random_kernel(rng, sp);
    CHECK(check_data_processing(a, b, K, kl).holds);
    CHECK(check_data_processing(a, b, K, quad).holds);
  }
}
