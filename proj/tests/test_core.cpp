#include <catch2/catch_amalgamated.hpp>

#include "rotlab/coupling.hpp"
#include "rotlab/measure.hpp"
#include "rotlab/metric.hpp"
#include "rotlab/rng.hpp"

using namespace rotlab;

TEST_CASE("make_discrete_measure normalizes and validates") {
  auto one = line_space({0.0});
  auto two = line_space({0.0, 1.0});

  const DiscreteMeasure point = make_discrete_measure(one, {1.0});
  CHECK(point.weight(0) == 1.0);

  const DiscreteMeasure half = make_discrete_measure(two, {0.5, 0.5});
  CHECK(half.weight(0) == 0.5);

  // inputs within 1e-6 of unit mass are renormalized
  const DiscreteMeasure renorm = make_discrete_measure(two, {0.3, 0.7000004});
  CHECK(renorm.weight(0) == Catch::Approx(0.3 / 1.0000004).epsilon(1e-14));
  CHECK(renorm.weight(1) == Catch::Approx(0.7000004 / 1.0000004).epsilon(1e-14));
  CHECK(renorm.weight(0) + renorm.weight(1) == Catch::Approx(1.0).margin(1e-12));

  CHECK_THROWS_MATCHES(make_discrete_measure(two, {-0.1, 1.1}), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == errc::negative_weight; }));
  CHECK_THROWS_MATCHES(make_discrete_measure(two, {0.5, 0.6}), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == errc::bad_mass; }));
}

TEST_CASE("zero-weight atoms are retained, compactify prunes them") {
  auto sp = line_space({0.0, 1.0, 2.0});
  const DiscreteMeasure mu = make_discrete_measure(sp, {0.5, 0.0, 0.5});
  CHECK(mu.size() == 3);
  const DiscreteMeasure pruned = compactify(mu);
  CHECK(pruned.size() == 2);
  CHECK(pruned.space().coords(1)[0] == 2.0);
  CHECK(pruned.weight(0) == 0.5);
}

TEST_CASE("product_measure and marginal round-trip") {
  auto two = line_space({0.0, 1.0});
  const DiscreteMeasure d0 = dirac(two, 0);
  const DiscreteMeasure d1 = dirac(two, 1);

  const Coupling pm = product_measure({d0, d1});
  CHECK(pm.at(pm.shape().flatten({0, 1})) == 1.0);

  const Coupling uu = product_measure({uniform_measure(two), uniform_measure(two)});
  for (std::size_t k = 0; k < 4; ++k) CHECK(uu.at(k) == Catch::Approx(0.25).margin(1e-15));

  const Coupling triple = product_measure({d0, d0, d0});
  CHECK(triple.total() == 8);
  CHECK(triple.at(0) == 1.0);

  // round-trip of the factors through marginal()
  Rng rng(7);
  auto sp5 = line_space({-1.0, -0.5, 0.0, 0.5, 1.0});
  for (int t = 0; t < 20; ++t) {
    const DiscreteMeasure a = make_discrete_measure(sp5, rng.simplex_point(5));
    const DiscreteMeasure b = make_discrete_measure(sp5, rng.simplex_point(5));
    const Coupling pi = product_measure({a, b});
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(pi.marginal(0).weight(i) == Catch::Approx(a.weight(i)).margin(1e-14));
      CHECK(pi.marginal(1).weight(i) == Catch::Approx(b.weight(i)).margin(1e-14));
    }
  }
}

TEST_CASE("marginal axis sums and errors") {
  auto two = line_space({0.0, 1.0});
  ProductSpace ps({two, two});
  const Coupling pi(ps, {0.4, 0.1, 0.1, 0.4});
  CHECK(pi.marginal(0).weight(0) == Catch::Approx(0.5).margin(1e-15));
  CHECK(pi.marginal(1).weight(1) == Catch::Approx(0.5).margin(1e-15));
  CHECK_THROWS_MATCHES(pi.marginal(2), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == errc::bad_axis;
                       }));
}

TEST_CASE("product metric d_{X,p}") {
  auto a = line_space({0.0, 3.0});
  auto b = line_space({0.0, 4.0});
  ProductSpace ps({a, b});
  CHECK(product_distance(ps, {0, 0}, {1, 1}, 2.0) == Catch::Approx(5.0).margin(1e-12));
  CHECK(product_distance(ps, {0, 0}, {1, 1}, kInf) == Catch::Approx(4.0).margin(1e-12));
  CHECK(product_distance(ps, {0, 0}, {1, 1}, 1.0) == Catch::Approx(7.0).margin(1e-12));
}

TEST_CASE("product metric axioms, exhaustively on small supports") {
  Rng rng(11);
  std::vector<std::vector<double>> ca, cb;
  for (int i = 0; i < 4; ++i) ca.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  for (int i = 0; i < 4; ++i) cb.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  auto sa = make_space(MetricSpace::euclidean(ca));
  auto sb = make_space(MetricSpace::euclidean(cb));
  ProductSpace ps({sa, sb});
  TensorShape shape({4, 4});
  std::vector<std::size_t> x, y, z;
  for (double p : {1.0, 1.5, 2.0, 3.0, kInf}) {
    for (std::size_t i = 0; i < 16; ++i) {
      shape.unflatten(i, x);
      CHECK(product_distance(ps, x, x, p) == 0.0);
      for (std::size_t j = 0; j < 16; ++j) {
        shape.unflatten(j, y);
        const double dij = product_distance(ps, x, y, p);
        CHECK(dij == product_distance(ps, y, x, p));
        // consistency: d_{X,p} >= d_{X,inf}
        CHECK(dij >= product_distance(ps, x, y, kInf) - 1e-12);
        for (std::size_t k = 0; k < 16; ++k) {
          shape.unflatten(k, z);
          CHECK(dij <= product_distance(ps, x, z, p) + product_distance(ps, z, y, p) + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("p_moment closed forms and monotonicity in p") {
  auto line3 = line_space({0.0, 3.0});
  const DiscreteMeasure d3 = dirac(line3, 1);
  CHECK(p_moment(d3, 2.0, Anchor::origin(1)) == Catch::Approx(3.0).margin(1e-12));

  auto two = line_space({0.0, 1.0});
  CHECK(p_moment(uniform_measure(two), 1.0, Anchor::at(0)) == Catch::Approx(0.5).margin(1e-12));

  auto pm1 = line_space({-1.0, 1.0});
  CHECK(p_moment(uniform_measure(pm1), 2.0, Anchor::origin(1)) == Catch::Approx(1.0).margin(1e-12));

  Rng rng(3);
  auto sp = line_space({-1.0, -0.3, 0.2, 0.9});
  for (int t = 0; t < 50; ++t) {
    const DiscreteMeasure mu = make_discrete_measure(sp, rng.simplex_point(4));
    double prev = 0.0;
    for (double p : {1.0, 1.5, 2.0, 3.0, 4.0}) {
      const double m = p_moment(mu, p, Anchor::origin(1));
      CHECK(m >= prev - 1e-10);
      prev = m;
    }
  }
}

TEST_CASE("explicit metric spaces validate the triangle inequality") {
  CHECK_THROWS_MATCHES(
      MetricSpace::from_matrix({{0.0, 10.0, 1.0}, {10.0, 0.0, 1.0}, {1.0, 1.0, 0.0}}), Error,
      Catch::Matchers::Predicate<Error>(
          [](const Error& e) { return e.code() == errc::invalid_metric; }));
  const MetricSpace ok = MetricSpace::discrete(3);
  CHECK(ok.dist(0, 1) == 1.0);
  CHECK(ok.dist(1, 1) == 0.0);
  CHECK(ok.diameter() == 1.0);
}
