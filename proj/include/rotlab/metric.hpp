#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "rotlab/errors.hpp"

namespace rotlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool is_inf(double p) { return std::isinf(p); }

// A finite metric space. Either "euclidean" (points carry coordinates, the
// distance matrix is derived) or "explicit" (distance matrix given directly).
// Symmetry, zero diagonal and the triangle inequality are checked at
// construction: exhaustively for up to 64 points, on sampled triples above.
class MetricSpace {
 public:
  static MetricSpace euclidean(std::vector<std::vector<double>> coords) {
    MetricSpace s;
    s.euclidean_ = true;
    s.coords_ = std::move(coords);
    const std::size_t n = s.coords_.size();
    s.n_ = n;
    require(n > 0, errc::invalid_metric, "empty point set");
    const std::size_t d = s.coords_[0].size();
    for (const auto& c : s.coords_)
      require(c.size() == d, errc::invalid_metric, "ragged coordinates");
    s.dist_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double t = s.coords_[i][k] - s.coords_[j][k];
          acc += t * t;
        }
        s.dist_[i * n + j] = s.dist_[j * n + i] = std::sqrt(acc);
      }
    return s;
  }

  static MetricSpace from_matrix(std::vector<std::vector<double>> dist) {
    MetricSpace s;
    const std::size_t n = dist.size();
    s.n_ = n;
    require(n > 0, errc::invalid_metric, "empty point set");
    s.dist_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      require(dist[i].size() == n, errc::invalid_metric, "distance matrix not square");
      for (std::size_t j = 0; j < n; ++j) s.dist_[i * n + j] = dist[i][j];
    }
    s.check_axioms();
    return s;
  }

  // 0/1 discrete metric on n points
  static MetricSpace discrete(std::size_t n) {
    MetricSpace s;
    s.n_ = n;
    s.dist_.assign(n * n, 1.0);
    for (std::size_t i = 0; i < n; ++i) s.dist_[i * n + i] = 0.0;
    return s;
  }

  std::size_t size() const { return n_; }

  double dist(std::size_t i, std::size_t j) const { return dist_[i * size() + j]; }

  bool is_euclidean() const { return euclidean_; }
  std::size_t dim() const { return euclidean_ ? coords_[0].size() : 0; }
  const std::vector<double>& coords(std::size_t i) const { return coords_[i]; }

  double diameter() const {
    double m = 0.0;
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) m = std::max(m, dist(i, j));
    return m;
  }

  bool content_equal(const MetricSpace& o) const {
    if (size() != o.size()) return false;
    for (std::size_t k = 0; k < dist_.size(); ++k)
      if (dist_[k] != o.dist_[k]) return false;
    if (euclidean_ != o.euclidean_) return false;
    if (euclidean_ && coords_ != o.coords_) return false;
    return true;
  }

 private:
  void check_axioms() const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
      require(dist(i, i) == 0.0, errc::invalid_metric, "nonzero self-distance");
      for (std::size_t j = 0; j < n; ++j) {
        require(dist(i, j) >= 0.0, errc::invalid_metric, "negative distance");
        require(dist(i, j) == dist(j, i), errc::invalid_metric, "asymmetric distance");
      }
    }
    const double slack = 1e-12 * std::max(1.0, diameter());
    auto triangle = [&](std::size_t i, std::size_t j, std::size_t k) {
      require(dist(i, k) <= dist(i, j) + dist(j, k) + slack, errc::invalid_metric,
              "triangle inequality violated");
    };
    if (n <= 64) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t k = 0; k < n; ++k) triangle(i, j, k);
    } else {
      std::uint64_t state = 0xA11CEULL;
      auto next = [&] {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        return static_cast<std::size_t>((state >> 33) % n);
      };
      for (int t = 0; t < 200000; ++t) triangle(next(), next(), next());
    }
  }

  std::size_t n_ = 0;
  bool euclidean_ = false;
  std::vector<std::vector<double>> coords_;
  std::vector<double> dist_;  // n*n, row-major
};

using SpacePtr = std::shared_ptr<const MetricSpace>;

inline SpacePtr make_space(MetricSpace s) { return std::make_shared<const MetricSpace>(std::move(s)); }

inline SpacePtr line_space(std::vector<double> xs) {
  std::vector<std::vector<double>> coords;
  coords.reserve(xs.size());
  for (double x : xs) coords.push_back({x});
  return make_space(MetricSpace::euclidean(std::move(coords)));
}

inline bool compatible(const MetricSpace& a, const MetricSpace& b) {
  if (&a == &b || a.content_equal(b)) return true;
  return a.is_euclidean() && b.is_euclidean() && a.dim() == b.dim();
}

// Distance between point i of a and point j of b. The spaces must be the
// same, or both euclidean of equal dimension (cross distances from coords).
inline double cross_dist(const MetricSpace& a, std::size_t i, const MetricSpace& b, std::size_t j) {
  if (&a == &b || a.content_equal(b)) return a.dist(i, j);
  require(a.is_euclidean() && b.is_euclidean() && a.dim() == b.dim(), errc::incompatible_spaces,
          "cannot form cross-distance between unrelated spaces");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double t = a.coords(i)[k] - b.coords(j)[k];
    acc += t * t;
  }
  return std::sqrt(acc);
}

// A reference point used for moments and growth bounds: either an index into
// the space, or raw coordinates (euclidean spaces only; origin role).
struct Anchor {
  int index = -1;
  std::vector<double> coords;

  static Anchor at(int i) { return Anchor{i, {}}; }
  static Anchor origin(std::size_t dim) { return Anchor{-1, std::vector<double>(dim, 0.0)}; }
};

inline double dist_to_anchor(const MetricSpace& s, std::size_t i, const Anchor& a) {
  if (a.index >= 0) return s.dist(i, static_cast<std::size_t>(a.index));
  require(s.is_euclidean() && a.coords.size() == s.dim(), errc::bad_input,
          "coordinate anchor requires a euclidean space of matching dimension");
  double acc = 0.0;
  for (std::size_t k = 0; k < s.dim(); ++k) {
    const double t = s.coords(i)[k] - a.coords[k];
    acc += t * t;
  }
  return std::sqrt(acc);
}

}  // namespace rotlab
