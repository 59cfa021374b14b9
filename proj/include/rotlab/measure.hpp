#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rotlab/errors.hpp"
#include "rotlab/metric.hpp"

namespace rotlab {

// Weighted point cloud on a finite metric space. Weights are normalized to
// unit mass at construction; zero-weight atoms are kept so that the support
// geometry (diameters, W_inf thresholds) survives perturbation sweeps.
class DiscreteMeasure {
 public:
  DiscreteMeasure(SpacePtr space, std::vector<double> weights)
      : space_(std::move(space)), w_(std::move(weights)) {
    require(space_ != nullptr, errc::bad_input, "null space");
    require(w_.size() == space_->size(), errc::bad_input, "weight count != point count");
    double sum = 0.0;
    for (double& x : w_) {
      require(x >= -1e-12, errc::negative_weight, "negative weight");
      if (x < 0.0) x = 0.0;
      sum += x;
    }
    require(std::abs(sum - 1.0) <= 1e-6, errc::bad_mass, "weights do not sum to 1");
    for (double& x : w_) x /= sum;
  }

  const MetricSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  std::size_t size() const { return w_.size(); }
  double weight(std::size_t i) const { return w_[i]; }
  const std::vector<double>& weights() const { return w_; }

 private:
  SpacePtr space_;
  std::vector<double> w_;
};

inline DiscreteMeasure make_discrete_measure(SpacePtr space, std::vector<double> weights) {
  return DiscreteMeasure(std::move(space), std::move(weights));
}

inline DiscreteMeasure dirac(SpacePtr space, std::size_t at) {
  std::vector<double> w(space->size(), 0.0);
  w[at] = 1.0;
  return DiscreteMeasure(std::move(space), std::move(w));
}

inline DiscreteMeasure uniform_measure(SpacePtr space) {
  std::vector<double> w(space->size(), 1.0 / static_cast<double>(space->size()));
  return DiscreteMeasure(std::move(space), std::move(w));
}

// (sum_x w(x) d(x, anchor)^p)^{1/p}, p in [1, inf)
inline double p_moment(const DiscreteMeasure& mu, double p, const Anchor& anchor) {
  require(p >= 1.0 && !is_inf(p), errc::bad_order, "p_moment requires p in [1, inf)");
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu.weight(i) == 0.0) continue;
    acc += mu.weight(i) * std::pow(dist_to_anchor(mu.space(), i, anchor), p);
  }
  return std::pow(acc, 1.0 / p);
}

// Drops zero-weight atoms (builds a fresh space). The only way supports
// shrink; nothing prunes implicitly.
inline DiscreteMeasure compactify(const DiscreteMeasure& mu) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (mu.weight(i) > 0.0) keep.push_back(i);
  if (keep.size() == mu.size()) return mu;
  std::vector<double> w;
  w.reserve(keep.size());
  for (auto i : keep) w.push_back(mu.weight(i));
  if (mu.space().is_euclidean()) {
    std::vector<std::vector<double>> coords;
    coords.reserve(keep.size());
    for (auto i : keep) coords.push_back(mu.space().coords(i));
    return DiscreteMeasure(make_space(MetricSpace::euclidean(std::move(coords))), std::move(w));
  }
  std::vector<std::vector<double>> dist(keep.size(), std::vector<double>(keep.size(), 0.0));
  for (std::size_t a = 0; a < keep.size(); ++a)
    for (std::size_t b = 0; b < keep.size(); ++b) dist[a][b] = mu.space().dist(keep[a], keep[b]);
  return DiscreteMeasure(make_space(MetricSpace::from_matrix(std::move(dist))), std::move(w));
}

}  // namespace rotlab
