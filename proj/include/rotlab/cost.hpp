#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rotlab/coupling.hpp"
#include "rotlab/errors.hpp"
#include "rotlab/measure.hpp"

namespace rotlab {

// Pointwise envelope |f(x)| <= a + b * sum_i d(x_i, anchor_i)^l, certified on
// the product support at construction. This is the growth data that feeds the
// Hoelder terms of the product cost-condition constant.
struct GrowthData {
  double a = 0.0;
  double b = 0.0;
  double l = 0.0;  // growth order; must be <= p - 1 when used at order p
  std::vector<Anchor> anchors;
};

// One Lipschitz factor of a product cost, as values over the product support.
struct CostFactor {
  std::vector<double> values;
  GrowthData growth;
};

namespace detail {

inline double growth_base(const ProductSpace& space, const TensorShape& shape, std::size_t flat,
                          const GrowthData& g) {
  double s = 0.0;
  for (std::size_t ax = 0; ax < space.arity(); ++ax)
    s += std::pow(dist_to_anchor(space.factor(ax), shape.coord(flat, ax), g.anchors[ax]), g.l);
  return s;
}

inline void verify_growth(const ProductSpace& space, const TensorShape& shape,
                          const std::vector<double>& values, const GrowthData& g) {
  require(g.b == 0.0 || g.anchors.size() == space.arity(), errc::bad_input,
          "growth anchor arity mismatch");
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double bound = g.a + (g.b > 0.0 ? g.b * growth_base(space, shape, k, g) : 0.0);
    require(std::abs(values[k]) <= bound + 1e-9 * std::max(1.0, bound), errc::bad_input,
            "growth envelope does not dominate the factor on the support");
  }
}

// Fit the tightest (a, b) envelope for given exponent l and anchors.
inline GrowthData fit_growth(const ProductSpace& space, const TensorShape& shape,
                             const std::vector<double>& values, double l,
                             std::vector<Anchor> anchors) {
  GrowthData g;
  g.l = l;
  g.anchors = std::move(anchors);
  double a = 0.0, b = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double base = growth_base(space, shape, k, g);
    if (base <= 1e-15)
      a = std::max(a, std::abs(values[k]));
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double base = growth_base(space, shape, k, g);
    if (base > 1e-15) b = std::max(b, (std::abs(values[k]) - a) / base);
  }
  g.a = a;
  g.b = std::max(b, 0.0);
  return g;
}

}  // namespace detail

// Cost on a product support plus metadata: sup norm, per-order Lipschitz
// constants (computed exactly on the support), growth constants, and an
// optional product factorization c = f*g used by the cost condition.
class CostSpec {
 public:
  CostSpec(ProductSpace space, std::vector<double> values)
      : space_(std::move(space)), shape_(space_.dims()), values_(std::move(values)) {
    require(values_.size() == shape_.total, errc::bad_input, "cost tensor size mismatch");
    sup_norm_ = 0.0;
    for (double v : values_) {
      require(v >= 0.0, errc::bad_input, "cost values must be nonnegative");
      sup_norm_ = std::max(sup_norm_, v);
    }
  }

  // c(x1, x2) = ||x1 - x2||^power on a two-factor euclidean product.
  static CostSpec power_cost(ProductSpace space, double power) {
    require(space.arity() == 2, errc::bad_input, "power cost needs two factors");
    require(compatible(space.factor(0), space.factor(1)), errc::incompatible_spaces,
            "power cost needs cross-distances between the factors");
    TensorShape shape(space.dims());
    std::vector<double> v(shape.total);
    for (std::size_t k = 0; k < shape.total; ++k)
      v[k] = std::pow(
          cross_dist(space.factor(0), shape.coord(k, 0), space.factor(1), shape.coord(k, 1)),
          power);
    CostSpec c(std::move(space), std::move(v));
    if (power == 2.0 && c.space_.factor(0).is_euclidean() && c.space_.factor(1).is_euclidean())
      c.attach_distance_factors();
    return c;
  }

  static CostSpec sqeuclidean(ProductSpace space) { return power_cost(std::move(space), 2.0); }

  // Attach an explicit factorization c = f * g; growth envelopes are
  // verified on the support.
  void set_factors(CostFactor f, CostFactor g) {
    require(f.values.size() == values_.size() && g.values.size() == values_.size(),
            errc::bad_input, "factor tensors must match the cost tensor");
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const double prod = f.values[k] * g.values[k];
      require(std::abs(prod - values_[k]) <= 1e-9 * std::max(1.0, std::abs(values_[k])),
              errc::bad_input, "factorization does not reproduce the cost");
    }
    detail::verify_growth(space_, shape_, f.values, f.growth);
    detail::verify_growth(space_, shape_, g.values, g.growth);
    factors_ = {std::move(f), std::move(g)};
  }

  // m-factor products fold left-associatively: the left block is multiplied
  // out and its envelope refitted on the support.
  void set_factors(std::vector<CostFactor> factors) {
    require(factors.size() >= 2, errc::missing_factors, "need at least two factors");
    while (factors.size() > 2) {
      CostFactor left = std::move(factors[0]);
      CostFactor right = std::move(factors[1]);
      CostFactor merged;
      merged.values.resize(left.values.size());
      for (std::size_t k = 0; k < merged.values.size(); ++k)
        merged.values[k] = left.values[k] * right.values[k];
      merged.growth = detail::fit_growth(space_, shape_, merged.values,
                                         left.growth.l + right.growth.l, left.growth.anchors);
      factors.erase(factors.begin());
      factors[0] = std::move(merged);
    }
    set_factors(std::move(factors[0]), std::move(factors[1]));
  }

  const ProductSpace& space() const { return space_; }
  const TensorShape& shape() const { return shape_; }
  const std::vector<double>& values() const { return values_; }
  double value(std::size_t flat) const { return values_[flat]; }
  double sup_norm() const { return sup_norm_; }
  bool has_factors() const { return factors_.has_value(); }
  const std::pair<CostFactor, CostFactor>& factors() const {
    require(factors_.has_value(), errc::missing_factors, "cost has no factorization");
    return *factors_;
  }

  // Lipschitz constant wrt d_{X,p}, exact on the support. Cached per order.
  double lip(double p) const {
    auto it = lip_cache_.find(p);
    if (it != lip_cache_.end()) return it->second;
    const double value = detail_lip(values_, p);
    lip_cache_[p] = value;
    return value;
  }

  double factor_lip(int which, double p) const {
    const auto& f = which == 0 ? factors().first : factors().second;
    return detail_lip(f.values, p);
  }

  // Smallest C with |c(x)| <= C (1 + d_{X,p}(x, anchor)^p) on the support.
  double growth_constant(double p, const std::vector<std::size_t>& anchor) const {
    double c = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < values_.size(); ++k) {
      shape_.unflatten(k, idx);
      const double d = product_distance(space_, idx, anchor, p);
      c = std::max(c, std::abs(values_[k]) / (1.0 + (is_inf(p) ? 0.0 : std::pow(d, p))));
    }
    return c;
  }

  // c scaled by 1/epsilon: the regularized problem at weight epsilon equals
  // the weight-1 problem with this cost.
  CostSpec scaled(double inv_factor) const {
    std::vector<double> v = values_;
    for (double& x : v) x *= inv_factor;
    CostSpec out(space_, std::move(v));
    if (factors_) {
      // scale one factor to preserve the product decomposition
      CostFactor f = factors_->first, g = factors_->second;
      for (double& x : f.values) x *= inv_factor;
      f.growth.a *= inv_factor;
      f.growth.b *= inv_factor;
      out.set_factors(std::move(f), std::move(g));
    }
    return out;
  }

 private:
  double detail_lip(const std::vector<double>& v, double p) const {
    double m = 0.0;
    std::vector<std::size_t> xi, yi;
    for (std::size_t x = 0; x < v.size(); ++x) {
      shape_.unflatten(x, xi);
      for (std::size_t y = x + 1; y < v.size(); ++y) {
        shape_.unflatten(y, yi);
        const double d = product_distance(space_, xi, yi, p);
        if (d > 0.0) m = std::max(m, std::abs(v[x] - v[y]) / d);
      }
    }
    return m;
  }

  void attach_distance_factors() {
    // ||x1 - x2||^2 = f*g with f = g = ||x1 - x2||; |f| <= d(x1,0) + d(x2,0)
    CostFactor f;
    f.values.resize(values_.size());
    for (std::size_t k = 0; k < values_.size(); ++k) f.values[k] = std::sqrt(values_[k]);
    f.growth.a = 0.0;
    f.growth.b = 1.0;
    f.growth.l = 1.0;
    for (std::size_t ax = 0; ax < space_.arity(); ++ax)
      f.growth.anchors.push_back(Anchor::origin(space_.factor(ax).dim()));
    set_factors(f, f);
  }

  ProductSpace space_;
  TensorShape shape_;
  std::vector<double> values_;
  double sup_norm_ = 0.0;
  std::optional<std::pair<CostFactor, CostFactor>> factors_;
  mutable std::map<double, double> lip_cache_;
};

}  // namespace rotlab
