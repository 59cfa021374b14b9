#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rotlab/errors.hpp"
#include "rotlab/measure.hpp"
#include "rotlab/metric.hpp"

namespace rotlab {

// Row-major index bookkeeping for dense tensors over product supports.
struct TensorShape {
  std::vector<std::size_t> dims;
  std::vector<std::size_t> strides;
  std::size_t total = 1;

  explicit TensorShape(std::vector<std::size_t> d) : dims(std::move(d)) {
    strides.assign(dims.size(), 1);
    for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i)
      strides[i] = strides[i + 1] * dims[i + 1];
    total = dims.empty() ? 1 : strides[0] * dims[0];
  }

  std::size_t flatten(const std::vector<std::size_t>& idx) const {
    std::size_t k = 0;
    for (std::size_t a = 0; a < dims.size(); ++a) k += idx[a] * strides[a];
    return k;
  }

  void unflatten(std::size_t k, std::vector<std::size_t>& idx) const {
    idx.resize(dims.size());
    for (std::size_t a = 0; a < dims.size(); ++a) {
      idx[a] = k / strides[a];
      k %= strides[a];
    }
  }

  std::size_t coord(std::size_t k, std::size_t axis) const { return (k / strides[axis]) % dims[axis]; }
};

class ProductSpace {
 public:
  ProductSpace(std::vector<SpacePtr> factors, double p = 2.0)
      : factors_(std::move(factors)), p_(p) {
    require(!factors_.empty(), errc::bad_input, "empty product space");
    for (const auto& f : factors_) require(f != nullptr, errc::bad_input, "null factor");
    require(p_ >= 1.0, errc::bad_order, "product metric order must be >= 1");
  }

  std::size_t arity() const { return factors_.size(); }
  const MetricSpace& factor(std::size_t i) const { return *factors_[i]; }
  const SpacePtr& factor_ptr(std::size_t i) const { return factors_[i]; }
  double default_order() const { return p_; }

  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d;
    d.reserve(factors_.size());
    for (const auto& f : factors_) d.push_back(f->size());
    return d;
  }

  bool content_equal(const ProductSpace& o) const {
    if (arity() != o.arity()) return false;
    for (std::size_t i = 0; i < arity(); ++i)
      if (!factor(i).content_equal(o.factor(i))) return false;
    return true;
  }

 private:
  std::vector<SpacePtr> factors_;
  double p_;
};

inline double aggregate_lp(const std::vector<double>& parts, double p) {
  if (is_inf(p)) {
    double m = 0.0;
    for (double d : parts) m = std::max(m, d);
    return m;
  }
  double acc = 0.0;
  for (double d : parts) acc += std::pow(d, p);
  return std::pow(acc, 1.0 / p);
}

// d_{X,p}(x, y) = (sum_i d_i(x_i,y_i)^p)^{1/p}, max_i for p = inf.
inline double product_distance(const ProductSpace& s, const std::vector<std::size_t>& x,
                               const std::vector<std::size_t>& y, double p) {
  require(x.size() == s.arity() && y.size() == s.arity(), errc::bad_input, "tuple arity mismatch");
  require(p >= 1.0, errc::bad_order, "order must be >= 1");
  std::vector<double> parts(s.arity());
  for (std::size_t i = 0; i < s.arity(); ++i) parts[i] = s.factor(i).dist(x[i], y[i]);
  return aggregate_lp(parts, p);
}

// diam_q of a product of factor spaces (used for the bounded transport
// inequality constant, where the product is X_2 x ... x X_N).
inline double product_diameter(const std::vector<const MetricSpace*>& factors, double q) {
  std::vector<double> parts;
  parts.reserve(factors.size());
  for (const auto* f : factors) parts.push_back(f->diameter());
  return aggregate_lp(parts, q);
}

// Probability tensor over a product of supports.
class Coupling {
 public:
  Coupling(ProductSpace space, std::vector<double> tensor)
      : space_(std::move(space)), shape_(space_.dims()), t_(std::move(tensor)) {
    require(t_.size() == shape_.total, errc::bad_input, "tensor size mismatch");
    double sum = 0.0;
    for (double& v : t_) {
      require(v >= -1e-12, errc::negative_weight, "negative tensor entry");
      if (v < 0.0) v = 0.0;
      sum += v;
    }
    require(std::abs(sum - 1.0) <= 1e-6, errc::bad_mass, "tensor does not sum to 1");
    for (double& v : t_) v /= sum;
  }

  const ProductSpace& product() const { return space_; }
  const TensorShape& shape() const { return shape_; }
  std::size_t arity() const { return space_.arity(); }
  std::size_t total() const { return shape_.total; }
  double at(std::size_t flat) const { return t_[flat]; }
  const std::vector<double>& tensor() const { return t_; }

  DiscreteMeasure marginal(std::size_t axis) const {
    require(axis < arity(), errc::bad_axis, "marginal axis out of range");
    std::vector<double> w(shape_.dims[axis], 0.0);
    for (std::size_t k = 0; k < t_.size(); ++k) w[shape_.coord(k, axis)] += t_[k];
    return DiscreteMeasure(space_.factor_ptr(axis), std::move(w));
  }

 private:
  ProductSpace space_;
  TensorShape shape_;
  std::vector<double> t_;
};

inline Coupling product_measure(const std::vector<DiscreteMeasure>& mus) {
  require(mus.size() >= 2, errc::bad_input, "product_measure needs >= 2 factors");
  std::vector<SpacePtr> factors;
  factors.reserve(mus.size());
  for (const auto& m : mus) factors.push_back(m.space_ptr());
  ProductSpace space(std::move(factors));
  TensorShape shape(space.dims());
  std::vector<double> t(shape.total, 1.0);
  for (std::size_t k = 0; k < shape.total; ++k)
    for (std::size_t a = 0; a < mus.size(); ++a) t[k] *= mus[a].weight(shape.coord(k, a));
  return Coupling(std::move(space), std::move(t));
}

}  // namespace rotlab
