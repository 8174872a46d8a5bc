#pragma once

// Weighted point clouds in R^d, stored flat (row i occupies
// coords[i*dim .. i*dim+dim)).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace rangeld {

struct Cloud {
  int dim = 0;
  std::vector<double> coords;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  const double* point(std::size_t i) const { return coords.data() + i * dim; }
  double* point(std::size_t i) { return coords.data() + i * dim; }

  double total_weight() const {
    double s = 0;
    for (double w : weights) s += w;
    return s;
  }

  void push(const std::vector<double>& x, double w) {
    if (int(x.size()) != dim) throw std::invalid_argument("Cloud::push: dimension mismatch");
    coords.insert(coords.end(), x.begin(), x.end());
    weights.push_back(w);
  }

  std::vector<double> weighted_mean() const {
    std::vector<double> m(dim, 0.0);
    const double tw = total_weight();
    if (tw == 0) return m;
    for (std::size_t i = 0; i < size(); ++i)
      for (int k = 0; k < dim; ++k) m[k] += weights[i] * point(i)[k];
    for (int k = 0; k < dim; ++k) m[k] /= tw;
    return m;
  }

  void translate(const std::vector<double>& v) {
    for (std::size_t i = 0; i < size(); ++i)
      for (int k = 0; k < dim; ++k) point(i)[k] += v[k];
  }
};

inline double sqdist(const double* a, const double* b, int dim) {
  double s = 0;
  for (int k = 0; k < dim; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

inline double sqnorm(const double* a, int dim) {
  double s = 0;
  for (int k = 0; k < dim; ++k) s += a[k] * a[k];
  return s;
}

}  // namespace rangeld
