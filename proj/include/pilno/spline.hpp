#pragma once

#include <vector>

#include "pilno/common.hpp"
#include "pilno/geometry.hpp"

namespace pilno::spline {

// Uniform 1-D B-spline basis of order K (degree K-1) on [a, b] with r
// equidistant interior knots. Knots extend uniformly past both ends
// (ghost knots), which keeps the recursion branch-free; the r + K basis
// functions whose support meets (a, b) are the active ones, numbered
// 0 .. r+K-1 from the left.
struct SplineBasis1D {
  int order = 3;        // K
  int interior = 10;    // r
  double a = -0.5;
  double b = 0.5;

  SplineBasis1D() = default;
  SplineBasis1D(int K, int r, double lo, double hi);

  int basis_count() const { return interior + order; }
  double spacing() const { return (b - a) / (interior + 1); }
  // m-th knot of the extended uniform vector; knot(K-1) == a.
  double knot(int m) const { return a + (m - (order - 1)) * spacing(); }

  // Index of the knot span containing x (clamped so x == b is valid).
  int span(double x) const;

  // The K active basis values at x; first_index is the global index of
  // the first of them. Cox-de Boor on the active span only.
  void eval(double x, int& first_index, double* values) const;
  // First derivatives of the K active functions.
  void eval_derivative(double x, int& first_index, double* deriv) const;
  // Pure second derivatives of the K active functions.
  void eval_second(double x, int& first_index, double* second) const;
};

// Tensor-product spline function with coefficient tensor stored
// row-major over the per-direction basis indices.
struct SplineFunction {
  std::vector<SplineBasis1D> bases;
  Vec coeffs;

  SplineFunction() = default;
  SplineFunction(std::vector<SplineBasis1D> bs, Vec c);

  int dim() const { return static_cast<int>(bases.size()); }
  int64_t coeff_count() const;

  double eval(const Eigen::Ref<const Vec>& x) const;
  Vec eval(const geometry::PointCloud& X) const;
  Vec eval(const Mat& X) const;

  // Analytic gradient via the B-spline derivative recurrence, N x d.
  Mat eval_gradient(const Mat& X) const;
  // values, gradient and the pure second derivatives d^2f/dx_i^2
  // (needed to push a coefficient field through kernel inputs).
  void eval_with_derivatives(const Mat& X, Vec& values, Mat& grad,
                             Mat& second_diag) const;
};

enum class CoeffDist { normal, uniform };

// i.i.d. coefficient tensor for the given per-direction bases.
// uniform(a, b) coefficients bound the function values to [a, b].
Vec sample_coeffs(const std::vector<SplineBasis1D>& bases, CoeffDist dist,
                  double a, double b, Rng& rng);

SplineFunction sample_function(const std::vector<SplineBasis1D>& bases,
                               CoeffDist dist, double a, double b, Rng& rng);

// Streaming mean/variance (Welford), population convention m2 / n.
struct RunningMoments {
  int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void update(double x);
  void update(const Eigen::Ref<const Vec>& batch);
  static RunningMoments merge(const RunningMoments& a, const RunningMoments& b);
  // (mean, population variance); empty stream is an error.
  std::pair<double, double> finalize() const;
};

constexpr double kNormalizeEps = 1e-8;

// (v - mean) / sqrt(variance + eps)
Vec normalize_inputs(const Eigen::Ref<const Vec>& values, double mean,
                     double variance);

}  // namespace pilno::spline
