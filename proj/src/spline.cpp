#include "pilno/spline.hpp"

#include <cmath>

namespace pilno::spline {

SplineBasis1D::SplineBasis1D(int K, int r, double lo, double hi)
    : order(K), interior(r), a(lo), b(hi) {
  if (K < 1) throw ConfigError("spline order must be >= 1");
  if (r < 0) throw ConfigError("interior knot count must be >= 0");
  if (!(lo < hi)) throw ConfigError("spline interval requires a < b");
}

int SplineBasis1D::span(double x) const {
  if (x < a || x > b) throw DomainError("spline evaluation outside [a, b]");
  int j = static_cast<int>(std::floor((x - a) / spacing()));
  if (j > interior) j = interior;  // x == b
  if (j < 0) j = 0;
  return j;
}

namespace {

// Cox-de Boor for the q+1 nonzero functions of degree q at x, where the
// span's left knot has global index j + (K-1) in the extended vector.
// Writes N[0..q] = values of functions j+(K-1-q) .. j+(K-1).
void basis_funs(const SplineBasis1D& bs, int j, double x, int q, double* N) {
  const int i = j + (bs.order - 1);  // knot span index: knot(i) <= x < knot(i+1)
  double left[16], right[16];
  N[0] = 1.0;
  for (int d = 1; d <= q; ++d) {
    left[d] = x - bs.knot(i + 1 - d);
    right[d] = bs.knot(i + d) - x;
    double saved = 0.0;
    for (int r = 0; r < d; ++r) {
      const double temp = N[r] / (right[r + 1] + left[d - r]);
      N[r] = saved + right[r + 1] * temp;
      saved = left[d - r] * temp;
    }
    N[d] = saved;
  }
}

}  // namespace

void SplineBasis1D::eval(double x, int& first_index, double* values) const {
  if (order > 15) throw ConfigError("spline order too large");
  const int j = span(x);
  first_index = j;
  basis_funs(*this, j, x, order - 1, values);
}

void SplineBasis1D::eval_derivative(double x, int& first_index,
                                    double* deriv) const {
  const int j = span(x);
  first_index = j;
  const int K = order;
  if (K < 2) {
    std::fill(deriv, deriv + K, 0.0);
    return;
  }
  // Degree K-2 values of functions j+1 .. j+K-1, difference-quotient
  // combined with the uniform knot spacing.
  double lower[16];
  basis_funs(*this, j, x, K - 2, lower);
  const double inv_h = 1.0 / spacing();
  for (int r = 0; r < K; ++r) {
    const double nl = (r >= 1) ? lower[r - 1] : 0.0;
    const double nr = (r <= K - 2) ? lower[r] : 0.0;
    deriv[r] = (nl - nr) * inv_h;
  }
}

void SplineBasis1D::eval_second(double x, int& first_index,
                                double* second) const {
  const int j = span(x);
  first_index = j;
  const int K = order;
  if (K < 3) {
    std::fill(second, second + K, 0.0);
    return;
  }
  double lower[16];  // degree K-3 values of functions j+2 .. j+K-1
  basis_funs(*this, j, x, K - 3, lower);
  const double inv_h2 = 1.0 / (spacing() * spacing());
  for (int r = 0; r < K; ++r) {
    const double n0 = (r >= 2) ? lower[r - 2] : 0.0;
    const double n1 = (r >= 1 && r <= K - 2) ? lower[r - 1] : 0.0;
    const double n2 = (r <= K - 3) ? lower[r] : 0.0;
    second[r] = (n0 - 2.0 * n1 + n2) * inv_h2;
  }
}

SplineFunction::SplineFunction(std::vector<SplineBasis1D> bs, Vec c)
    : bases(std::move(bs)), coeffs(std::move(c)) {
  if (coeffs.size() != coeff_count())
    throw ConfigError("coefficient tensor size does not match basis counts");
}

int64_t SplineFunction::coeff_count() const {
  int64_t n = 1;
  for (const auto& b : bases) n *= b.basis_count();
  return n;
}

namespace {

constexpr int kMaxDim = 6;

struct ActiveSet {
  int first[kMaxDim];
  double vals[kMaxDim][16];
};

// Contract the coefficient tensor against per-direction active values.
double contract(const SplineFunction& fn, const ActiveSet& act,
                const double* const* per_dim) {
  const int d = fn.dim();
  const int K = fn.bases[0].order;
  // Row-major strides over the coefficient tensor.
  int64_t strides[kMaxDim];
  int64_t s = 1;
  for (int i = d - 1; i >= 0; --i) {
    strides[i] = s;
    s *= fn.bases[i].basis_count();
  }
  int idx[kMaxDim] = {0};
  double sum = 0.0;
  while (true) {
    int64_t off = 0;
    double w = 1.0;
    for (int i = 0; i < d; ++i) {
      off += (act.first[i] + idx[i]) * strides[i];
      w *= per_dim[i][idx[i]];
    }
    sum += w * fn.coeffs[off];
    int i = d - 1;
    while (i >= 0 && ++idx[i] == K) idx[i--] = 0;
    if (i < 0) break;
  }
  return sum;
}

}  // namespace

double SplineFunction::eval(const Eigen::Ref<const Vec>& x) const {
  const int d = dim();
  if (d > kMaxDim) throw ConfigError("spline dimension too large");
  if (x.size() != d) throw ConfigError("point dimension mismatch");
  ActiveSet act;
  const double* per_dim[kMaxDim];
  for (int i = 0; i < d; ++i) {
    bases[i].eval(x[i], act.first[i], act.vals[i]);
    per_dim[i] = act.vals[i];
  }
  return contract(*this, act, per_dim);
}

Vec SplineFunction::eval(const Mat& X) const {
  Vec out(X.rows());
  for (int64_t n = 0; n < X.rows(); ++n) out[n] = eval(X.row(n).transpose());
  return out;
}

Vec SplineFunction::eval(const geometry::PointCloud& X) const {
  return eval(X.coords);
}

Mat SplineFunction::eval_gradient(const Mat& X) const {
  const int d = dim();
  Mat grad(X.rows(), d);
  ActiveSet act, dact;
  const double* per_dim[kMaxDim];
  for (int64_t n = 0; n < X.rows(); ++n) {
    for (int i = 0; i < d; ++i) {
      bases[i].eval(X(n, i), act.first[i], act.vals[i]);
      bases[i].eval_derivative(X(n, i), dact.first[i], dact.vals[i]);
    }
    for (int g = 0; g < d; ++g) {
      for (int i = 0; i < d; ++i)
        per_dim[i] = (i == g) ? dact.vals[i] : act.vals[i];
      grad(n, g) = contract(*this, act, per_dim);
    }
  }
  return grad;
}

void SplineFunction::eval_with_derivatives(const Mat& X, Vec& values, Mat& grad,
                                           Mat& second_diag) const {
  const int d = dim();
  values.resize(X.rows());
  grad.resize(X.rows(), d);
  second_diag.resize(X.rows(), d);
  ActiveSet act, dact, d2act;
  const double* per_dim[kMaxDim];
  for (int64_t n = 0; n < X.rows(); ++n) {
    for (int i = 0; i < d; ++i) {
      bases[i].eval(X(n, i), act.first[i], act.vals[i]);
      bases[i].eval_derivative(X(n, i), dact.first[i], dact.vals[i]);
      bases[i].eval_second(X(n, i), d2act.first[i], d2act.vals[i]);
    }
    for (int i = 0; i < d; ++i) per_dim[i] = act.vals[i];
    values[n] = contract(*this, act, per_dim);
    for (int g = 0; g < d; ++g) {
      for (int i = 0; i < d; ++i)
        per_dim[i] = (i == g) ? dact.vals[i] : act.vals[i];
      grad(n, g) = contract(*this, act, per_dim);
      for (int i = 0; i < d; ++i)
        per_dim[i] = (i == g) ? d2act.vals[i] : act.vals[i];
      second_diag(n, g) = contract(*this, act, per_dim);
    }
  }
}

Vec sample_coeffs(const std::vector<SplineBasis1D>& bases, CoeffDist dist,
                  double a, double b, Rng& rng) {
  if (dist == CoeffDist::uniform && !(a < b))
    throw ConfigError("uniform coefficient range requires a < b");
  int64_t n = 1;
  for (const auto& bs : bases) n *= bs.basis_count();
  Vec c(n);
  if (dist == CoeffDist::normal)
    for (int64_t i = 0; i < n; ++i) c[i] = rng.normal();
  else
    for (int64_t i = 0; i < n; ++i) c[i] = rng.uniform(a, b);
  return c;
}

SplineFunction sample_function(const std::vector<SplineBasis1D>& bases,
                               CoeffDist dist, double a, double b, Rng& rng) {
  return SplineFunction(bases, sample_coeffs(bases, dist, a, b, rng));
}

void RunningMoments::update(double x) {
  ++count;
  const double delta = x - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (x - mean);
}

void RunningMoments::update(const Eigen::Ref<const Vec>& batch) {
  for (int64_t i = 0; i < batch.size(); ++i) update(batch[i]);
}

RunningMoments RunningMoments::merge(const RunningMoments& a,
                                     const RunningMoments& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  RunningMoments out;
  out.count = a.count + b.count;
  const double delta = b.mean - a.mean;
  const double na = static_cast<double>(a.count);
  const double nb = static_cast<double>(b.count);
  const double n = static_cast<double>(out.count);
  out.mean = a.mean + delta * nb / n;
  out.m2 = a.m2 + b.m2 + delta * delta * na * nb / n;
  return out;
}

std::pair<double, double> RunningMoments::finalize() const {
  if (count == 0) throw NumericError("moments of an empty stream");
  return {mean, m2 / static_cast<double>(count)};
}

Vec normalize_inputs(const Eigen::Ref<const Vec>& values, double mean,
                     double variance) {
  if (variance < 0) throw NumericError("negative variance");
  const double inv = 1.0 / std::sqrt(variance + kNormalizeEps);
  return (values.array() - mean) * inv;
}

}  // namespace pilno::spline
