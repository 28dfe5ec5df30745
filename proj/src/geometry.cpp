#include "pilno/geometry.hpp"

#include <array>
#include <vector>

namespace pilno::geometry {

Domain::Domain(Vec lo, Vec up) : lower(std::move(lo)), upper(std::move(up)) {
  if (lower.size() != upper.size() || lower.size() < 1)
    throw ConfigError("domain corners must have equal, positive dimension");
  for (int i = 0; i < lower.size(); ++i)
    if (!(lower[i] < upper[i]))
      throw ConfigError("domain requires lower[i] < upper[i]");
}

Domain Domain::unit_box(int d) {
  return Domain(Vec::Zero(d), Vec::Ones(d));
}

Domain Domain::centered_box(int d, double half_width) {
  return Domain(Vec::Constant(d, -half_width), Vec::Constant(d, half_width));
}

double Domain::volume() const {
  return (upper - lower).prod();
}

bool Domain::contains(const Eigen::Ref<const Vec>& x) const {
  if (x.size() != lower.size()) return false;
  for (int i = 0; i < x.size(); ++i)
    if (x[i] < lower[i] || x[i] > upper[i]) return false;
  return true;
}

namespace {

// Joe-Kuo direction-number table (new-joe-kuo-6), dimensions 2..8.
// Dimension 1 is the van der Corput sequence in base 2.
struct JoeKuoRow {
  unsigned s;                   // degree of the primitive polynomial
  unsigned a;                   // encoded polynomial coefficients
  std::array<unsigned, 5> m;    // initial direction values m_1..m_s
};

constexpr JoeKuoRow kJoeKuo[] = {
    {1, 0, {1, 0, 0, 0, 0}},           // d=2
    {2, 1, {1, 3, 0, 0, 0}},           // d=3
    {3, 1, {1, 3, 1, 0, 0}},           // d=4
    {3, 2, {1, 1, 1, 0, 0}},           // d=5
    {4, 1, {1, 1, 3, 3, 0}},           // d=6
    {4, 4, {1, 3, 5, 13, 0}},          // d=7
    {5, 2, {1, 1, 5, 5, 17}},          // d=8
};

constexpr int kMaxDim = 1 + static_cast<int>(std::size(kJoeKuo));
constexpr unsigned kBits = 32;

// 32-bit direction integers V_1..V_kBits for one dimension.
std::array<std::uint32_t, kBits + 1> direction_integers(int dim_index) {
  std::array<std::uint32_t, kBits + 1> v{};
  if (dim_index == 0) {
    for (unsigned k = 1; k <= kBits; ++k) v[k] = 1u << (kBits - k);
    return v;
  }
  const JoeKuoRow& row = kJoeKuo[dim_index - 1];
  const unsigned s = row.s;
  for (unsigned k = 1; k <= std::min(s, kBits); ++k)
    v[k] = row.m[k - 1] << (kBits - k);
  for (unsigned k = s + 1; k <= kBits; ++k) {
    v[k] = v[k - s] ^ (v[k - s] >> s);
    for (unsigned i = 1; i <= s - 1; ++i)
      if ((row.a >> (s - 1 - i)) & 1u) v[k] ^= v[k - i];
  }
  return v;
}

inline unsigned lowest_zero_bit(std::uint64_t n) {
  unsigned c = 1;
  while (n & 1ULL) {
    n >>= 1;
    ++c;
  }
  return c;  // 1-based
}

}  // namespace

int sobol_max_dim() { return kMaxDim; }

Mat sobol_unit(int64_t n, int d, std::uint64_t skip) {
  if (n < 1) throw ConfigError("sobol_points requires n >= 1");
  if (d < 1 || d > kMaxDim)
    throw ConfigError("sobol_points: unsupported dimension " + std::to_string(d) +
                      " (1.." + std::to_string(kMaxDim) + ")");

  std::vector<std::array<std::uint32_t, kBits + 1>> v(d);
  for (int j = 0; j < d; ++j) v[j] = direction_integers(j);

  // State at index `skip`, from the Gray code of the index directly.
  std::vector<std::uint32_t> x(d, 0);
  const std::uint64_t gray = skip ^ (skip >> 1);
  for (unsigned b = 0; b < kBits; ++b)
    if ((gray >> b) & 1ULL)
      for (int j = 0; j < d; ++j) x[j] ^= v[j][b + 1];

  Mat out(n, d);
  const double scale = 0x1.0p-32;
  for (int64_t i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) out(i, j) = static_cast<double>(x[j]) * scale;
    const unsigned c = lowest_zero_bit(skip + static_cast<std::uint64_t>(i));
    if (c > kBits) throw ConfigError("sobol_points: sequence index exhausted");
    for (int j = 0; j < d; ++j) x[j] ^= v[j][c];
  }
  return out;
}

PointCloud sobol_points(int64_t n, const Domain& domain, std::uint64_t skip,
                        PointRole role) {
  Mat u = sobol_unit(n, domain.dim(), skip);
  const Vec span = domain.upper - domain.lower;
  for (int j = 0; j < domain.dim(); ++j)
    u.col(j) = (u.col(j).array() * span[j] + domain.lower[j]).matrix();
  return PointCloud{std::move(u), role};
}

PointCloud boundary_points(int64_t n, const Domain& domain, Rng& rng) {
  if (n < 1) throw ConfigError("boundary_points requires n >= 1");
  if (domain.dim() != 2) throw ConfigError("boundary_points supports d = 2 only");

  const double lx = domain.upper[0] - domain.lower[0];
  const double ly = domain.upper[1] - domain.lower[1];
  const double perimeter = 2.0 * (lx + ly);

  Mat pts(n, 2);
  for (int64_t i = 0; i < n; ++i) {
    double s = rng.uniform01() * perimeter;
    double x, y;
    if (s < lx) {  // bottom
      x = domain.lower[0] + s;
      y = domain.lower[1];
    } else if ((s -= lx) < ly) {  // right
      x = domain.upper[0];
      y = domain.lower[1] + s;
    } else if ((s -= ly) < lx) {  // top
      x = domain.upper[0] - s;
      y = domain.upper[1];
    } else {  // left
      s -= lx;
      x = domain.lower[0];
      y = domain.upper[1] - s;
    }
    pts(i, 0) = x;
    pts(i, 1) = y;
  }
  return PointCloud{std::move(pts), PointRole::boundary};
}

}  // namespace pilno::geometry
