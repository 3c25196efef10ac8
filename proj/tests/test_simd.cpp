#include <stdexcept>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "regimen/rng.hpp"
#include "regimen/simd/kernels.hpp"

namespace simd = regimen::simd;

namespace {

std::vector<double> random_vector(regimen::Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, 3.0);
  return v;
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); }

}  // namespace

TEST_CASE("scalar kernels on hand-checked inputs") {
  const double a[] = {1, 2, 3};
  const double b[] = {4, -5, 6};
  CHECK(simd::scalar::dot(a, b, 3) == 12.0);

  const double center[] = {0, 0};
  const double rows[] = {3, 4, 1, 1, 0, 0};
  const double w[] = {1, 1};
  double out[3];
  simd::scalar::weighted_sq_distances(center, rows, w, 2, 3, out);
  CHECK(out[0] == 25.0);
  CHECK(out[1] == 2.0);
  CHECK(out[2] == 0.0);

  double y[] = {1, 1, 1};
  simd::scalar::axpy(2.0, a, y, 3);
  CHECK(y[0] == 3.0);
  CHECK(y[2] == 7.0);
}

TEST_CASE("scalar is always available and selectable") {
  CHECK(simd::isa_supported(simd::Isa::scalar));
  const auto before = simd::active_isa();
  simd::set_isa(simd::Isa::scalar);
  CHECK(simd::active_isa() == simd::Isa::scalar);
  simd::set_isa(before);
}

#ifdef REGIMEN_HAVE_AVX2_KERNELS
TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!simd::isa_supported(simd::Isa::avx2)) {
    MESSAGE("host lacks AVX2; equivalence not exercised");
    return;
  }
  regimen::Rng rng(17);
  // Lengths straddle the vector width and its remainders.
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 13u, 16u, 31u, 104u}) {
    const auto a = random_vector(rng, n), b = random_vector(rng, n);
    CHECK(rel_gap(simd::scalar::dot(a.data(), b.data(), n), simd::avx2::dot(a.data(), b.data(), n)) <
          1e-12);

    auto y1 = random_vector(rng, n);
    auto y2 = y1;
    simd::scalar::axpy(0.37, a.data(), y1.data(), n);
    simd::avx2::axpy(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(rel_gap(y1[i], y2[i]) < 1e-14);
  }
  for (std::size_t dim : {1u, 4u, 6u, 14u, 104u}) {
    const std::size_t count = 37;
    const auto center = random_vector(rng, dim);
    const auto rows = random_vector(rng, dim * count);
    auto w = random_vector(rng, dim);
    for (double& x : w) x = std::abs(x);
    std::vector<double> o1(count), o2(count);
    simd::scalar::weighted_sq_distances(center.data(), rows.data(), w.data(), dim, count, o1.data());
    simd::avx2::weighted_sq_distances(center.data(), rows.data(), w.data(), dim, count, o2.data());
    for (std::size_t r = 0; r < count; ++r) CHECK(rel_gap(o1[r], o2[r]) < 1e-12);
  }
}

TEST_CASE("dispatch follows the selected variant") {
  if (!simd::isa_supported(simd::Isa::avx2)) return;
  regimen::Rng rng(23);
  const auto a = random_vector(rng, 29), b = random_vector(rng, 29);
  const auto before = simd::active_isa();
  simd::set_isa(simd::Isa::scalar);
  const double s = simd::dot(a, b);
  simd::set_isa(simd::Isa::avx2);
  const double v = simd::dot(a, b);
  simd::set_isa(before);
  CHECK(s == simd::scalar::dot(a.data(), b.data(), 29));
  CHECK(v == simd::avx2::dot(a.data(), b.data(), 29));
}
#endif
