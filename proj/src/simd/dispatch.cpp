// Copyright 2026 The regimen-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <stdexcept>

#include "regimen/simd/kernels.hpp"

namespace regimen::simd {

namespace {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*weighted_sq_distances)(const double*, const double*, const double*, std::size_t,
                                std::size_t, double*);
  void (*axpy)(double, const double*, double*, std::size_t);
};

constexpr KernelTable kScalar{&scalar::dot, &scalar::weighted_sq_distances, &scalar::axpy};
#ifdef REGIMEN_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2{&avx2::dot, &avx2::weighted_sq_distances, &avx2::axpy};
#endif

const KernelTable* table_for(Isa isa) {
#ifdef REGIMEN_HAVE_AVX2_KERNELS
  if (isa == Isa::avx2) return &kAvx2;
#endif
  return &kScalar;
}

Isa detect() {
#ifdef REGIMEN_HAVE_AVX2_KERNELS
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::avx2;
#endif
  return Isa::scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

const KernelTable& kernels() { return *table_for(active().load(std::memory_order_relaxed)); }

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("simd: operand lengths differ");
}

}  // namespace

bool isa_supported(Isa isa) {
  if (isa == Isa::scalar) return true;
#ifdef REGIMEN_HAVE_AVX2_KERNELS
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) throw std::invalid_argument("simd: ISA not supported on this host");
  active().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size());
  return kernels().dot(a.data(), b.data(), a.size());
}

void weighted_sq_distances(std::span<const double> center, std::span<const double> rows,
                           std::span<const double> weights, std::span<double> out) {
  const std::size_t dim = center.size();
  check_same_size(dim, weights.size());
  check_same_size(rows.size(), dim * out.size());
  if (out.empty()) return;
  kernels().weighted_sq_distances(center.data(), rows.data(), weights.data(), dim, out.size(),
                                  out.data());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same_size(x.size(), y.size());
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace regimen::simd
