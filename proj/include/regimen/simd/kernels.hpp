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

#pragma once

// Data-parallel inner loops used by matching and the linear models.
//
// Every kernel has a scalar reference in namespace `scalar` and, on x86-64,
// an AVX2+FMA variant in namespace `avx2`. The unqualified entry points
// dispatch through a table selected once from CPUID; tests pin the active
// variant with set_isa() to check the variants against each other.

#include <cstddef>
#include <span>
#include <string_view>

namespace regimen::simd {

enum class Isa { scalar, avx2 };

bool isa_supported(Isa isa);
Isa active_isa();
/// Throws std::invalid_argument if the host cannot run `isa`.
void set_isa(Isa isa);
std::string_view isa_name(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);

/// out[r] = sum_j weights[j] * (center[j] - rows[r * dim + j])^2 for every
/// row r of the row-major block `rows`.
void weighted_sq_distances(std::span<const double> center, std::span<const double> rows,
                           std::span<const double> weights, std::span<double> out);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void weighted_sq_distances(const double* center, const double* rows, const double* weights,
                           std::size_t dim, std::size_t count, double* out);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define REGIMEN_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void weighted_sq_distances(const double* center, const double* rows, const double* weights,
                           std::size_t dim, std::size_t count, double* out);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2
#endif

}  // namespace regimen::simd
