#pragma once

#include <cstddef>
#include <string_view>

// Batch kernels over row-major sample matrices. Each has a scalar reference
// and an AVX2 variant that rounds identically; dispatch happens once at
// runtime and can be pinned with PT_HYBRID_SIMD=scalar.
namespace pth::kernels {

enum class Isa { scalar, avx2 };

Isa active_isa();
std::string_view isa_name(Isa isa);
bool isa_available(Isa isa);

struct ArgMax {
  double value;
  std::size_t index;
};

/// out[i] = |rows[i] - offset|_2 for `count` rows of width `dim`.
void row_distances(const double* rows, std::size_t count, std::size_t dim, const double* offset,
                   double* out);

/// max_i num[i]/den[i] with 0/0 read as 0 and x/0 as +inf. First index wins ties.
ArgMax max_ratio(const double* num, const double* den, std::size_t count);

namespace scalar {
void row_distances(const double* rows, std::size_t count, std::size_t dim, const double* offset,
                   double* out);
ArgMax max_ratio(const double* num, const double* den, std::size_t count);
}  // namespace scalar

namespace avx2 {
void row_distances(const double* rows, std::size_t count, std::size_t dim, const double* offset,
                   double* out);
ArgMax max_ratio(const double* num, const double* den, std::size_t count);
}  // namespace avx2

}  // namespace pth::kernels
