#include "pthybrid/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>

namespace pth::kernels {

namespace scalar {

void row_distances(const double* rows, std::size_t count, std::size_t dim, const double* offset,
                   double* out) {
  for (std::size_t i = 0; i < count; ++i) {
    const double* r = rows + i * dim;
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double e = r[d] - offset[d];
      acc = acc + e * e;
    }
    out[i] = std::sqrt(acc);
  }
}

ArgMax max_ratio(const double* num, const double* den, std::size_t count) {
  ArgMax best{-std::numeric_limits<double>::infinity(), 0};
  for (std::size_t i = 0; i < count; ++i) {
    double r;
    if (num[i] == 0.0)
      r = 0.0;
    else if (den[i] == 0.0)
      r = std::numeric_limits<double>::infinity();
    else
      r = num[i] / den[i];
    if (r > best.value) best = {r, i};
  }
  return best;
}

}  // namespace scalar

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() {
  static const Isa isa = [] {
    const char* env = std::getenv("PT_HYBRID_SIMD");
    if (env && std::strcmp(env, "scalar") == 0) return Isa::scalar;
    return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
  }();
  return isa;
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void row_distances(const double* rows, std::size_t count, std::size_t dim, const double* offset,
                   double* out) {
  if (active_isa() == Isa::avx2)
    avx2::row_distances(rows, count, dim, offset, out);
  else
    scalar::row_distances(rows, count, dim, offset, out);
}

ArgMax max_ratio(const double* num, const double* den, std::size_t count) {
  if (active_isa() == Isa::avx2) return avx2::max_ratio(num, den, count);
  return scalar::max_ratio(num, den, count);
}

}  // namespace pth::kernels
