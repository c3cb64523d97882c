#include "pthybrid/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#endif

#include <cmath>
#include <cstdint>
#include <limits>

namespace pth::kernels::avx2 {

#if defined(__AVX2__)

void row_distances(const double* rows, std::size_t count, std::size_t dim, const double* offset,
                   double* out) {
  std::size_t i = 0;
  const auto stride = static_cast<long long>(dim);
  const __m256i idx = _mm256_set_epi64x(3 * stride, 2 * stride, stride, 0);
  for (; i + 4 <= count; i += 4) {
    const double* base = rows + i * dim;
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dim; ++d) {
      const __m256d v = _mm256_i64gather_pd(base + d, idx, 8);
      const __m256d e = _mm256_sub_pd(v, _mm256_set1_pd(offset[d]));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(e, e));
    }
    _mm256_storeu_pd(out + i, _mm256_sqrt_pd(acc));
  }
  if (i < count) scalar::row_distances(rows + i * dim, count - i, dim, offset, out + i);
}

ArgMax max_ratio(const double* num, const double* den, std::size_t count) {
  const double ninf = -std::numeric_limits<double>::infinity();
  const __m256d zero = _mm256_setzero_pd();
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  __m256d best = _mm256_set1_pd(ninf);
  __m256i best_idx = _mm256_setzero_si256();
  __m256i cur_idx = _mm256_set_epi64x(3, 2, 1, 0);
  const __m256i four = _mm256_set1_epi64x(4);
  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    const __m256d n = _mm256_loadu_pd(num + i);
    const __m256d d = _mm256_loadu_pd(den + i);
    __m256d r = _mm256_div_pd(n, d);
    r = _mm256_blendv_pd(r, inf, _mm256_cmp_pd(d, zero, _CMP_EQ_OQ));
    r = _mm256_blendv_pd(r, zero, _mm256_cmp_pd(n, zero, _CMP_EQ_OQ));
    const __m256d gt = _mm256_cmp_pd(r, best, _CMP_GT_OQ);
    best = _mm256_blendv_pd(best, r, gt);
    best_idx = _mm256_castpd_si256(
        _mm256_blendv_pd(_mm256_castsi256_pd(best_idx), _mm256_castsi256_pd(cur_idx), gt));
    cur_idx = _mm256_add_epi64(cur_idx, four);
  }
  alignas(32) double vals[4];
  alignas(32) std::int64_t ids[4];
  _mm256_store_pd(vals, best);
  _mm256_store_si256(reinterpret_cast<__m256i*>(ids), best_idx);
  ArgMax out{ninf, 0};
  bool have = false;
  for (int l = 0; l < 4; ++l) {
    if (!(vals[l] > ninf)) continue;
    const auto id = static_cast<std::size_t>(ids[l]);
    if (!have || vals[l] > out.value || (vals[l] == out.value && id < out.index)) {
      out = {vals[l], id};
      have = true;
    }
  }
  if (i < count) {
    const ArgMax tail = scalar::max_ratio(num + i, den + i, count - i);
    if (tail.value > out.value) out = {tail.value, tail.index + i};
  }
  return out;
}

#else

void row_distances(const double* rows, std::size_t count, std::size_t dim, const double* offset,
                   double* out) {
  scalar::row_distances(rows, count, dim, offset, out);
}

ArgMax max_ratio(const double* num, const double* den, std::size_t count) {
  return scalar::max_ratio(num, den, count);
}

#endif

}  // namespace pth::kernels::avx2
