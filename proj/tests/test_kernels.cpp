#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "pthybrid/kernels.hpp"

using namespace pth::kernels;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = scale * nd(rng);
  return v;
}

}  // namespace

TEST_CASE("scalar row distances match a direct computation") {
  const std::size_t count = 37, dim = 5;
  const auto rows = random_values(count * dim, 1, 3.0);
  const auto off = random_values(dim, 2, 1.0);
  std::vector<double> out(count);
  scalar::row_distances(rows.data(), count, dim, off.data(), out.data());
  for (std::size_t i = 0; i < count; ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) acc += (rows[i * dim + d] - off[d]) * (rows[i * dim + d] - off[d]);
    CHECK(out[i] == doctest::Approx(std::sqrt(acc)).epsilon(1e-15));
  }
}

TEST_CASE("max ratio conventions") {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> num{0.0, 1.0, 3.0, 3.0}, den{0.0, 2.0, 1.0, 1.0};
  ArgMax m = scalar::max_ratio(num.data(), den.data(), num.size());
  CHECK(m.value == 3.0);
  CHECK(m.index == 2);
  num = {0.0, 1.0};
  den = {0.0, 0.0};
  m = scalar::max_ratio(num.data(), den.data(), 2);
  CHECK(m.value == inf);
  CHECK(m.index == 1);
  m = scalar::max_ratio(num.data(), den.data(), 1);
  CHECK(m.value == 0.0);
}

TEST_CASE("vector kernels round exactly like the scalar reference") {
  if (!isa_available(Isa::avx2)) {
    MESSAGE("avx2 not available; only the scalar path is exercised");
    return;
  }
  for (std::size_t dim : {1u, 2u, 3u, 4u, 5u, 8u, 9u}) {
    for (std::size_t count : {0u, 1u, 3u, 4u, 7u, 64u, 1001u}) {
      const auto rows = random_values(count * dim, 10 + dim, 1e3);
      const auto off = random_values(dim, 20 + dim, 1.0);
      std::vector<double> a(count), b(count);
      scalar::row_distances(rows.data(), count, dim, off.data(), a.data());
      avx2::row_distances(rows.data(), count, dim, off.data(), b.data());
      for (std::size_t i = 0; i < count; ++i) CHECK(same_bits(a[i], b[i]));

      auto num = random_values(count, 30 + count, 1.0);
      auto den = random_values(count, 40 + count, 1.0);
      for (std::size_t i = 0; i < count; i += 5) den[i] = 0.0;
      for (std::size_t i = 0; i < count; i += 7) num[i] = 0.0;
      for (auto& x : num) x = std::abs(x);
      for (auto& x : den) x = std::abs(x);
      const ArgMax s = scalar::max_ratio(num.data(), den.data(), count);
      const ArgMax v = avx2::max_ratio(num.data(), den.data(), count);
      CHECK(same_bits(s.value, v.value));
      CHECK(s.index == v.index);
    }
  }
}

TEST_CASE("dispatch names") {
  CHECK(isa_name(Isa::scalar) == "scalar");
  CHECK(isa_available(Isa::scalar));
  CHECK((active_isa() == Isa::scalar || isa_available(Isa::avx2)));
}
