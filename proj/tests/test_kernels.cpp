#include <doctest.h>

#include <cmath>
#include <vector>

#include "ubert/kernels.hpp"
#include "ubert/random.hpp"

using namespace ubert;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = uniform(rng, -1, 1);
  return v;
}

double max_abs(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Scalar kernels against explicit loops, then every vector kernel set
// against the scalar one. Odd sizes exercise the remainder paths.
void check_set(const kernels::KernelSet& ks, const kernels::KernelSet& ref, double tol) {
  Rng rng(31);
  const std::size_t sizes[] = {0, 1, 3, 4, 5, 7, 8, 9, 15, 16, 17, 33, 65};
  for (std::size_t n : sizes) {
    const auto a = random_vec(rng, n), b = random_vec(rng, n);
    CHECK(std::abs(ks.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tol * (1 + n));
    auto y1 = random_vec(rng, n);
    auto y2 = y1;
    ks.axpy(0.37, a.data(), y1.data(), n);
    ref.axpy(0.37, a.data(), y2.data(), n);
    CHECK(max_abs(y1, y2) <= tol);
  }
  for (std::size_t m : {1, 2, 5, 9}) {
    for (std::size_t k : {1, 3, 4, 8, 13}) {
      for (std::size_t n : {1, 2, 4, 7, 8, 17, 33}) {
        const auto a = random_vec(rng, m * k), b = random_vec(rng, k * n), bt = random_vec(rng, n * k),
                   at = random_vec(rng, k * m), c0 = random_vec(rng, m * n);
        auto c1 = c0, c2 = c0;
        ks.gemm_nn(m, k, n, a.data(), b.data(), c1.data());
        ref.gemm_nn(m, k, n, a.data(), b.data(), c2.data());
        CHECK(max_abs(c1, c2) <= tol * k);
        c1 = c0, c2 = c0;
        ks.gemm_nt(m, k, n, a.data(), bt.data(), c1.data());
        ref.gemm_nt(m, k, n, a.data(), bt.data(), c2.data());
        CHECK(max_abs(c1, c2) <= tol * k);
        c1 = c0, c2 = c0;
        ks.gemm_tn(m, k, n, at.data(), b.data(), c1.data());
        ref.gemm_tn(m, k, n, at.data(), b.data(), c2.data());
        CHECK(max_abs(c1, c2) <= tol * k);
      }
    }
  }
}

double loop_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar kernels match plain loops") {
  Rng rng(3);
  const kernels::KernelSet& s = kernels::scalar();
  for (std::size_t n : {0, 1, 7, 64}) {
    const auto a = random_vec(rng, n), b = random_vec(rng, n);
    CHECK(s.dot(a.data(), b.data(), n) == doctest::Approx(loop_dot(a, b)).epsilon(1e-14));
  }
  const std::size_t m = 3, k = 4, n = 5;
  const auto a = random_vec(rng, m * k), b = random_vec(rng, k * n);
  std::vector<double> c(m * n, 0.0);
  s.gemm_nn(m, k, n, a.data(), b.data(), c.data());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double want = 0;
      for (std::size_t p = 0; p < k; ++p) want += a[i * k + p] * b[p * n + j];
      CHECK(c[i * n + j] == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("every available kernel set agrees with scalar") {
  const auto sets = kernels::available();
  REQUIRE(!sets.empty());
  CHECK(sets.front() == &kernels::scalar());
  for (const kernels::KernelSet* ks : sets) {
    INFO("kernel set " << ks->name);
    check_set(*ks, kernels::scalar(), 1e-13);
  }
  if (kernels::avx2() && kernels::cpu_has_avx2_fma()) {
    CHECK(sets.size() == 2);
  } else {
    MESSAGE("AVX2 kernels not exercised on this machine");
  }
}

TEST_CASE("trailing zero terms leave products bit-identical") {
  Rng rng(41);
  for (const kernels::KernelSet* ks : kernels::available()) {
    INFO("kernel set " << ks->name);
    for (std::size_t k = 1; k <= 12; ++k) {
      const std::size_t m = 3, n = 1 + uniform_index(rng, 11);
      const auto a = random_vec(rng, m * k), b = random_vec(rng, n * k);
      // Same operands with one more inner term: a gets a column of ones, b a
      // column of zeros.
      std::vector<double> a1(m * (k + 1), 1.0), b1(n * (k + 1), 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) a1[i * (k + 1) + p] = a[i * k + p];
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) b1[j * (k + 1) + p] = b[j * k + p];
      std::vector<double> c(m * n, 0.0), c1(m * n, 0.0);
      ks->gemm_nt(m, k, n, a.data(), b.data(), c.data());
      ks->gemm_nt(m, k + 1, n, a1.data(), b1.data(), c1.data());
      CHECK(c == c1);

      // B [k, n] with a zero row appended, against A with a ones column.
      std::vector<double> bn(k * n), bn1((k + 1) * n, 0.0);
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) bn1[p * n + j] = bn[p * n + j] = uniform(rng, -1, 1);
      std::vector<double> d(m * n, 0.0), d1(m * n, 0.0);
      ks->gemm_nn(m, k, n, a.data(), bn.data(), d.data());
      ks->gemm_nn(m, k + 1, n, a1.data(), bn1.data(), d1.data());
      CHECK(d == d1);
    }
  }
}

TEST_CASE("selection") {
  const std::string_view before = kernels::active().name;
  CHECK(kernels::select("scalar"));
  CHECK(kernels::active().name == "scalar");
  CHECK_FALSE(kernels::select("sse9"));
  CHECK(kernels::select("auto"));
  CHECK(kernels::select(before));
}

}
