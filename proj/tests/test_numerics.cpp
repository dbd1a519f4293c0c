#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mml/matrix.hpp"
#include "mml/numerics.hpp"
#include "mml/rng.hpp"

using namespace mml;

TEST_CASE("softmax closed forms") {
  const auto uniform = softmax({0.0, 0.0, 0.0});
  for (double p : uniform) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  const auto two = softmax({1.0, 0.0});
  CHECK(two[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(0.2689414213699951).epsilon(1e-12));

  SUBCASE("no overflow on huge inputs") {
    const auto big = softmax({1000.0, 0.0});
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] == doctest::Approx(0.0));
  }

  SUBCASE("rows sum to one") {
    Rng rng(7);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> v(5);
      for (double& x : v) x = rng.normal(0, 3);
      const auto p = softmax(v, 0.5);
      double sum = 0.0;
      for (double x : p) {
        CHECK(x > 0.0);
        CHECK(x < 1.0);
        sum += x;
      }
      CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("softmax shift invariance") {
  Rng rng(11);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> v(6), shifted(6);
    const double c = rng.normal(0, 10);
    for (int j = 0; j < 6; ++j) {
      v[j] = rng.normal(0, 2);
      shifted[j] = v[j] + c;
    }
    const auto a = softmax(v), b = softmax(shifted);
    for (int j = 0; j < 6; ++j) CHECK(std::fabs(a[j] - b[j]) < 1e-12);
  }
}

TEST_CASE("softmax errors") {
  CHECK_THROWS_WITH_AS(softmax({1.0, std::nan("")}), "non-finite input", std::invalid_argument);
  CHECK_THROWS_WITH_AS(softmax({1.0, 2.0}, 0.0), "invalid scale", std::invalid_argument);
  CHECK_THROWS_WITH_AS(softmax({1.0, 2.0}, -1.0), "invalid scale", std::invalid_argument);
}

TEST_CASE("log_sum_exp") {
  CHECK(log_sum_exp({0.0}) == doctest::Approx(0.0).epsilon(1e-15));
  // [a, a] -> a + log 2
  CHECK(log_sum_exp({3.5, 3.5}) == doctest::Approx(4.1931471805599454).epsilon(1e-14));
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), std::invalid_argument);

  SUBCASE("matches naive extended-precision sum") {
    Rng rng(3);
    for (int t = 0; t < 25; ++t) {
      std::vector<double> v(5);
      for (double& x : v) x = rng.normal(0, 4);
      long double naive = 0.0L;
      for (double x : v) naive += expl(static_cast<long double>(x));
      const double expect = static_cast<double>(logl(naive));
      CHECK(log_sum_exp(v) == doctest::Approx(expect).epsilon(1e-13));
    }
  }

  SUBCASE("stable against large offsets") {
    CHECK(log_sum_exp({1000.0, 1000.0}) ==
          doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-13));
  }
}

TEST_CASE("finite differences") {
  const auto square = [](const std::vector<double>& t) { return t[0] * t[0]; };
  const auto g = finite_diff_grad(square, {3.0});
  CHECK(std::fabs(g[0] - 6.0) < 1e-6);

  const auto constant = [](const std::vector<double>&) { return 4.25; };
  for (double gj : finite_diff_grad(constant, {1.0, -2.0, 0.5})) CHECK(gj == 0.0);

  SUBCASE("quadratic form reproduces (Q + Q^T) x") {
    Rng rng(5);
    const int n = 4;
    Matrix Q(n, n);
    for (double& q : Q.storage()) q = rng.normal();
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    const auto f = [&](const std::vector<double>& t) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) acc += t[i] * Q(i, j) * t[j];
      return acc;
    };
    const auto numeric = finite_diff_grad(f, x);
    std::vector<double> expect(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) expect[i] += (Q(i, j) + Q(j, i)) * x[j];
    CHECK(max_rel_err(expect, numeric) < 1e-6);
  }

  SUBCASE("non-finite evaluation names the coordinate") {
    const auto bad = [](const std::vector<double>& t) {
      return t[1] > 1.0 ? std::nan("") : t[0];
    };
    CHECK_THROWS_WITH_AS(finite_diff_grad(bad, {0.0, 1.0}),
                         "finite_diff_grad: non-finite evaluation at coordinate 1",
                         std::runtime_error);
  }
}

TEST_CASE("rng determinism and stream independence") {
  Rng a(42), b(42), c(43);
  bool all_equal_ac = true;
  for (int t = 0; t < 100; ++t) {
    const std::uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    all_equal_ac = all_equal_ac && va == c.next_u64();
  }
  CHECK_FALSE(all_equal_ac);

  SUBCASE("normal stream repeats too") {
    Rng x(7), y(7);
    for (int t = 0; t < 50; ++t) CHECK(x.normal() == y.normal());
  }

  SUBCASE("normal moments are sane") {
    Rng rng(1);
    double mean = 0.0, var = 0.0;
    const int n = 20000;
    std::vector<double> draws(n);
    for (double& d : draws) d = rng.normal();
    for (double d : draws) mean += d / n;
    for (double d : draws) var += (d - mean) * (d - mean) / n;
    CHECK(std::fabs(mean) < 0.03);
    CHECK(std::fabs(var - 1.0) < 0.05);
  }

  SUBCASE("derive_seed separates tags") {
    CHECK(derive_seed(0, "a") != derive_seed(0, "b"));
    CHECK(derive_seed(0, "a") != derive_seed(1, "a"));
    CHECK(derive_seed(5, "cell") == derive_seed(5, "cell"));
  }

  SUBCASE("below is in range") {
    Rng rng(9);
    for (int t = 0; t < 200; ++t) CHECK(rng.below(7) < 7);
  }
}

TEST_CASE("matmul against naive loops") {
  Rng rng(13);
  Matrix a(3, 4), b(4, 5);
  for (double& v : a.storage()) v = rng.normal();
  for (double& v : b.storage()) v = rng.normal();
  const Matrix ab = matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) acc += a(i, k) * b(k, j);
      CHECK(ab(i, j) == doctest::Approx(acc).epsilon(1e-12));
    }

  Matrix bt(5, 4);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) bt(i, j) = b(j, i);
  const Matrix ab2 = matmul_nt(a, bt);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(ab2(i, j) == doctest::Approx(ab(i, j)));

  Matrix at(4, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) at(i, j) = a(j, i);
  const Matrix ab3 = matmul_tn(at, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(ab3(i, j) == doctest::Approx(ab(i, j)));

  CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
}
