#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "cuq/copula.hpp"
#include "test_util.hpp"

using namespace cuq;

namespace {

const std::vector<CopulaSpec> kTestSpecs = {
    make_copula(CopulaFamily::Independence),
    make_copula(CopulaFamily::Gaussian, 0.3),
    make_copula(CopulaFamily::Gaussian, -0.7),
    make_copula(CopulaFamily::StudentT, 0.5, 4.0),
    make_copula(CopulaFamily::Clayton, 0.8),
    make_copula(CopulaFamily::Clayton, 2.0),
    make_copula(CopulaFamily::Frank, 3.0),
    make_copula(CopulaFamily::Frank, -5.0),
    make_copula(CopulaFamily::Gumbel, 1.5),
    make_copula(CopulaFamily::Gumbel, 3.0),
};

double frank_tau_oracle(double theta) {
  const double d1 = testutil::integrate_1d(
                        [](double t) {
                          return std::fabs(t) < 1e-12 ? 1.0 : t / std::expm1(t);
                        },
                        0.0, theta) /
                    theta;
  return 1.0 - 4.0 / theta + 4.0 * d1 / theta;
}

}  // namespace

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(make_copula(CopulaFamily::Gaussian, 1.0), std::domain_error);
  CHECK_THROWS_AS(make_copula(CopulaFamily::StudentT, 0.5, 2.0), std::domain_error);
  CHECK_THROWS_AS(make_copula(CopulaFamily::Clayton, 0.0), std::domain_error);
  CHECK_THROWS_AS(make_copula(CopulaFamily::Frank, 0.0), std::domain_error);
  CHECK_THROWS_AS(make_copula(CopulaFamily::Gumbel, 0.9), std::domain_error);
  CHECK(copula_param_count(CopulaFamily::Independence) == 0);
  CHECK(copula_param_count(CopulaFamily::StudentT) == 2);
  for (auto f : {CopulaFamily::Independence, CopulaFamily::Gaussian,
                 CopulaFamily::StudentT, CopulaFamily::Clayton,
                 CopulaFamily::Frank, CopulaFamily::Gumbel})
    CHECK(copula_family_from_name(copula_family_name(f)) == f);
}

TEST_CASE("cdf closed-form examples") {
  // Gumbel theta=1 is the independence copula.
  CHECK(copula_cdf(make_copula(CopulaFamily::Gumbel, 1.0), {0.3, 0.7}) ==
        doctest::Approx(0.21).epsilon(1e-12));
  CHECK(copula_cdf(make_copula(CopulaFamily::Clayton, 2.0), {0.5, 0.5}) ==
        doctest::Approx(1.0 / std::sqrt(7.0)).epsilon(1e-12));
  const double e15 = std::exp(-1.5), e3 = std::exp(-3.0);
  const double frank_expected =
      -std::log(1.0 + (e15 - 1.0) * (e15 - 1.0) / (e3 - 1.0)) / 3.0;
  CHECK(copula_cdf(make_copula(CopulaFamily::Frank, 3.0), {0.5, 0.5}) ==
        doctest::Approx(frank_expected).epsilon(1e-12));
  CHECK(frank_expected == doctest::Approx(0.33608).epsilon(1e-4));
}

TEST_CASE("cdf margins and Frechet bounds") {
  const std::vector<double> grid{0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0};
  for (const auto& spec : kTestSpecs) {
    for (double u : grid) {
      CHECK(copula_cdf(spec, {u, 1.0}) == doctest::Approx(u).epsilon(1e-12));
      CHECK(copula_cdf(spec, {1.0, u}) == doctest::Approx(u).epsilon(1e-12));
      CHECK(copula_cdf(spec, {u, 0.0}) == 0.0);
      for (double v : grid) {
        const double c = copula_cdf(spec, {u, v});
        CHECK(c >= std::max(u + v - 1.0, 0.0) - 1e-9);
        CHECK(c <= std::min(u, v) + 1e-9);
      }
    }
  }
}

TEST_CASE("log density examples") {
  CHECK(copula_log_pdf(make_copula(CopulaFamily::Gaussian, 0.0), {0.3, 0.8}) ==
        doctest::Approx(0.0).epsilon(1e-14));

  // Frank theta=3 at (0.5,0.5): symbolic derivative of the cdf.
  const double th = 3.0, u = 0.5, v = 0.5;
  const double num = th * (1.0 - std::exp(-th)) * std::exp(-th * (u + v));
  const double den = (1.0 - std::exp(-th)) -
                     (1.0 - std::exp(-th * u)) * (1.0 - std::exp(-th * v));
  const double expected = std::log(num / (den * den));
  const auto frank = make_copula(CopulaFamily::Frank, 3.0);
  CHECK(copula_log_pdf(frank, {u, v}) ==
        doctest::Approx(expected).epsilon(1e-12));

  // Cross-check against Richardson-extrapolated finite differences of the cdf.
  auto cdf = [&](double a, double b) { return copula_cdf(frank, {a, b}); };
  const double fd1 = testutil::cross_diff(cdf, u, v, 2e-3);
  const double fd2 = testutil::cross_diff(cdf, u, v, 1e-3);
  const double fd = (4.0 * fd2 - fd1) / 3.0;
  CHECK(std::exp(copula_log_pdf(frank, {u, v})) ==
        doctest::Approx(fd).epsilon(1e-6));

  CHECK_THROWS_AS(copula_log_pdf(frank, {0.0, 0.5}), std::domain_error);
  CHECK_THROWS_AS(copula_log_pdf(frank, {0.5, 1.0}), std::domain_error);
}

TEST_CASE("density matches cdf cross differences on an interior grid") {
  for (const auto& spec : kTestSpecs) {
    auto cdf = [&](double a, double b) { return copula_cdf(spec, {a, b}); };
    for (double u : {0.25, 0.5, 0.75}) {
      for (double v : {0.25, 0.5, 0.75}) {
        const double fd1 = testutil::cross_diff(cdf, u, v, 2e-3);
        const double fd2 = testutil::cross_diff(cdf, u, v, 1e-3);
        const double fd = (4.0 * fd2 - fd1) / 3.0;
        const double c = std::exp(copula_log_pdf(spec, {u, v}));
        CHECK(c == doctest::Approx(fd).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("density integrates to one over the unit square") {
  for (const auto& spec : kTestSpecs) {
    CAPTURE(copula_family_name(spec.family));
    CAPTURE(spec.params[0]);
    const double integral = testutil::integrate_unit_square(
        [&](double a, double b) {
          return std::exp(copula_log_pdf(spec, {a, b}));
        });
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("h-function examples") {
  const auto indep = make_copula(CopulaFamily::Independence);
  for (double v : {0.1, 0.5, 0.9})
    CHECK(h_function(indep, 0.37, v) == doctest::Approx(0.37).epsilon(1e-15));

  // Clayton theta=2 at u=v=0.5: v^(-theta-1) (u^-theta + v^-theta - 1)^(-1-1/theta).
  CHECK(h_function(make_copula(CopulaFamily::Clayton, 2.0), 0.5, 0.5) ==
        doctest::Approx(8.0 * std::pow(7.0, -1.5)).epsilon(1e-12));

  CHECK(h_function(make_copula(CopulaFamily::Frank, 3.0), 0.0, 0.5) == 0.0);
  CHECK(h_function(make_copula(CopulaFamily::Frank, 3.0), 1.0, 0.5) == 1.0);
}

TEST_CASE("h-function equals dC/dv and is monotone in u") {
  for (const auto& spec : kTestSpecs) {
    CAPTURE(copula_family_name(spec.family));
    for (double u : {0.2, 0.5, 0.8}) {
      for (double v : {0.25, 0.5, 0.75}) {
        auto cv = [&](double t) { return copula_cdf(spec, {u, t}); };
        const double fd = testutil::central_diff(cv, v, 1e-4);
        CHECK(h_function(spec, u, v) == doctest::Approx(fd).epsilon(1e-5));
      }
    }
    double prev = -1.0;
    for (double u = 0.05; u < 1.0; u += 0.05) {
      const double h = h_function(spec, u, 0.4);
      CHECK(h >= prev);
      prev = h;
    }
  }
}

TEST_CASE("h_inverse closed forms, Newton fallback, and round trips") {
  CHECK(h_inverse(make_copula(CopulaFamily::Independence), 0.42, 0.9) ==
        doctest::Approx(0.42));

  // Frank closed form against a bisection oracle.
  const auto frank = make_copula(CopulaFamily::Frank, 3.0);
  {
    const double p = 0.5, v = 0.5;
    double lo = 1e-12, hi = 1.0 - 1e-12;
    for (int i = 0; i < 100; ++i) {
      const double mid = 0.5 * (lo + hi);
      (h_function(frank, mid, v) < p ? lo : hi) = mid;
    }
    CHECK(h_inverse(frank, p, v) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-8));
  }

  // Gumbel has no closed form; the safeguarded Newton result must satisfy the
  // residual bound.
  const auto gumbel = make_copula(CopulaFamily::Gumbel, 2.0);
  for (double p : {0.05, 0.4, 0.95}) {
    for (double v : {0.1, 0.6, 0.9}) {
      const double u = h_inverse(gumbel, p, v);
      CHECK(std::fabs(h_function(gumbel, u, v) - p) < 1e-10);
    }
  }

  for (const auto& spec : kTestSpecs) {
    CAPTURE(copula_family_name(spec.family));
    for (double u : {0.1, 0.5, 0.9}) {
      for (double v : {0.2, 0.5, 0.8}) {
        const double p = h_function(spec, u, v);
        if (p <= 1e-11 || p >= 1.0 - 1e-11) continue;
        CHECK(h_inverse(spec, p, v) == doctest::Approx(u).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("kendall tau closed forms") {
  CHECK(kendall_tau(make_copula(CopulaFamily::Clayton, 2.0)) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK(kendall_tau(make_copula(CopulaFamily::Gumbel, 2.0)) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK(kendall_tau(make_copula(CopulaFamily::Gaussian, 0.5)) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(kendall_tau(make_copula(CopulaFamily::Frank, 3.0)) ==
        doctest::Approx(frank_tau_oracle(3.0)).epsilon(1e-10));
  CHECK(kendall_tau(make_copula(CopulaFamily::Frank, -10.0)) ==
        doctest::Approx(frank_tau_oracle(-10.0)).epsilon(1e-10));
}

TEST_CASE("tau_to_param inverts kendall_tau") {
  CHECK(tau_to_param(CopulaFamily::Clayton, 0.5).params[0] ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(tau_to_param(CopulaFamily::Gaussian, 1.0 / 3.0).params[0] ==
        doctest::Approx(0.5).epsilon(1e-12));
  const auto frank = tau_to_param(CopulaFamily::Frank, 0.2);
  CHECK(kendall_tau(frank) == doctest::Approx(0.2).epsilon(1e-8));
  const auto frank_neg = tau_to_param(CopulaFamily::Frank, -0.666);
  CHECK(kendall_tau(frank_neg) == doctest::Approx(-0.666).epsilon(1e-8));
  CHECK_THROWS_AS(tau_to_param(CopulaFamily::Clayton, -0.2), std::domain_error);
  CHECK_THROWS_AS(tau_to_param(CopulaFamily::Gumbel, -0.1), std::domain_error);
}

TEST_CASE("sampling: deterministic, uniform margins, tau-consistent") {
  const std::size_t n = 100000;
  for (const auto& spec : kTestSpecs) {
    CAPTURE(copula_family_name(spec.family));
    CAPTURE(spec.params[0]);
    const auto s = copula_sample(spec, n, 99);
    const auto s2 = copula_sample(spec, n, 99);
    CHECK(s[n - 1].u1 == s2[n - 1].u1);  // bit-identical given the seed

    std::vector<double> m1(n), m2(n);
    std::vector<std::array<double, 2>> pairs(n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(s[i].u1 > 0.0);
      CHECK(s[i].u1 < 1.0);
      m1[i] = s[i].u1;
      m2[i] = s[i].u2;
      pairs[i] = {s[i].u1, s[i].u2};
    }
    const double crit = testutil::ks_critical(0.01, n);
    CHECK(ks_statistic_uniform(m1) < crit);
    CHECK(ks_statistic_uniform(m2) < crit);
    CHECK(empirical_kendall_tau(pairs) ==
          doctest::Approx(kendall_tau(spec)).epsilon(0.01));
  }
}

TEST_CASE("independence limits of the Archimedean families") {
  const auto frank = make_copula(CopulaFamily::Frank, 1e-6);
  const auto clayton = make_copula(CopulaFamily::Clayton, 1e-6);
  const auto gumbel1 = make_copula(CopulaFamily::Gumbel, 1.0);
  for (double u : {0.2, 0.5, 0.8}) {
    for (double v : {0.3, 0.6, 0.9}) {
      CHECK(std::exp(copula_log_pdf(frank, {u, v})) ==
            doctest::Approx(1.0).epsilon(1e-3));
      CHECK(std::exp(copula_log_pdf(clayton, {u, v})) ==
            doctest::Approx(1.0).epsilon(1e-3));
      CHECK(copula_cdf(gumbel1, {u, v}) == doctest::Approx(u * v).epsilon(1e-12));
    }
  }
}

TEST_CASE("student-t pieces and tail dependence") {
  // t cdf against the reference implementation.
  boost::math::students_t_distribution<double> ref(4.0);
  for (double x : {-3.0, -1.2, 0.0, 0.7, 2.5})
    CHECK(student_t_cdf(x, 4.0) ==
          doctest::Approx(boost::math::cdf(ref, x)).epsilon(1e-12));
  for (double p : {0.01, 0.3, 0.5, 0.9})
    CHECK(student_t_cdf(student_t_quantile(p, 4.0), 4.0) ==
          doctest::Approx(p).epsilon(1e-10));

  const double lam = student_t_tail_dependence(0.5, 4.0);
  const double arg = -std::sqrt(5.0) * std::sqrt(0.5 / 1.5);
  CHECK(lam == doctest::Approx(2.0 * student_t_cdf(arg, 5.0)).epsilon(1e-14));
  CHECK(lam > 0.2);
  CHECK(lam < 0.3);
  // Gaussian analogue has zero tail dependence; t must exceed it.
  CHECK(lam > 0.0);
}

TEST_CASE("empirical kendall tau") {
  std::vector<std::array<double, 2>> inc{{1, 1}, {2, 2}, {3, 3}};
  CHECK(empirical_kendall_tau(inc) == doctest::Approx(1.0));
  std::vector<std::array<double, 2>> dec{{1, 3}, {2, 2}, {3, 1}};
  CHECK(empirical_kendall_tau(dec) == doctest::Approx(-1.0));

  // Brute-force oracle, including ties.
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 4 + rng.index(8);
    std::vector<std::array<double, 2>> pts(n);
    for (auto& p : pts)
      p = {static_cast<double>(rng.index(4)), static_cast<double>(rng.index(4))};
    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double sx = pts[j][0] - pts[i][0];
        const double sy = pts[j][1] - pts[i][1];
        num += (sx > 0 ? 1 : (sx < 0 ? -1 : 0)) * (sy > 0 ? 1 : (sy < 0 ? -1 : 0));
      }
    const double expected = num / (0.5 * n * (n - 1));
    CHECK(empirical_kendall_tau(pts) == doctest::Approx(expected).epsilon(1e-12));
  }
  std::vector<std::array<double, 2>> one{{1, 1}};
  CHECK_THROWS_AS(empirical_kendall_tau(one), std::invalid_argument);
}

TEST_CASE("empirical pearson rho") {
  std::vector<std::array<double, 2>> lin{{1, 2}, {2, 4}, {3, 6}};
  CHECK(empirical_pearson_rho(lin) == doctest::Approx(1.0).epsilon(1e-14));
  std::vector<std::array<double, 2>> neg{{1, -1}, {2, -2}, {3, -3}};
  CHECK(empirical_pearson_rho(neg) == doctest::Approx(-1.0).epsilon(1e-14));

  std::vector<std::array<double, 2>> pts{{0.1, 1.2}, {0.8, -0.3}, {1.4, 0.9},
                                         {2.2, 2.0}, {3.1, 1.1}};
  double mx = 0, my = 0;
  for (auto& p : pts) {
    mx += p[0];
    my += p[1];
  }
  mx /= pts.size();
  my /= pts.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (auto& p : pts) {
    sxy += (p[0] - mx) * (p[1] - my);
    sxx += (p[0] - mx) * (p[0] - mx);
    syy += (p[1] - my) * (p[1] - my);
  }
  CHECK(empirical_pearson_rho(pts) ==
        doctest::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-14));

  std::vector<std::array<double, 2>> flat{{1, 1}, {1, 2}};
  CHECK_THROWS_AS(empirical_pearson_rho(flat), std::invalid_argument);
}
