#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cuq/hierarchy.hpp"
#include "cuq/rng.hpp"
#include "cuq/vine.hpp"
#include "test_util.hpp"

using namespace cuq;

namespace {

VineSpec bivariate_vine(VineKind kind, const MarginalSpec& m1,
                        const MarginalSpec& m2, const CopulaSpec& c) {
  VineSpec spec;
  spec.kind = kind;
  spec.dimension = 2;
  spec.marginals = {m1, m2};
  spec.pair_copulas = {{c}};
  return spec;
}

VineSpec trivariate_cvine() {
  VineSpec spec;
  spec.kind = VineKind::CVine;
  spec.dimension = 3;
  spec.marginals = {make_marginal(MarginalFamily::Gaussian, 0.0, 1.0),
                    make_marginal(MarginalFamily::Gaussian, 1.0, 0.5),
                    make_marginal(MarginalFamily::Gaussian, -2.0, 2.0)};
  spec.pair_copulas = {{make_copula(CopulaFamily::Frank, 3.0),
                        make_copula(CopulaFamily::Frank, -4.0)},
                       {make_copula(CopulaFamily::Frank, 2.0)}};
  return spec;
}

}  // namespace

TEST_CASE("validation") {
  VineSpec bad = trivariate_cvine();
  bad.pair_copulas[0].pop_back();
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  VineSpec bad2 = trivariate_cvine();
  bad2.marginals.pop_back();
  CHECK_THROWS_AS(validate(bad2), std::invalid_argument);
}

TEST_CASE("d=2 vine density equals the bivariate joint density") {
  const auto m1 = make_marginal(MarginalFamily::Gaussian, 0.3, 1.1);
  const auto m2 = make_marginal(MarginalFamily::Weibull, 1.9, 2.3);
  const auto cop = make_copula(CopulaFamily::Frank, -5.0);
  const auto cv = bivariate_vine(VineKind::CVine, m1, m2, cop);
  const auto dv = bivariate_vine(VineKind::DVine, m1, m2, cop);
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const double x1 = 0.3 + 1.1 * rng.normal();
    const double x2 = marginal_quantile(m2, rng.uniform());
    const double expected = joint_log_pdf(m1, m2, cop, x1, x2);
    const std::vector<double> x{x1, x2};
    CHECK(vine_log_pdf(cv, x) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(vine_log_pdf(dv, x) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("all-independence vine factorizes into the marginals") {
  VineSpec spec = trivariate_cvine();
  for (auto& tree : spec.pair_copulas)
    for (auto& c : tree) c = make_copula(CopulaFamily::Independence);
  for (auto kind : {VineKind::CVine, VineKind::DVine}) {
    spec.kind = kind;
    const std::vector<double> x{0.4, 1.2, -3.0};
    double expected = 0.0;
    for (int k = 0; k < 3; ++k)
      expected += marginal_log_pdf(spec.marginals[k], x[k]);
    CHECK(vine_log_pdf(spec, x) == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("d=3 c-vine density integrates to one") {
  const auto spec = trivariate_cvine();
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
          [&](double x1) {
            return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                [&](double x2) {
                  return boost::math::quadrature::
                      gauss_kronrod<double, 31>::integrate(
                          [&](double x3) {
                            const std::vector<double> x{x1, x2, x3};
                            return std::exp(vine_log_pdf(spec, x));
                          },
                          -18.0, 14.0, 6, 1e-6);
                },
                -3.0, 5.0, 6, 1e-6);
          },
          -8.0, 8.0, 6, 1e-6);
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("density matches numerically conditioned pair-copula factors") {
  // Oracle: the conditional cdfs F(x2|x1) and F(x3|x1) come from direct
  // quadrature of the bivariate joints instead of h-functions.
  const auto spec = trivariate_cvine();
  const auto& m1 = spec.marginals[0];
  const auto& m2 = spec.marginals[1];
  const auto& m3 = spec.marginals[2];
  const auto& c12 = spec.pair_copulas[0][0];
  const auto& c13 = spec.pair_copulas[0][1];
  const auto& c23_1 = spec.pair_copulas[1][0];

  auto cond_cdf = [&](const MarginalSpec& ma, const MarginalSpec& mb,
                      const CopulaSpec& cab, double xa, double xb) {
    // F(xb | xa) = Integral_-inf^xb c(F(xa), F(t)) f(t) dt
    const double lo = marginal_quantile(mb, 1e-14);
    return testutil::integrate_1d(
        [&](double t) {
          const UnitPair u{clamp_unit(marginal_cdf(ma, xa)),
                           clamp_unit(marginal_cdf(mb, t))};
          return copula_pdf(cab, u) * marginal_pdf(mb, t);
        },
        lo, xb, 1e-11);
  };

  Rng rng(4);
  for (int i = 0; i < 8; ++i) {
    const double x1 = marginal_quantile(m1, 0.1 + 0.8 * rng.uniform());
    const double x2 = marginal_quantile(m2, 0.1 + 0.8 * rng.uniform());
    const double x3 = marginal_quantile(m3, 0.1 + 0.8 * rng.uniform());
    const double u2g1 = cond_cdf(m1, m2, c12, x1, x2);
    const double u3g1 = cond_cdf(m1, m3, c13, x1, x3);
    const double oracle =
        marginal_log_pdf(m1, x1) + marginal_log_pdf(m2, x2) +
        marginal_log_pdf(m3, x3) +
        copula_log_pdf(c12, {clamp_unit(marginal_cdf(m1, x1)),
                             clamp_unit(marginal_cdf(m2, x2))}) +
        copula_log_pdf(c13, {clamp_unit(marginal_cdf(m1, x1)),
                             clamp_unit(marginal_cdf(m3, x3))}) +
        copula_log_pdf(c23_1, {clamp_unit(u2g1), clamp_unit(u3g1)});
    const std::vector<double> x{x1, x2, x3};
    CHECK(vine_log_pdf(spec, x) == doctest::Approx(oracle).epsilon(1e-3));
  }
}

TEST_CASE("relabeling consistent with the structure leaves the density fixed") {
  // Swapping the two leaf variables of the c-vine star swaps the tree-1
  // copulas; the exchangeable conditional copula stays put.
  const auto spec = trivariate_cvine();
  VineSpec swapped = spec;
  std::swap(swapped.marginals[1], swapped.marginals[2]);
  std::swap(swapped.pair_copulas[0][0], swapped.pair_copulas[0][1]);
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const double x1 = rng.normal(), x2 = 1.0 + 0.5 * rng.normal(),
                 x3 = -2.0 + 2.0 * rng.normal();
    const std::vector<double> x{x1, x2, x3};
    const std::vector<double> xs{x1, x3, x2};
    CHECK(vine_log_pdf(spec, x) ==
          doctest::Approx(vine_log_pdf(swapped, xs)).epsilon(1e-12));
  }
}

TEST_CASE("sampling: independence gives uncorrelated margins") {
  VineSpec spec = trivariate_cvine();
  for (auto& tree : spec.pair_copulas)
    for (auto& c : tree) c = make_copula(CopulaFamily::Independence);
  const auto xs = vine_sample(spec, 100000, 15);
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      std::vector<std::array<double, 2>> pairs(xs.rows);
      for (std::size_t i = 0; i < xs.rows; ++i) pairs[i] = {xs(i, a), xs(i, b)};
      CHECK(std::fabs(empirical_kendall_tau(pairs)) < 0.01);
    }
  }
}

TEST_CASE("sampling: d=2 gaussian-copula vine hits the closed-form tau") {
  const auto spec = bivariate_vine(
      VineKind::CVine, make_marginal(MarginalFamily::Gaussian, 0.0, 1.0),
      make_marginal(MarginalFamily::Gaussian, 5.0, 2.0),
      make_copula(CopulaFamily::Gaussian, 0.5));
  const auto xs = vine_sample(spec, 100000, 23);
  std::vector<std::array<double, 2>> pairs(xs.rows);
  std::vector<double> m2(xs.rows);
  for (std::size_t i = 0; i < xs.rows; ++i) {
    pairs[i] = {xs(i, 0), xs(i, 1)};
    m2[i] = marginal_cdf(spec.marginals[1], xs(i, 1));
  }
  CHECK(std::fabs(empirical_kendall_tau(pairs) - 1.0 / 3.0) < 0.01);
  CHECK(ks_statistic_uniform(m2) < testutil::ks_critical(0.01, m2.size()));
}

TEST_CASE("sampling: d=3 d-vine samples have finite log density") {
  VineSpec spec = trivariate_cvine();
  spec.kind = VineKind::DVine;
  spec.pair_copulas = {{make_copula(CopulaFamily::Clayton, 1.5),
                        make_copula(CopulaFamily::Gaussian, -0.4)},
                       {make_copula(CopulaFamily::Frank, 2.0)}};
  const auto xs = vine_sample(spec, 2000, 33);
  for (std::size_t i = 0; i < xs.rows; ++i) {
    const double lp = vine_log_pdf(spec, xs.row(i));
    CHECK(std::isfinite(lp));
  }
  for (int k = 0; k < 3; ++k) {
    std::vector<double> u(xs.rows);
    for (std::size_t i = 0; i < xs.rows; ++i)
      u[i] = marginal_cdf(spec.marginals[k], xs(i, k));
    CHECK(ks_statistic_uniform(u) < testutil::ks_critical(0.01, u.size()));
  }
}

TEST_CASE("sampling matches the pair-copula taus on tree-1 edges") {
  const auto spec = trivariate_cvine();
  const auto xs = vine_sample(spec, 100000, 44);
  std::vector<std::array<double, 2>> p12(xs.rows), p13(xs.rows);
  for (std::size_t i = 0; i < xs.rows; ++i) {
    p12[i] = {xs(i, 0), xs(i, 1)};
    p13[i] = {xs(i, 0), xs(i, 2)};
  }
  CHECK(std::fabs(empirical_kendall_tau(p12) -
                  kendall_tau(spec.pair_copulas[0][0])) < 0.01);
  CHECK(std::fabs(empirical_kendall_tau(p13) -
                  kendall_tau(spec.pair_copulas[0][1])) < 0.01);
}

TEST_CASE("json round trip") {
  const auto spec = trivariate_cvine();
  const auto back = vine_from_json(vine_to_json(spec));
  CHECK(back.kind == spec.kind);
  CHECK(back.dimension == 3);
  CHECK(back.pair_copulas[0][1].params[0] == spec.pair_copulas[0][1].params[0]);
  CHECK(back.marginals[2].params[1] == spec.marginals[2].params[1]);
  const std::vector<double> x{0.1, 1.0, -2.5};
  CHECK(vine_log_pdf(back, x) == vine_log_pdf(spec, x));
}
