#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cuq/marginal.hpp"
#include "cuq/rng.hpp"
#include "test_util.hpp"

using namespace cuq;

namespace {

const std::vector<MarginalSpec> kSpecs = {
    make_marginal(MarginalFamily::Gaussian, 0.0, 1.0),
    make_marginal(MarginalFamily::Gaussian, 3.375, 0.16875),
    make_marginal(MarginalFamily::Gamma, 3.0, 2.0),
    make_marginal(MarginalFamily::Lognormal, 0.5, 0.4),
    make_marginal(MarginalFamily::Weibull, 1.8, 2.5),
};

std::vector<double> sample_from(const MarginalSpec& spec, std::size_t n,
                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> xs(n);
  for (auto& x : xs) x = marginal_quantile(spec, rng.uniform());
  return xs;
}

}  // namespace

TEST_CASE("validation") {
  CHECK_THROWS_AS(make_marginal(MarginalFamily::Gaussian, 0.0, 0.0),
                  std::domain_error);
  CHECK_THROWS_AS(make_marginal(MarginalFamily::Gamma, -1.0, 1.0),
                  std::domain_error);
  CHECK_THROWS_AS(make_marginal(MarginalFamily::Weibull, 1.0, -2.0),
                  std::domain_error);
  for (auto f : {MarginalFamily::Gaussian, MarginalFamily::Gamma,
                 MarginalFamily::Lognormal, MarginalFamily::Weibull})
    CHECK(marginal_family_from_name(marginal_family_name(f)) == f);
}

TEST_CASE("pointwise closed-form values") {
  CHECK(marginal_pdf(make_marginal(MarginalFamily::Gaussian, 0, 1), 0.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * kPi)).epsilon(1e-14));
  const auto logn = make_marginal(MarginalFamily::Lognormal, 0.7, 0.3);
  CHECK(marginal_quantile(logn, 0.5) == doctest::Approx(std::exp(0.7)).epsilon(1e-12));
  const auto wb = make_marginal(MarginalFamily::Weibull, 1.7, 2.2);
  CHECK(marginal_cdf(wb, 2.2) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("support handling") {
  const auto gam = make_marginal(MarginalFamily::Gamma, 2.0, 1.0);
  CHECK(marginal_pdf(gam, -1.0) == 0.0);
  CHECK(marginal_cdf(gam, -1.0) == 0.0);
  CHECK(marginal_log_pdf(gam, 0.0) == kNegInf);
  CHECK(std::isfinite(marginal_log_pdf(make_marginal(MarginalFamily::Gaussian, 0, 1), -5.0)));
}

TEST_CASE("quantile/cdf round trip") {
  for (const auto& spec : kSpecs) {
    for (double p = 0.001; p < 1.0; p += 0.0525) {
      const double x = marginal_quantile(spec, p);
      CHECK(marginal_cdf(spec, x) == doctest::Approx(p).epsilon(1e-8));
    }
  }
  CHECK_THROWS_AS(marginal_quantile(kSpecs[0], 0.0), std::domain_error);
}

TEST_CASE("pdf integrates to one") {
  for (const auto& spec : kSpecs) {
    CAPTURE(marginal_family_name(spec.family));
    const double lo = positive_support(spec.family)
                          ? 0.0
                          : marginal_quantile(spec, 1e-13);
    const double hi = marginal_quantile(spec, 1.0 - 1e-13);
    const double integral = testutil::integrate_1d(
        [&](double x) { return marginal_pdf(spec, x); }, lo, hi, 1e-10);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("log likelihood") {
  const auto gauss = make_marginal(MarginalFamily::Gaussian, 0, 1);
  std::vector<double> zero{0.0};
  CHECK(marginal_log_likelihood(gauss, zero) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-12));

  const auto gam = make_marginal(MarginalFamily::Gamma, 2.0, 1.5);
  std::vector<double> bad{1.0, -0.5};
  CHECK(marginal_log_likelihood(gam, bad) == kNegInf);

  // Term-by-term oracle on a 10-point set.
  const auto xs = sample_from(gam, 10, 3);
  double acc = 0.0;
  for (double x : xs) acc += marginal_log_pdf(gam, x);
  CHECK(marginal_log_likelihood(gam, xs) == doctest::Approx(acc).epsilon(1e-13));

  std::vector<double> empty;
  CHECK_THROWS_AS(marginal_log_likelihood(gam, empty), std::invalid_argument);
}

TEST_CASE("sufficient-statistic likelihood equals the naive sum") {
  Rng rng(17);
  std::vector<double> xs(200);
  for (auto& x : xs) x = 0.2 + 3.0 * rng.uniform();
  const auto stats = MarginalDataStats::from(xs);
  for (const auto& spec : kSpecs) {
    const double fast = marginal_log_likelihood_stats(
        spec.family, spec.params[0], spec.params[1], stats);
    CHECK(fast == doctest::Approx(marginal_log_likelihood(spec, xs)).epsilon(1e-10));
  }
}

TEST_CASE("pseudo observations") {
  const auto g = make_marginal(MarginalFamily::Gaussian, 0, 1);
  std::vector<std::array<double, 2>> data{{0.0, 0.0}};
  const auto u = pseudo_observations(g, g, data);
  CHECK(u[0].u1 == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(u[0].u2 == doctest::Approx(0.5).epsilon(1e-14));

  const double x975 = marginal_quantile(g, 0.975);
  std::vector<std::array<double, 2>> d2{{x975, -x975}};
  const auto u2 = pseudo_observations(g, g, d2);
  CHECK(u2[0].u1 == doctest::Approx(0.975).epsilon(1e-10));
  CHECK(u2[0].u2 == doctest::Approx(0.025).epsilon(1e-10));

  // Mixed pair against the componentwise cdf oracle.
  const auto wb = make_marginal(MarginalFamily::Weibull, 2.0, 1.0);
  std::vector<std::array<double, 2>> d3{{0.2, -1.0}, {0.5, 0.3}, {1.1, 2.2},
                                        {1.9, -0.4}, {0.9, 0.0}};
  const auto u3 = pseudo_observations(wb, g, d3);
  for (std::size_t i = 0; i < d3.size(); ++i) {
    CHECK(u3[i].u1 == doctest::Approx(marginal_cdf(wb, d3[i][0])).epsilon(1e-14));
    CHECK(u3[i].u2 == doctest::Approx(marginal_cdf(g, d3[i][1])).epsilon(1e-14));
  }

  // Pseudo-observations of self-sampled data are uniform.
  const auto xs = sample_from(wb, 10000, 11);
  const auto us = pseudo_observations(wb, xs);
  CHECK(ks_statistic_uniform(us) < testutil::ks_critical(0.01, us.size()));
}

TEST_CASE("moment init") {
  std::vector<double> simple{1.0, 2.0, 3.0};
  const auto g = moment_init(MarginalFamily::Gaussian, simple);
  CHECK(!g.fallback);
  CHECK(g.spec.params[0] == doctest::Approx(2.0));
  CHECK(g.spec.params[1] == doctest::Approx(1.0));

  std::vector<double> degenerate{std::exp(1.0), std::exp(1.0), std::exp(1.0)};
  const auto ln = moment_init(MarginalFamily::Lognormal, degenerate);
  CHECK(ln.fallback);
  CHECK(std::isfinite(ln.spec.params[1]));

  const auto truth = make_marginal(MarginalFamily::Gamma, 3.0, 2.0);
  const auto xs = sample_from(truth, 100, 29);
  const auto fit = moment_init(MarginalFamily::Gamma, xs);
  CHECK(!fit.fallback);
  CHECK(fit.spec.params[0] == doctest::Approx(3.0).epsilon(0.5 / 3.0));

  std::vector<double> nonpos{-1.0, 2.0, 3.0};
  CHECK_THROWS_AS(moment_init(MarginalFamily::Weibull, nonpos),
                  std::invalid_argument);
}
