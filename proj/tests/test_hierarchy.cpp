#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cuq/hierarchy.hpp"
#include "cuq/rng.hpp"
#include "test_util.hpp"

using namespace cuq;

namespace {

InferenceConfig light_config() {
  InferenceConfig cfg;
  cfg.evidence_samples = 2000;
  cfg.chain_length = 3000;
  cfg.burn_in = 1000;
  cfg.thinning = 4;
  return cfg;
}

std::vector<double> gaussian_data(std::size_t n, double mu, double sd,
                                  std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> xs(n);
  for (auto& x : xs) x = mu + sd * rng.normal();
  return xs;
}

const std::vector<MarginalFamily> kAllMarginals{
    MarginalFamily::Gaussian, MarginalFamily::Gamma, MarginalFamily::Lognormal,
    MarginalFamily::Weibull};

/// Synthetic two-model posterior with fixed chains, for draw tests.
MarginalModelSet synthetic_marginal_set(std::vector<double> probs,
                                        std::size_t chain_len) {
  MarginalModelSet set;
  set.candidates = {MarginalFamily::Gaussian, MarginalFamily::Gamma,
                    MarginalFamily::Lognormal};
  set.candidates.resize(probs.size());
  set.models.probability = probs;
  set.models.draw_probability = probs;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    set.models.log_evidence.push_back(0.0);
    set.models.retained.push_back(probs[j] > 0.0);
    McmcResult chain;
    for (std::size_t i = 0; i < chain_len; ++i) {
      chain.samples.push_back(
          {1.0 + static_cast<double>(j) + 1e-3 * static_cast<double>(i), 1.0});
      chain.log_posterior.push_back(0.0);
    }
    set.models.chains.push_back(std::move(chain));
    set.models.map.push_back({1.0, 1.0});
  }
  return set;
}

}  // namespace

TEST_CASE("infer_marginals recovers a gaussian truth at n=1000") {
  const auto cfg = light_config();
  std::vector<double> probs;
  for (int s = 0; s < 10; ++s) {
    const auto data = gaussian_data(1000, 10.0, 1.0, 100 + s);
    const auto post = infer_marginals(data, kAllMarginals, {}, cfg, 55 + s);
    double p_gauss = 0.0;
    for (std::size_t j = 0; j < post.candidates.size(); ++j)
      if (post.candidates[j] == MarginalFamily::Gaussian)
        p_gauss = post.models.probability[j];
    probs.push_back(p_gauss);
    double sum = 0.0;
    for (double p : post.models.probability) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(testutil::median(probs) > 0.5);
}

TEST_CASE("small data keeps the model set imprecise") {
  const auto cfg = light_config();
  for (int s = 0; s < 5; ++s) {
    const auto data = gaussian_data(10, 10.0, 1.0, 300 + s);
    const auto post = infer_marginals(data, kAllMarginals, {}, cfg, 99 + s);
    for (double p : post.models.probability) CHECK(p < 0.95);
  }
}

TEST_CASE("identical candidates share the posterior mass uniformly") {
  // Two parameter-free independence copulas: constant likelihood by design.
  const auto u = copula_sample(make_copula(CopulaFamily::Gaussian, 0.2), 50, 3);
  std::vector<CopulaFamily> cands{CopulaFamily::Independence,
                                  CopulaFamily::Independence};
  const auto models = infer_copula_models(u, cands, {}, light_config(), 4);
  CHECK(models.models.probability[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(models.models.probability[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("draw_marginal_pairs: degenerate posterior gives identical pairs") {
  const auto post = synthetic_marginal_set({1.0}, 1);
  const auto ens = draw_marginal_pairs(post, post, 20, 5);
  REQUIRE(ens.pairs.size() == 20);
  for (const auto& p : ens.pairs) {
    CHECK(p.m1.params[0] == ens.pairs[0].m1.params[0]);
    CHECK(p.prov1.model == 0);
    CHECK(p.prov1.state == 0);
  }
}

TEST_CASE("draw_marginal_pairs follows the model probabilities") {
  const auto post = synthetic_marginal_set({0.75, 0.25}, 50);
  const auto ens = draw_marginal_pairs(post, post, 10000, 42);
  double freq = 0.0;
  for (const auto& p : ens.pairs) {
    if (p.prov1.model == 0) freq += 1.0;
    CHECK(p.prov1.state < 50);  // provenance indices stay inside the chain
    CHECK(p.prov2.state < 50);
  }
  freq /= 10000.0;
  CHECK(freq == doctest::Approx(0.75).epsilon(0.02 / 0.75));
}

TEST_CASE("ensemble model frequencies pass a chi-square consistency check") {
  const std::vector<double> probs{0.6, 0.3, 0.1};
  const auto post = synthetic_marginal_set(probs, 40);
  const auto draws = draw_marginal_models(post, 10000, 7);
  std::vector<double> count(3, 0.0);
  for (const auto& d : draws) count[d.prov.model] += 1.0;
  double chi2 = 0.0;
  for (int j = 0; j < 3; ++j) {
    const double expected = probs[j] * 10000.0;
    chi2 += (count[j] - expected) * (count[j] - expected) / expected;
  }
  CHECK(chi2 < testutil::chi2_critical(0.01, 2.0));
}

TEST_CASE("lhs draw stratifies the chain states") {
  const auto post = synthetic_marginal_set({1.0}, 100);
  const auto draws = draw_marginal_models(post, 100, 13, /*lhs=*/true);
  std::vector<int> hit(100, 0);
  for (const auto& d : draws) hit[d.prov.state]++;
  for (int h : hit) CHECK(h == 1);  // one draw per stratum
}

TEST_CASE("copula inference: frank dominates on frank data") {
  const auto m = make_marginal(MarginalFamily::Gaussian, 0.0, 1.0);
  const auto u = copula_sample(make_copula(CopulaFamily::Frank, 3.0), 1000, 9);
  std::vector<std::array<double, 2>> data(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    data[i] = {marginal_quantile(m, u[i].u1), marginal_quantile(m, u[i].u2)};

  PairDraw pair{m, m, {0, 0}, {0, 0}};
  std::vector<CopulaFamily> cands{CopulaFamily::Gaussian, CopulaFamily::Clayton,
                                  CopulaFamily::Frank, CopulaFamily::Gumbel};
  const auto cond = infer_copula_conditional(pair, data, cands, {},
                                             light_config(), 50, 21, 22);
  REQUIRE(cond.draws.size() == 50);
  double p_frank = 0.0;
  for (std::size_t j = 0; j < cond.candidates.size(); ++j)
    if (cond.candidates[j] == CopulaFamily::Frank) p_frank = cond.probability[j];
  CHECK(p_frank > 0.5);
  for (const auto& d : cond.draws) {
    const bool known =
        std::find(cond.candidates.begin(), cond.candidates.end(),
                  d.spec.family) != cond.candidates.end();
    CHECK(known);
  }
}

TEST_CASE("copula inference: independent data stay undecided and weak") {
  const auto m = make_marginal(MarginalFamily::Gaussian, 0.0, 1.0);
  const auto u =
      copula_sample(make_copula(CopulaFamily::Independence), 1000, 31);
  std::vector<std::array<double, 2>> data(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    data[i] = {marginal_quantile(m, u[i].u1), marginal_quantile(m, u[i].u2)};
  PairDraw pair{m, m, {0, 0}, {0, 0}};
  std::vector<CopulaFamily> cands{CopulaFamily::Gaussian, CopulaFamily::Clayton,
                                  CopulaFamily::Frank, CopulaFamily::Gumbel};
  const auto cond = infer_copula_conditional(pair, data, cands, {},
                                             light_config(), 50, 61, 66);
  for (double p : cond.probability) CHECK(p < 0.9);
  for (const auto& d : cond.draws)
    CHECK(std::fabs(kendall_tau(d.spec)) < 0.05);
}

TEST_CASE("copula inference cache reuses identical pseudo-observations") {
  const auto m = make_marginal(MarginalFamily::Gaussian, 0.0, 1.0);
  const auto u = copula_sample(make_copula(CopulaFamily::Frank, 3.0), 200, 17);
  std::vector<std::array<double, 2>> data(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    data[i] = {marginal_quantile(m, u[i].u1), marginal_quantile(m, u[i].u2)};
  PairDraw pair{m, m, {0, 0}, {0, 0}};
  std::vector<CopulaFamily> cands{CopulaFamily::Gaussian, CopulaFamily::Frank};

  CopulaInferenceCache cache;
  const auto cfg = light_config();
  const auto a =
      infer_copula_conditional(pair, data, cands, {}, cfg, 10, 5, 6, &cache);
  CHECK(cache.size() == 1);
  const auto b =
      infer_copula_conditional(pair, data, cands, {}, cfg, 10, 5, 6, &cache);
  CHECK(cache.size() == 1);
  // Same inference and same draw seed: identical output either way.
  for (std::size_t k = 0; k < a.draws.size(); ++k) {
    CHECK(a.draws[k].spec.family == b.draws[k].spec.family);
    CHECK(a.draws[k].spec.params[0] == b.draws[k].spec.params[0]);
  }
  // And the cache must not change the result relative to a cold run.
  const auto c =
      infer_copula_conditional(pair, data, cands, {}, cfg, 10, 5, 6, nullptr);
  CHECK(c.draws[0].spec.params[0] == a.draws[0].spec.params[0]);
}

TEST_CASE("N_tc=1 with a single retained model and state is deterministic") {
  CopulaModelSet set;
  set.candidates = {CopulaFamily::Frank};
  set.models.log_evidence = {0.0};
  set.models.probability = {1.0};
  set.models.draw_probability = {1.0};
  set.models.retained = {true};
  McmcResult chain;
  chain.samples = {{2.5}};
  chain.log_posterior = {0.0};
  set.models.chains.push_back(chain);
  set.models.map.push_back({2.5});
  const auto draws = draw_copulas(set, 1, 77);
  REQUIRE(draws.size() == 1);
  CHECK(draws[0].spec.family == CopulaFamily::Frank);
  CHECK(draws[0].spec.params[0] == 2.5);
}

TEST_CASE("joint_log_pdf") {
  const auto m1 = make_marginal(MarginalFamily::Gaussian, 1.0, 2.0);
  const auto m2 = make_marginal(MarginalFamily::Weibull, 2.0, 1.5);
  const auto indep = make_copula(CopulaFamily::Independence);
  CHECK(joint_log_pdf(m1, m2, indep, 0.3, 0.8) ==
        doctest::Approx(marginal_log_pdf(m1, 0.3) + marginal_log_pdf(m2, 0.8))
            .epsilon(1e-13));
  CHECK(joint_log_pdf(m1, m2, indep, 0.3, -1.0) == kNegInf);

  // Gaussian marginals + gaussian copula equals the bivariate normal density.
  const double mu1 = 0.5, sd1 = 1.3, mu2 = -0.7, sd2 = 0.6, rho = 0.55;
  const auto g1 = make_marginal(MarginalFamily::Gaussian, mu1, sd1);
  const auto g2 = make_marginal(MarginalFamily::Gaussian, mu2, sd2);
  const auto cop = make_copula(CopulaFamily::Gaussian, rho);
  for (double x1 : {-1.0, 0.5, 2.0}) {
    for (double x2 : {-1.5, -0.7, 0.4}) {
      const double z1 = (x1 - mu1) / sd1, z2 = (x2 - mu2) / sd2;
      const double q = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) /
                       (1.0 - rho * rho);
      const double expected = -std::log(2.0 * kPi * sd1 * sd2 *
                                        std::sqrt(1.0 - rho * rho)) -
                              0.5 * q;
      CHECK(joint_log_pdf(g1, g2, cop, x1, x2) ==
            doctest::Approx(expected).epsilon(1e-8));
    }
  }

  // Joint density integrates to one over a generous box.
  const double integral = testutil::integrate_box_2d(
      [&](double a, double b) { return std::exp(joint_log_pdf(g1, g2, cop, a, b)); },
      mu1 - 8 * sd1, mu1 + 8 * sd1, mu2 - 8 * sd2, mu2 + 8 * sd2, 1e-8);
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("assemble_ensemble and serialization round trip") {
  const auto m = make_marginal(MarginalFamily::Gaussian, 0.0, 1.0);
  MarginalEnsemble pairs;
  for (int l = 0; l < 2; ++l)
    pairs.pairs.push_back(
        {make_marginal(MarginalFamily::Gaussian, 0.1 * l, 1.0),
         make_marginal(MarginalFamily::Weibull, 1.5, 2.0 + l),
         {0, static_cast<std::size_t>(l)},
         {0, 0}});
  std::vector<ConditionalCopulaSet> sets(2);
  for (int l = 0; l < 2; ++l) {
    sets[l].candidates = {CopulaFamily::Frank, CopulaFamily::Clayton};
    sets[l].probability = {0.7, 0.3};
    sets[l].log_evidence = {-1.0, -2.0};
    for (int k = 0; k < 3; ++k)
      sets[l].draws.push_back(
          {make_copula(CopulaFamily::Frank, 2.0 + 0.1 * k + 0.755537 * l),
           {0, static_cast<std::size_t>(k)}});
  }
  const auto ens = assemble_ensemble(pairs, sets);
  CHECK(ens.entries.size() == 2);
  CHECK(ens.n_tc == 3);
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t k = 0; k < 3; ++k) {
      const double lp = ens.entry_log_pdf(l, k, 0.2, 1.1);
      CHECK(std::isfinite(lp));
      CHECK(std::exp(lp) > 0.0);
    }

  const std::string text = ensemble_to_json(ens);
  const auto back = ensemble_from_json(text);
  REQUIRE(back.entries.size() == ens.entries.size());
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(back.entries[l].pair.m2.params[1] == ens.entries[l].pair.m2.params[1]);
    for (std::size_t k = 0; k < 3; ++k) {
      // Bit-exact round trip of every stored parameter.
      CHECK(back.entries[l].copulas[k].spec.params[0] ==
            ens.entries[l].copulas[k].spec.params[0]);
      CHECK(back.entries[l].copulas[k].prov.state ==
            ens.entries[l].copulas[k].prov.state);
    }
  }

  std::vector<ConditionalCopulaSet> short_sets(1);
  CHECK_THROWS_AS(assemble_ensemble(pairs, short_sets), std::invalid_argument);
  (void)m;
}

TEST_CASE("ensemble spread narrows with plenty of data") {
  // Truth: correlated pair with gaussian marginals; at n=5000 the candidate
  // joint cdfs at the truth median must agree within 0.05.
  const auto g1 = make_marginal(MarginalFamily::Gaussian, 10.0, 1.0);
  const auto g2 = make_marginal(MarginalFamily::Gaussian, -3.0, 0.5);
  const auto cop = make_copula(CopulaFamily::Frank, 3.0);
  const auto u = copula_sample(cop, 5000, 123);
  std::vector<std::array<double, 2>> data(u.size());
  std::vector<double> c1(u.size()), c2(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    data[i] = {marginal_quantile(g1, u[i].u1), marginal_quantile(g2, u[i].u2)};
    c1[i] = data[i][0];
    c2[i] = data[i][1];
  }
  auto cfg = light_config();
  cfg.chain_length = 2000;
  cfg.burn_in = 800;
  const auto post1 = infer_marginals(c1, kAllMarginals, {}, cfg, 11);
  const auto post2 = infer_marginals(c2, kAllMarginals, {}, cfg, 12);
  const auto pairs = draw_marginal_pairs(post1, post2, 60, 13);

  std::vector<CopulaFamily> cands{CopulaFamily::Gaussian, CopulaFamily::Frank};
  CopulaInferenceCache cache;
  double lo = 1.0, hi = 0.0;
  for (std::size_t l = 0; l < pairs.pairs.size(); ++l) {
    const auto cond = infer_copula_conditional(pairs.pairs[l], data, cands, {},
                                               cfg, 10, 1001, 2000 + l, &cache);
    for (const auto& d : cond.draws) {
      const UnitPair at{clamp_unit(marginal_cdf(pairs.pairs[l].m1, 10.0)),
                        clamp_unit(marginal_cdf(pairs.pairs[l].m2, -3.0))};
      const double cdf = copula_cdf(d.spec, at);
      lo = std::min(lo, cdf);
      hi = std::max(hi, cdf);
    }
  }
  CHECK(hi - lo < 0.05);
}
