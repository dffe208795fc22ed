#include "cuq/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cuq/rng.hpp"

namespace cuq {

// ---------------------------------------------------------------------------
// priors
// ---------------------------------------------------------------------------

PriorSpec default_marginal_prior(MarginalFamily f, std::span<const double> data) {
  if (data.size() < 2)
    throw std::invalid_argument("default_marginal_prior: need n >= 2");
  const double m = mean(data);
  const double s = std::max(sample_std(data), 1e-6 * std::max(std::fabs(m), 1.0));
  PriorSpec p;
  switch (f) {
    case MarginalFamily::Gaussian:
      p.bounds = {{m - 5.0 * s, m + 5.0 * s}, {s / 10.0, s * 10.0}};
      return p;
    case MarginalFamily::Gamma: {
      const auto init = moment_init(f, data);
      const double k = init.spec.params[0], sc = init.spec.params[1];
      p.bounds = {{k / 16.0, k * 16.0}, {sc / 16.0, sc * 16.0}};
      return p;
    }
    case MarginalFamily::Lognormal: {
      std::vector<double> lx;
      lx.reserve(data.size());
      for (double x : data) {
        if (!(x > 0.0))
          throw std::invalid_argument(
              "default_marginal_prior: lognormal on nonpositive data");
        lx.push_back(std::log(x));
      }
      const double ml = mean(lx);
      const double sl =
          std::max(sample_std(lx), 1e-6 * std::max(std::fabs(ml), 1.0));
      p.bounds = {{ml - 5.0 * sl, ml + 5.0 * sl}, {sl / 10.0, sl * 10.0}};
      return p;
    }
    case MarginalFamily::Weibull: {
      const auto init = moment_init(f, data);
      const double k = init.spec.params[0], sc = init.spec.params[1];
      p.bounds = {{k / 16.0, k * 16.0}, {sc / 16.0, sc * 16.0}};
      return p;
    }
  }
  throw std::logic_error("default_marginal_prior: bad family tag");
}

PriorSpec default_copula_prior(CopulaFamily f) {
  PriorSpec p;
  switch (f) {
    case CopulaFamily::Independence:
      return p;  // no parameters
    case CopulaFamily::Gaussian:
      p.bounds = {{-0.999, 0.999}};
      return p;
    case CopulaFamily::StudentT:
      p.bounds = {{-0.999, 0.999}, {2.0 + 1e-6, 30.0}};
      return p;
    case CopulaFamily::Clayton:
      p.bounds = {{1e-3, 20.0}};
      return p;
    case CopulaFamily::Frank:
      p.bounds = {{-30.0, 30.0}};
      p.excluded = {{-1e-3, 1e-3}};
      return p;
    case CopulaFamily::Gumbel:
      p.bounds = {{1.0, 20.0}};
      return p;
  }
  throw std::logic_error("default_copula_prior: bad family tag");
}

// ---------------------------------------------------------------------------
// model-set assembly shared by marginal and copula inference
// ---------------------------------------------------------------------------

namespace {

std::vector<double> clamp_into(const PriorSpec& prior, std::vector<double> x) {
  for (std::size_t i = 0; i < prior.bounds.size(); ++i) {
    const auto& b = prior.bounds[i];
    const double nudge = 1e-6 * (b.upper - b.lower);
    x[i] = std::clamp(x[i], b.lower + nudge, b.upper - nudge);
    if (i < prior.excluded.size() && prior.excluded[i].lower < prior.excluded[i].upper &&
        x[i] > prior.excluded[i].lower && x[i] < prior.excluded[i].upper) {
      x[i] = (x[i] >= 0.5 * (prior.excluded[i].lower + prior.excluded[i].upper))
                 ? prior.excluded[i].upper + nudge
                 : prior.excluded[i].lower - nudge;
    }
  }
  return x;
}

void finish_model_set(ModelSet& set, double threshold,
                      const std::vector<LogLikelihood>& logliks,
                      const std::vector<PriorSpec>& priors,
                      const std::vector<std::vector<double>>& inits,
                      const InferenceConfig& cfg, std::uint64_t seed) {
  const std::size_t n_models = set.log_evidence.size();
  std::vector<double> model_prior(n_models, 1.0 / static_cast<double>(n_models));
  set.probability = posterior_model_probabilities(set.log_evidence, model_prior);

  set.retained.assign(n_models, false);
  double retained_mass = 0.0;
  for (std::size_t j = 0; j < n_models; ++j) {
    set.retained[j] = set.probability[j] >= threshold;
    if (set.retained[j]) retained_mass += set.probability[j];
  }
  set.draw_probability.assign(n_models, 0.0);
  for (std::size_t j = 0; j < n_models; ++j)
    if (set.retained[j]) set.draw_probability[j] = set.probability[j] / retained_mass;

  set.chains.resize(n_models);
  set.map.resize(n_models);
  for (std::size_t j = 0; j < n_models; ++j) {
    if (!set.retained[j]) continue;
    if (priors[j].dim() == 0) {
      // Parameter-free model: a single empty state stands in for the chain.
      set.chains[j].samples = {{}};
      set.chains[j].log_posterior = {0.0};
      set.chains[j].acceptance_rate = 1.0;
      continue;
    }
    McmcConfig mc;
    mc.chain_length = cfg.chain_length;
    mc.burn_in = cfg.burn_in;
    mc.thinning = cfg.thinning;
    mc.target_acceptance = cfg.target_acceptance;
    mc.seed = derive_seed(seed, "mcmc", j);
    mc.init = clamp_into(priors[j], inits[j]);
    set.chains[j] = mcmc_posterior(logliks[j], priors[j], mc);
    set.map[j] = map_estimate(set.chains[j]);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// marginal inference
// ---------------------------------------------------------------------------

MarginalModelSet infer_marginals(std::span<const double> data,
                                 std::span<const MarginalFamily> candidates,
                                 std::span<const PriorSpec> priors,
                                 const InferenceConfig& cfg, std::uint64_t seed) {
  if (data.size() < 3) throw std::invalid_argument("infer_marginals: need n >= 3");
  if (candidates.empty())
    throw std::invalid_argument("infer_marginals: no candidates");
  if (!priors.empty() && priors.size() != candidates.size())
    throw std::invalid_argument("infer_marginals: prior/candidate mismatch");

  const auto stats = MarginalDataStats::from(data);

  MarginalModelSet out;
  out.candidates.assign(candidates.begin(), candidates.end());

  std::vector<LogLikelihood> logliks;
  std::vector<PriorSpec> prior_list;
  std::vector<std::vector<double>> inits;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const MarginalFamily fam = candidates[j];
    PriorSpec prior;
    if (!priors.empty()) {
      prior = priors[j];
    } else if (positive_support(fam) && !stats.all_positive) {
      // Candidate cannot see the data; keep a placeholder prior so indices
      // stay aligned. Its evidence is -inf below.
      prior.bounds = {{1e-3, 1.0}, {1e-3, 1.0}};
    } else {
      prior = default_marginal_prior(fam, data);
    }
    prior_list.push_back(prior);
    logliks.emplace_back([fam, &stats](std::span<const double> th) {
      return marginal_log_likelihood_stats(fam, th[0], th[1], stats);
    });
    if (positive_support(fam) && !stats.all_positive) {
      inits.push_back({0.5, 0.5});
    } else {
      inits.push_back({moment_init(fam, data).spec.params[0],
                       moment_init(fam, data).spec.params[1]});
    }
  }

  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (positive_support(candidates[j]) && !stats.all_positive) {
      out.models.log_evidence.push_back(kNegInf);
      continue;
    }
    const auto ev = log_evidence(logliks[j], prior_list[j], cfg.evidence_samples,
                                 derive_seed(seed, "evidence", j));
    out.models.log_evidence.push_back(ev.log_evidence);
  }

  finish_model_set(out.models, cfg.plausibility_threshold, logliks, prior_list,
                   inits, cfg, seed);
  return out;
}

// ---------------------------------------------------------------------------
// ensemble draws
// ---------------------------------------------------------------------------

namespace {

std::size_t categorical(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    acc += probs[j];
    if (u <= acc) return j;
  }
  return probs.size() - 1;
}

/// Latin hypercube stratified uniforms: one point per stratum, shuffled.
std::vector<double> lhs_uniforms(std::size_t n, Rng& rng) {
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i)
    u[i] = (static_cast<double>(i) + rng.uniform()) / static_cast<double>(n);
  for (std::size_t i = n; i > 1; --i)
    std::swap(u[i - 1], u[rng.index(i)]);
  return u;
}

MarginalDraw draw_one(const MarginalModelSet& post, double u_model,
                      double u_state) {
  const std::size_t j = categorical(post.models.draw_probability, u_model);
  const auto& chain = post.models.chains[j].samples;
  if (chain.empty())
    throw std::runtime_error("draw_marginal_models: retained model has no chain");
  auto idx = static_cast<std::size_t>(u_state * static_cast<double>(chain.size()));
  if (idx >= chain.size()) idx = chain.size() - 1;
  const auto& th = chain[idx];
  return {make_marginal(post.candidates[j], th[0], th[1]), {j, idx}};
}

}  // namespace

std::vector<MarginalDraw> draw_marginal_models(const MarginalModelSet& post,
                                               std::size_t n, std::uint64_t seed,
                                               bool lhs) {
  if (n < 1) throw std::invalid_argument("draw_marginal_models: n must be >= 1");
  Rng rng(seed);
  std::vector<double> u_state;
  if (lhs) u_state = lhs_uniforms(n, rng);
  std::vector<MarginalDraw> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double um = rng.uniform();
    const double us = lhs ? u_state[i] : rng.uniform();
    out.push_back(draw_one(post, um, us));
  }
  return out;
}

MarginalEnsemble draw_marginal_pairs(const MarginalModelSet& post1,
                                     const MarginalModelSet& post2,
                                     std::size_t n_td, std::uint64_t seed,
                                     bool lhs) {
  if (n_td < 1) throw std::invalid_argument("draw_marginal_pairs: N_td >= 1");
  const auto d1 = draw_marginal_models(post1, n_td, derive_seed(seed, "var", 1), lhs);
  const auto d2 = draw_marginal_models(post2, n_td, derive_seed(seed, "var", 2), lhs);
  MarginalEnsemble e;
  e.pairs.reserve(n_td);
  for (std::size_t i = 0; i < n_td; ++i)
    e.pairs.push_back({d1[i].spec, d2[i].spec, d1[i].prov, d2[i].prov});
  return e;
}

// ---------------------------------------------------------------------------
// copula inference
// ---------------------------------------------------------------------------

namespace {

/// Pseudo-observations with the transforms reused across likelihood calls.
struct CopulaData {
  std::size_t n = 0;
  std::vector<double> u1, u2;
  std::vector<double> z1, z2;          // normal scores
  double s11 = 0, s22 = 0, s12 = 0;    // z cross moments
  std::vector<double> lu1, lu2;        // log u
  std::vector<double> x1, x2;          // -log u
  std::vector<double> lx1, lx2;        // log(-log u)
  double sum_u = 0, sum_lu = 0, sum_lx = 0;

  explicit CopulaData(std::span<const UnitPair> pseudo) {
    n = pseudo.size();
    u1.reserve(n); u2.reserve(n);
    z1.reserve(n); z2.reserve(n);
    lu1.reserve(n); lu2.reserve(n);
    x1.reserve(n); x2.reserve(n);
    lx1.reserve(n); lx2.reserve(n);
    for (const auto& p : pseudo) {
      const double a = clamp_unit(p.u1), b = clamp_unit(p.u2);
      u1.push_back(a); u2.push_back(b);
      const double za = normal_quantile(a), zb = normal_quantile(b);
      z1.push_back(za); z2.push_back(zb);
      s11 += za * za; s22 += zb * zb; s12 += za * zb;
      const double la = std::log(a), lb = std::log(b);
      lu1.push_back(la); lu2.push_back(lb);
      x1.push_back(-la); x2.push_back(-lb);
      lx1.push_back(std::log(-la)); lx2.push_back(std::log(-lb));
      sum_u += a + b;
      sum_lu += la + lb;
      sum_lx += lx1.back() + lx2.back();
    }
  }
};

double copula_log_likelihood(CopulaFamily fam, std::span<const double> th,
                             const CopulaData& d) {
  const double n = static_cast<double>(d.n);
  switch (fam) {
    case CopulaFamily::Independence:
      return 0.0;
    case CopulaFamily::Gaussian: {
      const double r = th[0];
      const double r2 = 1.0 - r * r;
      return -0.5 * n * std::log(r2) -
             (r * r * (d.s11 + d.s22) - 2.0 * r * d.s12) / (2.0 * r2);
    }
    case CopulaFamily::StudentT: {
      const double rho = th[0], nu = th[1];
      const double r2 = 1.0 - rho * rho;
      const double c0 = std::lgamma(0.5 * (nu + 2.0)) + std::lgamma(0.5 * nu) -
                        2.0 * std::lgamma(0.5 * (nu + 1.0)) - 0.5 * std::log(r2);
      double ll = n * c0;
      for (std::size_t i = 0; i < d.n; ++i) {
        const double x = student_t_quantile(d.u1[i], nu);
        const double y = student_t_quantile(d.u2[i], nu);
        const double q = x * x - 2.0 * rho * x * y + y * y;
        ll += -0.5 * (nu + 2.0) * std::log1p(q / (nu * r2)) +
              0.5 * (nu + 1.0) *
                  (std::log1p(x * x / nu) + std::log1p(y * y / nu));
      }
      return ll;
    }
    case CopulaFamily::Clayton: {
      const double t = th[0];
      double s_log = 0.0;
      for (std::size_t i = 0; i < d.n; ++i) {
        const double s =
            std::exp(-t * d.lu1[i]) + std::exp(-t * d.lu2[i]) - 1.0;
        s_log += std::log(s);
      }
      return n * std::log1p(t) - (t + 1.0) * d.sum_lu - (2.0 + 1.0 / t) * s_log;
    }
    case CopulaFamily::Frank: {
      const double t = th[0];
      const double g1 = std::expm1(-t);
      double s_log = 0.0;
      for (std::size_t i = 0; i < d.n; ++i) {
        const double ga = std::expm1(-t * d.u1[i]);
        const double gb = std::expm1(-t * d.u2[i]);
        s_log += std::log(std::fabs(g1 + ga * gb));
      }
      return n * std::log(-t * g1) - t * d.sum_u - 2.0 * s_log;
    }
    case CopulaFamily::Gumbel: {
      const double t = th[0];
      double acc = 0.0;
      for (std::size_t i = 0; i < d.n; ++i) {
        const double s = std::exp(t * d.lx1[i]) + std::exp(t * d.lx2[i]);
        const double logA = std::log(s) / t;
        const double A = std::exp(logA);
        acc += -A + std::log(A + t - 1.0) + (1.0 - 2.0 * t) * logA;
      }
      return acc - d.sum_lu + (t - 1.0) * d.sum_lx;
    }
  }
  throw std::logic_error("copula_log_likelihood: bad family tag");
}

std::vector<double> copula_init(CopulaFamily fam, double tau_hat) {
  switch (fam) {
    case CopulaFamily::Independence:
      return {};
    case CopulaFamily::Gaussian:
      return {std::sin(0.5 * kPi * std::clamp(tau_hat, -0.99, 0.99))};
    case CopulaFamily::StudentT:
      return {std::sin(0.5 * kPi * std::clamp(tau_hat, -0.99, 0.99)), 8.0};
    case CopulaFamily::Clayton:
      return {tau_hat > 0.01 ? 2.0 * tau_hat / (1.0 - tau_hat) : 0.1};
    case CopulaFamily::Gumbel:
      return {tau_hat > 0.01 ? 1.0 / (1.0 - tau_hat) : 1.05};
    case CopulaFamily::Frank: {
      if (std::fabs(tau_hat) < 0.01) return {0.5};
      const double t = std::clamp(tau_hat, -0.88, 0.88);
      return {tau_to_param(CopulaFamily::Frank, t).params[0]};
    }
  }
  throw std::logic_error("copula_init: bad family tag");
}

}  // namespace

std::uint64_t pseudo_obs_key(std::span<const UnitPair> u,
                             std::span<const CopulaFamily> candidates,
                             const InferenceConfig& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& p : u) {
    const auto q1 = static_cast<std::uint64_t>(std::llround(p.u1 * 1e6));
    const auto q2 = static_cast<std::uint64_t>(std::llround(p.u2 * 1e6));
    h = fnv1a64(&q1, sizeof q1, h);
    h = fnv1a64(&q2, sizeof q2, h);
  }
  for (const auto f : candidates) {
    const int t = static_cast<int>(f);
    h = fnv1a64(&t, sizeof t, h);
  }
  h = fnv1a64(&cfg.evidence_samples, sizeof cfg.evidence_samples, h);
  h = fnv1a64(&cfg.chain_length, sizeof cfg.chain_length, h);
  h = fnv1a64(&cfg.burn_in, sizeof cfg.burn_in, h);
  h = fnv1a64(&cfg.thinning, sizeof cfg.thinning, h);
  return h;
}

std::shared_ptr<const CopulaModelSet> CopulaInferenceCache::find(
    std::uint64_t key) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = map_.find(key);
  return it == map_.end() ? nullptr : it->second;
}

void CopulaInferenceCache::store(std::uint64_t key,
                                 std::shared_ptr<const CopulaModelSet> value) {
  std::lock_guard<std::mutex> lock(mu_);
  map_.emplace(key, std::move(value));
}

std::size_t CopulaInferenceCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return map_.size();
}

CopulaModelSet infer_copula_models(std::span<const UnitPair> pseudo,
                                   std::span<const CopulaFamily> candidates,
                                   std::span<const PriorSpec> priors,
                                   const InferenceConfig& cfg,
                                   std::uint64_t seed) {
  if (pseudo.empty())
    throw std::invalid_argument("infer_copula_models: empty data");
  if (candidates.empty())
    throw std::invalid_argument("infer_copula_models: no candidates");
  if (!priors.empty() && priors.size() != candidates.size())
    throw std::invalid_argument("infer_copula_models: prior/candidate mismatch");

  const CopulaData data(pseudo);

  double tau_hat = 0.0;
  if (pseudo.size() >= 2) {
    std::vector<std::array<double, 2>> pairs(pseudo.size());
    for (std::size_t i = 0; i < pseudo.size(); ++i)
      pairs[i] = {pseudo[i].u1, pseudo[i].u2};
    tau_hat = empirical_kendall_tau(pairs);
  }

  CopulaModelSet out;
  out.candidates.assign(candidates.begin(), candidates.end());

  std::vector<LogLikelihood> logliks;
  std::vector<PriorSpec> prior_list;
  std::vector<std::vector<double>> inits;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const CopulaFamily fam = candidates[j];
    prior_list.push_back(priors.empty() ? default_copula_prior(fam) : priors[j]);
    logliks.emplace_back([fam, &data](std::span<const double> th) {
      return copula_log_likelihood(fam, th, data);
    });
    inits.push_back(copula_init(fam, tau_hat));
  }

  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (prior_list[j].dim() == 0) {
      out.models.log_evidence.push_back(0.0);  // parameter-free: evidence = L
      continue;
    }
    const auto ev = log_evidence(logliks[j], prior_list[j], cfg.evidence_samples,
                                 derive_seed(seed, "evidence", j));
    out.models.log_evidence.push_back(ev.log_evidence);
  }

  finish_model_set(out.models, cfg.plausibility_threshold, logliks, prior_list,
                   inits, cfg, seed);
  return out;
}

std::vector<CopulaDraw> draw_copulas(const CopulaModelSet& post, std::size_t n_tc,
                                     std::uint64_t seed) {
  if (n_tc < 1) throw std::invalid_argument("draw_copulas: N_tc must be >= 1");
  Rng rng(seed);
  std::vector<CopulaDraw> out;
  out.reserve(n_tc);
  for (std::size_t i = 0; i < n_tc; ++i) {
    const std::size_t j = categorical(post.models.draw_probability, rng.uniform());
    const auto& chain = post.models.chains[j].samples;
    std::size_t idx =
        static_cast<std::size_t>(rng.uniform() * static_cast<double>(chain.size()));
    if (idx >= chain.size()) idx = chain.size() - 1;
    const auto& th = chain[idx];
    CopulaSpec spec;
    spec.family = post.candidates[j];
    for (std::size_t q = 0; q < th.size() && q < 2; ++q) spec.params[q] = th[q];
    validate(spec);
    out.push_back({spec, {j, idx}});
  }
  return out;
}

ConditionalCopulaSet infer_copula_conditional(
    const PairDraw& pair, std::span<const std::array<double, 2>> data,
    std::span<const CopulaFamily> candidates, std::span<const PriorSpec> priors,
    const InferenceConfig& cfg, std::size_t n_tc, std::uint64_t infer_seed,
    std::uint64_t draw_seed, CopulaInferenceCache* cache) {
  const auto pseudo = pseudo_observations(pair.m1, pair.m2, data);
  const std::uint64_t key = pseudo_obs_key(pseudo, candidates, cfg);

  std::shared_ptr<const CopulaModelSet> models;
  if (cache) models = cache->find(key);
  if (!models) {
    auto fresh = std::make_shared<CopulaModelSet>(
        infer_copula_models(pseudo, candidates, priors, cfg,
                            derive_seed(infer_seed, "copula_models", key)));
    models = fresh;
    if (cache) cache->store(key, models);
  }

  ConditionalCopulaSet out;
  out.candidates = models->candidates;
  out.probability = models->models.probability;
  out.log_evidence = models->models.log_evidence;
  out.draws = draw_copulas(*models, n_tc, draw_seed);
  return out;
}

// ---------------------------------------------------------------------------
// joint densities and the assembled ensemble
// ---------------------------------------------------------------------------

double joint_log_pdf(const MarginalSpec& m1, const MarginalSpec& m2,
                     const CopulaSpec& copula, double x1, double x2) {
  const double lf1 = marginal_log_pdf(m1, x1);
  if (!std::isfinite(lf1)) return kNegInf;
  const double lf2 = marginal_log_pdf(m2, x2);
  if (!std::isfinite(lf2)) return kNegInf;
  const UnitPair u{clamp_unit(marginal_cdf(m1, x1)),
                   clamp_unit(marginal_cdf(m2, x2))};
  return copula_log_pdf(copula, u) + lf1 + lf2;
}

double JointEnsemble::entry_log_pdf(std::size_t l, std::size_t k, double x1,
                                    double x2) const {
  const auto& e = entries.at(l);
  return joint_log_pdf(e.pair.m1, e.pair.m2, e.copulas.at(k).spec, x1, x2);
}

JointEnsemble assemble_ensemble(const MarginalEnsemble& pairs,
                                std::vector<ConditionalCopulaSet> copulas) {
  if (pairs.pairs.size() != copulas.size())
    throw std::invalid_argument("assemble_ensemble: pair/copula count mismatch");
  if (pairs.pairs.empty())
    throw std::invalid_argument("assemble_ensemble: empty ensemble");
  const std::size_t n_tc = copulas.front().draws.size();
  JointEnsemble e;
  e.n_tc = n_tc;
  e.entries.reserve(pairs.pairs.size());
  for (std::size_t l = 0; l < pairs.pairs.size(); ++l) {
    if (copulas[l].draws.size() != n_tc)
      throw std::invalid_argument("assemble_ensemble: inconsistent N_tc");
    EnsembleEntry entry;
    entry.pair = pairs.pairs[l];
    entry.copula_candidates = std::move(copulas[l].candidates);
    entry.copula_probability = std::move(copulas[l].probability);
    entry.copulas = std::move(copulas[l].draws);
    e.entries.push_back(std::move(entry));
  }
  return e;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json marginal_to_json(const MarginalSpec& m) {
  return {{"family", marginal_family_name(m.family)},
          {"params", {m.params[0], m.params[1]}}};
}

MarginalSpec marginal_from_json(const json& j) {
  return make_marginal(marginal_family_from_name(j.at("family")),
                       j.at("params").at(0), j.at("params").at(1));
}

json copula_to_json(const CopulaSpec& c) {
  json params = json::array();
  for (int q = 0; q < copula_param_count(c.family); ++q)
    params.push_back(c.params[q]);
  return {{"family", copula_family_name(c.family)}, {"params", params}};
}

CopulaSpec copula_from_json(const json& j) {
  CopulaSpec c;
  c.family = copula_family_from_name(j.at("family"));
  const auto& params = j.at("params");
  for (std::size_t q = 0; q < params.size() && q < 2; ++q)
    c.params[q] = params.at(q);
  validate(c);
  return c;
}

json prov_to_json(const Provenance& p) {
  return {{"model", p.model}, {"state", p.state}};
}

Provenance prov_from_json(const json& j) {
  return {j.at("model").get<std::size_t>(), j.at("state").get<std::size_t>()};
}

}  // namespace

std::string ensemble_to_json(const JointEnsemble& e) {
  json root;
  root["n_td"] = e.entries.size();
  root["n_tc"] = e.n_tc;
  json entries = json::array();
  for (const auto& entry : e.entries) {
    json je;
    je["m1"] = marginal_to_json(entry.pair.m1);
    je["m2"] = marginal_to_json(entry.pair.m2);
    je["prov1"] = prov_to_json(entry.pair.prov1);
    je["prov2"] = prov_to_json(entry.pair.prov2);
    json cands = json::array();
    for (auto f : entry.copula_candidates) cands.push_back(copula_family_name(f));
    je["copula_candidates"] = cands;
    je["copula_probability"] = entry.copula_probability;
    json cds = json::array();
    for (const auto& cd : entry.copulas) {
      json jc = copula_to_json(cd.spec);
      jc["prov"] = prov_to_json(cd.prov);
      cds.push_back(jc);
    }
    je["copulas"] = cds;
    entries.push_back(std::move(je));
  }
  root["entries"] = std::move(entries);
  return root.dump(2);
}

JointEnsemble ensemble_from_json(const std::string& text) {
  const json root = json::parse(text);
  JointEnsemble e;
  e.n_tc = root.at("n_tc").get<std::size_t>();
  for (const auto& je : root.at("entries")) {
    EnsembleEntry entry;
    entry.pair.m1 = marginal_from_json(je.at("m1"));
    entry.pair.m2 = marginal_from_json(je.at("m2"));
    entry.pair.prov1 = prov_from_json(je.at("prov1"));
    entry.pair.prov2 = prov_from_json(je.at("prov2"));
    for (const auto& c : je.at("copula_candidates"))
      entry.copula_candidates.push_back(copula_family_from_name(c));
    entry.copula_probability =
        je.at("copula_probability").get<std::vector<double>>();
    for (const auto& jc : je.at("copulas"))
      entry.copulas.push_back({copula_from_json(jc), prov_from_json(jc.at("prov"))});
    e.entries.push_back(std::move(entry));
  }
  if (root.at("n_td").get<std::size_t>() != e.entries.size())
    throw std::invalid_argument("ensemble_from_json: n_td mismatch");
  return e;
}

}  // namespace cuq
