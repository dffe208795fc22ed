#include "cuq/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cuq/rng.hpp"

namespace cuq {

void PriorSpec::validate() const {
  if (bounds.empty()) throw std::invalid_argument("prior: no parameters");
  for (const auto& b : bounds)
    if (!(b.lower < b.upper))
      throw std::invalid_argument("prior: each range needs lower < upper");
  if (!excluded.empty() && excluded.size() != bounds.size())
    throw std::invalid_argument("prior: excluded ranges must align with bounds");
}

bool PriorSpec::contains(std::span<const double> theta) const {
  if (theta.size() != bounds.size()) return false;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (!(theta[i] >= bounds[i].lower && theta[i] <= bounds[i].upper))
      return false;
    if (i < excluded.size() && excluded[i].lower < excluded[i].upper &&
        theta[i] > excluded[i].lower && theta[i] < excluded[i].upper)
      return false;
  }
  return true;
}

namespace {

void draw_from_prior(const PriorSpec& prior, Rng& rng,
                     std::vector<double>& theta) {
  theta.resize(prior.dim());
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (std::size_t i = 0; i < prior.dim(); ++i) {
      const auto& b = prior.bounds[i];
      theta[i] = b.lower + (b.upper - b.lower) * rng.uniform();
    }
    if (prior.contains(theta)) return;
  }
  throw std::runtime_error("prior draw: excluded region rejects everything");
}

}  // namespace

EvidenceResult log_evidence(const LogLikelihood& loglik, const PriorSpec& prior,
                            std::size_t n_prior_samples, std::uint64_t seed) {
  prior.validate();
  if (n_prior_samples < 100)
    throw std::invalid_argument("log_evidence: need at least 100 prior samples");
  Rng rng(seed);
  std::vector<double> theta;
  std::vector<double> lls;
  lls.reserve(n_prior_samples);
  EvidenceResult res;
  res.total_draws = n_prior_samples;
  for (std::size_t s = 0; s < n_prior_samples; ++s) {
    draw_from_prior(prior, rng, theta);
    const double ll = loglik(theta);
    if (std::isfinite(ll)) {
      lls.push_back(ll);
      ++res.finite_draws;
    }
  }
  if (res.finite_draws == 0) return res;  // log_evidence stays -inf
  res.log_evidence = log_sum_exp(lls) -
                     std::log(static_cast<double>(n_prior_samples));
  return res;
}

std::vector<double> posterior_model_probabilities(
    std::span<const double> log_evidences, std::span<const double> prior_probs) {
  if (log_evidences.size() != prior_probs.size() || log_evidences.empty())
    throw std::invalid_argument(
        "posterior_model_probabilities: size mismatch or empty input");
  double psum = 0.0;
  for (double p : prior_probs) {
    if (!(p >= 0.0))
      throw std::invalid_argument("posterior_model_probabilities: bad prior");
    psum += p;
  }
  if (std::fabs(psum - 1.0) > 1e-9)
    throw std::invalid_argument(
        "posterior_model_probabilities: priors must sum to 1");
  std::vector<double> logw(log_evidences.size(), kNegInf);
  for (std::size_t j = 0; j < logw.size(); ++j)
    if (prior_probs[j] > 0.0 && std::isfinite(log_evidences[j]))
      logw[j] = log_evidences[j] + std::log(prior_probs[j]);
  const double norm = log_sum_exp(logw);
  if (!std::isfinite(norm))
    throw std::runtime_error(
        "posterior_model_probabilities: no viable model (all evidences -inf)");
  std::vector<double> probs(logw.size());
  for (std::size_t j = 0; j < logw.size(); ++j)
    probs[j] = std::isfinite(logw[j]) ? std::exp(logw[j] - norm) : 0.0;
  return probs;
}

McmcResult mcmc_posterior(const LogLikelihood& loglik, const PriorSpec& prior,
                          const McmcConfig& cfg) {
  prior.validate();
  const std::size_t dim = prior.dim();
  if (!(cfg.burn_in < cfg.chain_length))
    throw std::invalid_argument("mcmc: burn_in must be below chain_length");
  if (cfg.thinning < 1) throw std::invalid_argument("mcmc: thinning >= 1");
  if (!(cfg.target_acceptance > 0.0 && cfg.target_acceptance < 1.0))
    throw std::invalid_argument("mcmc: target acceptance must lie in (0,1)");

  std::vector<double> scale(dim);
  if (cfg.proposal_scale.empty()) {
    for (std::size_t i = 0; i < dim; ++i)
      scale[i] = (prior.bounds[i].upper - prior.bounds[i].lower) / 10.0;
  } else if (cfg.proposal_scale.size() == dim) {
    scale = cfg.proposal_scale;
    for (double s : scale)
      if (!(s > 0.0)) throw std::invalid_argument("mcmc: scales must be > 0");
  } else {
    throw std::invalid_argument("mcmc: proposal_scale dimension mismatch");
  }

  std::vector<double> x(dim);
  if (cfg.init.empty()) {
    for (std::size_t i = 0; i < dim; ++i)
      x[i] = 0.5 * (prior.bounds[i].lower + prior.bounds[i].upper);
  } else if (cfg.init.size() == dim) {
    x = cfg.init;
  } else {
    throw std::invalid_argument("mcmc: init dimension mismatch");
  }
  if (!prior.contains(x))
    throw std::invalid_argument("mcmc: initial state outside the prior support");

  Rng rng(cfg.seed);
  double lp = loglik(x);

  // Global log multiplier on the per-parameter scales, Robbins-Monro toward
  // the target acceptance; only moves during burn-in.
  double log_gain = 0.0;

  McmcResult res;
  const std::size_t kept = (cfg.chain_length - cfg.burn_in) / cfg.thinning + 1;
  res.samples.reserve(kept);
  res.log_posterior.reserve(kept);

  std::vector<double> prop(dim);
  std::size_t accepted_post = 0, steps_post = 0;
  for (std::size_t t = 0; t < cfg.chain_length; ++t) {
    const double gain = std::exp(log_gain);
    for (std::size_t i = 0; i < dim; ++i)
      prop[i] = x[i] + scale[i] * gain * rng.normal();
    bool accept = false;
    if (prior.contains(prop)) {
      const double lp_prop = loglik(prop);
      if (std::isfinite(lp_prop)) {
        const double log_ratio = lp_prop - lp;
        if (log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio) {
          x = prop;
          lp = lp_prop;
          accept = true;
        }
      } else {
        rng.uniform();  // keep the draw count aligned across paths
      }
    } else {
      rng.uniform();
    }
    if (t < cfg.burn_in) {
      const double gamma = std::pow(static_cast<double>(t + 1), -0.6);
      log_gain += gamma * ((accept ? 1.0 : 0.0) - cfg.target_acceptance);
      log_gain = std::clamp(log_gain, -10.0, 10.0);
    } else {
      ++steps_post;
      if (accept) ++accepted_post;
      if ((t - cfg.burn_in) % cfg.thinning == 0) {
        res.samples.push_back(x);
        res.log_posterior.push_back(lp);
      }
    }
  }
  if (accepted_post == 0)
    throw std::runtime_error("mcmc: zero accepted proposals after burn-in");
  res.acceptance_rate =
      static_cast<double>(accepted_post) / static_cast<double>(steps_post);
  const double gain = std::exp(log_gain);
  res.final_scale.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) res.final_scale[i] = scale[i] * gain;
  return res;
}

std::size_t map_index(const McmcResult& r) {
  if (r.samples.empty()) throw std::invalid_argument("map_index: empty chain");
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.log_posterior.size(); ++i)
    if (r.log_posterior[i] > r.log_posterior[best]) best = i;
  return best;
}

std::vector<double> map_estimate(const McmcResult& r) {
  return r.samples[map_index(r)];
}

}  // namespace cuq
