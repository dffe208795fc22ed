#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cuq/math_util.hpp"

namespace cuq {

struct Interval {
  double lower = 0.0;
  double upper = 1.0;
};

/// Independent bounded-uniform prior, one interval per parameter. A dimension
/// may carry an excluded open sub-interval (used to cut a removable
/// singularity out of a parameter range); the prior is uniform on what
/// remains.
struct PriorSpec {
  std::vector<Interval> bounds;
  std::vector<Interval> excluded;  // empty, or aligned with bounds; an entry
                                   // with lower >= upper means "no gap"

  std::size_t dim() const { return bounds.size(); }
  bool contains(std::span<const double> theta) const;
  void validate() const;
};

using LogLikelihood = std::function<double(std::span<const double>)>;

struct EvidenceResult {
  double log_evidence = kNegInf;
  std::size_t finite_draws = 0;
  std::size_t total_draws = 0;
};

/// Monte Carlo evidence over the prior: log of the mean likelihood across
/// n_prior_samples uniform prior draws, accumulated with a max shift.
/// All-draws-invalid yields log_evidence = -inf with finite_draws = 0.
EvidenceResult log_evidence(const LogLikelihood& loglik, const PriorSpec& prior,
                            std::size_t n_prior_samples, std::uint64_t seed);

/// pi_j proportional to exp(log_evidence_j) * prior_j. Throws when every
/// evidence is -inf.
std::vector<double> posterior_model_probabilities(
    std::span<const double> log_evidences, std::span<const double> prior_probs);

struct McmcConfig {
  std::size_t chain_length = 4000;  // total iterations including burn-in
  std::size_t burn_in = 1500;
  std::size_t thinning = 5;
  std::vector<double> proposal_scale;  // per parameter; empty = range/10
  double target_acceptance = 0.35;
  std::uint64_t seed = 0;
  std::vector<double> init;  // empty = prior box centre
};

struct McmcResult {
  std::vector<std::vector<double>> samples;  // post burn-in, thinned
  std::vector<double> log_posterior;         // aligned with samples
  double acceptance_rate = 0.0;              // post burn-in
  std::vector<double> final_scale;
};

/// Random-walk Metropolis-Hastings on likelihood * uniform prior. Proposal
/// scales adapt toward target_acceptance during burn-in only and are frozen
/// afterwards. Throws std::runtime_error if nothing is accepted after
/// burn-in.
McmcResult mcmc_posterior(const LogLikelihood& loglik, const PriorSpec& prior,
                          const McmcConfig& cfg);

/// Index of the chain state with maximal log posterior; first occurrence on
/// ties.
std::size_t map_index(const McmcResult& r);
std::vector<double> map_estimate(const McmcResult& r);

}  // namespace cuq
