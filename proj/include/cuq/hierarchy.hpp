#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>

#include "cuq/bayes.hpp"
#include "cuq/marginal.hpp"

namespace cuq {

/// Multimodel posterior over a candidate list: evidences, posterior model
/// probabilities, plausibility retention, and per-model MCMC chains.
struct ModelSet {
  std::vector<double> log_evidence;
  std::vector<double> probability;       // posterior probs, sum to 1
  std::vector<bool> retained;            // probability >= threshold
  std::vector<double> draw_probability;  // renormalized over retained
  std::vector<McmcResult> chains;        // empty for dropped models
  std::vector<std::vector<double>> map;  // MAP estimate per retained model
};

struct MarginalModelSet {
  std::vector<MarginalFamily> candidates;
  ModelSet models;
};

struct CopulaModelSet {
  std::vector<CopulaFamily> candidates;
  ModelSet models;
};

struct InferenceConfig {
  std::size_t evidence_samples = 10000;
  std::size_t chain_length = 6000;
  std::size_t burn_in = 2000;
  std::size_t thinning = 8;
  double target_acceptance = 0.35;
  double plausibility_threshold = 0.001;
};

/// Default bounded-uniform priors. Marginal ranges are data-driven (moment
/// estimates widened by fixed factors); copula ranges are fixed per family,
/// with the Frank range [-30,30] carrying a (-1e-3,1e-3) gap.
PriorSpec default_marginal_prior(MarginalFamily f, std::span<const double> data);
PriorSpec default_copula_prior(CopulaFamily f);

/// Marginal multimodel inference for one data column.
MarginalModelSet infer_marginals(std::span<const double> data,
                                 std::span<const MarginalFamily> candidates,
                                 std::span<const PriorSpec> priors,
                                 const InferenceConfig& cfg, std::uint64_t seed);

struct Provenance {
  std::size_t model = 0;
  std::size_t state = 0;  // index into the stored chain
};

struct MarginalDraw {
  MarginalSpec spec;
  Provenance prov;
};

struct PairDraw {
  MarginalSpec m1, m2;
  Provenance prov1, prov2;
};

struct MarginalEnsemble {
  std::vector<PairDraw> pairs;  // N_td entries
};

/// Model index follows the retained posterior probabilities, parameters are
/// resampled uniformly from the stored chain. When lhs is set, the uniforms
/// steering the chain-state choice are Latin-hypercube stratified.
std::vector<MarginalDraw> draw_marginal_models(const MarginalModelSet& post,
                                               std::size_t n, std::uint64_t seed,
                                               bool lhs = false);
MarginalEnsemble draw_marginal_pairs(const MarginalModelSet& post1,
                                     const MarginalModelSet& post2,
                                     std::size_t n_td, std::uint64_t seed,
                                     bool lhs = false);

struct CopulaDraw {
  CopulaSpec spec;
  Provenance prov;
};

/// Copula multimodel result conditioned on one concrete marginal pair.
struct ConditionalCopulaSet {
  std::vector<CopulaFamily> candidates;
  std::vector<double> probability;       // aligned with candidates
  std::vector<double> log_evidence;
  std::vector<CopulaDraw> draws;         // N_tc draws
};

/// Memoizes copula inference on the quantized pseudo-observation matrix;
/// safe for concurrent use.
class CopulaInferenceCache {
 public:
  std::shared_ptr<const CopulaModelSet> find(std::uint64_t key) const;
  void store(std::uint64_t key, std::shared_ptr<const CopulaModelSet> value);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::uint64_t, std::shared_ptr<const CopulaModelSet>> map_;
};

/// Key of the quantized (1e-6 grid) pseudo-observations plus the inference
/// settings that shape the result.
std::uint64_t pseudo_obs_key(std::span<const UnitPair> u,
                             std::span<const CopulaFamily> candidates,
                             const InferenceConfig& cfg);

/// Standardizes the data through the pair's marginal cdfs and runs copula
/// multimodel inference on the pseudo-observations.
CopulaModelSet infer_copula_models(std::span<const UnitPair> pseudo,
                                   std::span<const CopulaFamily> candidates,
                                   std::span<const PriorSpec> priors,
                                   const InferenceConfig& cfg,
                                   std::uint64_t seed);

/// infer_seed is mixed with the pseudo-observation key, so identical
/// pseudo-observations reproduce identical inference with or without the
/// cache; draw_seed steers the per-pair copula draws.
ConditionalCopulaSet infer_copula_conditional(
    const PairDraw& pair, std::span<const std::array<double, 2>> data,
    std::span<const CopulaFamily> candidates, std::span<const PriorSpec> priors,
    const InferenceConfig& cfg, std::size_t n_tc, std::uint64_t infer_seed,
    std::uint64_t draw_seed, CopulaInferenceCache* cache = nullptr);

/// Draws N_tc copula specs from an inferred model set.
std::vector<CopulaDraw> draw_copulas(const CopulaModelSet& post, std::size_t n_tc,
                                     std::uint64_t seed);

/// log c(F1(x1), F2(x2)) + log f1(x1) + log f2(x2); -inf outside support.
double joint_log_pdf(const MarginalSpec& m1, const MarginalSpec& m2,
                     const CopulaSpec& copula, double x1, double x2);

struct EnsembleEntry {
  PairDraw pair;
  std::vector<CopulaFamily> copula_candidates;
  std::vector<double> copula_probability;
  std::vector<CopulaDraw> copulas;  // N_tc
};

/// The multimodel set of bivariate joint densities: N_td marginal pairs, each
/// with N_tc conditional copula draws.
struct JointEnsemble {
  std::vector<EnsembleEntry> entries;
  std::size_t n_tc = 0;

  double entry_log_pdf(std::size_t l, std::size_t k, double x1, double x2) const;
};

JointEnsemble assemble_ensemble(const MarginalEnsemble& pairs,
                                std::vector<ConditionalCopulaSet> copulas);

// JSON (de)serialization of the ensemble block; round trips bit-exactly.
std::string ensemble_to_json(const JointEnsemble& e);
JointEnsemble ensemble_from_json(const std::string& text);

}  // namespace cuq
