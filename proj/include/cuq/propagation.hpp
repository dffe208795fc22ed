#pragma once

#include "cuq/hierarchy.hpp"
#include "cuq/models.hpp"

namespace cuq {

struct UniEnsemble {
  std::vector<MarginalDraw> draws;  // N_td entries
};

/// One independent block of the input vector: either a dependent pair backed
/// by a bivariate joint ensemble, or a single variable backed by marginal
/// draws.
struct InputBlock {
  enum class Kind { Pair, Single };
  Kind kind = Kind::Pair;
  std::array<std::size_t, 2> vars{0, 0};  // input-vector column indices
  JointEnsemble pair;
  UniEnsemble single;
};

/// Full multimodel input ensemble. Candidate (l, k) ties entry l and copula
/// draw k across every block; blocks are mutually independent.
struct InputEnsemble {
  std::size_t dim = 0;
  std::size_t n_td = 0;
  std::size_t n_tc = 1;
  std::vector<InputBlock> blocks;

  std::uint64_t content_hash() const;
  /// Per variable: whether any candidate marginal has support on all of R.
  std::vector<bool> real_support() const;
};

std::string input_ensemble_to_json(const InputEnsemble& e);
InputEnsemble input_ensemble_from_json(const std::string& text);

struct CandidateIndex {
  std::size_t l = 0;
  std::size_t k = 0;
};

/// Mean of the copula densities across the draw list at a fixed point.
double expected_conditional_copula(std::span<const CopulaDraw> draws, UnitPair u);

/// Joint log density of candidate (l,k): product over blocks.
double candidate_log_pdf(const InputEnsemble& e, CandidateIndex c,
                         std::span<const double> x);

/// Mixture component l (copula-averaged joint density), log scale.
double component_log_pdf(const InputEnsemble& e, std::size_t l,
                         std::span<const double> x);

/// The equal-weight mixture of the N_td copula-averaged joint densities;
/// evaluates exactly and samples exactly (component draw + conditional-method
/// copula sampling + marginal quantile transform).
class OptimalDensity {
 public:
  explicit OptimalDensity(InputEnsemble ensemble);

  double log_pdf(std::span<const double> x) const;
  Matrix sample(std::size_t n, std::uint64_t seed) const;
  const InputEnsemble& ensemble() const { return ens_; }

 private:
  InputEnsemble ens_;
};

/// Samples from q*, their model outputs, and the stored q* log densities:
/// everything needed to reweight to any candidate without re-simulation.
struct WeightedRun {
  Matrix samples;
  std::vector<double> g;
  std::vector<double> log_q;
  std::uint64_t seed = 0;
  std::uint64_t ensemble_hash = 0;
  std::string g_name;
};

WeightedRun propagate(const OptimalDensity& q, const PerformanceFunction& g,
                      std::size_t n, std::uint64_t seed);

struct WeightVector {
  std::vector<double> w;
  double mean_w = 0.0;
  double ess = 0.0;  // (sum w)^2 / sum w^2
};

/// w_i = exp(log p(x_i) - log q*(x_i)) for an in-ensemble candidate.
WeightVector importance_weights(const WeightedRun& run, const InputEnsemble& e,
                                CandidateIndex c);
/// Same for an externally supplied density; throws if any sample gets an
/// infinite weight (support exceeding the mixture support).
WeightVector importance_weights_logp(
    const WeightedRun& run,
    const std::function<double(std::span<const double>)>& log_p);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  double ess = 0.0;
  bool degenerate = false;  // ess < 10
};

/// (1/n) sum g_i w_i with its sampling standard error.
Estimate reweighted_expectation(const WeightedRun& run, const WeightVector& wv);

struct CdfBand {
  std::vector<double> grid;
  std::vector<double> lo, hi;  // pointwise envelope over candidates
  double mean_width = 0.0;
  std::size_t n_candidates = 0;
  Matrix members;  // per-candidate cdf rows, only the first max_members
  std::vector<CandidateIndex> member_index;
};

/// Self-normalized weighted empirical cdfs of g for every candidate (l,k),
/// with the pointwise min/max envelope. Zero model evaluations.
CdfBand cdf_band(const WeightedRun& run, const InputEnsemble& e,
                 std::span<const double> grid, std::size_t max_members = 0);

/// Optional precomputed q* lookup table (rectilinear grid per block,
/// bilinear/linear interpolation in log density, exact fallback outside).
class QstarTable {
 public:
  QstarTable(const OptimalDensity& q, std::size_t points_per_axis,
             double coverage = 0.9995);
  double log_pdf(std::span<const double> x) const;
  /// Max relative density error against exact evaluation on held-out draws.
  double max_rel_error(std::size_t n_holdout, std::uint64_t seed) const;

 private:
  struct Axis {
    double lo = 0.0, hi = 1.0, step = 1.0;
    std::size_t n = 2;
  };
  struct BlockTable {
    Axis a1, a2;
    std::vector<double> values;  // log q restricted to the block
    bool is_pair = false;
  };
  const OptimalDensity* q_;
  std::vector<BlockTable> tables_;
};

}  // namespace cuq
