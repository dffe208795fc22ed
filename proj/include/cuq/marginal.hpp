#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "cuq/copula.hpp"

namespace cuq {

enum class MarginalFamily { Gaussian, Gamma, Lognormal, Weibull };

/// Parametric univariate marginal. Parameter layout:
///   Gaussian  : mean, std (> 0)         support R
///   Gamma     : shape (> 0), scale (> 0) support (0, inf)
///   Lognormal : log-mean, log-std (> 0)  support (0, inf)
///   Weibull   : shape (> 0), scale (> 0) support (0, inf)
struct MarginalSpec {
  MarginalFamily family = MarginalFamily::Gaussian;
  std::array<double, 2> params{0.0, 1.0};
};

std::string marginal_family_name(MarginalFamily f);
MarginalFamily marginal_family_from_name(const std::string& name);
bool positive_support(MarginalFamily f);

MarginalSpec make_marginal(MarginalFamily f, double p0, double p1);
void validate(const MarginalSpec& spec);

/// Out-of-support x gives pdf 0 / log-pdf -inf / cdf 0; no error.
double marginal_pdf(const MarginalSpec& spec, double x);
double marginal_log_pdf(const MarginalSpec& spec, double x);
double marginal_cdf(const MarginalSpec& spec, double x);

/// p must lie in (0,1).
double marginal_quantile(const MarginalSpec& spec, double p);

/// Sum of log-pdfs; -inf if any datum falls outside the support.
double marginal_log_likelihood(const MarginalSpec& spec,
                               std::span<const double> data);

/// Sufficient statistics of a data column, shared across likelihood
/// evaluations so that most families cost O(1) per parameter point.
struct MarginalDataStats {
  std::size_t n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  double sum_log = 0.0;      // valid only when all_positive
  double sum_log_sq = 0.0;   // valid only when all_positive
  bool all_positive = true;
  std::vector<double> values;  // retained for the O(n) families

  static MarginalDataStats from(std::span<const double> data);
};

double marginal_log_likelihood_stats(MarginalFamily f, double p0, double p1,
                                     const MarginalDataStats& stats);

/// Componentwise cdf transform onto the unit square, clamped to
/// [kUnitEps, 1-kUnitEps].
std::vector<UnitPair> pseudo_observations(
    const MarginalSpec& s1, const MarginalSpec& s2,
    std::span<const std::array<double, 2>> data);
std::vector<double> pseudo_observations(const MarginalSpec& spec,
                                        std::span<const double> data);

struct MomentInit {
  MarginalSpec spec;
  bool fallback = false;  // set when moments were infeasible
};

/// Method-of-moments parameters for chain initialization; falls back to a
/// data-range heuristic (flagged) when the moments are degenerate.
MomentInit moment_init(MarginalFamily f, std::span<const double> data);

}  // namespace cuq
