#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "cuq/rng.hpp"

namespace cuq {

enum class CopulaFamily { Independence, Gaussian, StudentT, Clayton, Frank, Gumbel };

/// Bivariate copula: family tag plus parameter vector.
///
/// Parameter layout and admissible ranges:
///   Independence : none
///   Gaussian     : rho in (-1,1)
///   StudentT     : rho in (-1,1), nu > 2
///   Clayton      : theta > 0
///   Frank        : theta != 0
///   Gumbel       : theta >= 1
struct CopulaSpec {
  CopulaFamily family = CopulaFamily::Independence;
  std::array<double, 2> params{0.0, 0.0};
};

struct UnitPair {
  double u1 = 0.0;
  double u2 = 0.0;
};

int copula_param_count(CopulaFamily f);
std::string copula_family_name(CopulaFamily f);
CopulaFamily copula_family_from_name(const std::string& name);

CopulaSpec make_copula(CopulaFamily f, double p0 = 0.0, double p1 = 0.0);

/// Throws std::domain_error if parameters fall outside the family's range.
void validate(const CopulaSpec& spec);

/// C(u1,u2). Accepts the closed unit square; boundary values are exact.
double copula_cdf(const CopulaSpec& spec, UnitPair u);

/// log c(u1,u2). Requires u strictly inside the unit square (throws
/// std::domain_error on the boundary); near-boundary inputs are clamped to
/// [kUnitEps, 1-kUnitEps] before evaluation.
double copula_log_pdf(const CopulaSpec& spec, UnitPair u);
double copula_pdf(const CopulaSpec& spec, UnitPair u);

/// Conditional cdf h(u|v) = dC(u,v)/dv. u in [0,1], v in (0,1).
double h_function(const CopulaSpec& spec, double u, double v);

/// u such that h_function(spec, u, v) = p. Closed form everywhere except
/// Gumbel, which uses safeguarded Newton (|h - p| < 1e-10, 200 iterations);
/// non-convergence throws std::runtime_error with iteration diagnostics.
double h_inverse(const CopulaSpec& spec, double p, double v);

/// n pairs, deterministic given the seed. Elliptical families sample by
/// correlated variates plus marginal-cdf transform, Archimedean families by
/// the conditional method (v, p uniform; u = h_inverse(p, v)).
std::vector<UnitPair> copula_sample(const CopulaSpec& spec, std::size_t n,
                                    std::uint64_t seed);
void copula_sample(const CopulaSpec& spec, std::size_t n, Rng& rng,
                   std::vector<UnitPair>& out);

/// Closed-form Kendall tau of the family at the given parameters.
double kendall_tau(const CopulaSpec& spec);

/// Inverse of kendall_tau in the family's first parameter. StudentT returns
/// nu = 5 (tau does not identify nu). Throws std::domain_error when tau is
/// not attainable (Clayton/Gumbel need tau > 0 resp. tau >= 0).
CopulaSpec tau_to_param(CopulaFamily f, double tau);

/// Upper/lower tail dependence 2*t_{nu+1}(-sqrt(nu+1)*sqrt((1-rho)/(1+rho))).
double student_t_tail_dependence(double rho, double nu);

// Student-t marginal pieces used by the t copula, exposed for reuse.
double student_t_cdf(double x, double nu);
double student_t_quantile(double p, double nu);
double student_t_log_pdf(double x, double nu);

/// Kendall rank correlation of a sample, (concordant - discordant) / C(n,2),
/// computed in O(n log n). Ties count as neither.
double empirical_kendall_tau(std::span<const std::array<double, 2>> data);

/// Pearson correlation; throws on zero sample variance.
double empirical_pearson_rho(std::span<const std::array<double, 2>> data);

}  // namespace cuq
