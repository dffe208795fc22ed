#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cuq {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

/// Clamp margin applied to unit-interval inputs before density/h evaluation.
inline constexpr double kUnitEps = 1e-12;

inline double clamp_unit(double u) {
  if (u < kUnitEps) return kUnitEps;
  if (u > 1.0 - kUnitEps) return 1.0 - kUnitEps;
  return u;
}

/// log(sum(exp(x))) with max shift; returns -inf for empty or all -inf input.
double log_sum_exp(std::span<const double> xs);

double mean(std::span<const double> xs);
double sample_variance(std::span<const double> xs);  // unbiased, n >= 2
double sample_std(std::span<const double> xs);

// Standard normal: cdf via erfc, quantile via Wichura's PPND16 rational
// approximation (double precision over p in (0,1)).
double normal_cdf(double x);
double normal_quantile(double p);
double normal_log_pdf(double x);

/// Debye function D1(x) = (1/x) * Integral_0^x t/(e^t - 1) dt, valid for x != 0
/// of either sign; the t -> 0 limit of the integrand is 1.
double debye1(double x);

// FNV-1a 64-bit, used for content hashes and seed derivation.
std::uint64_t fnv1a64(const void* data, std::size_t n,
                      std::uint64_t h = 14695981039346656037ull);
std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

/// Deterministic per-task seed from a master seed and a labelled stream id.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t a = 0, std::uint64_t b = 0);

/// Dense row-major matrix; just enough for data tables and sample blocks.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
  std::span<const double> row(std::size_t i) const {
    return {a.data() + i * cols, cols};
  }
  std::vector<double> column(std::size_t j) const {
    std::vector<double> c(rows);
    for (std::size_t i = 0; i < rows; ++i) c[i] = a[i * cols + j];
    return c;
  }
};

/// Two-sided Kolmogorov-Smirnov statistic of xs against the uniform cdf on
/// [0,1]. Asymptotic critical value at level alpha is k_alpha / sqrt(n).
double ks_statistic_uniform(std::span<const double> xs);

}  // namespace cuq
