#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <span>
#include <string>

#include "cuq/math_util.hpp"

namespace cuq {

/// Constituent properties of a unidirectional fiber composite, ordered as the
/// standard input vector (V_f, E_m, nu_m, E_1f, nu_12f).
struct ConstituentInputs {
  double v_f = 0.0;    // fiber volume fraction, in (0,1)
  double e_m = 0.0;    // matrix Young's modulus, GPa
  double nu_m = 0.0;   // matrix Poisson ratio, in (0,0.5)
  double e_1f = 0.0;   // fiber longitudinal modulus, GPa
  double nu_12f = 0.0; // fiber Poisson ratio, in (0,0.5)
};

/// Halpin-Tsai transverse modulus estimate with xi = 2:
///   eta = (E_f/E_m - 1) / (E_f/E_m + xi),  E_22 = E_m (1 + xi eta V_f) / (1 - eta V_f).
/// With plane_strain_correction the moduli enter as the constrained moduli
/// E(1-nu)/((1+nu)(1-2nu)), so the Poisson ratios matter; otherwise they are
/// inert.
double transverse_modulus_surrogate(const ConstituentInputs& in,
                                    bool plane_strain_correction = false);

double test_function_linear(std::span<const double> x, double a = 1.0,
                            double b = 1.0);
double test_function_quadratic(std::span<const double> x);

/// Named response function with a shared call counter, so a run can assert
/// how many model evaluations actually happened.
class PerformanceFunction {
 public:
  PerformanceFunction() = default;
  PerformanceFunction(std::string name, std::size_t arity,
                      std::function<double(std::span<const double>)> fn);

  double operator()(std::span<const double> x) const;
  const std::string& name() const { return name_; }
  std::size_t arity() const { return arity_; }
  long long calls() const { return counter_ ? counter_->load() : 0; }
  void reset_calls() const { if (counter_) counter_->store(0); }

 private:
  std::string name_;
  std::size_t arity_ = 0;
  std::function<double(std::span<const double>)> fn_;
  std::shared_ptr<std::atomic<long long>> counter_;
};

/// Registry lookup. Known names:
///   halpin_tsai_e22          5 inputs (V_f, E_m, nu_m, E_1f, nu_12f)
///   halpin_tsai_e22_nucorr   same, with the plane-strain correction
///   linear2                  x1 + x2
///   quadratic2               x1^2 + x2^2
///   subprocess:<command>     external model; one CSV row of inputs on stdin,
///                            one real on stdout, spawned per evaluation
PerformanceFunction make_performance_function(const std::string& name,
                                              std::size_t arity_hint = 0);

}  // namespace cuq
