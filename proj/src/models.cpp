#include "cuq/models.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace cuq {

double transverse_modulus_surrogate(const ConstituentInputs& in,
                                    bool plane_strain_correction) {
  if (!(in.v_f > 0.0 && in.v_f < 1.0))
    throw std::domain_error("surrogate: V_f must lie in (0,1)");
  if (!(in.e_m > 0.0) || !(in.e_1f > 0.0))
    throw std::domain_error("surrogate: moduli must be positive");
  if (!(in.nu_m > 0.0 && in.nu_m < 0.5) ||
      !(in.nu_12f > 0.0 && in.nu_12f < 0.5))
    throw std::domain_error("surrogate: Poisson ratios must lie in (0,0.5)");
  constexpr double xi = 2.0;
  double e_m = in.e_m, e_f = in.e_1f;
  if (plane_strain_correction) {
    // Constrained (laterally confined) moduli E(1-nu)/((1+nu)(1-2nu)); the
    // transverse direction loads the matrix under multiaxial constraint.
    auto constrained = [](double e, double nu) {
      return e * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu));
    };
    e_m = constrained(in.e_m, in.nu_m);
    e_f = constrained(in.e_1f, in.nu_12f);
  }
  const double ratio = e_f / e_m;
  const double eta = (ratio - 1.0) / (ratio + xi);
  if (eta * in.v_f >= 1.0)
    throw std::domain_error("surrogate: eta*V_f >= 1 (degenerate inputs)");
  return e_m * (1.0 + xi * eta * in.v_f) / (1.0 - eta * in.v_f);
}

double test_function_linear(std::span<const double> x, double a, double b) {
  if (x.size() < 2) throw std::invalid_argument("linear: need two inputs");
  return a * x[0] + b * x[1];
}

double test_function_quadratic(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("quadratic: need two inputs");
  return x[0] * x[0] + x[1] * x[1];
}

PerformanceFunction::PerformanceFunction(
    std::string name, std::size_t arity,
    std::function<double(std::span<const double>)> fn)
    : name_(std::move(name)),
      arity_(arity),
      fn_(std::move(fn)),
      counter_(std::make_shared<std::atomic<long long>>(0)) {}

double PerformanceFunction::operator()(std::span<const double> x) const {
  if (!fn_) throw std::logic_error("performance function not initialized");
  if (arity_ != 0 && x.size() != arity_)
    throw std::invalid_argument("performance function '" + name_ +
                                "' expects " + std::to_string(arity_) +
                                " inputs, got " + std::to_string(x.size()));
  counter_->fetch_add(1);
  return fn_(x);
}

namespace {

// Registry entries project onto the closed physical domain before calling the
// surrogate, so rare tail draws from wide candidate marginals cannot abort a
// batch run. The projection margin keeps eta*V_f < 1.
ConstituentInputs to_constituents(std::span<const double> x) {
  auto clamp = [](double v, double lo, double hi) {
    return v < lo ? lo : (v > hi ? hi : v);
  };
  return {clamp(x[0], 1e-6, 1.0 - 1e-6), std::max(x[1], 1e-9),
          clamp(x[2], 1e-6, 0.5 - 1e-3), std::max(x[3], 1e-9),
          clamp(x[4], 1e-6, 0.5 - 1e-3)};
}

double run_subprocess(const std::string& command, std::span<const double> x) {
  std::ostringstream row;
  row.setf(std::ios::scientific);
  row.precision(17);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) row << ",";
    row << x[i];
  }
  row << "\n";
  const std::string full = "printf '%s' '" + row.str() + "' | " + command;
  FILE* pipe = popen(full.c_str(), "r");
  if (!pipe) throw std::runtime_error("subprocess model: failed to spawn");
  char buf[256];
  std::string output;
  while (fgets(buf, sizeof buf, pipe)) output += buf;
  const int rc = pclose(pipe);
  if (rc != 0)
    throw std::runtime_error("subprocess model exited with status " +
                             std::to_string(rc));
  try {
    return std::stod(output);
  } catch (const std::exception&) {
    throw std::runtime_error("subprocess model: non-numeric output '" + output +
                             "'");
  }
}

}  // namespace

PerformanceFunction make_performance_function(const std::string& name,
                                              std::size_t arity_hint) {
  if (name == "halpin_tsai_e22")
    return {name, 5, [](std::span<const double> x) {
              return transverse_modulus_surrogate(to_constituents(x), false);
            }};
  if (name == "halpin_tsai_e22_nucorr")
    return {name, 5, [](std::span<const double> x) {
              return transverse_modulus_surrogate(to_constituents(x), true);
            }};
  if (name == "linear2")
    return {name, 2, [](std::span<const double> x) {
              return test_function_linear(x);
            }};
  if (name == "quadratic2")
    return {name, 2, [](std::span<const double> x) {
              return test_function_quadratic(x);
            }};
  if (name.rfind("subprocess:", 0) == 0) {
    const std::string cmd = name.substr(std::string("subprocess:").size());
    if (cmd.empty())
      throw std::invalid_argument("subprocess model: empty command");
    return {name, arity_hint, [cmd](std::span<const double> x) {
              return run_subprocess(cmd, x);
            }};
  }
  throw std::invalid_argument("unknown performance function: " + name);
}

}  // namespace cuq
