#include "cuq/marginal.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/weibull.hpp>

namespace cuq {

std::string marginal_family_name(MarginalFamily f) {
  switch (f) {
    case MarginalFamily::Gaussian: return "gaussian";
    case MarginalFamily::Gamma: return "gamma";
    case MarginalFamily::Lognormal: return "lognormal";
    case MarginalFamily::Weibull: return "weibull";
  }
  throw std::logic_error("marginal_family_name: bad family tag");
}

MarginalFamily marginal_family_from_name(const std::string& name) {
  if (name == "gaussian") return MarginalFamily::Gaussian;
  if (name == "gamma") return MarginalFamily::Gamma;
  if (name == "lognormal") return MarginalFamily::Lognormal;
  if (name == "weibull") return MarginalFamily::Weibull;
  throw std::invalid_argument("unknown marginal family: " + name);
}

bool positive_support(MarginalFamily f) {
  return f != MarginalFamily::Gaussian;
}

MarginalSpec make_marginal(MarginalFamily f, double p0, double p1) {
  MarginalSpec s;
  s.family = f;
  s.params = {p0, p1};
  validate(s);
  return s;
}

void validate(const MarginalSpec& spec) {
  const double p0 = spec.params[0], p1 = spec.params[1];
  if (!std::isfinite(p0) || !std::isfinite(p1))
    throw std::domain_error("marginal: parameters must be finite");
  switch (spec.family) {
    case MarginalFamily::Gaussian:
      if (!(p1 > 0.0)) throw std::domain_error("gaussian: std must be positive");
      return;
    case MarginalFamily::Gamma:
      if (!(p0 > 0.0 && p1 > 0.0))
        throw std::domain_error("gamma: shape and scale must be positive");
      return;
    case MarginalFamily::Lognormal:
      if (!(p1 > 0.0))
        throw std::domain_error("lognormal: log-std must be positive");
      return;
    case MarginalFamily::Weibull:
      if (!(p0 > 0.0 && p1 > 0.0))
        throw std::domain_error("weibull: shape and scale must be positive");
      return;
  }
  throw std::logic_error("validate: bad marginal family tag");
}

double marginal_log_pdf(const MarginalSpec& spec, double x) {
  const double p0 = spec.params[0], p1 = spec.params[1];
  switch (spec.family) {
    case MarginalFamily::Gaussian: {
      const double z = (x - p0) / p1;
      return -0.5 * z * z - std::log(p1) - 0.5 * std::log(2.0 * kPi);
    }
    case MarginalFamily::Gamma: {
      if (!(x > 0.0)) return kNegInf;
      return (p0 - 1.0) * std::log(x) - x / p1 - p0 * std::log(p1) -
             std::lgamma(p0);
    }
    case MarginalFamily::Lognormal: {
      if (!(x > 0.0)) return kNegInf;
      const double z = (std::log(x) - p0) / p1;
      return -std::log(x) - std::log(p1) - 0.5 * std::log(2.0 * kPi) -
             0.5 * z * z;
    }
    case MarginalFamily::Weibull: {
      if (!(x > 0.0)) return kNegInf;
      const double r = x / p1;
      return std::log(p0 / p1) + (p0 - 1.0) * std::log(r) - std::pow(r, p0);
    }
  }
  throw std::logic_error("marginal_log_pdf: bad family tag");
}

double marginal_pdf(const MarginalSpec& spec, double x) {
  const double lp = marginal_log_pdf(spec, x);
  return std::isfinite(lp) ? std::exp(lp) : 0.0;
}

double marginal_cdf(const MarginalSpec& spec, double x) {
  validate(spec);
  const double p0 = spec.params[0], p1 = spec.params[1];
  switch (spec.family) {
    case MarginalFamily::Gaussian:
      return normal_cdf((x - p0) / p1);
    case MarginalFamily::Gamma:
      if (!(x > 0.0)) return 0.0;
      return boost::math::cdf(boost::math::gamma_distribution<double>(p0, p1), x);
    case MarginalFamily::Lognormal:
      if (!(x > 0.0)) return 0.0;
      return normal_cdf((std::log(x) - p0) / p1);
    case MarginalFamily::Weibull:
      if (!(x > 0.0)) return 0.0;
      return -std::expm1(-std::pow(x / p1, p0));
  }
  throw std::logic_error("marginal_cdf: bad family tag");
}

double marginal_quantile(const MarginalSpec& spec, double p) {
  validate(spec);
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("marginal_quantile: p must lie in (0,1)");
  const double p0 = spec.params[0], p1 = spec.params[1];
  switch (spec.family) {
    case MarginalFamily::Gaussian:
      return p0 + p1 * normal_quantile(p);
    case MarginalFamily::Gamma:
      return boost::math::quantile(
          boost::math::gamma_distribution<double>(p0, p1), p);
    case MarginalFamily::Lognormal:
      return std::exp(p0 + p1 * normal_quantile(p));
    case MarginalFamily::Weibull:
      return p1 * std::pow(-std::log1p(-p), 1.0 / p0);
  }
  throw std::logic_error("marginal_quantile: bad family tag");
}

double marginal_log_likelihood(const MarginalSpec& spec,
                               std::span<const double> data) {
  validate(spec);
  if (data.empty())
    throw std::invalid_argument("marginal_log_likelihood: empty data");
  double s = 0.0;
  for (double x : data) {
    const double lp = marginal_log_pdf(spec, x);
    if (!std::isfinite(lp)) return kNegInf;
    s += lp;
  }
  return s;
}

MarginalDataStats MarginalDataStats::from(std::span<const double> data) {
  MarginalDataStats st;
  st.n = data.size();
  st.values.assign(data.begin(), data.end());
  for (double x : data) {
    st.sum += x;
    st.sum_sq += x * x;
    if (x > 0.0) {
      const double l = std::log(x);
      st.sum_log += l;
      st.sum_log_sq += l * l;
    } else {
      st.all_positive = false;
    }
  }
  return st;
}

double marginal_log_likelihood_stats(MarginalFamily f, double p0, double p1,
                                     const MarginalDataStats& st) {
  const double n = static_cast<double>(st.n);
  switch (f) {
    case MarginalFamily::Gaussian: {
      const double var2 = 2.0 * p1 * p1;
      return -(st.sum_sq - 2.0 * p0 * st.sum + n * p0 * p0) / var2 -
             n * std::log(p1) - 0.5 * n * std::log(2.0 * kPi);
    }
    case MarginalFamily::Gamma: {
      if (!st.all_positive) return kNegInf;
      return (p0 - 1.0) * st.sum_log - st.sum / p1 -
             n * (p0 * std::log(p1) + std::lgamma(p0));
    }
    case MarginalFamily::Lognormal: {
      if (!st.all_positive) return kNegInf;
      const double var2 = 2.0 * p1 * p1;
      return -st.sum_log - n * std::log(p1) - 0.5 * n * std::log(2.0 * kPi) -
             (st.sum_log_sq - 2.0 * p0 * st.sum_log + n * p0 * p0) / var2;
    }
    case MarginalFamily::Weibull: {
      if (!st.all_positive) return kNegInf;
      double sum_pow = 0.0;
      const double inv_scale = 1.0 / p1;
      for (double x : st.values) sum_pow += std::pow(x * inv_scale, p0);
      return n * std::log(p0 * inv_scale) +
             (p0 - 1.0) * (st.sum_log - n * std::log(p1)) - sum_pow;
    }
  }
  throw std::logic_error("marginal_log_likelihood_stats: bad family tag");
}

std::vector<double> pseudo_observations(const MarginalSpec& spec,
                                        std::span<const double> data) {
  std::vector<double> u;
  u.reserve(data.size());
  for (double x : data) u.push_back(clamp_unit(marginal_cdf(spec, x)));
  return u;
}

std::vector<UnitPair> pseudo_observations(
    const MarginalSpec& s1, const MarginalSpec& s2,
    std::span<const std::array<double, 2>> data) {
  if (data.empty())
    throw std::invalid_argument("pseudo_observations: empty data");
  std::vector<UnitPair> u;
  u.reserve(data.size());
  for (const auto& p : data)
    u.push_back({clamp_unit(marginal_cdf(s1, p[0])),
                 clamp_unit(marginal_cdf(s2, p[1]))});
  return u;
}

namespace {

// Solves Gamma(1+2/k)/Gamma(1+1/k)^2 = 1 + cv^2 for the Weibull shape.
double weibull_shape_from_cv(double cv) {
  const double target = 1.0 + cv * cv;
  auto ratio = [](double k) {
    return std::exp(std::lgamma(1.0 + 2.0 / k) -
                    2.0 * std::lgamma(1.0 + 1.0 / k));
  };
  double lo = 0.05, hi = 100.0;  // ratio decreases in k
  if (target >= ratio(lo)) return lo;
  if (target <= ratio(hi)) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ratio(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

MomentInit moment_init(MarginalFamily f, std::span<const double> data) {
  if (data.size() < 2) throw std::invalid_argument("moment_init: need n >= 2");
  const double m = mean(data);
  const double v = sample_variance(data);
  double lo = data[0], hi = data[0];
  for (double x : data) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double spread = hi - lo;

  if (positive_support(f) && !(lo > 0.0))
    throw std::invalid_argument("moment_init: positive-support family on "
                                "nonpositive data");

  switch (f) {
    case MarginalFamily::Gaussian: {
      if (v > 0.0) return {make_marginal(f, m, std::sqrt(v)), false};
      const double s = std::max(std::fabs(m), 1.0) * 1e-3;
      return {make_marginal(f, m, s), true};
    }
    case MarginalFamily::Gamma: {
      if (v > 0.0 && m > 0.0)
        return {make_marginal(f, m * m / v, v / m), false};
      const double scale = std::max(spread, std::fabs(m) * 1e-3 + 1e-12);
      return {make_marginal(f, std::max(m / scale, 1e-3), scale), true};
    }
    case MarginalFamily::Lognormal: {
      std::vector<double> lx(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) lx[i] = std::log(data[i]);
      const double ml = mean(lx);
      const double vl = sample_variance(lx);
      if (vl > 0.0) return {make_marginal(f, ml, std::sqrt(vl)), false};
      return {make_marginal(f, ml, 1e-3), true};
    }
    case MarginalFamily::Weibull: {
      if (v > 0.0 && m > 0.0) {
        const double k = weibull_shape_from_cv(std::sqrt(v) / m);
        const double scale = m / std::exp(std::lgamma(1.0 + 1.0 / k));
        return {make_marginal(f, k, scale), false};
      }
      return {make_marginal(f, 1.0, std::max(m, 1e-12)), true};
    }
  }
  throw std::logic_error("moment_init: bad family tag");
}

}  // namespace cuq
