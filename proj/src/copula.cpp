#include "cuq/copula.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace cuq {

int copula_param_count(CopulaFamily f) {
  switch (f) {
    case CopulaFamily::Independence: return 0;
    case CopulaFamily::Gaussian: return 1;
    case CopulaFamily::StudentT: return 2;
    case CopulaFamily::Clayton:
    case CopulaFamily::Frank:
    case CopulaFamily::Gumbel: return 1;
  }
  throw std::logic_error("copula_param_count: bad family tag");
}

std::string copula_family_name(CopulaFamily f) {
  switch (f) {
    case CopulaFamily::Independence: return "independence";
    case CopulaFamily::Gaussian: return "gaussian";
    case CopulaFamily::StudentT: return "student_t";
    case CopulaFamily::Clayton: return "clayton";
    case CopulaFamily::Frank: return "frank";
    case CopulaFamily::Gumbel: return "gumbel";
  }
  throw std::logic_error("copula_family_name: bad family tag");
}

CopulaFamily copula_family_from_name(const std::string& name) {
  if (name == "independence") return CopulaFamily::Independence;
  if (name == "gaussian") return CopulaFamily::Gaussian;
  if (name == "student_t") return CopulaFamily::StudentT;
  if (name == "clayton") return CopulaFamily::Clayton;
  if (name == "frank") return CopulaFamily::Frank;
  if (name == "gumbel") return CopulaFamily::Gumbel;
  throw std::invalid_argument("unknown copula family: " + name);
}

CopulaSpec make_copula(CopulaFamily f, double p0, double p1) {
  CopulaSpec s;
  s.family = f;
  s.params = {p0, p1};
  validate(s);
  return s;
}

void validate(const CopulaSpec& spec) {
  const double p0 = spec.params[0];
  const double p1 = spec.params[1];
  switch (spec.family) {
    case CopulaFamily::Independence:
      return;
    case CopulaFamily::Gaussian:
      if (!(p0 > -1.0 && p0 < 1.0))
        throw std::domain_error("gaussian copula: rho must lie in (-1,1)");
      return;
    case CopulaFamily::StudentT:
      if (!(p0 > -1.0 && p0 < 1.0))
        throw std::domain_error("student_t copula: rho must lie in (-1,1)");
      if (!(p1 > 2.0))
        throw std::domain_error("student_t copula: nu must exceed 2");
      return;
    case CopulaFamily::Clayton:
      if (!(p0 > 0.0))
        throw std::domain_error("clayton copula: theta must be positive");
      return;
    case CopulaFamily::Frank:
      if (!(p0 != 0.0) || !std::isfinite(p0))
        throw std::domain_error("frank copula: theta must be finite and nonzero");
      return;
    case CopulaFamily::Gumbel:
      if (!(p0 >= 1.0))
        throw std::domain_error("gumbel copula: theta must be >= 1");
      return;
  }
  throw std::logic_error("validate: bad family tag");
}

double student_t_cdf(double x, double nu) {
  if (!(nu > 0.0)) throw std::domain_error("student_t_cdf: nu must be positive");
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  const double s = nu / (nu + x * x);
  const double p = 0.5 * boost::math::ibeta(0.5 * nu, 0.5, s);
  return x > 0.0 ? 1.0 - p : p;
}

double student_t_quantile(double p, double nu) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("student_t_quantile: p must lie in (0,1)");
  boost::math::students_t_distribution<double> d(nu);
  return boost::math::quantile(d, p);
}

double student_t_log_pdf(double x, double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * kPi) -
         0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

double student_t_tail_dependence(double rho, double nu) {
  const double arg = -std::sqrt(nu + 1.0) * std::sqrt((1.0 - rho) / (1.0 + rho));
  return 2.0 * student_t_cdf(arg, nu + 1.0);
}

// ---------------------------------------------------------------------------
// cdf
// ---------------------------------------------------------------------------

// Standard bivariate normal cdf via the arcsin-substituted Drezner form:
// Phi2(x,y;rho) = Phi(x)Phi(y)
//   + (1/2pi) Integral_0^{asin rho} exp(-(x^2 - 2xy sin t + y^2)/(2 cos^2 t)) dt.
static double bivariate_normal_cdf(double x, double y, double rho) {
  const double base = normal_cdf(x) * normal_cdf(y);
  if (rho == 0.0) return base;
  const double a = std::asin(rho);
  auto f = [x, y](double t) {
    const double c = std::cos(t);
    return std::exp(-(x * x - 2.0 * x * y * std::sin(t) + y * y) / (2.0 * c * c));
  };
  const double corr =
      boost::math::quadrature::gauss<double, 61>::integrate(f, 0.0, a);
  return base + corr / (2.0 * kPi);
}

static double h_function_interior(const CopulaSpec& spec, double u, double v);

// C(u,v) = Integral_0^v h(u|t) dt, used where no closed form is available.
static double cdf_by_h_integral(const CopulaSpec& spec, double u, double v) {
  auto f = [&](double t) { return h_function_interior(spec, u, clamp_unit(t)); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, 0.0, v, 14, 1e-13);
}

double copula_cdf(const CopulaSpec& spec, UnitPair u) {
  validate(spec);
  double a = u.u1, b = u.u2;
  if (!(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0))
    throw std::domain_error("copula_cdf: point outside the unit square");
  if (a == 0.0 || b == 0.0) return 0.0;
  if (a == 1.0) return b;
  if (b == 1.0) return a;
  a = clamp_unit(a);
  b = clamp_unit(b);
  const double th = spec.params[0];
  switch (spec.family) {
    case CopulaFamily::Independence:
      return a * b;
    case CopulaFamily::Gaussian:
      return bivariate_normal_cdf(normal_quantile(a), normal_quantile(b), th);
    case CopulaFamily::StudentT:
      return cdf_by_h_integral(spec, a, b);
    case CopulaFamily::Clayton:
      return std::pow(std::pow(a, -th) + std::pow(b, -th) - 1.0, -1.0 / th);
    case CopulaFamily::Frank: {
      const double g1 = std::expm1(-th);
      const double ga = std::expm1(-th * a);
      const double gb = std::expm1(-th * b);
      return -std::log1p(ga * gb / g1) / th;
    }
    case CopulaFamily::Gumbel: {
      const double x = -std::log(a), y = -std::log(b);
      const double s = std::pow(x, th) + std::pow(y, th);
      return std::exp(-std::pow(s, 1.0 / th));
    }
  }
  throw std::logic_error("copula_cdf: bad family tag");
}

// ---------------------------------------------------------------------------
// log density
// ---------------------------------------------------------------------------

double copula_log_pdf(const CopulaSpec& spec, UnitPair u) {
  validate(spec);
  if (u.u1 <= 0.0 || u.u1 >= 1.0 || u.u2 <= 0.0 || u.u2 >= 1.0)
    throw std::domain_error("copula_log_pdf: point on the unit-square boundary");
  const double a = clamp_unit(u.u1);
  const double b = clamp_unit(u.u2);
  const double th = spec.params[0];
  switch (spec.family) {
    case CopulaFamily::Independence:
      return 0.0;
    case CopulaFamily::Gaussian: {
      const double x = normal_quantile(a), y = normal_quantile(b);
      const double r2 = 1.0 - th * th;
      return -0.5 * std::log(r2) -
             (th * th * (x * x + y * y) - 2.0 * th * x * y) / (2.0 * r2);
    }
    case CopulaFamily::StudentT: {
      const double rho = th, nu = spec.params[1];
      const double x = student_t_quantile(a, nu), y = student_t_quantile(b, nu);
      const double r2 = 1.0 - rho * rho;
      const double q = x * x - 2.0 * rho * x * y + y * y;
      return std::lgamma(0.5 * (nu + 2.0)) + std::lgamma(0.5 * nu) -
             2.0 * std::lgamma(0.5 * (nu + 1.0)) - 0.5 * std::log(r2) -
             0.5 * (nu + 2.0) * std::log1p(q / (nu * r2)) +
             0.5 * (nu + 1.0) *
                 (std::log1p(x * x / nu) + std::log1p(y * y / nu));
    }
    case CopulaFamily::Clayton: {
      const double la = std::log(a), lb = std::log(b);
      const double s = std::exp(-th * la) + std::exp(-th * lb) - 1.0;
      return std::log1p(th) - (th + 1.0) * (la + lb) -
             (2.0 + 1.0 / th) * std::log(s);
    }
    case CopulaFamily::Frank: {
      const double g1 = std::expm1(-th);
      const double ga = std::expm1(-th * a);
      const double gb = std::expm1(-th * b);
      // c = -theta*g1*exp(-theta(u+v)) / (g1 + ga*gb)^2, positive either sign.
      return std::log(-th * g1) - th * (a + b) -
             2.0 * std::log(std::fabs(g1 + ga * gb));
    }
    case CopulaFamily::Gumbel: {
      const double x = -std::log(a), y = -std::log(b);
      const double lx = std::log(x), ly = std::log(y);
      const double s = std::exp(th * lx) + std::exp(th * ly);
      const double A = std::pow(s, 1.0 / th);
      return -A - std::log(a) - std::log(b) + (th - 1.0) * (lx + ly) +
             std::log(A + th - 1.0) + (1.0 - 2.0 * th) * std::log(A);
    }
  }
  throw std::logic_error("copula_log_pdf: bad family tag");
}

double copula_pdf(const CopulaSpec& spec, UnitPair u) {
  return std::exp(copula_log_pdf(spec, u));
}

// ---------------------------------------------------------------------------
// h-function and inverse
// ---------------------------------------------------------------------------

static double h_function_interior(const CopulaSpec& spec, double u, double v) {
  const double a = clamp_unit(u);
  const double b = clamp_unit(v);
  const double th = spec.params[0];
  switch (spec.family) {
    case CopulaFamily::Independence:
      return a;
    case CopulaFamily::Gaussian: {
      const double x = normal_quantile(a), y = normal_quantile(b);
      return normal_cdf((x - th * y) / std::sqrt(1.0 - th * th));
    }
    case CopulaFamily::StudentT: {
      const double rho = th, nu = spec.params[1];
      const double x = student_t_quantile(a, nu), y = student_t_quantile(b, nu);
      const double scale =
          std::sqrt((1.0 - rho * rho) * (nu + y * y) / (nu + 1.0));
      return student_t_cdf((x - rho * y) / scale, nu + 1.0);
    }
    case CopulaFamily::Clayton: {
      const double s = std::pow(a, -th) + std::pow(b, -th) - 1.0;
      return std::pow(b, -th - 1.0) * std::pow(s, -1.0 - 1.0 / th);
    }
    case CopulaFamily::Frank: {
      const double g1 = std::expm1(-th);
      const double ga = std::expm1(-th * a);
      const double gb = std::expm1(-th * b);
      return ga * std::exp(-th * b) / (g1 + ga * gb);
    }
    case CopulaFamily::Gumbel: {
      const double x = -std::log(a), y = -std::log(b);
      const double s = std::pow(x, th) + std::pow(y, th);
      const double A = std::pow(s, 1.0 / th);
      return std::exp(-A) * std::pow(y / A, th - 1.0) / b;
    }
  }
  throw std::logic_error("h_function: bad family tag");
}

double h_function(const CopulaSpec& spec, double u, double v) {
  validate(spec);
  if (!(u >= 0.0 && u <= 1.0) || !(v > 0.0 && v < 1.0))
    throw std::domain_error("h_function: require u in [0,1], v in (0,1)");
  if (u == 0.0) return 0.0;
  if (u == 1.0) return 1.0;
  return h_function_interior(spec, u, v);
}

static double h_inverse_newton(const CopulaSpec& spec, double p, double v) {
  double lo = kUnitEps, hi = 1.0 - kUnitEps;
  double u = p;  // h(u|v) tracks u reasonably for moderate dependence
  double residual = kPosInf;
  for (int it = 0; it < 200; ++it) {
    const double h = h_function_interior(spec, u, v);
    residual = h - p;
    if (std::fabs(residual) < 1e-10) return u;
    if (residual > 0.0)
      hi = u;
    else
      lo = u;
    const double dens = copula_pdf(spec, {u, v});  // dh/du
    double next = u - residual / dens;
    if (!(next > lo && next < hi) || !std::isfinite(next))
      next = 0.5 * (lo + hi);
    u = next;
  }
  std::ostringstream msg;
  msg << "h_inverse: no convergence after 200 iterations for "
      << copula_family_name(spec.family) << " (p=" << p << ", v=" << v
      << ", residual=" << residual << ")";
  throw std::runtime_error(msg.str());
}

double h_inverse(const CopulaSpec& spec, double p, double v) {
  validate(spec);
  if (!(p > 0.0 && p < 1.0) || !(v > 0.0 && v < 1.0))
    throw std::domain_error("h_inverse: require p, v in (0,1)");
  p = clamp_unit(p);
  v = clamp_unit(v);
  const double th = spec.params[0];
  switch (spec.family) {
    case CopulaFamily::Independence:
      return p;
    case CopulaFamily::Gaussian: {
      const double y = normal_quantile(v);
      const double x = normal_quantile(p) * std::sqrt(1.0 - th * th) + th * y;
      return clamp_unit(normal_cdf(x));
    }
    case CopulaFamily::StudentT: {
      const double rho = th, nu = spec.params[1];
      const double y = student_t_quantile(v, nu);
      const double scale =
          std::sqrt((1.0 - rho * rho) * (nu + y * y) / (nu + 1.0));
      const double x = student_t_quantile(p, nu + 1.0) * scale + rho * y;
      return clamp_unit(student_t_cdf(x, nu));
    }
    case CopulaFamily::Clayton: {
      const double w = std::pow(p, -th / (1.0 + th)) - 1.0;
      return clamp_unit(std::pow(1.0 + std::pow(v, -th) * w, -1.0 / th));
    }
    case CopulaFamily::Frank: {
      const double ev = std::exp(-th * v);
      const double num = ev * (1.0 - p) + p * std::exp(-th);
      const double den = ev * (1.0 - p) + p;
      return clamp_unit(-std::log(num / den) / th);
    }
    case CopulaFamily::Gumbel:
      return h_inverse_newton(spec, p, v);
  }
  throw std::logic_error("h_inverse: bad family tag");
}

// ---------------------------------------------------------------------------
// sampling
// ---------------------------------------------------------------------------

static double chi2_quantile(double p, double nu) {
  boost::math::gamma_distribution<double> g(0.5 * nu, 2.0);
  return boost::math::quantile(g, p);
}

void copula_sample(const CopulaSpec& spec, std::size_t n, Rng& rng,
                   std::vector<UnitPair>& out) {
  validate(spec);
  out.reserve(out.size() + n);
  const double th = spec.params[0];
  switch (spec.family) {
    case CopulaFamily::Independence: {
      for (std::size_t i = 0; i < n; ++i) {
        const double a = rng.uniform();
        const double b = rng.uniform();
        out.push_back({a, b});
      }
      return;
    }
    case CopulaFamily::Gaussian: {
      const double c = std::sqrt(1.0 - th * th);
      for (std::size_t i = 0; i < n; ++i) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        out.push_back({normal_cdf(z1), normal_cdf(th * z1 + c * z2)});
      }
      return;
    }
    case CopulaFamily::StudentT: {
      const double nu = spec.params[1];
      const double c = std::sqrt(1.0 - th * th);
      for (std::size_t i = 0; i < n; ++i) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const double w = chi2_quantile(rng.uniform(), nu);
        const double s = std::sqrt(nu / w);
        out.push_back({clamp_unit(student_t_cdf(z1 * s, nu)),
                       clamp_unit(student_t_cdf((th * z1 + c * z2) * s, nu))});
      }
      return;
    }
    case CopulaFamily::Clayton:
    case CopulaFamily::Frank:
    case CopulaFamily::Gumbel: {
      for (std::size_t i = 0; i < n; ++i) {
        const double v = clamp_unit(rng.uniform());
        const double p = clamp_unit(rng.uniform());
        out.push_back({h_inverse(spec, p, v), v});
      }
      return;
    }
  }
  throw std::logic_error("copula_sample: bad family tag");
}

std::vector<UnitPair> copula_sample(const CopulaSpec& spec, std::size_t n,
                                    std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("copula_sample: n must be >= 1");
  Rng rng(seed);
  std::vector<UnitPair> out;
  copula_sample(spec, n, rng, out);
  return out;
}

// ---------------------------------------------------------------------------
// Kendall tau maps
// ---------------------------------------------------------------------------

double kendall_tau(const CopulaSpec& spec) {
  validate(spec);
  const double th = spec.params[0];
  switch (spec.family) {
    case CopulaFamily::Independence:
      return 0.0;
    case CopulaFamily::Gaussian:
    case CopulaFamily::StudentT:
      return 2.0 / kPi * std::asin(th);
    case CopulaFamily::Clayton:
      return th / (th + 2.0);
    case CopulaFamily::Frank:
      return 1.0 - 4.0 / th + 4.0 * debye1(th) / th;
    case CopulaFamily::Gumbel:
      return 1.0 - 1.0 / th;
  }
  throw std::logic_error("kendall_tau: bad family tag");
}

CopulaSpec tau_to_param(CopulaFamily f, double tau) {
  switch (f) {
    case CopulaFamily::Independence:
      if (tau != 0.0)
        throw std::domain_error("tau_to_param: independence requires tau = 0");
      return make_copula(f);
    case CopulaFamily::Gaussian:
      if (!(tau > -1.0 && tau < 1.0))
        throw std::domain_error("tau_to_param: gaussian needs |tau| < 1");
      return make_copula(f, std::sin(0.5 * kPi * tau));
    case CopulaFamily::StudentT:
      if (!(tau > -1.0 && tau < 1.0))
        throw std::domain_error("tau_to_param: student_t needs |tau| < 1");
      return make_copula(f, std::sin(0.5 * kPi * tau), 5.0);
    case CopulaFamily::Clayton:
      if (!(tau > 0.0 && tau < 1.0))
        throw std::domain_error("tau_to_param: clayton needs tau in (0,1)");
      return make_copula(f, 2.0 * tau / (1.0 - tau));
    case CopulaFamily::Gumbel:
      if (!(tau >= 0.0 && tau < 1.0))
        throw std::domain_error("tau_to_param: gumbel needs tau in [0,1)");
      return make_copula(f, 1.0 / (1.0 - tau));
    case CopulaFamily::Frank: {
      if (tau == 0.0)
        throw std::domain_error("tau_to_param: frank is undefined at tau = 0");
      const double sign = tau > 0.0 ? 1.0 : -1.0;
      const double target = std::fabs(tau);
      auto tau_of = [](double theta) {
        return 1.0 - 4.0 / theta + 4.0 * debye1(theta) / theta;
      };
      double lo = 1e-8, hi = 100.0;
      if (target >= tau_of(hi))
        throw std::domain_error("tau_to_param: frank tau out of attainable range");
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (tau_of(mid) < target)
          lo = mid;
        else
          hi = mid;
      }
      return make_copula(f, sign * 0.5 * (lo + hi));
    }
  }
  throw std::logic_error("tau_to_param: bad family tag");
}

// ---------------------------------------------------------------------------
// empirical dependence measures
// ---------------------------------------------------------------------------

namespace {

// Counts inversions (strict descents across merge boundaries) in y.
std::size_t merge_count(std::vector<double>& y, std::vector<double>& buf,
                        std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::size_t inv = merge_count(y, buf, lo, mid) + merge_count(y, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (y[j] < y[i]) {
      inv += mid - i;
      buf[k++] = y[j++];
    } else {
      buf[k++] = y[i++];
    }
  }
  while (i < mid) buf[k++] = y[i++];
  while (j < hi) buf[k++] = y[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, y.begin() + lo);
  return inv;
}

std::size_t tie_pairs(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t total = 0, run = 1;
  for (std::size_t i = 1; i <= v.size(); ++i) {
    if (i < v.size() && v[i] == v[i - 1]) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

}  // namespace

double empirical_kendall_tau(std::span<const std::array<double, 2>> data) {
  const std::size_t n = data.size();
  if (n < 2) throw std::invalid_argument("empirical_kendall_tau: need n >= 2");
  std::vector<std::array<double, 2>> d(data.begin(), data.end());
  std::sort(d.begin(), d.end());
  std::vector<double> y(n), buf(n), xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = d[i][0];
    y[i] = d[i][1];
  }
  // With the sort above, inversions in y are exactly the discordant pairs.
  const std::size_t disc = merge_count(y, buf, 0, n);
  const std::size_t tx = tie_pairs(xs);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = d[i][1];
  const std::size_t ty = tie_pairs(ys);
  std::size_t txy = 0;
  {
    std::size_t run = 1;
    for (std::size_t i = 1; i <= n; ++i) {
      if (i < n && d[i] == d[i - 1]) {
        ++run;
      } else {
        txy += run * (run - 1) / 2;
        run = 1;
      }
    }
  }
  const double total = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double num = total - 2.0 * static_cast<double>(disc) -
                     static_cast<double>(tx) - static_cast<double>(ty) +
                     static_cast<double>(txy);
  return num / total;
}

double empirical_pearson_rho(std::span<const std::array<double, 2>> data) {
  const std::size_t n = data.size();
  if (n < 2) throw std::invalid_argument("empirical_pearson_rho: need n >= 2");
  double mx = 0.0, my = 0.0;
  for (const auto& p : data) {
    mx += p[0];
    my += p[1];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : data) {
    sxx += (p[0] - mx) * (p[0] - mx);
    syy += (p[1] - my) * (p[1] - my);
    sxy += (p[0] - mx) * (p[1] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("empirical_pearson_rho: zero sample variance");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace cuq
