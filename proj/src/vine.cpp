#include "cuq/vine.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cuq/rng.hpp"

namespace cuq {

void validate(const VineSpec& spec) {
  const std::size_t d = spec.dimension;
  if (d < 2) throw std::invalid_argument("vine: dimension must be >= 2");
  if (spec.marginals.size() != d)
    throw std::invalid_argument("vine: need one marginal per dimension");
  if (spec.pair_copulas.size() != d - 1)
    throw std::invalid_argument("vine: need d-1 trees of pair copulas");
  for (std::size_t j = 1; j < d; ++j) {
    if (spec.pair_copulas[j - 1].size() != d - j)
      throw std::invalid_argument("vine: tree " + std::to_string(j) +
                                  " must hold " + std::to_string(d - j) +
                                  " pair copulas");
    for (const auto& c : spec.pair_copulas[j - 1]) validate(c);
  }
  for (const auto& m : spec.marginals) validate(m);
}

namespace {

// C-vine copula-scale log density plus conditional table
// cond[k][m] = F(x_m | x_1..x_k), built tree by tree.
double cvine_log_density(const VineSpec& spec, std::vector<double> u) {
  const std::size_t d = spec.dimension;
  double ll = 0.0;
  std::vector<double> cur = std::move(u);  // cond[j-1][*] before tree j
  for (std::size_t j = 1; j < d; ++j) {
    const auto& tree = spec.pair_copulas[j - 1];
    for (std::size_t i = 1; i <= d - j; ++i)
      ll += copula_log_pdf(tree[i - 1], {cur[j - 1 + i], cur[j - 1]});
    if (j == d - 1) break;
    std::vector<double> next(cur.size());
    for (std::size_t m = j; m < d; ++m)
      next[m] = clamp_unit(h_function(tree[m - j], cur[m], cur[j - 1]));
    cur = std::move(next);
  }
  return ll;
}

// D-vine interval tables; indexes 0-based internally.
// left[i][j]  = F(x_{i+1} | x_{i+2..j+1}) stored at [i][j], i <= j
// right[i][j] = F(x_{j+1} | x_{i+1..j})
double dvine_log_density(const VineSpec& spec, const std::vector<double>& u) {
  const std::size_t d = spec.dimension;
  std::vector<std::vector<double>> left(d, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> right(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < d; ++i) left[i][i] = right[i][i] = u[i];
  double ll = 0.0;
  for (std::size_t level = 1; level < d; ++level) {
    for (std::size_t i = 0; i + level < d; ++i) {
      const std::size_t j = i + level;
      const auto& cop = spec.pair_copulas[level - 1][i];
      const double a = left[i][j - 1];   // F(x_i | mid)
      const double b = right[i + 1][j];  // F(x_j | mid)
      ll += copula_log_pdf(cop, {a, b});
      left[i][j] = clamp_unit(h_function(cop, a, b));
      right[i][j] = clamp_unit(h_function(cop, b, a));
    }
  }
  return ll;
}

}  // namespace

double vine_log_pdf(const VineSpec& spec, std::span<const double> x) {
  validate(spec);
  const std::size_t d = spec.dimension;
  if (x.size() != d) throw std::invalid_argument("vine_log_pdf: bad dimension");
  double ll = 0.0;
  std::vector<double> u(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double lf = marginal_log_pdf(spec.marginals[k], x[k]);
    if (!std::isfinite(lf)) return kNegInf;
    ll += lf;
    u[k] = clamp_unit(marginal_cdf(spec.marginals[k], x[k]));
  }
  ll += (spec.kind == VineKind::CVine) ? cvine_log_density(spec, u)
                                       : dvine_log_density(spec, u);
  return ll;
}

namespace {

void cvine_sample_one(const VineSpec& spec, Rng& rng, std::vector<double>& u) {
  const std::size_t d = spec.dimension;
  // cond[k][m], k < m: F(x_{m+1} | x_1..x_k) 0-based in the first index.
  std::vector<std::vector<double>> cond(d, std::vector<double>(d, 0.0));
  u[0] = clamp_unit(rng.uniform());
  cond[0][0] = u[0];
  for (std::size_t i = 1; i < d; ++i) {
    double t = clamp_unit(rng.uniform());
    for (std::size_t k = i; k >= 1; --k)
      t = clamp_unit(
          h_inverse(spec.pair_copulas[k - 1][i - k], t, cond[k - 1][k - 1]));
    u[i] = t;
    cond[0][i] = u[i];
    for (std::size_t k = 1; k <= i && i + 1 < d; ++k)
      cond[k][i] = clamp_unit(h_function(spec.pair_copulas[k - 1][i - k],
                                         cond[k - 1][i], cond[k - 1][k - 1]));
  }
}

void dvine_sample_one(const VineSpec& spec, Rng& rng, std::vector<double>& u) {
  const std::size_t d = spec.dimension;
  std::vector<std::vector<double>> left(d, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> right(d, std::vector<double>(d, 0.0));
  u[0] = clamp_unit(rng.uniform());
  left[0][0] = right[0][0] = u[0];
  for (std::size_t i = 1; i < d; ++i) {
    double t = clamp_unit(rng.uniform());
    // Peel the conditioning set from the left: edges (j, i), j = 0..i-1.
    for (std::size_t j = 0; j < i; ++j) {
      const std::size_t level = i - j;
      t = clamp_unit(h_inverse(spec.pair_copulas[level - 1][j], t, left[j][i - 1]));
    }
    u[i] = t;
    left[i][i] = right[i][i] = u[i];
    for (std::size_t j = i; j >= 1; --j) {
      const std::size_t lo = j - 1;
      const std::size_t level = i - lo;
      const auto& cop = spec.pair_copulas[level - 1][lo];
      const double a = left[lo][i - 1];
      const double b = right[lo + 1][i];
      left[lo][i] = clamp_unit(h_function(cop, a, b));
      right[lo][i] = clamp_unit(h_function(cop, b, a));
    }
  }
}

}  // namespace

Matrix vine_sample(const VineSpec& spec, std::size_t n, std::uint64_t seed) {
  validate(spec);
  if (n < 1) throw std::invalid_argument("vine_sample: n must be >= 1");
  const std::size_t d = spec.dimension;
  Matrix out(n, d);
  Rng rng(seed);
  std::vector<double> u(d);
  for (std::size_t s = 0; s < n; ++s) {
    if (spec.kind == VineKind::CVine)
      cvine_sample_one(spec, rng, u);
    else
      dvine_sample_one(spec, rng, u);
    for (std::size_t k = 0; k < d; ++k)
      out(s, k) = marginal_quantile(spec.marginals[k], u[k]);
  }
  return out;
}

std::string vine_to_json(const VineSpec& spec) {
  validate(spec);
  nlohmann::json root;
  root["kind"] = spec.kind == VineKind::CVine ? "cvine" : "dvine";
  root["dimension"] = spec.dimension;
  nlohmann::json margs = nlohmann::json::array();
  for (const auto& m : spec.marginals)
    margs.push_back({{"family", marginal_family_name(m.family)},
                     {"params", {m.params[0], m.params[1]}}});
  root["marginals"] = margs;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : spec.pair_copulas) {
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& c : tree) {
      nlohmann::json params = nlohmann::json::array();
      for (int q = 0; q < copula_param_count(c.family); ++q)
        params.push_back(c.params[q]);
      jt.push_back({{"family", copula_family_name(c.family)}, {"params", params}});
    }
    trees.push_back(jt);
  }
  root["pair_copulas"] = trees;
  return root.dump(2);
}

VineSpec vine_from_json(const std::string& text) {
  const auto root = nlohmann::json::parse(text);
  VineSpec spec;
  const std::string kind = root.at("kind");
  if (kind == "cvine")
    spec.kind = VineKind::CVine;
  else if (kind == "dvine")
    spec.kind = VineKind::DVine;
  else
    throw std::invalid_argument("vine_from_json: kind must be cvine or dvine");
  spec.dimension = root.at("dimension").get<std::size_t>();
  for (const auto& jm : root.at("marginals"))
    spec.marginals.push_back(make_marginal(
        marginal_family_from_name(jm.at("family")), jm.at("params").at(0),
        jm.at("params").at(1)));
  for (const auto& jt : root.at("pair_copulas")) {
    std::vector<CopulaSpec> tree;
    for (const auto& jc : jt) {
      CopulaSpec c;
      c.family = copula_family_from_name(jc.at("family"));
      const auto& params = jc.at("params");
      for (std::size_t q = 0; q < params.size() && q < 2; ++q)
        c.params[q] = params.at(q);
      validate(c);
      tree.push_back(c);
    }
    spec.pair_copulas.push_back(std::move(tree));
  }
  validate(spec);
  return spec;
}

}  // namespace cuq
