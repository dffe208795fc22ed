#include "cuq/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cuq/rng.hpp"

namespace cuq {

std::uint64_t InputEnsemble::content_hash() const {
  return fnv1a64(input_ensemble_to_json(*this));
}

std::vector<bool> InputEnsemble::real_support() const {
  std::vector<bool> r(dim, false);
  for (const auto& b : blocks) {
    if (b.kind == InputBlock::Kind::Pair) {
      for (const auto& e : b.pair.entries) {
        if (!positive_support(e.pair.m1.family)) r[b.vars[0]] = true;
        if (!positive_support(e.pair.m2.family)) r[b.vars[1]] = true;
      }
    } else {
      for (const auto& d : b.single.draws)
        if (!positive_support(d.spec.family)) r[b.vars[0]] = true;
    }
  }
  return r;
}

double expected_conditional_copula(std::span<const CopulaDraw> draws,
                                   UnitPair u) {
  if (draws.empty())
    throw std::invalid_argument("expected_conditional_copula: no draws");
  double acc = 0.0;
  for (const auto& d : draws) acc += copula_pdf(d.spec, u);
  return acc / static_cast<double>(draws.size());
}

namespace {

void check_candidate(const InputEnsemble& e, CandidateIndex c) {
  if (c.l >= e.n_td || c.k >= e.n_tc)
    throw std::out_of_range("candidate index outside the ensemble");
}

}  // namespace

double candidate_log_pdf(const InputEnsemble& e, CandidateIndex c,
                         std::span<const double> x) {
  check_candidate(e, c);
  if (x.size() != e.dim)
    throw std::invalid_argument("candidate_log_pdf: dimension mismatch");
  double ll = 0.0;
  for (const auto& b : e.blocks) {
    if (b.kind == InputBlock::Kind::Pair) {
      const auto& entry = b.pair.entries[c.l];
      ll += joint_log_pdf(entry.pair.m1, entry.pair.m2,
                          entry.copulas[c.k].spec, x[b.vars[0]], x[b.vars[1]]);
    } else {
      ll += marginal_log_pdf(b.single.draws[c.l].spec, x[b.vars[0]]);
    }
    if (!std::isfinite(ll)) return kNegInf;
  }
  return ll;
}

double component_log_pdf(const InputEnsemble& e, std::size_t l,
                         std::span<const double> x) {
  if (l >= e.n_td) throw std::out_of_range("component index outside ensemble");
  double ll = 0.0;
  for (const auto& b : e.blocks) {
    if (b.kind == InputBlock::Kind::Pair) {
      const auto& entry = b.pair.entries[l];
      const double lf1 = marginal_log_pdf(entry.pair.m1, x[b.vars[0]]);
      const double lf2 = marginal_log_pdf(entry.pair.m2, x[b.vars[1]]);
      if (!std::isfinite(lf1) || !std::isfinite(lf2)) return kNegInf;
      const UnitPair u{clamp_unit(marginal_cdf(entry.pair.m1, x[b.vars[0]])),
                       clamp_unit(marginal_cdf(entry.pair.m2, x[b.vars[1]]))};
      ll += std::log(expected_conditional_copula(entry.copulas, u)) + lf1 + lf2;
    } else {
      const double lf = marginal_log_pdf(b.single.draws[l].spec, x[b.vars[0]]);
      if (!std::isfinite(lf)) return kNegInf;
      ll += lf;
    }
  }
  return ll;
}

OptimalDensity::OptimalDensity(InputEnsemble ensemble) : ens_(std::move(ensemble)) {
  if (ens_.blocks.empty() || ens_.n_td == 0)
    throw std::invalid_argument("optimal density: empty ensemble");
  for (const auto& b : ens_.blocks) {
    const std::size_t n =
        b.kind == InputBlock::Kind::Pair ? b.pair.entries.size() : b.single.draws.size();
    if (n != ens_.n_td)
      throw std::invalid_argument("optimal density: block size != N_td");
    if (b.kind == InputBlock::Kind::Pair)
      for (const auto& entry : b.pair.entries)
        if (entry.copulas.size() != ens_.n_tc)
          throw std::invalid_argument("optimal density: entry size != N_tc");
  }
}

double OptimalDensity::log_pdf(std::span<const double> x) const {
  std::vector<double> terms(ens_.n_td);
  for (std::size_t l = 0; l < ens_.n_td; ++l)
    terms[l] = component_log_pdf(ens_, l, x);
  return log_sum_exp(terms) - std::log(static_cast<double>(ens_.n_td));
}

Matrix OptimalDensity::sample(std::size_t n, std::uint64_t seed) const {
  if (n < 1) throw std::invalid_argument("optimal density: n must be >= 1");
  Matrix out(n, ens_.dim);
  Rng rng(seed);
  std::vector<UnitPair> buf;
  for (std::size_t s = 0; s < n; ++s) {
    for (const auto& b : ens_.blocks) {
      const std::size_t l = rng.index(ens_.n_td);
      if (b.kind == InputBlock::Kind::Pair) {
        const auto& entry = b.pair.entries[l];
        const std::size_t k = rng.index(ens_.n_tc);
        buf.clear();
        copula_sample(entry.copulas[k].spec, 1, rng, buf);
        out(s, b.vars[0]) = marginal_quantile(entry.pair.m1, clamp_unit(buf[0].u1));
        out(s, b.vars[1]) = marginal_quantile(entry.pair.m2, clamp_unit(buf[0].u2));
      } else {
        out(s, b.vars[0]) =
            marginal_quantile(b.single.draws[l].spec, clamp_unit(rng.uniform()));
      }
    }
  }
  return out;
}

WeightedRun propagate(const OptimalDensity& q, const PerformanceFunction& g,
                      std::size_t n, std::uint64_t seed) {
  WeightedRun run;
  run.samples = q.sample(n, seed);
  run.seed = seed;
  run.ensemble_hash = q.ensemble().content_hash();
  run.g_name = g.name();
  run.g.reserve(n);
  run.log_q.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    run.g.push_back(g(run.samples.row(i)));
    run.log_q.push_back(q.log_pdf(run.samples.row(i)));
  }
  return run;
}

namespace {

WeightVector finish_weights(std::vector<double> w) {
  WeightVector wv;
  double sum = 0.0, sum_sq = 0.0;
  for (double x : w) {
    sum += x;
    sum_sq += x * x;
  }
  wv.mean_w = sum / static_cast<double>(w.size());
  wv.ess = sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
  wv.w = std::move(w);
  return wv;
}

}  // namespace

WeightVector importance_weights(const WeightedRun& run, const InputEnsemble& e,
                                CandidateIndex c) {
  check_candidate(e, c);
  const std::size_t n = run.samples.rows;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lp = candidate_log_pdf(e, c, run.samples.row(i));
    w[i] = std::isfinite(lp) ? std::exp(lp - run.log_q[i]) : 0.0;
  }
  return finish_weights(std::move(w));
}

WeightVector importance_weights_logp(
    const WeightedRun& run,
    const std::function<double(std::span<const double>)>& log_p) {
  const std::size_t n = run.samples.rows;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lp = log_p(run.samples.row(i));
    if (std::isfinite(lp) && !std::isfinite(run.log_q[i]))
      throw std::runtime_error(
          "importance_weights: candidate support exceeds the sampling "
          "density support (infinite weight)");
    w[i] = std::isfinite(lp) ? std::exp(lp - run.log_q[i]) : 0.0;
  }
  return finish_weights(std::move(w));
}

Estimate reweighted_expectation(const WeightedRun& run, const WeightVector& wv) {
  const std::size_t n = run.g.size();
  if (n == 0 || wv.w.size() != n)
    throw std::invalid_argument("reweighted_expectation: size mismatch");
  std::vector<double> gw(n);
  for (std::size_t i = 0; i < n; ++i) gw[i] = run.g[i] * wv.w[i];
  Estimate est;
  est.value = mean(gw);
  est.std_error = n > 1 ? sample_std(gw) / std::sqrt(static_cast<double>(n)) : 0.0;
  est.ess = wv.ess;
  est.degenerate = wv.ess < 10.0;
  return est;
}

// ---------------------------------------------------------------------------
// cdf bands
// ---------------------------------------------------------------------------

CdfBand cdf_band(const WeightedRun& run, const InputEnsemble& e,
                 std::span<const double> grid, std::size_t max_members) {
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw std::invalid_argument("cdf_band: grid must be sorted");
  const std::size_t n = run.g.size();
  if (n == 0) throw std::invalid_argument("cdf_band: empty run");

  // Sort samples by g once; a weighted cdf is then a prefix sum lookup.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return run.g[a] < run.g[b]; });
  std::vector<double> sorted_g(n);
  for (std::size_t i = 0; i < n; ++i) sorted_g[i] = run.g[order[i]];
  std::vector<std::size_t> grid_count(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j)
    grid_count[j] = static_cast<std::size_t>(
        std::upper_bound(sorted_g.begin(), sorted_g.end(), grid[j]) -
        sorted_g.begin());

  CdfBand band;
  band.grid.assign(grid.begin(), grid.end());
  band.lo.assign(grid.size(), 1.0);
  band.hi.assign(grid.size(), 0.0);
  band.n_candidates = e.n_td * e.n_tc;
  const std::size_t kept = std::min<std::size_t>(max_members, band.n_candidates);
  band.members = Matrix(kept, grid.size());

  // Per entry l: marginal parts of log p are shared across the N_tc copula
  // draws, so precompute them (and the pseudo-observations) per sample.
  std::vector<double> base(n), logw(n), prefix(n);
  std::vector<std::array<double, 2>> pair_u;  // per pair block, per sample
  std::vector<double> cdf(grid.size());

  std::size_t member_row = 0;
  for (std::size_t l = 0; l < e.n_td; ++l) {
    std::fill(base.begin(), base.end(), 0.0);
    std::vector<std::vector<std::array<double, 2>>> block_u;
    for (const auto& b : e.blocks) {
      if (b.kind == InputBlock::Kind::Pair) {
        const auto& entry = b.pair.entries[l];
        auto& us = block_u.emplace_back(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double x1 = run.samples(i, b.vars[0]);
          const double x2 = run.samples(i, b.vars[1]);
          base[i] += marginal_log_pdf(entry.pair.m1, x1) +
                     marginal_log_pdf(entry.pair.m2, x2);
          us[i] = {clamp_unit(marginal_cdf(entry.pair.m1, x1)),
                   clamp_unit(marginal_cdf(entry.pair.m2, x2))};
        }
      } else {
        const auto& spec = b.single.draws[l].spec;
        for (std::size_t i = 0; i < n; ++i)
          base[i] += marginal_log_pdf(spec, run.samples(i, b.vars[0]));
      }
    }
    for (std::size_t k = 0; k < e.n_tc; ++k) {
      for (std::size_t i = 0; i < n; ++i) logw[i] = base[i] - run.log_q[i];
      std::size_t ub = 0;
      for (const auto& b : e.blocks) {
        if (b.kind != InputBlock::Kind::Pair) continue;
        const auto& spec = b.pair.entries[l].copulas[k].spec;
        const auto& us = block_u[ub++];
        for (std::size_t i = 0; i < n; ++i)
          logw[i] += copula_log_pdf(spec, {us[i][0], us[i][1]});
      }
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double lw = logw[order[i]];
        const double w = std::isfinite(lw) ? std::exp(lw) : 0.0;
        total += w;
        prefix[i] = total;
      }
      if (total <= 0.0)
        throw std::runtime_error("cdf_band: candidate with all-zero weights");
      for (std::size_t j = 0; j < grid.size(); ++j) {
        cdf[j] = grid_count[j] == 0 ? 0.0 : prefix[grid_count[j] - 1] / total;
        band.lo[j] = std::min(band.lo[j], cdf[j]);
        band.hi[j] = std::max(band.hi[j], cdf[j]);
      }
      if (member_row < kept) {
        for (std::size_t j = 0; j < grid.size(); ++j)
          band.members(member_row, j) = cdf[j];
        band.member_index.push_back({l, k});
        ++member_row;
      }
    }
  }
  double width = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) width += band.hi[j] - band.lo[j];
  band.mean_width = width / static_cast<double>(grid.size());
  return band;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

std::string input_ensemble_to_json(const InputEnsemble& e) {
  nlohmann::json root;
  root["dim"] = e.dim;
  root["n_td"] = e.n_td;
  root["n_tc"] = e.n_tc;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : e.blocks) {
    nlohmann::json jb;
    if (b.kind == InputBlock::Kind::Pair) {
      jb["type"] = "pair";
      jb["vars"] = {b.vars[0], b.vars[1]};
      jb["ensemble"] = nlohmann::json::parse(ensemble_to_json(b.pair));
    } else {
      jb["type"] = "single";
      jb["vars"] = {b.vars[0]};
      nlohmann::json draws = nlohmann::json::array();
      for (const auto& d : b.single.draws)
        draws.push_back({{"family", marginal_family_name(d.spec.family)},
                         {"params", {d.spec.params[0], d.spec.params[1]}},
                         {"prov", {{"model", d.prov.model}, {"state", d.prov.state}}}});
      jb["draws"] = draws;
    }
    blocks.push_back(std::move(jb));
  }
  root["blocks"] = std::move(blocks);
  return root.dump(2);
}

InputEnsemble input_ensemble_from_json(const std::string& text) {
  const auto root = nlohmann::json::parse(text);
  InputEnsemble e;
  e.dim = root.at("dim").get<std::size_t>();
  e.n_td = root.at("n_td").get<std::size_t>();
  e.n_tc = root.at("n_tc").get<std::size_t>();
  for (const auto& jb : root.at("blocks")) {
    InputBlock b;
    const std::string type = jb.at("type");
    if (type == "pair") {
      b.kind = InputBlock::Kind::Pair;
      b.vars = {jb.at("vars").at(0).get<std::size_t>(),
                jb.at("vars").at(1).get<std::size_t>()};
      b.pair = ensemble_from_json(jb.at("ensemble").dump());
    } else if (type == "single") {
      b.kind = InputBlock::Kind::Single;
      b.vars = {jb.at("vars").at(0).get<std::size_t>(), 0};
      for (const auto& jd : jb.at("draws")) {
        MarginalDraw d;
        d.spec = make_marginal(marginal_family_from_name(jd.at("family")),
                               jd.at("params").at(0), jd.at("params").at(1));
        d.prov = {jd.at("prov").at("model").get<std::size_t>(),
                  jd.at("prov").at("state").get<std::size_t>()};
        b.single.draws.push_back(d);
      }
    } else {
      throw std::invalid_argument("input ensemble: unknown block type " + type);
    }
    e.blocks.push_back(std::move(b));
  }
  return e;
}

// ---------------------------------------------------------------------------
// lookup table
// ---------------------------------------------------------------------------

namespace {

double block_log_pdf_exact(const InputEnsemble& e, const InputBlock& b,
                           double x1, double x2) {
  std::vector<double> terms(e.n_td);
  for (std::size_t l = 0; l < e.n_td; ++l) {
    if (b.kind == InputBlock::Kind::Pair) {
      const auto& entry = b.pair.entries[l];
      const double lf1 = marginal_log_pdf(entry.pair.m1, x1);
      const double lf2 = marginal_log_pdf(entry.pair.m2, x2);
      if (!std::isfinite(lf1) || !std::isfinite(lf2)) {
        terms[l] = kNegInf;
        continue;
      }
      const UnitPair u{clamp_unit(marginal_cdf(entry.pair.m1, x1)),
                       clamp_unit(marginal_cdf(entry.pair.m2, x2))};
      terms[l] = std::log(expected_conditional_copula(entry.copulas, u)) + lf1 + lf2;
    } else {
      terms[l] = marginal_log_pdf(b.single.draws[l].spec, x1);
    }
  }
  return log_sum_exp(terms) - std::log(static_cast<double>(e.n_td));
}

}  // namespace

QstarTable::QstarTable(const OptimalDensity& q, std::size_t points_per_axis,
                       double coverage)
    : q_(&q) {
  if (points_per_axis < 2)
    throw std::invalid_argument("qstar table: need at least 2 points per axis");
  const auto& e = q.ensemble();
  const double plo = 0.5 * (1.0 - coverage), phi = 1.0 - 0.5 * (1.0 - coverage);
  for (const auto& b : e.blocks) {
    BlockTable t;
    t.is_pair = b.kind == InputBlock::Kind::Pair;
    auto axis_range = [&](int which) {
      Axis ax;
      ax.lo = kPosInf;
      ax.hi = kNegInf;
      for (std::size_t l = 0; l < e.n_td; ++l) {
        const MarginalSpec& m =
            t.is_pair ? (which == 0 ? b.pair.entries[l].pair.m1
                                    : b.pair.entries[l].pair.m2)
                      : b.single.draws[l].spec;
        ax.lo = std::min(ax.lo, marginal_quantile(m, plo));
        ax.hi = std::max(ax.hi, marginal_quantile(m, phi));
      }
      ax.n = points_per_axis;
      ax.step = (ax.hi - ax.lo) / static_cast<double>(ax.n - 1);
      return ax;
    };
    t.a1 = axis_range(0);
    if (t.is_pair) {
      t.a2 = axis_range(1);
      t.values.resize(t.a1.n * t.a2.n);
      for (std::size_t i = 0; i < t.a1.n; ++i)
        for (std::size_t j = 0; j < t.a2.n; ++j)
          t.values[i * t.a2.n + j] =
              block_log_pdf_exact(e, b, t.a1.lo + t.a1.step * static_cast<double>(i),
                                  t.a2.lo + t.a2.step * static_cast<double>(j));
    } else {
      t.values.resize(t.a1.n);
      for (std::size_t i = 0; i < t.a1.n; ++i)
        t.values[i] = block_log_pdf_exact(
            e, b, t.a1.lo + t.a1.step * static_cast<double>(i), 0.0);
    }
    tables_.push_back(std::move(t));
  }
}

double QstarTable::log_pdf(std::span<const double> x) const {
  const auto& e = q_->ensemble();
  double ll = 0.0;
  for (std::size_t bi = 0; bi < e.blocks.size(); ++bi) {
    const auto& b = e.blocks[bi];
    const auto& t = tables_[bi];
    const double x1 = x[b.vars[0]];
    auto inside = [](const Axis& a, double v) { return v >= a.lo && v <= a.hi; };
    if (t.is_pair) {
      const double x2 = x[b.vars[1]];
      if (!inside(t.a1, x1) || !inside(t.a2, x2)) {
        ll += block_log_pdf_exact(e, b, x1, x2);
        continue;
      }
      const double fi = (x1 - t.a1.lo) / t.a1.step;
      const double fj = (x2 - t.a2.lo) / t.a2.step;
      const std::size_t i = std::min(static_cast<std::size_t>(fi), t.a1.n - 2);
      const std::size_t j = std::min(static_cast<std::size_t>(fj), t.a2.n - 2);
      const double di = fi - static_cast<double>(i);
      const double dj = fj - static_cast<double>(j);
      const double v00 = t.values[i * t.a2.n + j];
      const double v01 = t.values[i * t.a2.n + j + 1];
      const double v10 = t.values[(i + 1) * t.a2.n + j];
      const double v11 = t.values[(i + 1) * t.a2.n + j + 1];
      ll += (1 - di) * (1 - dj) * v00 + (1 - di) * dj * v01 +
            di * (1 - dj) * v10 + di * dj * v11;
    } else {
      if (!inside(t.a1, x1)) {
        ll += block_log_pdf_exact(e, b, x1, 0.0);
        continue;
      }
      const double fi = (x1 - t.a1.lo) / t.a1.step;
      const std::size_t i = std::min(static_cast<std::size_t>(fi), t.a1.n - 2);
      const double di = fi - static_cast<double>(i);
      ll += (1 - di) * t.values[i] + di * t.values[i + 1];
    }
  }
  return ll;
}

double QstarTable::max_rel_error(std::size_t n_holdout, std::uint64_t seed) const {
  const Matrix xs = q_->sample(n_holdout, seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.rows; ++i) {
    const double exact = q_->log_pdf(xs.row(i));
    const double approx = log_pdf(xs.row(i));
    worst = std::max(worst, std::fabs(std::expm1(approx - exact)));
  }
  return worst;
}

}  // namespace cuq
