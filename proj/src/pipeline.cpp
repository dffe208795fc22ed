#include "cuq/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cuq/rng.hpp"

namespace cuq {

using nlohmann::json;

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Matrix parse_csv(const std::string& text, std::vector<std::string>* header) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("csv: empty input");
  const auto head = split_csv_line(line);
  if (header) *header = head;
  const std::size_t cols = head.size();
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != cols)
      throw std::invalid_argument("csv: row " + std::to_string(lineno) +
                                  " has " + std::to_string(cells.size()) +
                                  " cells, expected " + std::to_string(cols));
    for (std::size_t j = 0; j < cols; ++j) {
      double v = 0.0;
      const char* b = cells[j].data();
      const char* e = b + cells[j].size();
      auto [ptr, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || ptr != e || !std::isfinite(v))
        throw std::invalid_argument("csv: non-numeric cell at row " +
                                    std::to_string(lineno) + ", column " +
                                    std::to_string(j + 1) + " ('" + cells[j] +
                                    "')");
      values.push_back(v);
    }
    ++rows;
  }
  Matrix m(rows, cols);
  m.a = std::move(values);
  return m;
}

Matrix ingest_csv(const std::filesystem::path& path,
                  std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), header);
}

std::string csv_to_string(std::span<const std::string> header,
                          const Matrix& data) {
  if (header.size() != data.cols)
    throw std::invalid_argument("csv: header/column mismatch");
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out += ',';
    out += header[j];
  }
  out += '\n';
  for (std::size_t i = 0; i < data.rows; ++i) {
    for (std::size_t j = 0; j < data.cols; ++j) {
      if (j) out += ',';
      out += format_double(data(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path,
               std::span<const std::string> header, const Matrix& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write csv file: " + path.string());
  out << csv_to_string(header, data);
}

// ---------------------------------------------------------------------------
// config parsing helpers
// ---------------------------------------------------------------------------

namespace {

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& ctx) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown field '" + it.key() +
                                  "' in " + ctx);
}

MarginalSpec marginal_spec_from_json(const json& j) {
  require_keys(j, {"family", "params"}, "marginal spec");
  return make_marginal(marginal_family_from_name(j.at("family")),
                       j.at("params").at(0), j.at("params").at(1));
}

CopulaSpec copula_spec_from_json(const json& j) {
  require_keys(j, {"family", "params"}, "copula spec");
  CopulaSpec c;
  c.family = copula_family_from_name(j.at("family"));
  const auto& params = j.at("params");
  if (static_cast<int>(params.size()) != copula_param_count(c.family))
    throw std::invalid_argument("copula spec: wrong parameter count for " +
                                copula_family_name(c.family));
  for (std::size_t q = 0; q < params.size() && q < 2; ++q)
    c.params[q] = params.at(q);
  validate(c);
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// truth model
// ---------------------------------------------------------------------------

std::vector<std::string> TruthConfig::variable_names() const {
  std::vector<std::string> names;
  for (const auto& b : blocks) {
    names.push_back(b.names[0]);
    if (b.is_pair) names.push_back(b.names[1]);
  }
  return names;
}

TruthConfig truth_config_from_json(const std::string& text) {
  const json root = json::parse(text);
  require_keys(root, {"n", "seed", "blocks"}, "truth config");
  TruthConfig cfg;
  cfg.n = root.at("n").get<std::size_t>();
  cfg.seed = root.value("seed", 0ull);
  if (cfg.n < 1) throw std::invalid_argument("truth config: n must be >= 1");
  for (const auto& jb : root.at("blocks")) {
    TruthBlock b;
    if (jb.contains("pair")) {
      require_keys(jb, {"pair", "marginals", "copula"}, "truth pair block");
      b.is_pair = true;
      b.names = {jb.at("pair").at(0).get<std::string>(),
                 jb.at("pair").at(1).get<std::string>()};
      b.copula = copula_spec_from_json(jb.at("copula"));
      if (jb.contains("marginals")) {
        for (const auto& jm : jb.at("marginals"))
          b.marginals.push_back(marginal_spec_from_json(jm));
        if (b.marginals.size() != 2)
          throw std::invalid_argument("truth pair block: need two marginals");
      }
    } else if (jb.contains("single")) {
      require_keys(jb, {"single", "marginal"}, "truth single block");
      b.is_pair = false;
      b.names = {jb.at("single").get<std::string>(), ""};
      b.marginals.push_back(marginal_spec_from_json(jb.at("marginal")));
    } else {
      throw std::invalid_argument("truth block: need 'pair' or 'single'");
    }
    cfg.blocks.push_back(std::move(b));
  }
  if (cfg.blocks.empty())
    throw std::invalid_argument("truth config: no blocks");
  return cfg;
}

Matrix simulate_truth(const TruthConfig& cfg, std::size_t n,
                      std::uint64_t seed) {
  std::size_t dim = 0;
  for (const auto& b : cfg.blocks) dim += b.is_pair ? 2 : 1;
  Matrix out(n, dim);
  Rng master(seed);
  std::size_t col = 0;
  for (std::size_t bi = 0; bi < cfg.blocks.size(); ++bi) {
    const auto& b = cfg.blocks[bi];
    Rng rng = master.fork("truth_block", bi);
    if (b.is_pair) {
      std::vector<UnitPair> u;
      copula_sample(b.copula, n, rng, u);
      for (std::size_t i = 0; i < n; ++i) {
        if (b.marginals.empty()) {
          out(i, col) = u[i].u1;
          out(i, col + 1) = u[i].u2;
        } else {
          out(i, col) = marginal_quantile(b.marginals[0], clamp_unit(u[i].u1));
          out(i, col + 1) = marginal_quantile(b.marginals[1], clamp_unit(u[i].u2));
        }
      }
      col += 2;
    } else {
      for (std::size_t i = 0; i < n; ++i)
        out(i, col) = marginal_quantile(b.marginals[0], clamp_unit(rng.uniform()));
      col += 1;
    }
  }
  return out;
}

Matrix simulate_truth(const TruthConfig& cfg) {
  return simulate_truth(cfg, cfg.n, cfg.seed);
}

// ---------------------------------------------------------------------------
// run config
// ---------------------------------------------------------------------------

RunConfig run_config_from_json(const std::string& text) {
  const json root = json::parse(text);
  require_keys(root,
               {"data", "output_dir", "seed", "variables", "blocks",
                "marginal_candidates", "copula_candidates", "copula_priors",
                "dependence_mode", "gaussian_rho", "known_uniform_marginals",
                "evidence_samples", "mcmc", "copula_evidence_samples",
                "copula_mcmc", "plausibility_threshold", "n_td",
                "n_tc", "pair_sampling", "copula_cache", "propagation_samples",
                "performance_function", "band_grid_points", "band_members",
                "band_grid", "run_until", "qstar_table_points"},
               "run config");
  RunConfig cfg;
  cfg.data_path = root.value("data", "");
  cfg.output_dir = root.value("output_dir", "");
  cfg.seed = root.value("seed", 0ull);
  if (root.contains("variables"))
    cfg.variables = root.at("variables").get<std::vector<std::string>>();

  if (!root.contains("blocks"))
    throw std::invalid_argument("run config: 'blocks' is required");
  for (const auto& jb : root.at("blocks")) {
    RunConfig::Block b;
    if (jb.contains("pair")) {
      require_keys(jb, {"pair"}, "block");
      b.is_pair = true;
      b.vars = {jb.at("pair").at(0).get<std::string>(),
                jb.at("pair").at(1).get<std::string>()};
    } else if (jb.contains("single")) {
      require_keys(jb, {"single"}, "block");
      b.is_pair = false;
      b.vars = {jb.at("single").get<std::string>(), ""};
    } else {
      throw std::invalid_argument("run config block: need 'pair' or 'single'");
    }
    cfg.blocks.push_back(b);
  }

  if (root.contains("marginal_candidates")) {
    cfg.marginal_candidates.clear();
    for (const auto& s : root.at("marginal_candidates"))
      cfg.marginal_candidates.push_back(
          marginal_family_from_name(s.get<std::string>()));
  }
  if (root.contains("copula_candidates")) {
    cfg.copula_candidates.clear();
    for (const auto& s : root.at("copula_candidates"))
      cfg.copula_candidates.push_back(
          copula_family_from_name(s.get<std::string>()));
  }
  if (root.contains("copula_priors")) {
    for (auto it = root.at("copula_priors").begin();
         it != root.at("copula_priors").end(); ++it) {
      PriorSpec p = default_copula_prior(copula_family_from_name(it.key()));
      p.bounds.clear();
      for (const auto& jiv : it.value())
        p.bounds.push_back({jiv.at(0).get<double>(), jiv.at(1).get<double>()});
      p.validate();
      cfg.copula_priors[it.key()] = p;
    }
  }

  const std::string mode = root.value("dependence_mode", "copula");
  if (mode == "copula")
    cfg.mode = DependenceMode::Copula;
  else if (mode == "independence")
    cfg.mode = DependenceMode::Independence;
  else if (mode == "gaussian_rho")
    cfg.mode = DependenceMode::GaussianRho;
  else
    throw std::invalid_argument("run config: bad dependence_mode '" + mode + "'");
  cfg.gaussian_rho = root.value("gaussian_rho", 0.8);
  cfg.known_uniform = root.value("known_uniform_marginals", false);

  cfg.inference.evidence_samples =
      root.value("evidence_samples", cfg.inference.evidence_samples);
  if (root.contains("mcmc")) {
    const auto& jm = root.at("mcmc");
    require_keys(jm, {"chain_length", "burn_in", "thinning", "target_acceptance"},
                 "mcmc");
    cfg.inference.chain_length = jm.value("chain_length", cfg.inference.chain_length);
    cfg.inference.burn_in = jm.value("burn_in", cfg.inference.burn_in);
    cfg.inference.thinning = jm.value("thinning", cfg.inference.thinning);
    cfg.inference.target_acceptance =
        jm.value("target_acceptance", cfg.inference.target_acceptance);
  }
  cfg.inference.plausibility_threshold =
      root.value("plausibility_threshold", cfg.inference.plausibility_threshold);

  if (root.contains("copula_mcmc") || root.contains("copula_evidence_samples")) {
    InferenceConfig cop = cfg.inference;
    cop.evidence_samples =
        root.value("copula_evidence_samples", cop.evidence_samples);
    if (root.contains("copula_mcmc")) {
      const auto& jm = root.at("copula_mcmc");
      require_keys(jm,
                   {"chain_length", "burn_in", "thinning", "target_acceptance"},
                   "copula_mcmc");
      cop.chain_length = jm.value("chain_length", cop.chain_length);
      cop.burn_in = jm.value("burn_in", cop.burn_in);
      cop.thinning = jm.value("thinning", cop.thinning);
      cop.target_acceptance =
          jm.value("target_acceptance", cop.target_acceptance);
    }
    cfg.copula_inference = cop;
  }

  cfg.n_td = root.value("n_td", cfg.n_td);
  cfg.n_tc = root.value("n_tc", cfg.n_tc);
  const std::string sampling = root.value("pair_sampling", "random");
  if (sampling == "lhs")
    cfg.lhs_pairs = true;
  else if (sampling != "random")
    throw std::invalid_argument("run config: pair_sampling must be random|lhs");
  cfg.copula_cache = root.value("copula_cache", true);
  cfg.propagation_samples =
      root.value("propagation_samples", cfg.propagation_samples);
  cfg.performance_function =
      root.value("performance_function", cfg.performance_function);
  cfg.band_grid_points = root.value("band_grid_points", cfg.band_grid_points);
  cfg.band_members = root.value("band_members", cfg.band_members);
  if (root.contains("band_grid"))
    cfg.band_grid = root.at("band_grid").get<std::vector<double>>();
  const std::string until = root.value("run_until", "band");
  if (until == "infer")
    cfg.run_until = PipelineStage::Infer;
  else if (until == "ensemble")
    cfg.run_until = PipelineStage::Ensemble;
  else if (until == "propagate")
    cfg.run_until = PipelineStage::Propagate;
  else if (until == "band")
    cfg.run_until = PipelineStage::Band;
  else
    throw std::invalid_argument("run config: bad run_until '" + until + "'");
  cfg.qstar_table_points = root.value("qstar_table_points", 0);

  if (cfg.n_td < 1 || cfg.n_tc < 1 || cfg.propagation_samples < 1 ||
      cfg.band_grid_points < 2)
    throw std::invalid_argument("run config: counts must be positive");
  return cfg;
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

namespace {

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

struct ResolvedInputs {
  Matrix data;
  std::vector<std::string> header;
  std::vector<std::string> variables;
  std::vector<std::size_t> var_col;  // variable index -> data column
};

ResolvedInputs resolve_inputs(const RunConfig& cfg) {
  ResolvedInputs r;
  if (cfg.data.has_value()) {
    r.data = *cfg.data;
    r.header = cfg.data_header;
    if (r.header.size() != r.data.cols)
      throw std::invalid_argument("pipeline: injected data needs a header");
  } else {
    if (cfg.data_path.empty())
      throw std::invalid_argument("pipeline: no data path or injected data");
    r.data = ingest_csv(cfg.data_path, &r.header);
  }
  r.variables = cfg.variables.empty() ? r.header : cfg.variables;

  for (const auto& v : r.variables) {
    auto it = std::find(r.header.begin(), r.header.end(), v);
    if (it == r.header.end())
      throw std::invalid_argument("pipeline: variable '" + v +
                                  "' not present in the data header");
    r.var_col.push_back(static_cast<std::size_t>(it - r.header.begin()));
  }

  std::set<std::string> seen;
  for (const auto& b : cfg.blocks) {
    const std::size_t cnt = b.is_pair ? 2 : 1;
    for (std::size_t q = 0; q < cnt; ++q) {
      if (std::find(r.variables.begin(), r.variables.end(), b.vars[q]) ==
          r.variables.end())
        throw std::invalid_argument("pipeline: block variable '" + b.vars[q] +
                                    "' missing from the variable list");
      if (!seen.insert(b.vars[q]).second)
        throw std::invalid_argument("pipeline: variable '" + b.vars[q] +
                                    "' appears in more than one block");
    }
  }
  if (seen.size() != r.variables.size())
    throw std::invalid_argument(
        "pipeline: blocks must cover every variable exactly once");
  return r;
}

std::size_t var_index(const std::vector<std::string>& variables,
                      const std::string& name) {
  return static_cast<std::size_t>(
      std::find(variables.begin(), variables.end(), name) - variables.begin());
}

std::vector<PriorSpec> copula_prior_list(const RunConfig& cfg) {
  std::vector<PriorSpec> priors;
  for (auto f : cfg.copula_candidates) {
    auto it = cfg.copula_priors.find(copula_family_name(f));
    priors.push_back(it != cfg.copula_priors.end() ? it->second
                                                   : default_copula_prior(f));
  }
  return priors;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg) {
  PipelineResult res;
  const ResolvedInputs in = resolve_inputs(cfg);
  res.variables = in.variables;
  const std::size_t dim = in.variables.size();

  if (cfg.known_uniform && cfg.run_until != PipelineStage::Infer)
    throw std::invalid_argument(
        "pipeline: known uniform marginals support only run_until=infer");

  auto column_of = [&](const std::string& name) {
    return in.data.column(in.var_col[var_index(in.variables, name)]);
  };

  const auto copula_priors = copula_prior_list(cfg);
  const InferenceConfig copula_cfg =
      cfg.copula_inference.value_or(cfg.inference);

  // Stage: infer.
  if (cfg.known_uniform) {
    for (std::size_t bi = 0; bi < cfg.blocks.size(); ++bi) {
      const auto& b = cfg.blocks[bi];
      if (!b.is_pair) continue;
      const auto c1 = column_of(b.vars[0]);
      const auto c2 = column_of(b.vars[1]);
      std::vector<UnitPair> pseudo(c1.size());
      for (std::size_t i = 0; i < c1.size(); ++i) {
        if (!(c1[i] >= 0.0 && c1[i] <= 1.0 && c2[i] >= 0.0 && c2[i] <= 1.0))
          throw std::invalid_argument(
              "pipeline: known-uniform data must lie in [0,1]");
        pseudo[i] = {clamp_unit(c1[i]), clamp_unit(c2[i])};
      }
      const auto models = infer_copula_models(
          pseudo, cfg.copula_candidates, copula_priors, copula_cfg,
          derive_seed(cfg.seed, "copula_demo", bi));
      const std::string scope = "pair:" + b.vars[0] + "," + b.vars[1];
      for (std::size_t j = 0; j < models.candidates.size(); ++j)
        res.model_table.push_back({scope, copula_family_name(models.candidates[j]),
                                   models.models.log_evidence[j],
                                   models.models.probability[j],
                                   static_cast<bool>(models.models.retained[j])});
    }
  } else {
    res.marginal_posteriors.resize(dim);
    for (std::size_t v = 0; v < dim; ++v) {
      const auto col = in.data.column(in.var_col[v]);
      res.marginal_posteriors[v] =
          infer_marginals(col, cfg.marginal_candidates, {}, cfg.inference,
                          derive_seed(cfg.seed, "marginal", v));
      const auto& ms = res.marginal_posteriors[v];
      for (std::size_t j = 0; j < ms.candidates.size(); ++j)
        res.model_table.push_back({in.variables[v],
                                   marginal_family_name(ms.candidates[j]),
                                   ms.models.log_evidence[j],
                                   ms.models.probability[j],
                                   static_cast<bool>(ms.models.retained[j])});
    }
  }

  auto finish = [&]() {
    if (!cfg.output_dir.empty()) {
      write_run(cfg.output_dir, res, cfg);
      res.dir = cfg.output_dir;
    }
    return res;
  };

  if (cfg.run_until == PipelineStage::Infer) return finish();

  // Stage: ensemble.
  CopulaInferenceCache cache;
  const std::uint64_t copula_infer_seed = derive_seed(cfg.seed, "copula_infer");
  InputEnsemble ens;
  ens.dim = dim;
  ens.n_td = cfg.n_td;
  ens.n_tc = cfg.n_tc;
  for (std::size_t bi = 0; bi < cfg.blocks.size(); ++bi) {
    const auto& b = cfg.blocks[bi];
    InputBlock block;
    if (b.is_pair) {
      block.kind = InputBlock::Kind::Pair;
      block.vars = {var_index(in.variables, b.vars[0]),
                    var_index(in.variables, b.vars[1])};
      const auto& post1 = res.marginal_posteriors[block.vars[0]];
      const auto& post2 = res.marginal_posteriors[block.vars[1]];
      MarginalEnsemble pairs = draw_marginal_pairs(
          post1, post2, cfg.n_td, derive_seed(cfg.seed, "pairs", bi),
          cfg.lhs_pairs);

      std::vector<ConditionalCopulaSet> sets(cfg.n_td);
      if (cfg.mode == DependenceMode::Copula) {
        const auto c1 = column_of(b.vars[0]);
        const auto c2 = column_of(b.vars[1]);
        std::vector<std::array<double, 2>> data_pairs(c1.size());
        for (std::size_t i = 0; i < c1.size(); ++i)
          data_pairs[i] = {c1[i], c2[i]};
        std::vector<double> prob_acc(cfg.copula_candidates.size(), 0.0);
        for (std::size_t l = 0; l < cfg.n_td; ++l) {
          sets[l] = infer_copula_conditional(
              pairs.pairs[l], data_pairs, cfg.copula_candidates, copula_priors,
              copula_cfg, cfg.n_tc, copula_infer_seed,
              derive_seed(cfg.seed, "copula_draw", bi, l),
              cfg.copula_cache ? &cache : nullptr);
          for (std::size_t j = 0; j < prob_acc.size(); ++j)
            prob_acc[j] += sets[l].probability[j];
        }
        const std::string scope = "pair:" + b.vars[0] + "," + b.vars[1];
        for (std::size_t j = 0; j < cfg.copula_candidates.size(); ++j)
          res.model_table.push_back(
              {scope, copula_family_name(cfg.copula_candidates[j]), 0.0,
               prob_acc[j] / static_cast<double>(cfg.n_td), true});
      } else {
        CopulaSpec fixed;
        if (cfg.mode == DependenceMode::GaussianRho)
          fixed = make_copula(CopulaFamily::Gaussian, cfg.gaussian_rho);
        for (std::size_t l = 0; l < cfg.n_td; ++l) {
          sets[l].candidates = {fixed.family};
          sets[l].probability = {1.0};
          sets[l].log_evidence = {0.0};
          sets[l].draws.assign(cfg.n_tc, CopulaDraw{fixed, {0, 0}});
        }
      }
      block.pair = assemble_ensemble(pairs, std::move(sets));
    } else {
      block.kind = InputBlock::Kind::Single;
      block.vars = {var_index(in.variables, b.vars[0]), 0};
      block.single.draws = draw_marginal_models(
          res.marginal_posteriors[block.vars[0]], cfg.n_td,
          derive_seed(cfg.seed, "single", bi), cfg.lhs_pairs);
    }
    ens.blocks.push_back(std::move(block));
  }
  res.ensemble = std::move(ens);

  if (cfg.run_until == PipelineStage::Ensemble) return finish();

  // Stage: propagate.
  OptimalDensity q(res.ensemble);
  const auto g = make_performance_function(cfg.performance_function, dim);
  res.run = propagate(q, g, cfg.propagation_samples,
                      derive_seed(cfg.seed, "propagate"));
  res.g_calls = g.calls();
  if (cfg.qstar_table_points > 0) {
    QstarTable table(q, cfg.qstar_table_points);
    res.qstar_table_error =
        table.max_rel_error(200, derive_seed(cfg.seed, "qstar_table"));
    if (res.qstar_table_error >= 1e-2)
      throw std::runtime_error(
          "pipeline: q* lookup table interpolation error above 1e-2");
  }

  if (cfg.run_until == PipelineStage::Propagate) return finish();

  // Stage: band.
  std::vector<double> grid;
  if (cfg.band_grid.has_value()) {
    grid = *cfg.band_grid;
  } else {
    double lo = res.run.g[0], hi = res.run.g[0];
    for (double v : res.run.g) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    grid.resize(cfg.band_grid_points);
    for (std::size_t j = 0; j < grid.size(); ++j)
      grid[j] = lo + (hi - lo) * static_cast<double>(j) /
                         static_cast<double>(grid.size() - 1);
  }
  res.band = cdf_band(res.run, res.ensemble, grid, cfg.band_members);
  return finish();
}

CdfBand reweight_only(const WeightedRun& run,
                      const std::vector<bool>& stored_real_support,
                      const InputEnsemble& new_ensemble,
                      std::span<const double> grid, std::size_t max_members) {
  const auto new_support = new_ensemble.real_support();
  if (stored_real_support.size() != new_support.size())
    throw std::invalid_argument("reweight: ensemble dimension mismatch");
  for (std::size_t v = 0; v < new_support.size(); ++v)
    if (new_support[v] && !stored_real_support[v])
      throw std::runtime_error(
          "reweight: new candidates put mass on variable " + std::to_string(v) +
          " outside the stored sampling density's support");
  return cdf_band(run, new_ensemble, grid, max_members);
}

// ---------------------------------------------------------------------------
// artifacts
// ---------------------------------------------------------------------------

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string model_table_csv(const std::vector<ModelTableRow>& rows) {
  std::string out = "scope,model,log_evidence,probability,retained\n";
  for (const auto& r : rows) {
    out += r.scope + "," + r.model + "," + format_double(r.log_evidence) + "," +
           format_double(r.probability) + "," + (r.retained ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace

void write_run(const std::filesystem::path& dir, const PipelineResult& result,
               const RunConfig& cfg) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["version"] = kVersion;
  manifest["seed"] = cfg.seed;
  manifest["rng"] = "mt19937_64 + inverse-cdf transforms";
  manifest["n_td"] = cfg.n_td;
  manifest["n_tc"] = cfg.n_tc;
  manifest["propagation_samples"] = cfg.propagation_samples;
  manifest["performance_function"] = cfg.performance_function;
  manifest["g_calls"] = result.g_calls;
  manifest["variables"] = result.variables;
  json files = json::object();

  auto put_file = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    files[name] = hex64(fnv1a64(text));
  };

  put_file("model_probs.csv", model_table_csv(result.model_table));

  for (std::size_t v = 0; v < result.marginal_posteriors.size(); ++v) {
    const auto& ms = result.marginal_posteriors[v];
    for (std::size_t j = 0; j < ms.candidates.size(); ++j) {
      if (!ms.models.retained[j]) continue;
      const auto& chain = ms.models.chains[j];
      Matrix table(chain.samples.size(), 3);
      for (std::size_t i = 0; i < chain.samples.size(); ++i) {
        table(i, 0) = chain.samples[i][0];
        table(i, 1) = chain.samples[i][1];
        table(i, 2) = chain.log_posterior[i];
      }
      const std::vector<std::string> header{"p0", "p1", "log_posterior"};
      put_file("posterior_" + sanitize(result.variables[v]) + "_" +
                   marginal_family_name(ms.candidates[j]) + ".csv",
               csv_to_string(header, table));
    }
  }

  if (!result.ensemble.blocks.empty()) {
    const std::string ens = input_ensemble_to_json(result.ensemble);
    put_file("ensemble.json", ens);
    manifest["ensemble_hash"] = hex64(fnv1a64(ens));
    json support = json::array();
    for (bool b : result.ensemble.real_support()) support.push_back(b);
    manifest["real_support"] = support;
  }

  if (!result.run.g.empty()) {
    std::vector<std::string> header = result.variables;
    header.push_back("g");
    header.push_back("log_q");
    Matrix table(result.run.samples.rows, result.run.samples.cols + 2);
    for (std::size_t i = 0; i < table.rows; ++i) {
      for (std::size_t j = 0; j < result.run.samples.cols; ++j)
        table(i, j) = result.run.samples(i, j);
      table(i, result.run.samples.cols) = result.run.g[i];
      table(i, result.run.samples.cols + 1) = result.run.log_q[i];
    }
    put_file("run_samples.csv", csv_to_string(header, table));
    manifest["run_seed"] = result.run.seed;
    manifest["run_ensemble_hash"] = hex64(result.run.ensemble_hash);
    manifest["g_name"] = result.run.g_name;
  }

  if (!result.band.grid.empty()) {
    std::vector<std::string> header{"grid", "lo", "hi"};
    for (std::size_t m = 0; m < result.band.members.rows; ++m)
      header.push_back("member_" + std::to_string(m));
    Matrix table(result.band.grid.size(), 3 + result.band.members.rows);
    for (std::size_t j = 0; j < result.band.grid.size(); ++j) {
      table(j, 0) = result.band.grid[j];
      table(j, 1) = result.band.lo[j];
      table(j, 2) = result.band.hi[j];
      for (std::size_t m = 0; m < result.band.members.rows; ++m)
        table(j, 3 + m) = result.band.members(m, j);
    }
    put_file("cdf_band.csv", csv_to_string(header, table));
    manifest["band_mean_width"] = result.band.mean_width;
    manifest["band_candidates"] = result.band.n_candidates;
  }

  if (result.qstar_table_error >= 0.0)
    manifest["qstar_table_max_rel_error"] = result.qstar_table_error;

  manifest["files"] = std::move(files);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

WeightedRun load_run(const std::filesystem::path& dir,
                     std::vector<bool>* real_support) {
  const json manifest = json::parse(read_text(dir / "manifest.json"));
  std::vector<std::string> header;
  const Matrix table = parse_csv(read_text(dir / "run_samples.csv"), &header);
  if (table.cols < 3)
    throw std::runtime_error("load_run: run_samples.csv is malformed");
  WeightedRun run;
  const std::size_t dim = table.cols - 2;
  run.samples = Matrix(table.rows, dim);
  run.g.resize(table.rows);
  run.log_q.resize(table.rows);
  for (std::size_t i = 0; i < table.rows; ++i) {
    for (std::size_t j = 0; j < dim; ++j) run.samples(i, j) = table(i, j);
    run.g[i] = table(i, dim);
    run.log_q[i] = table(i, dim + 1);
  }
  run.seed = manifest.value("run_seed", 0ull);
  run.g_name = manifest.value("g_name", "");
  if (manifest.contains("run_ensemble_hash")) {
    const std::string h = manifest["run_ensemble_hash"];
    run.ensemble_hash = std::stoull(h, nullptr, 16);
  }
  if (real_support) {
    real_support->clear();
    for (const auto& b : manifest.at("real_support"))
      real_support->push_back(b.get<bool>());
  }
  return run;
}

std::string report_text(const std::filesystem::path& dir) {
  const json manifest = json::parse(read_text(dir / "manifest.json"));
  std::ostringstream out;
  out << "run report (" << dir.string() << ")\n";
  out << "  version: " << manifest.value("version", "?") << "\n";
  out << "  seed: " << manifest.value("seed", 0ull) << "\n";
  out << "  N_td x N_tc: " << manifest.value("n_td", 0ull) << " x "
      << manifest.value("n_tc", 0ull) << "\n";
  out << "  performance function: "
      << manifest.value("performance_function", "?") << " ("
      << manifest.value("g_calls", 0ll) << " calls)\n";
  if (manifest.contains("band_mean_width")) {
    out << "  band candidates: " << manifest["band_candidates"].get<std::size_t>()
        << "\n";
    out << "  band mean width: " << manifest["band_mean_width"].get<double>()
        << "\n";
  }
  const auto probs_path = dir / "model_probs.csv";
  if (std::filesystem::exists(probs_path)) {
    out << "  model probabilities:\n";
    std::istringstream in(read_text(probs_path));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line))
      if (!line.empty()) out << "    " << line << "\n";
  }
  return out.str();
}

}  // namespace cuq
