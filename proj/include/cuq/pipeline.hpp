#pragma once

#include <filesystem>
#include <map>
#include <optional>

#include "cuq/propagation.hpp"

namespace cuq {

inline constexpr const char* kVersion = "0.1.0";

/// CSV with a header row; every cell must parse as a finite double. Parse
/// problems name the offending row and column.
Matrix ingest_csv(const std::filesystem::path& path,
                  std::vector<std::string>* header = nullptr);
Matrix parse_csv(const std::string& text, std::vector<std::string>* header);
void write_csv(const std::filesystem::path& path,
               std::span<const std::string> header, const Matrix& data);
std::string csv_to_string(std::span<const std::string> header,
                          const Matrix& data);

/// Data-generating truth model: independent blocks of bivariate copulas (or
/// unit-square copula samples when no marginals are given) and single
/// variables.
struct TruthBlock {
  bool is_pair = true;
  std::array<std::string, 2> names{};
  std::vector<MarginalSpec> marginals;  // 2 / 1 entries; empty pair = unit square
  CopulaSpec copula;                    // pair blocks only
};

struct TruthConfig {
  std::vector<TruthBlock> blocks;
  std::size_t n = 0;
  std::uint64_t seed = 0;

  std::vector<std::string> variable_names() const;
};

TruthConfig truth_config_from_json(const std::string& text);
Matrix simulate_truth(const TruthConfig& cfg);
Matrix simulate_truth(const TruthConfig& cfg, std::size_t n, std::uint64_t seed);

enum class DependenceMode { Copula, Independence, GaussianRho };
enum class PipelineStage { Infer, Ensemble, Propagate, Band };

struct RunConfig {
  std::string data_path;        // ignored when data is injected directly
  std::optional<Matrix> data;   // in-process use
  std::vector<std::string> data_header;  // aligned with injected data

  std::vector<std::string> variables;  // order defines the g input vector
  struct Block {
    bool is_pair = true;
    std::array<std::string, 2> vars{};
  };
  std::vector<Block> blocks;

  std::vector<MarginalFamily> marginal_candidates{
      MarginalFamily::Gaussian, MarginalFamily::Gamma, MarginalFamily::Lognormal,
      MarginalFamily::Weibull};
  std::vector<CopulaFamily> copula_candidates{
      CopulaFamily::Gaussian, CopulaFamily::Clayton, CopulaFamily::Frank,
      CopulaFamily::Gumbel};
  std::map<std::string, PriorSpec> copula_priors;  // family name -> override

  DependenceMode mode = DependenceMode::Copula;
  double gaussian_rho = 0.8;
  /// Data already lives on the unit square; marginals are known uniform and
  /// only copula inference runs (run_until must be Infer).
  bool known_uniform = false;

  InferenceConfig inference;                       // marginal stage
  std::optional<InferenceConfig> copula_inference;  // defaults to `inference`
  std::size_t n_td = 1000;
  std::size_t n_tc = 500;
  bool lhs_pairs = false;
  bool copula_cache = true;

  std::size_t propagation_samples = 5000;
  std::string performance_function = "halpin_tsai_e22";
  std::size_t band_grid_points = 50;
  std::size_t band_members = 0;
  std::optional<std::vector<double>> band_grid;

  std::uint64_t seed = 0;
  std::string output_dir;  // empty: keep results in memory only
  PipelineStage run_until = PipelineStage::Band;
  std::size_t qstar_table_points = 0;  // 0 disables the lookup table
};

RunConfig run_config_from_json(const std::string& text);

/// One scope's model table (a variable's marginals or a pair's copulas).
struct ModelTableRow {
  std::string scope, model;
  double log_evidence = 0.0, probability = 0.0;
  bool retained = false;
};

struct PipelineResult {
  std::vector<std::string> variables;
  std::vector<ModelTableRow> model_table;
  std::vector<MarginalModelSet> marginal_posteriors;  // per variable
  InputEnsemble ensemble;
  WeightedRun run;
  CdfBand band;
  long long g_calls = 0;
  double qstar_table_error = -1.0;  // <0 when the table is disabled
  std::filesystem::path dir;        // empty when nothing was written
};

PipelineResult run_pipeline(const RunConfig& cfg);

/// Rebuilds bands for a stored run against a new ensemble; never touches the
/// performance function. Refuses candidates whose support exceeds the stored
/// sampling density's support.
CdfBand reweight_only(const WeightedRun& run,
                      const std::vector<bool>& stored_real_support,
                      const InputEnsemble& new_ensemble,
                      std::span<const double> grid, std::size_t max_members = 0);

// Stored-run round trip for the reweight workflow.
void write_run(const std::filesystem::path& dir, const PipelineResult& result,
               const RunConfig& cfg);
WeightedRun load_run(const std::filesystem::path& dir,
                     std::vector<bool>* real_support = nullptr);

std::string report_text(const std::filesystem::path& dir);

}  // namespace cuq
