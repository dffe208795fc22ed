#pragma once

#include <string>
#include <vector>

#include "cuq/marginal.hpp"

namespace cuq {

enum class VineKind { CVine, DVine };

/// Pair-copula construction over a fixed tree structure.
///
/// pair_copulas[j-1][i-1] is the copula of tree level j, edge i:
///   C-vine: couples variables (j, j+i) conditioned on {1, ..., j-1}
///   D-vine: couples variables (i, i+j) conditioned on {i+1, ..., i+j-1}
/// (1-based variable labels; tree j has d-j edges).
struct VineSpec {
  VineKind kind = VineKind::CVine;
  std::size_t dimension = 2;
  std::vector<MarginalSpec> marginals;                 // d entries
  std::vector<std::vector<CopulaSpec>> pair_copulas;   // d-1 trees
};

void validate(const VineSpec& spec);

/// Joint log density; conditional cdf arguments come from the recursive
/// h-function evaluation. Returns -inf outside the marginal supports.
double vine_log_pdf(const VineSpec& spec, std::span<const double> x);

/// Sequential inverse-h sampling; deterministic given the seed.
Matrix vine_sample(const VineSpec& spec, std::size_t n, std::uint64_t seed);

std::string vine_to_json(const VineSpec& spec);
VineSpec vine_from_json(const std::string& text);

}  // namespace cuq
