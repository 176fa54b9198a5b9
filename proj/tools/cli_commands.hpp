#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "propsynth/evolve.hpp"
#include "propsynth/ops.hpp"

namespace propsynth::cli {

// Exit codes: 0 ok, 2 input error, 3 infeasible, 4 synthesis failed,
// 5 oracle violation.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 2;
inline constexpr int kInfeasible = 3;
inline constexpr int kSynthesisFailed = 4;
inline constexpr int kOracleViolation = 5;

struct RunConfig {
  CatalogConfig catalog;
  EvolveConfig evolve;
  std::string evaluator = "surrogate";
};

// Parses the JSON config file; throws propsynth::ParseError on bad input
// (including out-of-range probabilities).
RunConfig load_run_config(const std::string& path);

int cmd_infer(const std::string& graph_file, const std::string& format);
int cmd_synth(const std::string& target_file, const RunConfig& cfg, std::uint64_t seed,
              const std::string& out_dir);
int cmd_evolve(const std::string& seed_graph_file, const RunConfig& cfg, std::uint64_t seed,
               const std::string& out_dir);
int cmd_oracle_check(const RunConfig& cfg, const std::string& corrupt_op_kind, bool parallel);

int log_level();  // from PROPSYNTH_LOG, default 0

}  // namespace propsynth::cli
