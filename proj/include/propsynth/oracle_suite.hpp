#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "propsynth/ops.hpp"
#include "propsynth/oracle.hpp"
#include "propsynth/parallel.hpp"

namespace propsynth {

// The CI gate: abstract-vs-concrete mixing agreement, semiring axioms,
// linearity table, covering and monotonicity checks.
struct OracleSuiteOptions {
  CatalogConfig catalog;
  std::vector<TensorShape> shapes{{2, 6, 6, 4}, {2, 4, 4, 8}};
  int chain_samples = 50;
  int max_chain_len = 3;
  int covering_samples = 100;
  std::uint64_t seed = 0xabacabaULL;
  ExecPolicy policy = ExecPolicy::Serial;
  // Test hook: pretend this op kind has a corrupted abstract table.
  std::string corrupt_op_kind;
};

struct OracleSuiteReport {
  struct Violation {
    std::string check;
    std::string detail;
  };
  int ops_checked = 0;
  int chains_checked = 0;
  int covering_samples = 0;
  std::vector<Violation> violations;
  std::vector<std::string> warnings;
  bool ok() const { return violations.empty(); }
  std::string render() const;
};

OracleSuiteReport run_oracle_suite(const OracleSuiteOptions& opt = {});

}  // namespace propsynth
