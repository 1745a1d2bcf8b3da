#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparsesdf/solvers.hpp"
#include "sparsesdf/theory.hpp"

namespace sparsesdf {

/// Settings for the randomized theory suite.
struct VerifyConfig {
  std::uint64_t seed = 0;
  int support_instances = 200;        // support bound and interpolation
  std::vector<int> support_T{5, 20, 60};
  int max_ratio = 20;                 // P drawn from (T, max_ratio * T]
  int limit_instances = 50;           // ridge and l1 limits
  int gap_instances = 100;            // mean-gap identity
  int monotone_seeds = 20;            // v_P along nested draws
  int scale_instances = 50;
  int feasible_directions = 50;       // kernel moves per feasible-set instance
  int feasible_instances = 5;
  int table_T = 20;                   // nested sequence behind the gap table
  int table_D = 3;
  std::string fault = "none";         // "zero_kernel_move" drops h from the identity side
  SolverOptions solver;
  int threads = 1;

  void validate() const;
};

struct PropertyResult {
  std::string name;
  bool passed = true;
  int instances = 0;
  int failures = 0;
  double worst = 0.0;      // largest violation measure seen (property specific)
  double tolerance = 0.0;
  std::optional<std::uint64_t> failing_seed;  // first failing instance, for replay
  std::string note;
};

struct TheoryReport {
  std::uint64_t seed = 0;
  std::string fault;
  std::vector<PropertyResult> properties;
  GapBoundReport gap_table;
  bool all_passed = false;
  double seconds = 0.0;
};

/// Instance seed for property `property` (its position in the report) and instance `i`.
std::uint64_t instance_seed(std::uint64_t seed, int property, int i);

/// Random T x P instance used by the suite: Gaussian entries when the seed is
/// even, managed RFF factors from a small synthetic panel when it is odd.
Matrix suite_instance(std::uint64_t seed, int T, int P);

TheoryReport run_theory_suite(const VerifyConfig& config);

nlohmann::json to_json(const PropertyResult& result);
nlohmann::json to_json(const TheoryReport& report);
nlohmann::json to_json(const VerifyConfig& config);

}  // namespace sparsesdf
