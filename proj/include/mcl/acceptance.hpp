#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mcl::acceptance {

struct CriterionResult {
  int id = 0;
  std::string label;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  std::uint64_t seed = 20260810;
};

// Runs the full validation battery (13 criteria). Deterministic per seed.
std::vector<CriterionResult> run_all(const Options& opt);

// Runs and prints one PASS/FAIL line per criterion; returns the number of
// failed criteria.
int run_and_print(const Options& opt, std::ostream& os);

}  // namespace mcl::acceptance
