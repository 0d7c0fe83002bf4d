#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace exitlab::verify {

enum class Suite { kQuick, kFull };

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;  // measured values, human-readable
  double seconds = 0.0;
};

struct Report {
  Suite suite = Suite::kQuick;
  std::uint64_t seed = 0;
  std::vector<CriterionResult> results;

  bool all_pass() const {
    for (const auto& r : results)
      if (!r.pass) return false;
    return true;
  }
};

// Runs the acceptance criteria. Quick keeps the cheap identity/law checks
// (1, 2, 3, 9, 10); full adds the desk-scale asymptotic reproductions.
Report run_suite(Suite suite, std::uint64_t seed);

}  // namespace exitlab::verify
