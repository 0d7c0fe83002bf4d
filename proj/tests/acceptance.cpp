// Acceptance gate: runs every criterion and prints one pass/fail line each.
// Exits nonzero if any criterion fails.

#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "exitlab/parallel.hpp"
#include "exitlab/verify.hpp"

int main(int argc, char** argv) {
  using namespace exitlab;
  verify::Suite suite = verify::Suite::kFull;
  std::uint64_t seed = 42;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--quick") == 0) suite = verify::Suite::kQuick;
    if (std::strcmp(argv[i], "--seed") == 0 && i + 1 < argc)
      seed = std::strtoull(argv[++i], nullptr, 10);
  }
  if (const char* env = std::getenv("EXITLAB_THREADS"))
    parallel::set_threads(std::atoi(env));

  const auto report = verify::run_suite(suite, seed);
  for (const auto& c : report.results)
    std::printf("[%s] criterion %2d: %-50s (%.1fs)  %s\n",
                c.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), c.seconds,
                c.detail.c_str());
  std::printf("%s (%zu criteria, seed %llu)\n",
              report.all_pass() ? "ALL PASS" : "FAILURES PRESENT",
              report.results.size(), static_cast<unsigned long long>(seed));
  return report.all_pass() ? 0 : 1;
}
