#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>

namespace acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  std::filesystem::path work;  // scratch directory owned by the acceptance run
  std::filesystem::path cli;   // eiqa executable (criterion 10)
  int seeds = 5;
};

Outcome metric_oracles(const Context& ctx);         // 1
Outcome supcon_closed_form(const Context& ctx);     // 2
Outcome gradient_correctness(const Context& ctx);   // 3
Outcome sampler_guarantees(const Context& ctx);     // 4
Outcome freezing_and_composition(const Context& ctx);  // 5
Outcome preference_structure(const Context& ctx);   // 6
Outcome drop_ordering(const Context& ctx);          // 7
Outcome fusion_ordering(const Context& ctx);        // 8
Outcome sampling_ordering(const Context& ctx);      // 9
Outcome cli_determinism(const Context& ctx);        // 10

// Trains every seed of the shared experiment behind criteria 6 to 9 and
// writes <work>/experiment.json.
Outcome run_experiment(const Context& ctx);

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

}  // namespace acceptance
