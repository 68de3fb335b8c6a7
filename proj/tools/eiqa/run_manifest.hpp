#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace eiqa::cli {

// Per-invocation context shared by every command.
struct RunContext {
  std::string command;
  std::string config_snapshot;  // INI text of every option, defaults included
  std::filesystem::path out;
  bool strict_determinism = false;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

struct RunManifest {
  std::vector<std::uint64_t> seeds;
  std::vector<std::filesystem::path> outputs;  // relative to the --out root
  double wall_seconds = 0.0;
};

// Writes <out>/runs/<command>.json and <out>/runs/<command>.ini; the .ini
// reproduces the run via `eiqa <command> --config <out>/runs/<command>.ini`.
// Wall-clock fields are zero under --strict-determinism.
void write_run_manifest(const RunContext& ctx, RunManifest manifest);

std::string version_tag();

}  // namespace eiqa::cli
