#include "run_manifest.hpp"

#include <fstream>

#include "eiqa/errors.hpp"
#include "json.hpp"

namespace eiqa::cli {

std::string version_tag() { return std::string(EIQA_VERSION) + "+" + EIQA_GIT_TAG; }

void write_run_manifest(const RunContext& ctx, RunManifest m) {
  const auto dir = ctx.out / "runs";
  std::filesystem::create_directories(dir);
  const auto ini = std::filesystem::path("runs") / (ctx.command + ".ini");
  m.outputs.push_back(ini);
  m.outputs.push_back(std::filesystem::path("runs") / (ctx.command + ".json"));
  if (!ctx.strict_determinism)
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.started).count();

  nlohmann::ordered_json j;
  j["command"] = ctx.command;
  j["version"] = version_tag();
  j["config_file"] = ini.generic_string();
  j["config"] = ctx.config_snapshot;
  j["seeds"] = m.seeds;
  auto& outputs = j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& p : m.outputs) outputs.push_back(p.generic_string());
  j["wall_seconds"] = m.wall_seconds;
  j["strict_determinism"] = ctx.strict_determinism;

  std::ofstream ini_out(ctx.out / ini, std::ios::binary);
  ini_out << ctx.config_snapshot;
  std::ofstream json_out(dir / (ctx.command + ".json"), std::ios::binary);
  json_out << j.dump(2) << '\n';
  if (!ini_out || !json_out) throw IoError("cannot write run manifest under " + dir.string());
}

}  // namespace eiqa::cli
