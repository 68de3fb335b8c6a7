#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eiqa/image.hpp"

namespace eiqa {

struct SampleRecord {
  int scene_id = 0;
  int env_id = 0;
  int algo_id = 0;
  std::string enhanced_path;  // relative to the manifest directory
  double mos = 0.0;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct Manifest {
  std::vector<SampleRecord> records;
  int k_algorithms = 0;
  std::uint64_t generation_seed = 0;
  int image_size = 0;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline constexpr const char* kManifestFileName = "manifest.tsv";

// Structural invariants: non-empty, mos in [0,100], unique (scene, algo),
// k_algorithms equals the distinct algo count, 1..k records per scene.
void validate_manifest(const Manifest& m);

std::string format_manifest(const Manifest& m);
Manifest parse_manifest(const std::string& text);

void save_manifest(const Manifest& m, const std::filesystem::path& path);
// Parses and validates; also verifies that every referenced image exists
// next to the manifest (ValidationError lists the missing paths).
Manifest load_manifest(const std::filesystem::path& path);

// Distinct values, ascending.
std::vector<int> scene_ids(const Manifest& m);
std::vector<int> algo_ids(const Manifest& m);
std::vector<int> env_ids(const Manifest& m);

// A manifest together with its decoded images, indexed like m.records.
class Dataset {
 public:
  Dataset(Manifest manifest, std::vector<Image> images);
  static Dataset load(const std::filesystem::path& dir);

  const Manifest& manifest() const noexcept { return manifest_; }
  const Image& image(std::size_t index) const { return images_.at(index); }
  std::size_t size() const noexcept { return images_.size(); }

 private:
  Manifest manifest_;
  std::vector<Image> images_;
};

}  // namespace eiqa
