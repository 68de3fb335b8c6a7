#include "eiqa/manifest.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "eiqa/errors.hpp"

namespace eiqa {

namespace {

constexpr std::string_view kHeaderPrefix = "#eiqa-manifest v1 ";

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

// Parses "key=<int>" from the header.
template <typename T>
T header_field(std::string_view header, std::string_view key) {
  const std::string needle = std::string(key) + "=";
  const auto pos = header.find(needle);
  if (pos == std::string_view::npos) throw ParseError(1, "header missing " + std::string(key));
  auto rest = header.substr(pos + needle.size());
  rest = rest.substr(0, rest.find(' '));
  T value{};
  if (!parse_number(rest, value)) throw ParseError(1, "header field " + std::string(key) + " is not an integer");
  return value;
}

}  // namespace

void validate_manifest(const Manifest& m) {
  if (m.records.empty()) throw ValidationError("manifest has no records");
  std::set<std::pair<int, int>> seen;
  std::map<int, int> per_scene;
  std::set<int> algos;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    const std::string where = "record " + std::to_string(i) + ": ";
    if (!(r.mos >= 0.0 && r.mos <= 100.0)) throw ValidationError(where + "field mos=" + std::to_string(r.mos) + " outside [0,100]");
    if (r.scene_id < 0) throw ValidationError(where + "field scene_id is negative");
    if (r.algo_id < 0) throw ValidationError(where + "field algo_id is negative");
    if (!seen.insert({r.scene_id, r.algo_id}).second)
      throw ValidationError(where + "duplicate (scene_id, algo_id) = (" + std::to_string(r.scene_id) + ", " +
                            std::to_string(r.algo_id) + ")");
    ++per_scene[r.scene_id];
    algos.insert(r.algo_id);
  }
  if (static_cast<int>(algos.size()) != m.k_algorithms)
    throw ValidationError("k=" + std::to_string(m.k_algorithms) + " but " + std::to_string(algos.size()) +
                          " distinct algo_ids present");
  for (const auto& [scene, count] : per_scene)
    if (count > m.k_algorithms)
      throw ValidationError("scene " + std::to_string(scene) + " has more than k records");
}

std::string format_manifest(const Manifest& m) {
  std::string out;
  out += std::string(kHeaderPrefix) + "seed=" + std::to_string(m.generation_seed) +
         " k=" + std::to_string(m.k_algorithms) + " size=" + std::to_string(m.image_size) + "\n";
  char mos[32];
  for (const auto& r : m.records) {
    std::snprintf(mos, sizeof(mos), "%.4f", r.mos);
    out += std::to_string(r.scene_id) + '\t' + std::to_string(r.env_id) + '\t' + std::to_string(r.algo_id) + '\t' +
           r.enhanced_path + '\t' + mos + '\n';
  }
  return out;
}

Manifest parse_manifest(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind(kHeaderPrefix, 0) != 0)
    throw ParseError(1, "expected header '#eiqa-manifest v1 seed=<int> k=<int> size=<int>'");
  Manifest m;
  m.generation_seed = header_field<std::uint64_t>(line, "seed");
  m.k_algorithms = header_field<int>(line, "k");
  m.image_size = header_field<int>(line, "size");

  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 5) throw ParseError(line_no, "expected 5 tab-separated fields, got " + std::to_string(fields.size()));
    SampleRecord r;
    if (!parse_number(fields[0], r.scene_id)) throw ParseError(line_no, "field scene_id is not an integer");
    if (!parse_number(fields[1], r.env_id)) throw ParseError(line_no, "field env_id is not an integer");
    if (!parse_number(fields[2], r.algo_id)) throw ParseError(line_no, "field algo_id is not an integer");
    if (fields[3].empty()) throw ParseError(line_no, "field relative_path is empty");
    r.enhanced_path = std::string(fields[3]);
    try {
      std::size_t used = 0;
      r.mos = std::stod(std::string(fields[4]), &used);
      if (used != fields[4].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(line_no, "field mos is not a number");
    }
    if (!(r.mos >= 0.0 && r.mos <= 100.0))
      throw ParseError(line_no, "field mos=" + std::string(fields[4]) + " outside [0,100]");
    m.records.push_back(std::move(r));
  }
  validate_manifest(m);
  return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  validate_manifest(m);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << format_manifest(m);
  if (!os) throw IoError("write failed: " + path.string());
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open manifest: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  Manifest m = parse_manifest(ss.str());
  std::vector<std::string> missing;
  const auto dir = path.parent_path();
  for (const auto& r : m.records)
    if (!std::filesystem::exists(dir / r.enhanced_path)) missing.push_back((dir / r.enhanced_path).string());
  if (!missing.empty()) {
    const std::string what = std::to_string(missing.size()) + " referenced image(s) missing, first: " + missing.front();
    throw ValidationError(what, std::move(missing));
  }
  return m;
}

namespace {
template <typename Proj>
std::vector<int> distinct(const Manifest& m, Proj proj) {
  std::set<int> s;
  for (const auto& r : m.records) s.insert(proj(r));
  return {s.begin(), s.end()};
}
}  // namespace

std::vector<int> scene_ids(const Manifest& m) { return distinct(m, [](const SampleRecord& r) { return r.scene_id; }); }
std::vector<int> algo_ids(const Manifest& m) { return distinct(m, [](const SampleRecord& r) { return r.algo_id; }); }
std::vector<int> env_ids(const Manifest& m) { return distinct(m, [](const SampleRecord& r) { return r.env_id; }); }

Dataset::Dataset(Manifest manifest, std::vector<Image> images)
    : manifest_(std::move(manifest)), images_(std::move(images)) {
  if (images_.size() != manifest_.records.size()) throw InvalidArgument("dataset image count differs from manifest");
}

Dataset Dataset::load(const std::filesystem::path& dir) {
  Manifest m = load_manifest(dir / kManifestFileName);
  std::vector<Image> images;
  images.reserve(m.records.size());
  for (const auto& r : m.records) {
    images.push_back(read_ppm16(dir / r.enhanced_path));
    if (images.back().height() != m.image_size || images.back().width() != m.image_size)
      throw ValidationError("image size mismatch for " + r.enhanced_path);
  }
  return Dataset(std::move(m), std::move(images));
}

}  // namespace eiqa
