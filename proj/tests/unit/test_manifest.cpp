#include <fstream>

#include "doctest.h"
#include "eiqa/errors.hpp"
#include "eiqa/image.hpp"
#include "eiqa/manifest.hpp"
#include "test_dirs.hpp"

using namespace eiqa;

namespace {

Manifest small_manifest() {
  Manifest m;
  m.k_algorithms = 2;
  m.generation_seed = 7;
  m.image_size = 16;
  m.records = {{0, 0, 0, "images/s00000_a00.ppm", 41.25},
               {0, 0, 1, "images/s00000_a01.ppm", 58.5},
               {1, 0, 0, "images/s00001_a00.ppm", 12.0},
               {1, 0, 1, "images/s00001_a01.ppm", 100.0}};
  return m;
}

const std::string kHeader = "#eiqa-manifest v1 seed=7 k=2 size=16\n";

}  // namespace

TEST_CASE("manifest text round trip") {
  const Manifest m = small_manifest();
  const std::string text = format_manifest(m);
  CHECK(text.rfind(kHeader, 0) == 0);
  CHECK(text.find("0\t0\t1\timages/s00000_a01.ppm\t58.5000\n") != std::string::npos);
  CHECK(parse_manifest(text) == m);
}

TEST_CASE("manifest file round trip and missing images") {
  const auto dir = test_dir("manifest_files");
  const Manifest m = small_manifest();
  save_manifest(m, dir / kManifestFileName);
  try {
    load_manifest(dir / kManifestFileName);
    FAIL("missing images were not reported");
  } catch (const ValidationError& e) {
    CHECK(e.items().size() == 4);
  }
  std::filesystem::create_directories(dir / "images");
  for (const auto& r : m.records) write_ppm16(Image(16, 16, 0.5), dir / r.enhanced_path);
  CHECK(load_manifest(dir / kManifestFileName) == m);
  std::filesystem::remove(dir / m.records[2].enhanced_path);
  try {
    load_manifest(dir / kManifestFileName);
    FAIL("missing image was not reported");
  } catch (const ValidationError& e) {
    REQUIRE(e.items().size() == 1);
    CHECK(e.items()[0].find("s00001_a00.ppm") != std::string::npos);
  }
}

TEST_CASE("manifest rejects out-of-range mos with the field and line") {
  const std::string text = kHeader + "0\t0\t0\ta.ppm\t50.0000\n0\t0\t1\tb.ppm\t101.0000\n";
  try {
    parse_manifest(text);
    FAIL("mos=101 accepted");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("mos") != std::string::npos);
  }
}

TEST_CASE("manifest rejects malformed lines") {
  CHECK_THROWS_AS(parse_manifest("scene\tenv\n"), ParseError);
  CHECK_THROWS_AS(parse_manifest("#eiqa-manifest v1 seed=1 k=x size=16\n"), ParseError);
  try {
    parse_manifest(kHeader + "0\t0\t0\ta.ppm\t50\n0\t0\tone\tb.ppm\t40\n");
    FAIL("bad algo_id accepted");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  try {
    parse_manifest(kHeader + "0\t0\t0\ta.ppm\n");
    FAIL("short line accepted");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("manifest structural invariants") {
  CHECK_THROWS_AS(parse_manifest(kHeader), ValidationError);
  Manifest m = small_manifest();
  m.records.clear();
  CHECK_THROWS_AS(validate_manifest(m), ValidationError);
  m = small_manifest();
  m.records[1].algo_id = 0;
  CHECK_THROWS_AS(validate_manifest(m), ValidationError);
  m = small_manifest();
  m.k_algorithms = 3;
  CHECK_THROWS_AS(validate_manifest(m), ValidationError);
}

TEST_CASE("distinct id helpers") {
  const Manifest m = small_manifest();
  CHECK(scene_ids(m) == std::vector<int>{0, 1});
  CHECK(algo_ids(m) == std::vector<int>{0, 1});
  CHECK(env_ids(m) == std::vector<int>{0});
}

TEST_CASE("16-bit ppm is lossless for quantised images") {
  const auto dir = test_dir("ppm");
  Image img(5, 7);
  for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = (i * 37 % 101) / 100.0;
  const Image q = quantize16(img);
  write_ppm16(q, dir / "x.ppm");
  CHECK(read_ppm16(dir / "x.ppm") == q);
  CHECK(quantize16(q) == q);
  std::ofstream(dir / "bad.ppm") << "P3\n1 1\n255\n0 0 0\n";
  CHECK_THROWS(read_ppm16(dir / "bad.ppm"));
  CHECK_THROWS_AS(read_ppm16(dir / "absent.ppm"), IoError);
}

TEST_CASE("geometric transforms") {
  Image img(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) img.at(y, x, 0) = y * 4 + x;
  const Image r = rotate90(img, 1);
  CHECK(rotate90(r, 3) == img);
  CHECK(rotate90(img, 4) == img);
  CHECK(flip_horizontal(flip_horizontal(img)) == img);
  CHECK(flip_horizontal(img).at(0, 0, 0) == 3);
  const Image c = crop(img, 1, 2, 2);
  CHECK(c.at(0, 0, 0) == 6);
  CHECK(c.at(1, 1, 0) == 11);
  CHECK(center_crop(img, 2).at(0, 0, 0) == 5);
  CHECK_THROWS_AS(crop(img, 3, 3, 2), InvalidArgument);
}
