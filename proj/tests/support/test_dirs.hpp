#pragma once

#include <filesystem>
#include <string>

#ifndef EIQA_TEST_TMP
#define EIQA_TEST_TMP "eiqa-test-tmp"
#endif

// Fresh, empty scratch directory under the build tree.
inline std::filesystem::path test_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::path(EIQA_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}
