#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace adlens::test {

// Fresh scratch directory under the build tree, removed on construction.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::path(ADLENS_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace adlens::test
