#pragma once

#include "ssr/error.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

namespace ssr::test {

// Asserts that `expr` throws ssr::Error of the given kind.
#define EXPECT_SSR_ERROR(expr, error_kind)                                              \
  do {                                                                                  \
    try {                                                                               \
      (void)(expr);                                                                     \
      ADD_FAILURE() << "expected " << ::ssr::to_string(error_kind) << " error";         \
    } catch (const ::ssr::Error& e_) {                                                  \
      EXPECT_EQ(e_.kind(), error_kind) << e_.what();                                    \
    }                                                                                   \
  } while (0)

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ssr-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace ssr::test
