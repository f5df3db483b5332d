#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "multifield/multifield.hpp"
#include "oracles.hpp"

namespace mf = multifield;

// Runs fn and checks it throws mf::Error with the given code.
#define EXPECT_MF_ERROR(stmt, error_code)                                      \
  do {                                                                        \
    bool thrown_ = false;                                                     \
    try {                                                                     \
      stmt;                                                                   \
    } catch (const mf::Error& e_) {                                           \
      thrown_ = true;                                                         \
      EXPECT_EQ(e_.code(), error_code) << e_.what();                          \
    }                                                                         \
    EXPECT_TRUE(thrown_) << "expected " << mf::to_string(error_code);         \
  } while (0)

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("multifield_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
