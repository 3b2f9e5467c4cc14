#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
public:
  TempDir()
  {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("resrag-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir()
  {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(TempDir const &) = delete;
  TempDir &operator=(TempDir const &) = delete;

  std::filesystem::path const &path() const { return path_; }
  std::filesystem::path operator/(std::string const &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline std::filesystem::path fixtures() { return RESRAG_FIXTURES_DIR; }
inline std::filesystem::path data_dir() { return RESRAG_DATA_DIR; }

} // namespace testing_support
