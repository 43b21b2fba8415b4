#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "pivotmt/cli.hpp"

namespace cli {

struct Result {
  int status = 0;
  std::string out;
  std::string err;
};

inline Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.status = pivotmt::run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string operator/(const std::string& file) const { return (path / file).string(); }
};

}  // namespace cli
