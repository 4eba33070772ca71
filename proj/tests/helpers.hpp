#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace testutil {

// Unique temp file removed on destruction.
class TempFile {
public:
  explicit TempFile(const std::string& suffix = ".tmp") {
    static std::atomic<uint64_t> counter{0};
    const auto dir = std::filesystem::temp_directory_path();
    path_ = (dir / ("bytener_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++) + suffix))
                .string();
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;

  const std::string& path() const { return path_; }

  void write(const std::string& content) const {
    std::ofstream out(path_, std::ios::binary);
    out << content;
  }

  std::string read() const {
    std::ifstream in(path_, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }

private:
  std::string path_;
};

}  // namespace testutil
