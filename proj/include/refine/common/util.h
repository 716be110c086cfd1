#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace refine {

/// Collects non-fatal warnings for a caller while also logging them.
class Diagnostics {
 public:
  void warn(std::string message);
  const std::vector<std::string>& warnings() const { return warnings_; }
  void append(const Diagnostics& other);

 private:
  mutable std::mutex mu_;
  std::vector<std::string> warnings_;
};

inline void warn(Diagnostics* diag, std::string message) {
  if (diag) {
    diag->warn(std::move(message));
  } else {
    Diagnostics scratch;
    scratch.warn(std::move(message));
  }
}

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file then renames over `path`, so readers never
/// observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Runs fn(i) for i in [0, count) on at most `workers` threads. Exceptions
/// are captured per index; the first one (lowest index) is rethrown after all
/// tasks finish unless `errors` is supplied to receive them.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn,
                  std::vector<std::exception_ptr>* errors = nullptr);

}  // namespace refine
