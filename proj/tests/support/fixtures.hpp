#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ocgec/numerics/tensor.hpp"
#include "ocgec/rng.hpp"

namespace ocgec::testing {

numerics::Tensor random_tensor(numerics::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0);
numerics::Tensor random_normal(numerics::Shape shape, Rng& rng, double stddev = 1.0);


/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_bytes(const std::filesystem::path& path);

}  // namespace ocgec::testing
