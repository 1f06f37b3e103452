#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "pdac/nn/tensor.hpp"

namespace pdac::nn {

struct VersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TransferError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Versioned, checksummed container of named tensors plus a config snapshot.
/// Round-trips are bit-exact.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string stage;
  std::int64_t seed = 0;
  nlohmann::json config;
  std::map<std::string, Tensor> tensors;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  /// Snapshot all params of a module under their own names.
  void put_params(const std::vector<Param*>& params);
  /// Restore into params; every param must be present with matching shape.
  /// Throws TransferError naming the offending tensor otherwise.
  void get_params(const std::vector<Param*>& params) const;
  /// Subset view of tensors whose names start with prefix.
  std::map<std::string, Tensor> subtree(const std::string& prefix) const;
};

}  // namespace pdac::nn
