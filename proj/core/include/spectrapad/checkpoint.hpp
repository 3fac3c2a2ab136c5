#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "spectrapad/nn.hpp"

namespace spectrapad {

struct Tensor {
  std::vector<std::int64_t> shape;  // empty = scalar
  std::vector<float> data;

  std::size_t numel() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Named-tensor container.
///
///   magic "SPDCKPT1"
///   u64 header length, header JSON {format_version, meta, tensors:[{name, dtype, shape, offset, bytes}]}
///   payload: little-endian float32 tensors, back to back in name order
///   trailer: magic "SPDTRAIL", u64 config hash, u64 dataset hash
class Checkpoint {
 public:
  static constexpr int kFormatVersion = 1;

  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> meta;
  std::uint64_t config_hash = 0;
  std::uint64_t dataset_hash = 0;

  void put(const std::string& name, const Mat& m);
  void put_scalar(const std::string& name, double v);
  bool has(const std::string& name) const { return tensors.count(name) != 0; }
  /// Shape must match (rows, cols); rank-1 tensors are read as one row.
  Mat get(const std::string& name, Eigen::Index rows, Eigen::Index cols) const;
  double get_scalar(const std::string& name) const;

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// True when the name belongs to one of the known naming schemes
/// (embed., trunk.block, band<nm>.block, head.band<nm>., ensemble.,
/// data.band_stats., features.).
bool is_known_tensor_name(const std::string& name);

}  // namespace spectrapad
