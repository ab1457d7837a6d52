#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace svkit {

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t numel() const;
};

/// Ordered collection of uniquely named float tensors. Insertion order is the
/// on-disk order.
class NetworkWeights {
 public:
  NamedTensor& add(std::string name, std::vector<std::uint32_t> dims,
                   std::vector<float> data = {});
  const NamedTensor& get(const std::string& name) const;
  NamedTensor& get(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::span<const float> values(const std::string& name) const { return get(name).data; }

  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }

  /// Scalars in trainable tensors; batch-norm running statistics
  /// (names ending in ".mean" / ".var") are excluded.
  std::size_t parameter_count() const;
  std::size_t scalar_count() const;

  friend bool operator==(const NetworkWeights& a, const NetworkWeights& b);

 private:
  std::vector<NamedTensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

bool is_running_statistic(const std::string& name);

// "SVW1" container: magic, u32 count; per tensor u16 name length, UTF-8
// name, u8 rank, u32 dims, little-endian f32 data.
std::vector<char> encode_weights(const NetworkWeights& w);
NetworkWeights decode_weights(std::span<const char> bytes);
void save_weights(const std::filesystem::path& path, const NetworkWeights& w);
NetworkWeights load_weights(const std::filesystem::path& path);

}  // namespace svkit
