#include "svkit/weights.h"

#include <cstring>
#include <numeric>

#include "svkit/binary_io.h"
#include "svkit/common.h"

namespace svkit {

std::size_t NamedTensor::numel() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, std::uint32_t d) { return a * d; });
}

NamedTensor& NetworkWeights::add(std::string name, std::vector<std::uint32_t> dims,
                                 std::vector<float> data) {
  check(!name.empty() && name.size() <= 0xffff, "weights: invalid tensor name");
  check(!contains(name), "weights: duplicate tensor name " + name);
  check(!dims.empty() && dims.size() <= 0xff, "weights: tensor rank must be 1..255");
  for (auto d : dims) check(d > 0, "weights: zero dimension in " + name);
  NamedTensor t{std::move(name), std::move(dims), std::move(data)};
  if (t.data.empty()) t.data.assign(t.numel(), 0.0f);
  check(t.data.size() == t.numel(), "weights: data size does not match dims for " + t.name);
  index_.emplace(t.name, tensors_.size());
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

const NamedTensor& NetworkWeights::get(const std::string& name) const {
  const auto it = index_.find(name);
  check(it != index_.end(), "weights: missing tensor " + name);
  return tensors_[it->second];
}

NamedTensor& NetworkWeights::get(const std::string& name) {
  const auto it = index_.find(name);
  check(it != index_.end(), "weights: missing tensor " + name);
  return tensors_[it->second];
}

bool is_running_statistic(const std::string& name) {
  const auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with(".mean") || ends_with(".var");
}

std::size_t NetworkWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) {
    if (!is_running_statistic(t.name)) n += t.numel();
  }
  return n;
}

std::size_t NetworkWeights::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

bool operator==(const NetworkWeights& a, const NetworkWeights& b) {
  if (a.tensors_.size() != b.tensors_.size()) return false;
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    const auto& x = a.tensors_[i];
    const auto& y = b.tensors_[i];
    if (x.name != y.name || x.dims != y.dims || x.data.size() != y.data.size()) return false;
    if (std::memcmp(x.data.data(), y.data.data(), x.data.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

std::vector<char> encode_weights(const NetworkWeights& w) {
  std::vector<char> out;
  out.reserve(8 + w.scalar_count() * 4 + w.size() * 64);
  out.insert(out.end(), {'S', 'V', 'W', '1'});
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(w.size()));
  for (const auto& t : w.tensors()) {
    binio::put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    binio::put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) binio::put<std::uint32_t>(out, d);
    binio::put_floats(out, t.data);
  }
  return out;
}

NetworkWeights decode_weights(std::span<const char> bytes) {
  binio::Reader r(bytes);
  check(std::memcmp(r.take(4), "SVW1", 4) == 0, "weights file: bad magic");
  const auto count = r.get<std::uint32_t>();
  NetworkWeights w;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>();
    std::string name(r.take(name_len), name_len);
    const auto rank = r.get<std::uint8_t>();
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = r.get<std::uint32_t>();
    auto& t = w.add(std::move(name), std::move(dims));
    r.get_floats(t.data);
  }
  check(r.done(), "weights file: trailing bytes");
  return w;
}

void save_weights(const std::filesystem::path& path, const NetworkWeights& w) {
  binio::write_file(path.c_str(), encode_weights(w));
}

NetworkWeights load_weights(const std::filesystem::path& path) {
  return decode_weights(binio::read_file(path.c_str()));
}

}  // namespace svkit
