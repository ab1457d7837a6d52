#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "svkit/common.h"

// Little-endian primitives shared by the SVF1 and SVW1 containers.
namespace svkit::binio {

static_assert(std::endian::native == std::endian::little,
              "svkit file formats assume a little-endian host");

template <typename T>
void put(std::vector<char>& out, T value) {
  const auto* p = reinterpret_cast<const char*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

inline void put_floats(std::vector<char>& out, std::span<const float> values) {
  const auto* p = reinterpret_cast<const char*>(values.data());
  out.insert(out.end(), p, p + values.size_bytes());
}

class Reader {
 public:
  explicit Reader(std::span<const char> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)), sizeof(T));
    return value;
  }

  void get_floats(std::span<float> out) {
    std::memcpy(out.data(), take(out.size_bytes()), out.size_bytes());
  }

  const char* take(std::size_t n) {
    check(n <= bytes_.size() - pos_, "unexpected end of file");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const char> bytes_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const char* path);
void write_file(const char* path, std::span<const char> bytes);

}  // namespace svkit::binio
