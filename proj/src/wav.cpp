#include "svkit/wav.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "svkit/common.h"

namespace svkit {

void validate(const Waveform& w) {
  check(w.sample_rate == kSampleRate, "waveform: sample rate must be 16000 Hz");
  check(!w.samples.empty(), "waveform: empty");
  for (float s : w.samples) {
    check(std::isfinite(s), "waveform: non-finite sample");
  }
}

std::size_t seconds_to_samples(double seconds, int sample_rate) {
  check(seconds > 0.0, "duration must be positive");
  return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(static_cast<bool>(in), "cannot open wav file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = " (" + path.string() + ")";
  check(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
            std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
        "not a RIFF/WAVE file" + where);

  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    check(body + size <= bytes.size(), "truncated wav chunk" + where);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      check(size >= 16, "malformed fmt chunk" + where);
      const unsigned char* f = bytes.data() + body;
      check(read_u16(f) == 1, "wav must be integer PCM" + where);
      check(read_u16(f + 2) == 1, "wav must be mono" + where);
      check(read_u32(f + 4) == kSampleRate, "wav must be 16 kHz" + where);
      check(read_u16(f + 14) == 16, "wav must be 16-bit" + where);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      check(have_fmt, "wav data chunk before fmt chunk" + where);
      Waveform w;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        w.samples[i] = static_cast<float>(v) / 32768.0f;
      }
      check(!w.samples.empty(), "wav has no samples" + where);
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw Error("wav has no data chunk" + where);
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  check(w.sample_rate == kSampleRate, "write_wav: sample rate must be 16000 Hz");
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, kSampleRate);
  put_u32(out, kSampleRate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (float s : w.samples) {
    const float scaled = std::clamp(s, -1.0f, 1.0f) * 32768.0f;
    const auto q = static_cast<std::int16_t>(
        std::clamp(std::lround(scaled), -32768L, 32767L));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  std::ofstream f(path, std::ios::binary);
  check(static_cast<bool>(f), "cannot write wav file: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace svkit
