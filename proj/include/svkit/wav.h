#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace svkit {

inline constexpr int kSampleRate = 16000;

/// Mono audio at 16 kHz. Samples are nominally in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  double seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Throws unless the waveform is non-empty, finite and sampled at 16 kHz.
void validate(const Waveform& w);

std::size_t seconds_to_samples(double seconds, int sample_rate = kSampleRate);

/// Reads a 16-bit PCM mono 16 kHz RIFF/WAVE file.
Waveform read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1).
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace svkit
