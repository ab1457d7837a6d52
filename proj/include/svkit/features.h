#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "svkit/wav.h"

namespace svkit {

/// Front-end configuration. Defaults are the network's input representation:
/// 0.97 pre-emphasis, 25 ms Hamming window, 10 ms hop, 512-point FFT and 64
/// HTK mel bands over 0-8 kHz.
struct FeatureParams {
  double preemphasis = 0.97;
  double win_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  int n_mels = 64;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-6;
  double norm_eps = 1e-5;

  int win_length(int sample_rate = kSampleRate) const;
  int hop_length(int sample_rate = kSampleRate) const;
  void validate() const;
};

/// Time-major matrix of `frames` x `bins` values.
struct FeatureMap {
  int frames = 0;
  int bins = 0;
  std::vector<float> values;

  FeatureMap() = default;
  FeatureMap(int frames_, int bins_)
      : frames(frames_), bins(bins_),
        values(static_cast<std::size_t>(frames_) * bins_, 0.0f) {}

  float& at(int t, int b) { return values[static_cast<std::size_t>(t) * bins + b]; }
  float at(int t, int b) const { return values[static_cast<std::size_t>(t) * bins + b]; }
  std::span<const float> row(int t) const {
    return {values.data() + static_cast<std::size_t>(t) * bins,
            static_cast<std::size_t>(bins)};
  }
};

struct FixedOffset {
  std::size_t offset = 0;
};
struct RandomOffset {
  std::uint64_t seed = 0;
};
using CropPolicy = std::variant<FixedOffset, RandomOffset>;

/// Repeats the waveform end-to-end and truncates to exactly `length` samples.
Waveform tile_to_length(const Waveform& w, std::size_t length);

/// Cuts a `seconds`-long segment. Inputs shorter than the segment are tiled
/// to the segment length first, which forces the offset to zero.
Waveform crop_segment(const Waveform& w, double seconds, const CropPolicy& policy);

/// y[t] = x[t] - c * x[t-1], with x[-1] taken as x[0].
Waveform preemphasize(const Waveform& w, double coeff);

/// Frame count under centered framing: 1 + floor(T / hop).
int frame_count(std::size_t n_samples, const FeatureParams& p);

/// Triangular HTK-mel filters over the one-sided power spectrum.
class MelFilterbank {
 public:
  explicit MelFilterbank(const FeatureParams& p, int sample_rate = kSampleRate);

  int n_mels() const { return n_mels_; }
  int n_bins() const { return n_bins_; }
  /// Center frequency of each filter in Hz.
  const std::vector<double>& center_hz() const { return center_hz_; }
  std::span<const double> filter(int m) const {
    return {weights_.data() + static_cast<std::size_t>(m) * n_bins_,
            static_cast<std::size_t>(n_bins_)};
  }
  void apply(std::span<const double> power, std::span<double> out) const;

 private:
  int n_mels_;
  int n_bins_;
  std::vector<double> center_hz_;
  std::vector<double> weights_;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Symmetric Hamming window 0.54 - 0.46 cos(2 pi n / (N - 1)).
std::vector<double> hamming_window(int length);

/// log(mel power + log_floor), no pre-emphasis and no normalization.
FeatureMap log_mel_spectrogram(const Waveform& w, const FeatureParams& p);

/// Standardizes every bin over time without a learned affine.
FeatureMap instance_normalize(const FeatureMap& f, double eps);

/// Full front-end: pre-emphasis, log-mel, instance normalization.
FeatureMap extract_features(const Waveform& w, const FeatureParams& p);

// "SVF1" container: magic, u32 rows, u32 cols, rows*cols little-endian f32.
void write_feature_file(const std::filesystem::path& path, const FeatureMap& f);
FeatureMap read_feature_file(const std::filesystem::path& path);
std::vector<char> encode_feature_map(const FeatureMap& f);
FeatureMap decode_feature_map(std::span<const char> bytes);

}  // namespace svkit
