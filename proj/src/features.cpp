#include "svkit/features.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <numbers>
#include <random>

#include <unsupported/Eigen/FFT>

#include "svkit/binary_io.h"
#include "svkit/common.h"

namespace svkit {

int FeatureParams::win_length(int sample_rate) const {
  return static_cast<int>(std::lround(win_ms * sample_rate / 1000.0));
}

int FeatureParams::hop_length(int sample_rate) const {
  return static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
}

void FeatureParams::validate() const {
  check(preemphasis >= 0.0 && preemphasis < 1.0, "preemphasis must be in [0, 1)");
  check(win_length() >= 1 && hop_length() >= 1, "window and hop must be positive");
  check(fft_size >= win_length(), "fft_size must cover the analysis window");
  check(n_mels >= 1, "n_mels must be at least 1");
  check(f_min >= 0.0 && f_max > f_min && f_max <= kSampleRate / 2.0,
        "mel range must satisfy 0 <= f_min < f_max <= Nyquist");
  check(log_floor > 0.0 && norm_eps >= 0.0, "log_floor must be positive");
}

Waveform tile_to_length(const Waveform& w, std::size_t length) {
  check(!w.samples.empty(), "cannot tile an empty waveform");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(length);
  const std::size_t n = w.samples.size();
  for (std::size_t i = 0; i < length; ++i) out.samples[i] = w.samples[i % n];
  return out;
}

Waveform crop_segment(const Waveform& w, double seconds, const CropPolicy& policy) {
  check(!w.samples.empty(), "crop_segment: zero-length input");
  const std::size_t want = seconds_to_samples(seconds, w.sample_rate);
  if (w.samples.size() <= want) return tile_to_length(w, want);
  const std::size_t span = w.samples.size() - want;

  std::size_t offset = 0;
  if (const auto* fixed = std::get_if<FixedOffset>(&policy)) {
    offset = fixed->offset;
    check(offset <= span, "crop_segment: offset past end of waveform");
  } else {
    std::mt19937_64 rng(std::get<RandomOffset>(policy).seed);
    offset = std::uniform_int_distribution<std::size_t>(0, span)(rng);
  }
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                     w.samples.begin() + static_cast<std::ptrdiff_t>(offset + want));
  return out;
}

Waveform preemphasize(const Waveform& w, double coeff) {
  check(coeff >= 0.0 && coeff < 1.0, "preemphasize: coefficient must be in [0, 1)");
  Waveform out = w;
  if (w.samples.empty()) return out;
  const auto& x = w.samples;
  out.samples[0] = static_cast<float>(x[0] - coeff * x[0]);
  for (std::size_t t = 1; t < x.size(); ++t) {
    out.samples[t] = static_cast<float>(x[t] - coeff * x[t - 1]);
  }
  return out;
}

int frame_count(std::size_t n_samples, const FeatureParams& p) {
  return 1 + static_cast<int>(n_samples / static_cast<std::size_t>(p.hop_length()));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> hamming_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length), 1.0);
  if (length == 1) return w;
  for (int n = 0; n < length; ++n) {
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (length - 1));
  }
  return w;
}

MelFilterbank::MelFilterbank(const FeatureParams& p, int sample_rate)
    : n_mels_(p.n_mels), n_bins_(p.fft_size / 2 + 1) {
  const double mel_lo = hz_to_mel(p.f_min);
  const double mel_hi = hz_to_mel(p.f_max);
  std::vector<double> edges(static_cast<std::size_t>(n_mels_) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels_ + 1));
  }
  center_hz_.assign(edges.begin() + 1, edges.end() - 1);
  weights_.assign(static_cast<std::size_t>(n_mels_) * n_bins_, 0.0);
  for (int m = 0; m < n_mels_; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < n_bins_; ++k) {
      const double f = static_cast<double>(k) * sample_rate / p.fft_size;
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      weights_[static_cast<std::size_t>(m) * n_bins_ + k] =
          std::max(0.0, std::min(rise, fall));
    }
  }
}

void MelFilterbank::apply(std::span<const double> power, std::span<double> out) const {
  for (int m = 0; m < n_mels_; ++m) {
    const auto f = filter(m);
    double acc = 0.0;
    for (int k = 0; k < n_bins_; ++k) acc += f[k] * power[k];
    out[m] = acc;
  }
}

namespace {

// Mirror index without repeating the edge sample (numpy "reflect").
std::size_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= n) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

FeatureMap log_mel_spectrogram(const Waveform& w, const FeatureParams& p) {
  p.validate();
  validate(w);
  const int win = p.win_length(w.sample_rate);
  const int hop = p.hop_length(w.sample_rate);
  check(w.samples.size() >= static_cast<std::size_t>(hop),
        "log_mel_spectrogram: waveform shorter than one hop");

  const int frames = frame_count(w.samples.size(), p);
  const int n_fft = p.fft_size;
  const int n_bins = n_fft / 2 + 1;
  const auto window = hamming_window(win);
  const MelFilterbank bank(p, w.sample_rate);
  const auto n = static_cast<std::ptrdiff_t>(w.samples.size());
  // Centered framing: frame t is centred on sample t*hop; the window sits in
  // the middle of the FFT buffer.
  const std::ptrdiff_t lead = n_fft / 2 - (n_fft - win) / 2;

  Eigen::FFT<double> fft;
  std::vector<double> buffer(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<double>> spectrum;
  std::vector<double> power(static_cast<std::size_t>(n_bins));
  std::vector<double> mel(static_cast<std::size_t>(p.n_mels));

  FeatureMap out(frames, p.n_mels);
  for (int t = 0; t < frames; ++t) {
    std::fill(buffer.begin(), buffer.end(), 0.0);
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t) * hop - lead;
    const int pad = (n_fft - win) / 2;
    for (int k = 0; k < win; ++k) {
      buffer[pad + k] = window[k] * w.samples[reflect_index(start + k, n)];
    }
    fft.fwd(spectrum, buffer);
    for (int k = 0; k < n_bins; ++k) power[k] = std::norm(spectrum[k]);
    bank.apply(power, mel);
    for (int m = 0; m < p.n_mels; ++m) {
      out.at(t, m) = static_cast<float>(std::log(mel[m] + p.log_floor));
    }
  }
  return out;
}

FeatureMap instance_normalize(const FeatureMap& f, double eps) {
  check(f.frames >= 2, "instance_normalize: need at least two frames");
  check(eps >= 0.0, "instance_normalize: eps must be non-negative");
  FeatureMap out(f.frames, f.bins);
  for (int b = 0; b < f.bins; ++b) {
    double mean = 0.0;
    for (int t = 0; t < f.frames; ++t) mean += f.at(t, b);
    mean /= f.frames;
    double var = 0.0;
    for (int t = 0; t < f.frames; ++t) {
      const double d = f.at(t, b) - mean;
      var += d * d;
    }
    var /= f.frames;
    const double denom = std::sqrt(var + eps);
    for (int t = 0; t < f.frames; ++t) {
      // A zero-variance bin with eps == 0 maps to zero rather than NaN.
      out.at(t, b) = denom > 0.0 ? static_cast<float>((f.at(t, b) - mean) / denom) : 0.0f;
    }
  }
  return out;
}

FeatureMap extract_features(const Waveform& w, const FeatureParams& p) {
  return instance_normalize(log_mel_spectrogram(preemphasize(w, p.preemphasis), p),
                            p.norm_eps);
}

std::vector<char> encode_feature_map(const FeatureMap& f) {
  check(f.values.size() == static_cast<std::size_t>(f.frames) * f.bins,
        "feature map: value count does not match shape");
  std::vector<char> out;
  out.reserve(12 + f.values.size() * 4);
  out.insert(out.end(), {'S', 'V', 'F', '1'});
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.frames));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.bins));
  binio::put_floats(out, f.values);
  return out;
}

FeatureMap decode_feature_map(std::span<const char> bytes) {
  binio::Reader r(bytes);
  check(std::memcmp(r.take(4), "SVF1", 4) == 0, "feature file: bad magic");
  const auto frames = r.get<std::uint32_t>();
  const auto bins = r.get<std::uint32_t>();
  check(static_cast<std::uint64_t>(frames) * bins * 4 == bytes.size() - 12,
        "feature file: size does not match header");
  FeatureMap f(static_cast<int>(frames), static_cast<int>(bins));
  r.get_floats(f.values);
  return f;
}

void write_feature_file(const std::filesystem::path& path, const FeatureMap& f) {
  binio::write_file(path.c_str(), encode_feature_map(f));
}

FeatureMap read_feature_file(const std::filesystem::path& path) {
  return decode_feature_map(binio::read_file(path.c_str()));
}

}  // namespace svkit
