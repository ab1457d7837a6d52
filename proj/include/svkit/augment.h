#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "svkit/wav.h"

namespace svkit {

enum class AugmentKind { Speech, Music, Noise, Rir };

AugmentKind parse_augment_kind(std::string_view name);
std::string_view to_string(AugmentKind kind);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// One additive or reverberant augmentation. `for_kind` fills in the standard
/// recipe: babble is 3-7 speech recordings at 13-20 dB each, music is a single
/// recording at 5-15 dB, noise a single recording at 0-15 dB, and RIR gain is
/// drawn from [-6, 0] dB.
struct AugmentSpec {
  AugmentKind kind = AugmentKind::Noise;
  std::uint64_t seed = 0;
  Range snr_db;
  Range count;
  Range rir_gain_db{-6.0, 0.0};

  static AugmentSpec for_kind(AugmentKind kind, std::uint64_t seed);
  void validate() const;
};

struct NoiseCatalog {
  AugmentKind category = AugmentKind::Noise;
  std::vector<Waveform> entries;
  std::vector<std::filesystem::path> paths;
};

struct RirCatalog {
  std::vector<Waveform> entries;
  std::vector<std::filesystem::path> paths;
};

/// Catalogs loaded from `<root>/{speech,music,noise,rir}/**/*.wav`, sorted by
/// path so that seeded draws are reproducible across machines.
struct AugmentCatalogs {
  NoiseCatalog speech{AugmentKind::Speech, {}, {}};
  NoiseCatalog music{AugmentKind::Music, {}, {}};
  NoiseCatalog noise{AugmentKind::Noise, {}, {}};
  RirCatalog rir;

  const NoiseCatalog& additive(AugmentKind kind) const;
};

AugmentCatalogs load_catalogs(const std::filesystem::path& root);

double mean_power(const Waveform& w);

/// 10 log10(P_clean / P_noise). Returns +inf for silent noise; throws for
/// silent clean signal or mismatched lengths.
double measure_snr_db(const Waveform& clean, const Waveform& noise);

/// Gain that brings `noise` to `target_snr_db` below `clean`.
double snr_gain(double clean_power, double noise_power, double target_snr_db);

/// clean + g * noise with g chosen so the scaled noise sits at the target SNR.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double target_snr_db);

/// Crops a random window (longer noise) or tiles (shorter noise) to `length`.
Waveform match_length(const Waveform& noise, std::size_t length, std::mt19937_64& rng,
                      std::size_t* offset_out = nullptr);

struct MixComponent {
  std::size_t catalog_index = 0;
  std::size_t offset = 0;
  double snr_db = 0.0;
  double gain = 0.0;
  Waveform scaled_noise;
};

struct AugmentResult {
  Waveform output;
  std::vector<MixComponent> components;
  std::optional<std::size_t> rir_index;
  double rir_gain_db = 0.0;
};

/// Draw order per call: count, then per recording (catalog index, crop
/// offset, SNR).
AugmentResult augment_additive(const Waveform& clean, const NoiseCatalog& catalog,
                               const AugmentSpec& spec);

/// Unit-energy RIR scaled by a gain drawn from `gain_db_range`, convolved with
/// the signal and truncated to the input length.
AugmentResult augment_rir(const Waveform& clean, const RirCatalog& catalog,
                          std::uint64_t seed, Range gain_db_range);

Waveform convolve_truncated(const Waveform& x, const std::vector<double>& h);

/// Dispatches on spec.kind; exactly one augmentation is applied.
AugmentResult augment(const Waveform& clean, const AugmentCatalogs& catalogs,
                      const AugmentSpec& spec);

}  // namespace svkit
