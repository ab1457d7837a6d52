#include "svkit/augment.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "svkit/common.h"

namespace svkit {

AugmentKind parse_augment_kind(std::string_view name) {
  if (name == "speech") return AugmentKind::Speech;
  if (name == "music") return AugmentKind::Music;
  if (name == "noise") return AugmentKind::Noise;
  if (name == "rir") return AugmentKind::Rir;
  throw Error("unknown augmentation kind: " + std::string(name));
}

std::string_view to_string(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::Speech: return "speech";
    case AugmentKind::Music: return "music";
    case AugmentKind::Noise: return "noise";
    case AugmentKind::Rir: return "rir";
  }
  return "?";
}

AugmentSpec AugmentSpec::for_kind(AugmentKind kind, std::uint64_t seed) {
  AugmentSpec s;
  s.kind = kind;
  s.seed = seed;
  switch (kind) {
    case AugmentKind::Speech:
      s.count = {3, 7};
      s.snr_db = {13, 20};
      break;
    case AugmentKind::Music:
      s.count = {1, 1};
      s.snr_db = {5, 15};
      break;
    case AugmentKind::Noise:
      s.count = {1, 1};
      s.snr_db = {0, 15};
      break;
    case AugmentKind::Rir:
      s.count = {1, 1};
      break;
  }
  return s;
}

void AugmentSpec::validate() const {
  check(snr_db.lo <= snr_db.hi, "augment: snr range must satisfy lo <= hi");
  check(count.lo >= 1 && count.lo <= count.hi, "augment: count range must satisfy 1 <= lo <= hi");
  check(rir_gain_db.lo <= rir_gain_db.hi, "augment: gain range must satisfy lo <= hi");
}

const NoiseCatalog& AugmentCatalogs::additive(AugmentKind kind) const {
  switch (kind) {
    case AugmentKind::Speech: return speech;
    case AugmentKind::Music: return music;
    case AugmentKind::Noise: return noise;
    case AugmentKind::Rir: break;
  }
  throw Error("rir is not an additive catalog");
}

namespace {

std::vector<std::filesystem::path> wav_files_under(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

double draw_uniform(std::mt19937_64& rng, Range r) {
  if (r.lo == r.hi) {
    rng.discard(1);
    return r.lo;
  }
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

AugmentCatalogs load_catalogs(const std::filesystem::path& root) {
  check(std::filesystem::is_directory(root), "catalog root is not a directory: " + root.string());
  AugmentCatalogs c;
  for (NoiseCatalog* cat : {&c.speech, &c.music, &c.noise}) {
    for (auto& p : wav_files_under(root / std::string(to_string(cat->category)))) {
      cat->entries.push_back(read_wav(p));
      cat->paths.push_back(std::move(p));
    }
  }
  for (auto& p : wav_files_under(root / "rir")) {
    c.rir.entries.push_back(read_wav(p));
    c.rir.paths.push_back(std::move(p));
  }
  return c;
}

double mean_power(const Waveform& w) {
  check(!w.samples.empty(), "mean_power: empty waveform");
  double acc = 0.0;
  for (float s : w.samples) acc += static_cast<double>(s) * s;
  return acc / static_cast<double>(w.samples.size());
}

double measure_snr_db(const Waveform& clean, const Waveform& noise) {
  check(clean.size() == noise.size(), "measure_snr_db: length mismatch");
  const double pc = mean_power(clean);
  check(pc > 0.0, "measure_snr_db: clean signal has zero power");
  const double pn = mean_power(noise);
  if (pn == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(pc / pn);
}

double snr_gain(double clean_power, double noise_power, double target_snr_db) {
  check(clean_power > 0.0, "mix: clean signal has zero power");
  check(noise_power > 0.0, "mix: noise has zero power");
  return std::sqrt(clean_power / (noise_power * std::pow(10.0, target_snr_db / 10.0)));
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double target_snr_db) {
  check(clean.size() == noise.size(), "mix_at_snr: noise must match clean length");
  const double g = snr_gain(mean_power(clean), mean_power(noise), target_snr_db);
  Waveform out = clean;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = static_cast<float>(clean.samples[i] + g * noise.samples[i]);
  }
  return out;
}

Waveform match_length(const Waveform& noise, std::size_t length, std::mt19937_64& rng,
                      std::size_t* offset_out) {
  check(!noise.samples.empty(), "match_length: empty noise");
  const std::size_t n = noise.samples.size();
  std::size_t offset = 0;
  if (n > length) offset = std::uniform_int_distribution<std::size_t>(0, n - length)(rng);
  else rng.discard(1);
  if (offset_out) *offset_out = offset;
  Waveform out;
  out.sample_rate = noise.sample_rate;
  out.samples.resize(length);
  for (std::size_t i = 0; i < length; ++i) out.samples[i] = noise.samples[(offset + i) % n];
  return out;
}

AugmentResult augment_additive(const Waveform& clean, const NoiseCatalog& catalog,
                               const AugmentSpec& spec) {
  check(spec.kind != AugmentKind::Rir, "augment_additive: rir is not additive");
  spec.validate();
  validate(clean);
  check(!catalog.entries.empty(),
        "augment: empty " + std::string(to_string(spec.kind)) + " catalog");
  const double clean_power = mean_power(clean);
  check(clean_power > 0.0, "augment: clean signal has zero power");

  std::mt19937_64 rng(spec.seed);
  const auto count = std::uniform_int_distribution<int>(
      static_cast<int>(spec.count.lo), static_cast<int>(spec.count.hi))(rng);

  AugmentResult result;
  std::vector<double> mixed(clean.samples.begin(), clean.samples.end());
  for (int r = 0; r < count; ++r) {
    MixComponent c;
    c.catalog_index = std::uniform_int_distribution<std::size_t>(0, catalog.entries.size() - 1)(rng);
    Waveform noise = match_length(catalog.entries[c.catalog_index], clean.size(), rng, &c.offset);
    c.snr_db = draw_uniform(rng, spec.snr_db);
    c.gain = snr_gain(clean_power, mean_power(noise), c.snr_db);
    for (std::size_t i = 0; i < noise.samples.size(); ++i) {
      const double v = c.gain * noise.samples[i];
      mixed[i] += v;
      noise.samples[i] = static_cast<float>(v);
    }
    c.scaled_noise = std::move(noise);
    result.components.push_back(std::move(c));
  }
  result.output.sample_rate = clean.sample_rate;
  result.output.samples.assign(mixed.begin(), mixed.end());
  return result;
}

Waveform convolve_truncated(const Waveform& x, const std::vector<double>& h) {
  std::vector<double> acc(x.samples.size(), 0.0);
  for (std::size_t k = 0; k < h.size() && k < acc.size(); ++k) {
    if (h[k] == 0.0) continue;
    for (std::size_t n = k; n < acc.size(); ++n) acc[n] += h[k] * x.samples[n - k];
  }
  Waveform out;
  out.sample_rate = x.sample_rate;
  out.samples.assign(acc.begin(), acc.end());
  return out;
}

AugmentResult augment_rir(const Waveform& clean, const RirCatalog& catalog,
                          std::uint64_t seed, Range gain_db_range) {
  validate(clean);
  check(!catalog.entries.empty(), "augment: empty rir catalog");
  check(gain_db_range.lo <= gain_db_range.hi, "augment_rir: gain range must satisfy lo <= hi");
  std::mt19937_64 rng(seed);
  const auto index = std::uniform_int_distribution<std::size_t>(0, catalog.entries.size() - 1)(rng);
  const double gain_db = draw_uniform(rng, gain_db_range);

  const Waveform& rir = catalog.entries[index];
  double energy = 0.0;
  for (float v : rir.samples) {
    check(std::isfinite(v), "augment_rir: non-finite rir sample");
    energy += static_cast<double>(v) * v;
  }
  check(energy > 0.0, "augment_rir: rir has zero energy");
  const double scale = std::pow(10.0, gain_db / 20.0) / std::sqrt(energy);
  std::vector<double> h(rir.samples.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = scale * rir.samples[i];

  AugmentResult result;
  result.output = convolve_truncated(clean, h);
  result.rir_index = index;
  result.rir_gain_db = gain_db;
  return result;
}

AugmentResult augment(const Waveform& clean, const AugmentCatalogs& catalogs,
                      const AugmentSpec& spec) {
  if (spec.kind == AugmentKind::Rir) {
    return augment_rir(clean, catalogs.rir, spec.seed, spec.rir_gain_db);
  }
  return augment_additive(clean, catalogs.additive(spec.kind), spec);
}

}  // namespace svkit
