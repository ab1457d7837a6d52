#include "svkit/scoring.h"

#include <algorithm>
#include <cmath>

#include "svkit/common.h"

namespace svkit {

CropPlan plan_crops(std::size_t duration_samples, int n_crops, double crop_seconds,
                    int sample_rate) {
  check(n_crops >= 2, "plan_crops: need at least two crops");
  check(duration_samples >= 1, "plan_crops: empty utterance");
  CropPlan plan;
  plan.n_crops = n_crops;
  plan.crop_samples = seconds_to_samples(crop_seconds, sample_rate);
  plan.source_samples = std::max(duration_samples, plan.crop_samples);
  const double span = static_cast<double>(plan.source_samples - plan.crop_samples);
  for (int k = 0; k < n_crops; ++k) {
    plan.offsets.push_back(static_cast<std::size_t>(std::llround(k * span / (n_crops - 1))));
  }
  return plan;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  check(a.size() == b.size() && !a.empty(), "cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  check(na > 0.0 && nb > 0.0, "cosine: zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

NetworkEmbedder::NetworkEmbedder(NetworkWeights weights, TrunkConfig config,
                                 FeatureParams features)
    : weights_(std::move(weights)), config_(config), features_(features) {
  validate_weights(weights_, config_);
  features_.validate();
  check(features_.n_mels == config_.n_mels, "embedder: feature and network mel counts differ");
}

NetworkEmbedder::NetworkEmbedder(NetworkWeights weights, FeatureParams features)
    : NetworkEmbedder(weights, infer_config(weights), features) {}

Embedding NetworkEmbedder::embed(const Waveform& crop) const {
  return forward(extract_features(crop, features_), weights_, config_);
}

std::vector<Embedding> embed_crops(const Waveform& w, const Embedder& embedder,
                                   const ScoringParams& p) {
  validate(w);
  const CropPlan plan = plan_crops(w.size(), p.n_crops, p.crop_seconds, w.sample_rate);
  const Waveform source =
      w.size() >= plan.source_samples ? w : tile_to_length(w, plan.source_samples);
  std::vector<Embedding> out;
  out.reserve(plan.offsets.size());
  Waveform crop;
  for (std::size_t offset : plan.offsets) {
    crop.samples.assign(source.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                        source.samples.begin() +
                            static_cast<std::ptrdiff_t>(offset + plan.crop_samples));
    out.push_back(embedder.embed(crop));
  }
  return out;
}

double score_embeddings(std::span<const Embedding> a, std::span<const Embedding> b) {
  check(!a.empty() && !b.empty(), "score: no crop embeddings");
  std::vector<double> sims;
  sims.reserve(a.size() * b.size());
  for (const auto& x : a) {
    for (const auto& y : b) sims.push_back(cosine(x, y));
  }
  std::sort(sims.begin(), sims.end());
  double total = 0.0;
  for (double s : sims) total += s;
  return std::clamp(total / static_cast<double>(sims.size()), -1.0, 1.0);
}

double score_pair(const Waveform& a, const Waveform& b, const Embedder& embedder,
                  const ScoringParams& p) {
  const auto ea = embed_crops(a, embedder, p);
  const auto eb = embed_crops(b, embedder, p);
  return score_embeddings(ea, eb);
}

std::string canonical_key(const std::filesystem::path& p) {
  std::error_code ec;
  const auto canon = std::filesystem::weakly_canonical(p, ec);
  return ec ? p.lexically_normal().string() : canon.string();
}

EmbeddingCache::EmbeddingCache(const Embedder& embedder, ScoringParams params)
    : embedder_(embedder), params_(params) {}

const std::vector<Embedding>& EmbeddingCache::get(const std::filesystem::path& wav) {
  const std::string key = canonical_key(wav);
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return *it->second;
  }
  auto crops = std::make_shared<const std::vector<Embedding>>(
      embed_crops(read_wav(wav), embedder_, params_));
  std::lock_guard lock(mutex_);
  // First writer wins; a concurrent duplicate computation is discarded.
  return *entries_.try_emplace(key, std::move(crops)).first->second;
}

void EmbeddingCache::insert(const std::filesystem::path& wav, std::vector<Embedding> crops) {
  std::lock_guard lock(mutex_);
  entries_.try_emplace(canonical_key(wav),
                       std::make_shared<const std::vector<Embedding>>(std::move(crops)));
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void save_crop_embeddings(const std::filesystem::path& path, std::span<const Embedding> crops) {
  check(!crops.empty(), "embedding cache: no crops");
  FeatureMap m(static_cast<int>(crops.size()), static_cast<int>(crops.front().size()));
  for (std::size_t i = 0; i < crops.size(); ++i) {
    check(crops[i].size() == crops.front().size(), "embedding cache: ragged crop embeddings");
    std::copy(crops[i].begin(), crops[i].end(),
              m.values.begin() + static_cast<std::ptrdiff_t>(i * crops.front().size()));
  }
  write_feature_file(path, m);
}

std::vector<Embedding> load_crop_embeddings(const std::filesystem::path& path) {
  const FeatureMap m = read_feature_file(path);
  std::vector<Embedding> crops;
  for (int t = 0; t < m.frames; ++t) {
    const auto row = m.row(t);
    crops.emplace_back(row.begin(), row.end());
  }
  return crops;
}

}  // namespace svkit
