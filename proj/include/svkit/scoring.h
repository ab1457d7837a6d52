#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "svkit/features.h"
#include "svkit/network.h"

namespace svkit {

/// Evenly spaced crop offsets. `source_samples` is the (possibly tiled)
/// length the offsets index into.
struct CropPlan {
  int n_crops = 10;
  std::size_t crop_samples = 0;
  std::size_t source_samples = 0;
  std::vector<std::size_t> offsets;
};

/// offsets_k = round(k (T - C) / (n - 1)); inputs shorter than one crop are
/// tiled to the crop length first.
CropPlan plan_crops(std::size_t duration_samples, int n_crops = 10, double crop_seconds = 4.0,
                    int sample_rate = kSampleRate);

double cosine(std::span<const float> a, std::span<const float> b);

/// Maps one fixed-length waveform crop to an embedding.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed(const Waveform& crop) const = 0;
};

/// Front-end plus trunk forward pass.
class NetworkEmbedder final : public Embedder {
 public:
  NetworkEmbedder(NetworkWeights weights, TrunkConfig config, FeatureParams features = {});
  explicit NetworkEmbedder(NetworkWeights weights, FeatureParams features = {});

  Embedding embed(const Waveform& crop) const override;
  const TrunkConfig& config() const { return config_; }
  const NetworkWeights& weights() const { return weights_; }

 private:
  NetworkWeights weights_;
  TrunkConfig config_;
  FeatureParams features_;
};

struct ScoringParams {
  int n_crops = 10;
  double crop_seconds = 4.0;
};

std::vector<Embedding> embed_crops(const Waveform& w, const Embedder& embedder,
                                   const ScoringParams& p = {});

/// Mean of all |a| x |b| pairwise cosines. The terms are summed in sorted
/// order, so the result is independent of argument and crop order.
double score_embeddings(std::span<const Embedding> a, std::span<const Embedding> b);

double score_pair(const Waveform& a, const Waveform& b, const Embedder& embedder,
                  const ScoringParams& p = {});

/// Crop embeddings keyed by canonical utterance path. Lookups may run
/// concurrently; each key is computed once.
class EmbeddingCache {
 public:
  EmbeddingCache(const Embedder& embedder, ScoringParams params = {});

  const std::vector<Embedding>& get(const std::filesystem::path& wav);
  void insert(const std::filesystem::path& wav, std::vector<Embedding> crops);
  std::size_t size() const;

 private:
  const Embedder& embedder_;
  ScoringParams params_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const std::vector<Embedding>>> entries_;
};

std::string canonical_key(const std::filesystem::path& p);

// Crop embeddings stored in the SVF1 container: one row per crop.
void save_crop_embeddings(const std::filesystem::path& path, std::span<const Embedding> crops);
std::vector<Embedding> load_crop_embeddings(const std::filesystem::path& path);

}  // namespace svkit
