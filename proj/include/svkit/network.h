#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svkit/features.h"
#include "svkit/tensor.h"
#include "svkit/weights.h"

namespace svkit {

using Embedding = std::vector<float>;

enum class Variant { QSap, HAsp };
enum class Pooling { Sap, Asp };

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant v);

/// ResNet-34 trunk layout. The two presets use a quarter (Q/SAP) or half
/// (H/ASP) of the original [64, 128, 256, 512] channels; H drops the stride
/// of the first convolution.
struct TrunkConfig {
  Variant variant = Variant::HAsp;
  std::array<int, 4> blocks{3, 4, 6, 3};
  std::array<int, 4> channels{32, 64, 128, 256};
  std::array<int, 4> stage_strides{1, 2, 2, 2};
  int conv1_stride = 1;
  Pooling pooling = Pooling::Asp;
  /// Average the remaining frequency bins before pooling instead of
  /// flattening them into the frame vector.
  bool freq_average = false;
  int n_mels = 64;
  int attention_dim = 128;
  int embed_dim = 512;
  bool embed_bn = false;
  double var_floor = 1e-5;
  double bn_eps = 1e-5;

  static TrunkConfig q_sap();
  static TrunkConfig h_asp();
  static TrunkConfig preset(Variant v);

  int final_freq() const;
  /// Per-frame feature size fed to pooling.
  int frame_dim() const;
  /// Pooled utterance vector size (frame_dim, doubled for ASP).
  int pooled_dim() const;
};

/// He-uniform fan-in convolutions, unit batch-norm with identity running
/// statistics, and U(-1/sqrt(fan_in), 1/sqrt(fan_in)) dense layers.
NetworkWeights init_weights(const TrunkConfig& cfg, std::uint64_t seed);

/// Throws unless every tensor the trunk reads exists with the expected shape.
void validate_weights(const NetworkWeights& w, const TrunkConfig& cfg);

/// Recovers the preset (and the embedding-BN flag) from tensor shapes.
TrunkConfig infer_config(const NetworkWeights& w);

Tensor3 residual_block(const Tensor3& x, const NetworkWeights& w, const std::string& prefix,
                       int out_channels, int stride, double bn_eps = 1e-5);

struct AttentionView {
  std::span<const float> weight;   // frame_dim x attention_dim, row-major
  std::span<const float> bias;     // attention_dim
  std::span<const float> context;  // attention_dim
};

/// Frames stored row-major, `count` rows of `dim` values.
struct FrameMatrix {
  int count = 0;
  int dim = 0;
  std::vector<float> data;

  std::span<const float> row(int t) const {
    return {data.data() + static_cast<std::size_t>(t) * dim, static_cast<std::size_t>(dim)};
  }
};

struct PoolResult {
  std::vector<float> pooled;
  std::vector<double> attention;  // one weight per frame, sums to 1
};

std::vector<double> attention_weights(const FrameMatrix& frames, const AttentionView& attn);

/// Attention-weighted mean of frames.
PoolResult sap_pool(const FrameMatrix& frames, const AttentionView& attn);

/// Weighted mean concatenated with weighted standard deviation
/// sqrt(max(E[h^2] - mean^2, var_floor)).
PoolResult asp_pool(const FrameMatrix& frames, const AttentionView& attn, double var_floor);

struct ForwardTrace {
  /// (time, freq, channels) after conv1 and after each residual stage.
  std::vector<std::array<int, 3>> stage_shapes;
  int frames = 0;
  int frame_dim = 0;
  int pooled_dim = 0;
  int embed_dim = 0;
};

FrameMatrix flatten_frames(const Tensor3& x, bool freq_average);

/// conv1 -> res1..4 -> per-frame flatten -> pooling -> linear -> optional
/// embedding batch-norm.
Embedding forward(const FeatureMap& f, const NetworkWeights& w, const TrunkConfig& cfg,
                  ForwardTrace* trace = nullptr);

}  // namespace svkit
