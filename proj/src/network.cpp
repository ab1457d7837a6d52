#include "svkit/network.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Core>

#include "svkit/common.h"

namespace svkit {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Variant parse_variant(std::string_view name) {
  if (name == "q-sap" || name == "q_sap" || name == "Q/SAP") return Variant::QSap;
  if (name == "h-asp" || name == "h_asp" || name == "H/ASP") return Variant::HAsp;
  throw Error("unknown trunk variant: " + std::string(name));
}

std::string_view to_string(Variant v) { return v == Variant::QSap ? "q-sap" : "h-asp"; }

TrunkConfig TrunkConfig::q_sap() {
  TrunkConfig c;
  c.variant = Variant::QSap;
  c.channels = {16, 32, 64, 128};
  c.conv1_stride = 2;
  c.pooling = Pooling::Sap;
  c.freq_average = true;
  return c;
}

TrunkConfig TrunkConfig::h_asp() { return TrunkConfig{}; }

TrunkConfig TrunkConfig::preset(Variant v) {
  return v == Variant::QSap ? q_sap() : h_asp();
}

int TrunkConfig::final_freq() const {
  int f = conv_output_size(n_mels, 3, conv1_stride, 1);
  for (int s : stage_strides) f = conv_output_size(f, 3, s, 1);
  return f;
}

int TrunkConfig::frame_dim() const {
  return freq_average ? channels[3] : final_freq() * channels[3];
}

int TrunkConfig::pooled_dim() const {
  return pooling == Pooling::Asp ? 2 * frame_dim() : frame_dim();
}

namespace {

using Dims = std::vector<std::uint32_t>;

Dims conv_dims(int k, int cin, int cout) {
  return {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k),
          static_cast<std::uint32_t>(cin), static_cast<std::uint32_t>(cout)};
}

std::uint32_t u32(int v) { return static_cast<std::uint32_t>(v); }

// Calls fn(name, dims, fan_in, kind) for every tensor of the trunk, in file
// order. kind: 0 conv, 1 bn gamma, 2 bn beta, 3 bn mean, 4 bn var, 5 dense.
template <typename Fn>
void for_each_tensor(const TrunkConfig& cfg, Fn&& fn) {
  auto bn = [&](const std::string& p, int c) {
    fn(p + ".gamma", Dims{u32(c)}, 0, 1);
    fn(p + ".beta", Dims{u32(c)}, 0, 2);
    fn(p + ".mean", Dims{u32(c)}, 0, 3);
    fn(p + ".var", Dims{u32(c)}, 0, 4);
  };
  fn("conv1.weight", conv_dims(3, 1, cfg.channels[0]), 9, 0);
  bn("bn1", cfg.channels[0]);
  int cin = cfg.channels[0];
  for (int s = 0; s < 4; ++s) {
    const int cout = cfg.channels[s];
    for (int b = 0; b < cfg.blocks[s]; ++b) {
      const std::string p = "layer" + std::to_string(s + 1) + "." + std::to_string(b) + ".";
      const int stride = b == 0 ? cfg.stage_strides[s] : 1;
      fn(p + "conv1.weight", conv_dims(3, cin, cout), 9 * cin, 0);
      bn(p + "bn1", cout);
      fn(p + "conv2.weight", conv_dims(3, cout, cout), 9 * cout, 0);
      bn(p + "bn2", cout);
      if (stride != 1 || cin != cout) {
        fn(p + "downsample.weight", conv_dims(1, cin, cout), cin, 0);
        bn(p + "downsample_bn", cout);
      }
      cin = cout;
    }
  }
  const int d = cfg.frame_dim();
  fn("pool.attention.weight", Dims{u32(d), u32(cfg.attention_dim)}, d, 5);
  fn("pool.attention.bias", Dims{u32(cfg.attention_dim)}, d, 5);
  fn("pool.context", Dims{u32(cfg.attention_dim)}, cfg.attention_dim, 5);
  fn("fc.weight", Dims{u32(cfg.pooled_dim()), u32(cfg.embed_dim)}, cfg.pooled_dim(), 5);
  fn("fc.bias", Dims{u32(cfg.embed_dim)}, cfg.pooled_dim(), 5);
  if (cfg.embed_bn) bn("embed_bn", cfg.embed_dim);
}

}  // namespace

NetworkWeights init_weights(const TrunkConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NetworkWeights w;
  for_each_tensor(cfg, [&](const std::string& name, const Dims& dims, int fan_in, int kind) {
    auto& t = w.add(name, dims);
    switch (kind) {
      case 0:
      case 5: {
        const double bound = kind == 0 ? std::sqrt(6.0 / fan_in) : 1.0 / std::sqrt(fan_in);
        std::uniform_real_distribution<float> u(static_cast<float>(-bound),
                                                static_cast<float>(bound));
        for (auto& v : t.data) v = u(rng);
        break;
      }
      case 1:
      case 4:
        std::fill(t.data.begin(), t.data.end(), 1.0f);
        break;
      default:
        break;
    }
  });
  return w;
}

void validate_weights(const NetworkWeights& w, const TrunkConfig& cfg) {
  std::size_t expected = 0;
  for_each_tensor(cfg, [&](const std::string& name, const Dims& dims, int, int kind) {
    ++expected;
    const auto& t = w.get(name);
    check(t.dims == dims, "weights: tensor " + name + " has the wrong shape for " +
                              std::string(to_string(cfg.variant)));
    if (kind == 4) {
      for (float v : t.data) check(v > 0.0f, "weights: non-positive running variance in " + name);
    }
  });
  check(expected == w.size(), "weights: unexpected extra tensors for this configuration");
}

TrunkConfig infer_config(const NetworkWeights& w) {
  const auto& conv1 = w.get("conv1.weight");
  check(conv1.dims.size() == 4, "weights: conv1.weight must be rank 4");
  TrunkConfig cfg;
  if (conv1.dims[3] == 16) cfg = TrunkConfig::q_sap();
  else if (conv1.dims[3] == 32) cfg = TrunkConfig::h_asp();
  else throw Error("weights: conv1 width matches no known variant");
  cfg.embed_bn = w.contains("embed_bn.gamma");
  cfg.embed_dim = static_cast<int>(w.get("fc.bias").dims.at(0));
  validate_weights(w, cfg);
  return cfg;
}

namespace {

BatchNormView bn_view(const NetworkWeights& w, const std::string& p) {
  return {w.values(p + ".gamma"), w.values(p + ".beta"), w.values(p + ".mean"),
          w.values(p + ".var")};
}

}  // namespace

Tensor3 residual_block(const Tensor3& x, const NetworkWeights& w, const std::string& prefix,
                       int out_channels, int stride, double bn_eps) {
  Tensor3 y = conv2d(x, w.values(prefix + "conv1.weight"), 3, out_channels, stride);
  batchnorm_infer(y, bn_view(w, prefix + "bn1"), bn_eps);
  relu_inplace(y.data);
  y = conv2d(y, w.values(prefix + "conv2.weight"), 3, out_channels, 1);
  batchnorm_infer(y, bn_view(w, prefix + "bn2"), bn_eps);

  const bool project = stride != 1 || x.channels != out_channels;
  if (project) {
    Tensor3 s = conv2d(x, w.values(prefix + "downsample.weight"), 1, out_channels, stride);
    batchnorm_infer(s, bn_view(w, prefix + "downsample_bn"), bn_eps);
    check(s.data.size() == y.data.size(), "residual: shortcut shape mismatch");
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += s.data[i];
  } else {
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
  }
  relu_inplace(y.data);
  return y;
}

std::vector<double> attention_weights(const FrameMatrix& frames, const AttentionView& attn) {
  check(frames.count >= 1, "pooling: need at least one frame");
  const auto a = static_cast<Eigen::Index>(attn.bias.size());
  check(a > 0 && attn.context.size() == attn.bias.size() &&
            attn.weight.size() == static_cast<std::size_t>(frames.dim) * attn.bias.size(),
        "pooling: attention parameters do not match frame dimension");
  Eigen::Map<const RowMatrixF> h(frames.data.data(), frames.count, frames.dim);
  Eigen::Map<const RowMatrixF> wt(attn.weight.data(), frames.dim, a);
  Eigen::Map<const Eigen::RowVectorXf> bias(attn.bias.data(), a);
  Eigen::Map<const Eigen::VectorXf> u(attn.context.data(), a);
  RowMatrixF hidden = h * wt;
  hidden.rowwise() += bias;
  hidden = hidden.array().tanh().matrix();
  const Eigen::VectorXf logits = hidden * u;

  std::vector<double> alpha(static_cast<std::size_t>(frames.count));
  double peak = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < frames.count; ++t) {
    check(std::isfinite(logits[t]), "pooling: non-finite attention logit");
    peak = std::max(peak, static_cast<double>(logits[t]));
  }
  double total = 0.0;
  for (int t = 0; t < frames.count; ++t) {
    alpha[t] = std::exp(static_cast<double>(logits[t]) - peak);
    total += alpha[t];
  }
  for (double& v : alpha) v /= total;
  return alpha;
}

PoolResult sap_pool(const FrameMatrix& frames, const AttentionView& attn) {
  PoolResult r;
  r.attention = attention_weights(frames, attn);
  std::vector<double> mean(static_cast<std::size_t>(frames.dim), 0.0);
  for (int t = 0; t < frames.count; ++t) {
    const auto row = frames.row(t);
    for (int d = 0; d < frames.dim; ++d) mean[d] += r.attention[t] * row[d];
  }
  r.pooled.assign(mean.begin(), mean.end());
  return r;
}

PoolResult asp_pool(const FrameMatrix& frames, const AttentionView& attn, double var_floor) {
  PoolResult r;
  r.attention = attention_weights(frames, attn);
  const auto dim = static_cast<std::size_t>(frames.dim);
  std::vector<double> mean(dim, 0.0), sq(dim, 0.0);
  for (int t = 0; t < frames.count; ++t) {
    const auto row = frames.row(t);
    for (std::size_t d = 0; d < dim; ++d) {
      check(std::isfinite(row[d]), "pooling: non-finite frame value");
      mean[d] += r.attention[t] * row[d];
      sq[d] += r.attention[t] * static_cast<double>(row[d]) * row[d];
    }
  }
  r.pooled.resize(2 * dim);
  for (std::size_t d = 0; d < dim; ++d) {
    r.pooled[d] = static_cast<float>(mean[d]);
    r.pooled[dim + d] = static_cast<float>(std::sqrt(std::max(sq[d] - mean[d] * mean[d], var_floor)));
  }
  return r;
}

FrameMatrix flatten_frames(const Tensor3& x, bool freq_average) {
  FrameMatrix m;
  m.count = x.time;
  if (!freq_average) {
    m.dim = x.freq * x.channels;
    m.data = x.data;
    return m;
  }
  m.dim = x.channels;
  m.data.assign(static_cast<std::size_t>(x.time) * x.channels, 0.0f);
  for (int t = 0; t < x.time; ++t) {
    for (int c = 0; c < x.channels; ++c) {
      double acc = 0.0;
      for (int f = 0; f < x.freq; ++f) acc += x.at(t, f, c);
      m.data[static_cast<std::size_t>(t) * x.channels + c] = static_cast<float>(acc / x.freq);
    }
  }
  return m;
}

Embedding forward(const FeatureMap& f, const NetworkWeights& w, const TrunkConfig& cfg,
                  ForwardTrace* trace) {
  check(f.bins == cfg.n_mels, "forward: feature map has " + std::to_string(f.bins) +
                                  " bins, network expects " + std::to_string(cfg.n_mels));
  check(f.frames >= 1, "forward: empty feature map");
  Tensor3 x(f.frames, f.bins, 1);
  x.data = f.values;

  auto record = [&](const Tensor3& t) {
    if (trace) trace->stage_shapes.push_back({t.time, t.freq, t.channels});
  };
  if (trace) *trace = ForwardTrace{};

  x = conv2d(x, w.values("conv1.weight"), 3, cfg.channels[0], cfg.conv1_stride);
  batchnorm_infer(x, bn_view(w, "bn1"), cfg.bn_eps);
  relu_inplace(x.data);
  record(x);
  for (int s = 0; s < 4; ++s) {
    for (int b = 0; b < cfg.blocks[s]; ++b) {
      const std::string p = "layer" + std::to_string(s + 1) + "." + std::to_string(b) + ".";
      x = residual_block(x, w, p, cfg.channels[s], b == 0 ? cfg.stage_strides[s] : 1,
                         cfg.bn_eps);
    }
    record(x);
  }

  const FrameMatrix frames = flatten_frames(x, cfg.freq_average);
  const AttentionView attn{w.values("pool.attention.weight"), w.values("pool.attention.bias"),
                           w.values("pool.context")};
  const PoolResult pooled = cfg.pooling == Pooling::Asp
                                ? asp_pool(frames, attn, cfg.var_floor)
                                : sap_pool(frames, attn);

  const auto& fc = w.get("fc.weight");
  check(fc.dims.size() == 2 && fc.dims[0] == pooled.pooled.size(),
        "forward: fc.weight does not match pooled dimension");
  const auto out_dim = static_cast<Eigen::Index>(fc.dims[1]);
  Eigen::Map<const RowMatrixF> fw(fc.data.data(), static_cast<Eigen::Index>(fc.dims[0]), out_dim);
  Eigen::Map<const Eigen::RowVectorXf> p(pooled.pooled.data(),
                                         static_cast<Eigen::Index>(pooled.pooled.size()));
  Eigen::Map<const Eigen::RowVectorXf> fb(w.values("fc.bias").data(), out_dim);
  const Eigen::RowVectorXf e = p * fw + fb;

  Embedding out(e.data(), e.data() + e.size());
  if (cfg.embed_bn) {
    Tensor3 t(1, 1, static_cast<int>(out.size()));
    t.data = out;
    batchnorm_infer(t, bn_view(w, "embed_bn"), cfg.bn_eps);
    out = std::move(t.data);
  }
  if (trace) {
    trace->frames = frames.count;
    trace->frame_dim = frames.dim;
    trace->pooled_dim = static_cast<int>(pooled.pooled.size());
    trace->embed_dim = static_cast<int>(out.size());
  }
  return out;
}

}  // namespace svkit
