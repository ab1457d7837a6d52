// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "oracles.h"
#include "svkit/augment.h"
#include "svkit/features.h"
#include "svkit/losses.h"
#include "svkit/metrics.h"
#include "svkit/network.h"
#include "svkit/optim.h"
#include "svkit/scoring.h"
#include "svkit/weights.h"

using namespace svkit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Waveform random_wave(std::size_t n, std::mt19937_64& rng, float scale = 0.1f) {
  Waveform w;
  w.samples = oracle::random_floats(n, rng, scale);
  return w;
}

// 1 -------------------------------------------------------------------------
Outcome parameter_counts() {
  const double q = static_cast<double>(init_weights(TrunkConfig::q_sap(), 0).parameter_count());
  const double h = static_cast<double>(init_weights(TrunkConfig::h_asp(), 0).parameter_count());
  const bool ok = std::abs(q / 1.4e6 - 1.0) <= 0.05 && std::abs(h / 8.0e6 - 1.0) <= 0.05;
  return {ok, fmt("Q/SAP %.0f (%.3fM), H/ASP %.0f (%.3fM)", q, q / 1e6, h, h / 1e6)};
}

// 2 -------------------------------------------------------------------------
Outcome shape_trace() {
  const auto cfg = TrunkConfig::h_asp();
  const auto w = init_weights(cfg, 1);
  std::mt19937_64 rng(2);
  FeatureMap f(201, 64);
  f.values = oracle::random_floats(f.values.size(), rng);
  ForwardTrace t;
  const auto e = forward(f, w, cfg, &t);
  const std::vector<std::array<int, 3>> want{
      {201, 64, 32}, {201, 64, 32}, {101, 32, 64}, {51, 16, 128}, {26, 8, 256}};
  const bool ok = t.stage_shapes == want && t.frames == 26 && t.frame_dim == 2048 &&
                  t.pooled_dim == 4096 && t.embed_dim == 512 && e.size() == 512;
  std::string frames;
  for (const auto& s : t.stage_shapes) frames += std::to_string(s[0]) + "x" + std::to_string(s[1]) +
                                                 "x" + std::to_string(s[2]) + " ";
  return {ok, fmt("%sflatten %d pooled %d embedding %zu", frames.c_str(), t.frame_dim, t.pooled_dim,
                  e.size())};
}

// 3 -------------------------------------------------------------------------
Outcome gradient_oracle() {
  constexpr int kSpeakers = 10, kPer = 2, kDim = 512, kPoints = 10, kCoords = 48;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uw(1.0, 15.0), ub(-8.0, 2.0);
  auto gaussian = [&](int r, int c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  auto sample = [&](Eigen::Index n) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(kCoords));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (auto& i : idx) i = pick(rng);
    return idx;
  };
  std::vector<int> labels;
  for (int k = 0; k < kSpeakers; ++k)
    for (int i = 0; i < kPer; ++i) labels.push_back(k);

  double worst = 0.0;
  int checks = 0;
  auto track = [&](const Matrix& analytic, const Matrix& numeric, const std::vector<Eigen::Index>& idx) {
    worst = std::max(worst, oracle::relative_error(analytic, numeric, idx));
    ++checks;
  };
  auto check_matrix = [&](const Matrix& analytic, const Matrix& at,
                          const std::function<double(const Matrix&)>& f) {
    const auto idx = sample(at.size());
    track(analytic, oracle::finite_difference_at(f, at, idx), idx);
  };

  for (int point = 0; point < kPoints; ++point) {
    const Matrix x = gaussian(kSpeakers * kPer, kDim);
    ClassifierWeights cls{gaussian(kSpeakers, kDim), gaussian(kSpeakers, 1)};
    const MarginParams mp{0.2, 30.0};
    const APParams ap{uw(rng), ub(rng), 1e-6};

    const auto sm = softmax_ce(x, labels, cls);
    check_matrix(sm.grads.embeddings, x, [&](const Matrix& m) { return softmax_ce(m, labels, cls).value; });
    check_matrix(sm.grads.weight, cls.weight,
                 [&](const Matrix& m) { return softmax_ce(x, labels, {m, cls.bias}).value; });

    for (auto* loss : {&am_softmax, &aam_softmax}) {
      const auto r = loss(x, labels, cls, mp);
      check_matrix(r.grads.embeddings, x, [&](const Matrix& m) { return loss(m, labels, cls, mp).value; });
      check_matrix(r.grads.weight, cls.weight,
                   [&](const Matrix& m) { return loss(x, labels, {m, cls.bias}, mp).value; });
    }

    const auto a = angular_prototypical(x, kSpeakers, kPer, ap);
    check_matrix(a.grads.embeddings, x,
                 [&](const Matrix& m) { return angular_prototypical(m, kSpeakers, kPer, ap).value; });
    Matrix wb(1, 2);
    wb << ap.w, ap.b;
    Matrix analytic(1, 2);
    analytic << a.grads.ap_w, a.grads.ap_b;
    const auto fwb = oracle::finite_difference(
        [&](const Matrix& m) {
          return angular_prototypical(x, kSpeakers, kPer, {m(0, 0), m(0, 1), 1e-6}).value;
        },
        wb);
    // ap_b's gradient is identically zero; compare the pair with an absolute floor.
    worst = std::max(worst, oracle::relative_error(analytic, fwb, 1e-8));
    ++checks;

    const auto ps = ap_plus_softmax(x, labels, kSpeakers, kPer, cls, ap);
    check_matrix(ps.grads.embeddings, x, [&](const Matrix& m) {
      return ap_plus_softmax(m, labels, kSpeakers, kPer, cls, ap).value;
    });
    check_matrix(ps.grads.weight, cls.weight, [&](const Matrix& m) {
      return ap_plus_softmax(x, labels, kSpeakers, kPer, {m, cls.bias}, ap).value;
    });
    const auto all_bias = oracle::all_indices(cls.bias.size());
    track(ps.grads.bias,
          oracle::finite_difference([&](const Matrix& m) {
            return ap_plus_softmax(x, labels, kSpeakers, kPer, {cls.weight, m}, ap).value;
          }, cls.bias),
          all_bias);
  }
  return {worst < 1e-4, fmt("%d gradient checks over %d points, D=%d, worst relative error %.2e",
                            checks, kPoints, kDim, worst)};
}

// 4 -------------------------------------------------------------------------
Outcome metric_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> count(1, 50);
  std::uniform_int_distribution<int> coarse(0, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst_eer = 0.0;
  int dcf_mismatch = 0;
  for (int set = 0; set < 200; ++set) {
    DetectionScores s;
    const bool ties = coarse(rng) == 1;
    auto draw = [&](double shift) {
      const double v = normal(rng) + shift;
      return ties ? std::round(v * 4.0) / 4.0 : v;
    };
    const int nt = count(rng), nn = count(rng);
    for (int i = 0; i < nt; ++i) s.target.push_back(draw(1.0));
    for (int i = 0; i < nn; ++i) s.nontarget.push_back(draw(0.0));
    const DCFParams p;
    if (compute_min_dcf(s, p).min_dcf_raw != oracle::brute_force_min_dcf_raw(s, p)) ++dcf_mismatch;
    worst_eer = std::max(worst_eer, std::abs(compute_eer(s).eer - oracle::brute_force_eer(s)));
  }
  const auto toy = evaluate(DetectionScores{{0.9, 0.8, 0.7}, {0.75, 0.2, 0.1}});
  const bool toy_ok = std::abs(toy.eer_pct - 33.3333) < 5e-5 && std::abs(toy.min_dcf - 0.3333) < 5e-5;
  return {dcf_mismatch == 0 && worst_eer <= 1e-12 && toy_ok,
          fmt("200 sets: %d MinDCF mismatches, worst EER deviation %.1e; toy EER %.4f%%, MinDCF %.4f",
              dcf_mismatch, worst_eer, toy.eer_pct, toy.min_dcf)};
}

// 5 -------------------------------------------------------------------------
Outcome snr_fidelity() {
  std::mt19937_64 rng(5);
  NoiseCatalog noise;
  for (int i = 0; i < 5; ++i) noise.entries.push_back(random_wave(12000 + 4000 * i, rng, 0.02f * (i + 1)));
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Waveform clean = random_wave(16000, rng, 0.2f);
    const auto r = augment_additive(clean, noise, AugmentSpec::for_kind(AugmentKind::Noise, seed));
    if (r.components.size() != 1) return {false, "expected exactly one noise recording"};
    Waveform mixed_in = clean;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      mixed_in.samples[i] = r.output.samples[i] - clean.samples[i];
    }
    worst = std::max(worst, std::abs(measure_snr_db(clean, mixed_in) - r.components[0].snr_db));
  }
  return {worst < 0.1, fmt("100 augmentations, worst SNR deviation %.2e dB", worst)};
}

// 6 -------------------------------------------------------------------------
Outcome rir_identity() {
  std::mt19937_64 rng(6);
  const Waveform clean = random_wave(32000, rng, 0.3f);
  RirCatalog rir;
  Waveform delta;
  delta.samples.assign(8000, 0.0f);
  delta.samples[0] = 1.0f;
  rir.entries.push_back(delta);
  const auto r = augment_rir(clean, rir, 6, {0.0, 0.0});
  const bool same = r.output.size() == clean.size() &&
                    std::memcmp(r.output.samples.data(), clean.samples.data(),
                                clean.size() * sizeof(float)) == 0;
  return {same, same ? "output identical to input" : "output differs from input"};
}

// 7 -------------------------------------------------------------------------
Outcome instance_norm() {
  std::mt19937_64 rng(7);
  double worst_mean = 0.0, worst_var = 0.0;
  auto measure = [&](const FeatureMap& g) {
    for (int b = 0; b < g.bins; ++b) {
      double mean = 0.0, var = 0.0;
      for (int t = 0; t < g.frames; ++t) mean += g.at(t, b);
      mean /= g.frames;
      for (int t = 0; t < g.frames; ++t) var += (g.at(t, b) - mean) * (g.at(t, b) - mean);
      var /= g.frames;
      worst_mean = std::max(worst_mean, std::abs(mean));
      worst_var = std::max(worst_var, std::abs(var - 1.0));
    }
  };
  std::uniform_real_distribution<float> loc(-20.0f, 5.0f), spread(0.1f, 8.0f);
  for (int i = 0; i < 20; ++i) {
    FeatureMap f(201, 64);
    const float mu = loc(rng), sd = spread(rng);
    f.values = oracle::random_floats(f.values.size(), rng, sd);
    for (float& v : f.values) v += mu;
    measure(instance_normalize(f, 1e-5));
  }
  for (int i = 0; i < 5; ++i) {
    const auto g = extract_features(random_wave(32000, rng), FeatureParams{});
    if (g.frames != 201) return {false, "front-end produced " + std::to_string(g.frames) + " frames"};
    measure(g);
  }
  return {worst_mean < 1e-6 && worst_var < 1e-3,
          fmt("25 maps of 201x64: worst |mean| %.1e, worst |var-1| %.1e", worst_mean, worst_var)};
}

// 8 -------------------------------------------------------------------------
class FixedEmbedder final : public Embedder {
 public:
  Embedding embed(const Waveform&) const override { return {0.3f, -0.1f, 0.7f, 0.2f}; }
};

Outcome scoring_protocol() {
  std::mt19937_64 rng(8);
  const FixedEmbedder stub;
  const double stub_score = score_pair(random_wave(160000, rng), random_wave(48000, rng), stub);

  const auto cfg = TrunkConfig::q_sap();
  const NetworkEmbedder net(init_weights(cfg, 8), cfg);
  // Eight utterances of 2-9 s, each embedded once on the standard crop grid.
  std::vector<Waveform> utts;
  std::vector<std::vector<Embedding>> crops;
  std::uniform_int_distribution<std::size_t> len(32000, 144000);
  for (int i = 0; i < 8; ++i) {
    utts.push_back(random_wave(len(rng), rng));
    crops.push_back(embed_crops(utts.back(), net));
  }
  int asymmetric = 0, pairs = 0;
  for (int i = 0; i < 8 && pairs < 20; ++i) {
    for (int j = i + 1; j < 8 && pairs < 20; ++j, ++pairs) {
      if (score_embeddings(crops[i], crops[j]) != score_embeddings(crops[j], crops[i])) ++asymmetric;
    }
  }
  // End to end, recomputing every embedding in each order.
  for (int k = 0; k < 2; ++k) {
    if (score_pair(utts[k], utts[k + 4], net) != score_pair(utts[k + 4], utts[k], net)) ++asymmetric;
  }
  return {std::abs(stub_score - 1.0) <= 1e-6 && asymmetric == 0,
          fmt("stub score %.9f; %d of %d pairs asymmetric", stub_score, asymmetric, pairs + 2)};
}

// 9 -------------------------------------------------------------------------
Outcome end_to_end() {
  const std::uint64_t seed = 1;
  const auto corpus = SyntheticCorpus::make(20, 10, 512, seed, 400);
  auto run = [&](LossKind kind) {
    DemoConfig cfg;
    cfg.loss = kind;
    cfg.epochs = 200;
    cfg.seed = seed;
    return train_demo(corpus, cfg);
  };
  auto gap = [&](const DemoResult& r) {
    return mean_interclass_angular_gap(r.embeddings, corpus.labels, r.classifier.weight);
  };
  const auto ap = run(LossKind::AngularProtoSoftmax);
  const double g_soft = gap(run(LossKind::Softmax));
  const double g_am = gap(run(LossKind::AmSoftmax));
  const double g_aam = gap(run(LossKind::AamSoftmax));
  const bool ok = ap.heldout_eer < 0.05 && g_am > g_soft && g_aam > g_soft;
  return {ok, fmt("AP+Softmax held-out EER %.2f%%; angular gap softmax %.4f, AM %.4f, AAM %.4f rad",
                  100.0 * ap.heldout_eer, g_soft, g_am, g_aam)};
}

// 10 ------------------------------------------------------------------------
Outcome serialization() {
  const auto dir = std::filesystem::temp_directory_path() / "svkit_acceptance";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(10);
  bool ok = true;

  auto weights_round_trip = [&](const NetworkWeights& w, const char* name) {
    save_weights(dir / name, w);
    const auto back = load_weights(dir / name);
    ok = ok && back == w && encode_weights(back) == encode_weights(w);
  };
  auto cfg = TrunkConfig::h_asp();
  cfg.embed_bn = true;
  weights_round_trip(init_weights(cfg, 10), "h.svw1");
  weights_round_trip(init_weights(TrunkConfig::q_sap(), 10), "q.svw1");

  NetworkWeights big;
  big.add("dense.weight", {2048, 4096}, oracle::random_floats(2048u * 4096u, rng));
  big.add("dense.bias", {4096});
  big.get("dense.weight").data[0] = -0.0f;
  big.get("dense.weight").data[1] = std::numeric_limits<float>::denorm_min();
  weights_round_trip(big, "big.svw1");

  FeatureMap f(401, 64);
  f.values = oracle::random_floats(f.values.size(), rng);
  write_feature_file(dir / "f.svf1", f);
  const auto g = read_feature_file(dir / "f.svf1");
  ok = ok && g.frames == f.frames && g.bins == f.bins &&
       std::memcmp(g.values.data(), f.values.data(), f.values.size() * sizeof(float)) == 0;
  std::filesystem::remove_all(dir);
  return {ok, fmt("H/ASP, Q/SAP and a %.2fM-parameter container; 401x64 feature map",
                  big.parameter_count() / 1e6)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"parameter counts", parameter_counts},
      {"shape conformance", shape_trace},
      {"gradient oracle", gradient_oracle},
      {"metric oracle", metric_oracle},
      {"SNR fidelity", snr_fidelity},
      {"RIR identity", rir_identity},
      {"instance-norm contract", instance_norm},
      {"scoring protocol", scoring_protocol},
      {"end-to-end loss behavior", end_to_end},
      {"serialization", serialization},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s %2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
