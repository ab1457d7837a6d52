// svkit: command-line front end for feature extraction, augmentation,
// embedding, trial scoring, evaluation and the free-embedding training demo.
//
// Exit status: 0 success, 1 usage error, 2 data error.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "svkit/augment.h"
#include "svkit/binary_io.h"
#include "svkit/common.h"
#include "svkit/features.h"
#include "svkit/metrics.h"
#include "svkit/network.h"
#include "svkit/optim.h"
#include "svkit/scoring.h"
#include "svkit/wav.h"

namespace fs = std::filesystem;
using namespace svkit;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct FeaturizeArgs {
  std::string wav, out;
  double crop_seconds = 0.0;
  std::uint64_t seed = 0;
  double preemphasis = 0.97;
  bool raw = false;
};

struct AugmentArgs {
  std::string wav, out, catalog, kind;
  std::uint64_t seed = 0;
  std::vector<double> snr, gain;
};

struct InitArgs {
  std::string variant = "h-asp", out;
  std::uint64_t seed = 0;
  bool embed_bn = false;
};

struct EmbedArgs {
  std::string weights, wav, out;
  ScoringParams scoring;
};

struct ScoreArgs {
  std::string weights, trials, out;
  ScoringParams scoring;
  int workers = 1;
};

struct EvaluateArgs {
  std::string scores, trials, out;
  DCFParams dcf;
  bool raw_dcf = false;
};

struct TrainArgs {
  std::string loss = "ap+softmax", history;
  int speakers = 20, utterances = 10, dim = 512, pairs = 400;
  DemoConfig demo;
};

int featurize(const FeaturizeArgs& a) {
  Waveform w = read_wav(a.wav);
  if (a.crop_seconds > 0.0) w = crop_segment(w, a.crop_seconds, RandomOffset{a.seed});
  FeatureParams p;
  p.preemphasis = a.preemphasis;
  const FeatureMap f = a.raw ? log_mel_spectrogram(preemphasize(w, p.preemphasis), p)
                             : extract_features(w, p);
  write_feature_file(a.out, f);
  std::cout << "frames=" << f.frames << "\nbins=" << f.bins << '\n';
  return 0;
}

int augment_cmd(const AugmentArgs& a) {
  const Waveform clean = read_wav(a.wav);
  const AugmentCatalogs catalogs = load_catalogs(a.catalog);
  AugmentSpec spec = AugmentSpec::for_kind(parse_augment_kind(a.kind), a.seed);
  if (a.snr.size() == 2) spec.snr_db = {a.snr[0], a.snr[1]};
  if (a.gain.size() == 2) spec.rir_gain_db = {a.gain[0], a.gain[1]};
  const AugmentResult r = augment(clean, catalogs, spec);
  write_wav(a.out, r.output);
  std::cout << "kind=" << to_string(spec.kind) << '\n';
  for (const auto& c : r.components) {
    std::cout << "noise=" << catalogs.additive(spec.kind).paths[c.catalog_index].string()
              << " offset=" << c.offset << " snr_db=" << c.snr_db << '\n';
  }
  if (r.rir_index) {
    std::cout << "rir=" << catalogs.rir.paths[*r.rir_index].string()
              << " gain_db=" << r.rir_gain_db << '\n';
  }
  return 0;
}

int init_cmd(const InitArgs& a) {
  TrunkConfig cfg = TrunkConfig::preset(parse_variant(a.variant));
  cfg.embed_bn = a.embed_bn;
  const NetworkWeights w = init_weights(cfg, a.seed);
  save_weights(a.out, w);
  std::cout << "variant=" << to_string(cfg.variant) << "\nparameters=" << w.parameter_count()
            << '\n';
  return 0;
}

int info_cmd(const std::string& path) {
  const NetworkWeights w = load_weights(path);
  const TrunkConfig cfg = infer_config(w);
  char millions[32];
  std::snprintf(millions, sizeof(millions), "%.2fM",
                static_cast<double>(w.parameter_count()) / 1e6);
  std::cout << "variant=" << to_string(cfg.variant) << "\nembed_bn=" << cfg.embed_bn
            << "\ntensors=" << w.size() << "\nparameters=" << w.parameter_count()
            << "\nparameters_m=" << millions << "\nscalars=" << w.scalar_count()
            << "\nframe_dim=" << cfg.frame_dim() << "\npooled_dim=" << cfg.pooled_dim()
            << "\nembed_dim=" << cfg.embed_dim << '\n';
  return 0;
}

int embed_cmd(const EmbedArgs& a) {
  const NetworkEmbedder embedder(load_weights(a.weights));
  const auto crops = embed_crops(read_wav(a.wav), embedder, a.scoring);
  save_crop_embeddings(a.out, crops);
  std::cout << "crops=" << crops.size() << "\ndim=" << crops.front().size() << '\n';
  return 0;
}

int score_cmd(const ScoreArgs& a) {
  const auto trials = read_trials(a.trials);
  check(!trials.empty(), "score: trial file is empty");
  const NetworkEmbedder embedder(load_weights(a.weights));
  EmbeddingCache cache(embedder, a.scoring);

  std::vector<std::string> utterances;
  for (const auto& t : trials) {
    utterances.push_back(t.enroll);
    utterances.push_back(t.test);
  }
  std::sort(utterances.begin(), utterances.end());
  utterances.erase(std::unique(utterances.begin(), utterances.end()), utterances.end());

  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(static_cast<std::size_t>(std::max(a.workers, 1)));
  auto work = [&](std::size_t id) {
    try {
      for (std::size_t i = next++; i < utterances.size(); i = next++) cache.get(utterances[i]);
    } catch (const std::exception& e) {
      errors[id] = e.what();
      next = utterances.size();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t id = 1; id < errors.size(); ++id) pool.emplace_back(work, id);
  work(0);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) check(e.empty(), e);

  std::vector<ScoredPair> scores;
  scores.reserve(trials.size());
  for (const auto& t : trials) {
    scores.push_back({t.enroll, t.test, score_embeddings(cache.get(t.enroll), cache.get(t.test))});
  }
  const std::string text = format_scores(scores);
  binio::write_file(a.out.c_str(), {text.data(), text.size()});
  std::cout << "trials=" << scores.size() << "\nutterances=" << utterances.size() << '\n';
  return 0;
}

int evaluate_cmd(EvaluateArgs a) {
  a.dcf.normalize = !a.raw_dcf;
  const auto report = evaluate(read_trials(a.trials), read_scores(a.scores), a.dcf);
  const std::string text = format_report(report);
  if (!a.out.empty()) binio::write_file(a.out.c_str(), {text.data(), text.size()});
  std::cout << text;
  return 0;
}

int train_cmd(TrainArgs a) {
  a.demo.loss = parse_loss(a.loss);
  const auto corpus = SyntheticCorpus::make(a.speakers, a.utterances, a.dim, a.demo.seed, a.pairs);
  const DemoResult r = train_demo(corpus, a.demo);
  if (!a.history.empty()) write_history_csv(a.history, r.history);
  std::cout << "loss=" << to_string(a.demo.loss) << "\nepochs=" << a.demo.epochs
            << "\ninitial_loss=" << r.history.front().loss
            << "\nfinal_loss=" << r.history.back().loss
            << "\nheldout_eer_pct=" << 100.0 * r.heldout_eer
            << "\nheldout_min_dcf=" << r.heldout_min_dcf << "\nangular_gap="
            << mean_interclass_angular_gap(
                   r.embeddings, corpus.labels,
                   uses_classifier(a.demo.loss) ? r.classifier.weight : Matrix{})
            << '\n';
  return 0;
}

void add_scoring_flags(CLI::App* cmd, ScoringParams& p) {
  cmd->add_option("--crops", p.n_crops, "Crops per utterance")->capture_default_str();
  cmd->add_option("--crop-seconds", p.crop_seconds, "Crop length in seconds")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"svkit: speaker verification toolkit"};
  app.require_subcommand(1);

  FeaturizeArgs fa;
  auto* featurize_cmd = app.add_subcommand("featurize", "Waveform to normalized log-mel SVF1 file");
  featurize_cmd->add_option("--wav", fa.wav, "Input 16 kHz mono WAV")->required()->check(CLI::ExistingFile);
  featurize_cmd->add_option("--out", fa.out, "Output SVF1 file")->required();
  featurize_cmd->add_option("--crop-seconds", fa.crop_seconds, "Random crop length (0 = whole file)");
  featurize_cmd->add_option("--seed", fa.seed, "Crop seed")->capture_default_str();
  featurize_cmd->add_option("--preemphasis", fa.preemphasis)->capture_default_str();
  featurize_cmd->add_flag("--raw", fa.raw, "Skip instance normalization");

  AugmentArgs aa;
  auto* augment_sub = app.add_subcommand("augment", "Apply one augmentation to a WAV file");
  augment_sub->add_option("--wav", aa.wav)->required()->check(CLI::ExistingFile);
  augment_sub->add_option("--out", aa.out)->required();
  augment_sub->add_option("--catalog", aa.catalog, "Directory with speech/ music/ noise/ rir/")
      ->required()->check(CLI::ExistingDirectory);
  augment_sub->add_option("--kind", aa.kind)->required()
      ->check(CLI::IsMember({"speech", "music", "noise", "rir"}));
  augment_sub->add_option("--seed", aa.seed)->capture_default_str();
  augment_sub->add_option("--snr", aa.snr, "Override SNR range: LO HI (dB)")->expected(2);
  augment_sub->add_option("--gain", aa.gain, "Override RIR gain range: LO HI (dB)")->expected(2);

  InitArgs ia;
  auto* init_sub = app.add_subcommand("init-weights", "Write randomly initialized trunk weights");
  init_sub->add_option("--variant", ia.variant)->check(CLI::IsMember({"q-sap", "h-asp"}))
      ->capture_default_str();
  init_sub->add_option("--out", ia.out)->required();
  init_sub->add_option("--seed", ia.seed)->capture_default_str();
  init_sub->add_flag("--embed-bn", ia.embed_bn, "Add batch norm on the embedding");

  std::string info_weights;
  auto* info_sub = app.add_subcommand("info", "Describe a weights file");
  info_sub->add_option("--weights", info_weights)->required()->check(CLI::ExistingFile);

  EmbedArgs ea;
  auto* embed_sub = app.add_subcommand("embed", "Crop embeddings of one utterance (SVF1)");
  embed_sub->add_option("--weights", ea.weights)->required()->check(CLI::ExistingFile);
  embed_sub->add_option("--wav", ea.wav)->required()->check(CLI::ExistingFile);
  embed_sub->add_option("--out", ea.out)->required();
  add_scoring_flags(embed_sub, ea.scoring);

  ScoreArgs sa;
  auto* score_sub = app.add_subcommand("score", "Score every trial in a trial list");
  score_sub->add_option("--weights", sa.weights)->required()->check(CLI::ExistingFile);
  score_sub->add_option("--trials", sa.trials)->required()->check(CLI::ExistingFile);
  score_sub->add_option("--out", sa.out)->required();
  score_sub->add_option("--workers", sa.workers)->check(CLI::Range(1, 256))->capture_default_str();
  add_scoring_flags(score_sub, sa.scoring);

  EvaluateArgs va;
  auto* evaluate_sub = app.add_subcommand("evaluate", "EER and MinDCF of a score file");
  evaluate_sub->add_option("--scores", va.scores)->required()->check(CLI::ExistingFile);
  evaluate_sub->add_option("--trials", va.trials)->required()->check(CLI::ExistingFile);
  evaluate_sub->add_option("--out", va.out, "Also write the report here");
  evaluate_sub->add_option("--p-target", va.dcf.p_target)->capture_default_str();
  evaluate_sub->add_option("--c-miss", va.dcf.c_miss)->capture_default_str();
  evaluate_sub->add_option("--c-fa", va.dcf.c_fa)->capture_default_str();
  evaluate_sub->add_flag("--raw-dcf", va.raw_dcf, "Report un-normalized MinDCF as min_dcf");

  TrainArgs ta;
  auto* train_sub = app.add_subcommand("train-demo", "Free-embedding training demo");
  train_sub->add_option("--loss", ta.loss)
      ->check(CLI::IsMember({"softmax", "amsoftmax", "aamsoftmax", "ap", "ap+softmax"}))
      ->capture_default_str();
  train_sub->add_option("--epochs", ta.demo.epochs)->capture_default_str();
  train_sub->add_option("--speakers", ta.speakers)->capture_default_str();
  train_sub->add_option("--utterances", ta.utterances)->capture_default_str();
  train_sub->add_option("--dim", ta.dim)->capture_default_str();
  train_sub->add_option("--trials", ta.pairs, "Held-out trials")->capture_default_str();
  train_sub->add_option("--batch-speakers", ta.demo.batch.speakers_per_batch)->capture_default_str();
  train_sub->add_option("--batch-utterances", ta.demo.batch.utterances_per_speaker)
      ->capture_default_str();
  train_sub->add_option("--lr", ta.demo.lr0)->capture_default_str();
  train_sub->add_option("--decay-factor", ta.demo.schedule.decay_factor)->capture_default_str();
  train_sub->add_option("--decay-every", ta.demo.schedule.decay_every)->capture_default_str();
  train_sub->add_option("--weight-decay", ta.demo.weight_decay)->capture_default_str();
  train_sub->add_option("--margin", ta.demo.margin.margin)->capture_default_str();
  train_sub->add_option("--scale", ta.demo.margin.scale)->capture_default_str();
  train_sub->add_option("--softmax-weight", ta.demo.softmax_weight)->capture_default_str();
  train_sub->add_option("--seed", ta.demo.seed)->capture_default_str();
  train_sub->add_option("--history", ta.history, "CSV: epoch,lr,loss,heldout_eer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*featurize_cmd) return featurize(fa);
    if (*augment_sub) return augment_cmd(aa);
    if (*init_sub) return init_cmd(ia);
    if (*info_sub) return info_cmd(info_weights);
    if (*embed_sub) return embed_cmd(ea);
    if (*score_sub) return score_cmd(sa);
    if (*evaluate_sub) return evaluate_cmd(va);
    if (*train_sub) return train_cmd(ta);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}
