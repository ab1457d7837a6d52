#include "svkit/optim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "svkit/binary_io.h"
#include "svkit/common.h"

namespace svkit {

void Schedule::validate() const {
  check(decay_factor > 0.0 && decay_factor <= 1.0, "schedule: decay factor must be in (0, 1]");
  check(decay_every >= 1, "schedule: decay interval must be at least one epoch");
}

double lr_at(int epoch, double lr0, const Schedule& s) {
  s.validate();
  check(epoch >= 0, "lr_at: epoch must be non-negative");
  return lr0 * std::pow(s.decay_factor, epoch / s.decay_every);
}

AdamState::AdamState(std::size_t size, AdamConfig config)
    : config_(config), m_(size, 0.0), v_(size, 0.0) {
  check(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0,
        "adam: betas must be in [0, 1)");
  check(config.eps > 0.0, "adam: eps must be positive");
}

void AdamState::step(std::span<double> params, std::span<const double> grads, double lr,
                     double weight_decay) {
  check(params.size() == m_.size() && grads.size() == m_.size(),
        "adam: parameter and gradient sizes must match the state");
  for (double g : grads) check(std::isfinite(g), "adam: non-finite gradient");
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + weight_decay * params[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.eps);
  }
}

SyntheticCorpus SyntheticCorpus::make(int speakers, int utterances, int dim,
                                      std::uint64_t seed, int pairs_per_split) {
  check(speakers >= 2 && utterances >= 2 && dim >= 1, "corpus: need >= 2 speakers and utterances");
  check(pairs_per_split >= 2, "corpus: need at least two trials per split");
  SyntheticCorpus c;
  c.speakers = speakers;
  c.utterances = utterances;
  c.dim = dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  c.embeddings.resize(static_cast<Eigen::Index>(speakers) * utterances, dim);
  for (Eigen::Index i = 0; i < c.embeddings.rows(); ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) c.embeddings(i, j) = normal(rng);
  }
  for (int k = 0; k < speakers; ++k) {
    for (int u = 0; u < utterances; ++u) c.labels.push_back(k);
  }

  const long same_pairs = static_cast<long>(speakers) * utterances * (utterances - 1) / 2;
  const int targets_per_split = pairs_per_split / 2;
  check(2L * targets_per_split <= same_pairs, "corpus: too few same-speaker pairs for the trial lists");

  std::set<std::pair<int, int>> used;
  std::uniform_int_distribution<int> pick_spk(0, speakers - 1);
  std::uniform_int_distribution<int> pick_utt(0, utterances - 1);
  auto draw = [&](bool target) {
    while (true) {
      const int sa = pick_spk(rng);
      int sb = pick_spk(rng);
      if (target) sb = sa;
      else if (sb == sa) continue;
      int a = sa * utterances + pick_utt(rng);
      int b = sb * utterances + pick_utt(rng);
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      if (used.insert({a, b}).second) return std::pair{a, b};
    }
  };
  for (auto* split : {&c.heldout_pairs, &c.train_pairs}) {
    auto& flags = split == &c.heldout_pairs ? c.heldout_target : c.train_target;
    for (int i = 0; i < pairs_per_split; ++i) {
      const bool target = i < targets_per_split;
      split->push_back(draw(target));
      flags.push_back(target);
    }
  }
  return c;
}

DetectionScores heldout_scores(const SyntheticCorpus& corpus, const Matrix& embeddings) {
  DetectionScores s;
  for (std::size_t i = 0; i < corpus.heldout_pairs.size(); ++i) {
    const auto [a, b] = corpus.heldout_pairs[i];
    const double cos = embeddings.row(a).dot(embeddings.row(b)) /
                       (embeddings.row(a).norm() * embeddings.row(b).norm());
    (corpus.heldout_target[i] ? s.target : s.nontarget).push_back(cos);
  }
  return s;
}

double mean_interclass_angular_gap(const Matrix& embeddings, std::span<const int> labels,
                                   const Matrix& class_directions) {
  check(static_cast<Eigen::Index>(labels.size()) == embeddings.rows(), "gap: one label per row");
  const Matrix unit = embeddings.rowwise().normalized();
  Matrix directions = class_directions;
  if (directions.size() == 0) {
    const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
    directions = Matrix::Zero(classes, embeddings.cols());
    for (Eigen::Index i = 0; i < unit.rows(); ++i) directions.row(labels[i]) += unit.row(i);
  }
  check(directions.rows() >= 2 && directions.cols() == embeddings.cols(),
        "gap: need at least two class directions of the embedding dimension");
  directions.rowwise().normalize();

  const Matrix cos = unit * directions.transpose();
  double total = 0.0;
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    check(labels[i] >= 0 && labels[i] < directions.rows(), "gap: label out of range");
    const auto angle = [&](Eigen::Index k) { return std::acos(std::clamp(cos(i, k), -1.0, 1.0)); };
    double nearest_other = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < directions.rows(); ++k) {
      if (k != labels[i]) nearest_other = std::min(nearest_other, angle(k));
    }
    total += nearest_other - angle(labels[i]);
  }
  return total / static_cast<double>(unit.rows());
}

namespace {

LossResult evaluate_loss(const DemoConfig& cfg, const Matrix& x, std::span<const int> labels,
                         int speakers, int per_speaker, const ClassifierWeights& cls,
                         const APParams& ap) {
  switch (cfg.loss) {
    case LossKind::Softmax: return softmax_ce(x, labels, cls);
    case LossKind::AmSoftmax: return am_softmax(x, labels, cls, cfg.margin);
    case LossKind::AamSoftmax: return aam_softmax(x, labels, cls, cfg.margin);
    case LossKind::AngularProto: return angular_prototypical(x, speakers, per_speaker, ap);
    case LossKind::AngularProtoSoftmax:
      return ap_plus_softmax(x, labels, speakers, per_speaker, cls, ap, cfg.softmax_weight);
  }
  throw Error("unknown loss");
}

std::span<double> flat(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> flat(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<const double> flat(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<const double> flat(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

struct Batch {
  std::vector<int> rows;
  std::vector<int> labels;
  int speakers = 0;
};

// Every utterance appears once per epoch; a batch holds `speakers_per_batch`
// distinct speakers with `utterances_per_speaker` utterances each.
std::vector<Batch> plan_epoch(const SyntheticCorpus& c, const BatchSpec& spec,
                              std::mt19937_64& rng) {
  std::vector<std::vector<int>> order(static_cast<std::size_t>(c.speakers));
  for (int k = 0; k < c.speakers; ++k) {
    order[k].resize(static_cast<std::size_t>(c.utterances));
    std::iota(order[k].begin(), order[k].end(), k * c.utterances);
    std::shuffle(order[k].begin(), order[k].end(), rng);
  }
  std::vector<int> spk(static_cast<std::size_t>(c.speakers));
  std::iota(spk.begin(), spk.end(), 0);
  std::vector<Batch> batches;
  const int rounds = c.utterances / spec.utterances_per_speaker;
  for (int r = 0; r < rounds; ++r) {
    std::shuffle(spk.begin(), spk.end(), rng);
    for (int start = 0; start + spec.speakers_per_batch <= c.speakers;
         start += spec.speakers_per_batch) {
      Batch b;
      b.speakers = spec.speakers_per_batch;
      for (int s = start; s < start + spec.speakers_per_batch; ++s) {
        for (int u = 0; u < spec.utterances_per_speaker; ++u) {
          b.rows.push_back(order[spk[s]][r * spec.utterances_per_speaker + u]);
          b.labels.push_back(spk[s]);
        }
      }
      batches.push_back(std::move(b));
    }
  }
  return batches;
}

Matrix gather(const Matrix& m, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

double corpus_loss(const SyntheticCorpus& corpus, const Matrix& embeddings, const DemoConfig& cfg,
                   const ClassifierWeights& classifier, const APParams& ap) {
  return evaluate_loss(cfg, embeddings, corpus.labels, corpus.speakers, corpus.utterances,
                       classifier, ap)
      .value;
}

DemoResult train_demo(const SyntheticCorpus& corpus, const DemoConfig& cfg) {
  check(cfg.epochs >= 0, "train_demo: epochs must be non-negative");
  const auto& bs = cfg.batch;
  check(bs.speakers_per_batch >= 1 && bs.speakers_per_batch <= corpus.speakers,
        "train_demo: speakers per batch must be in [1, K]");
  check(bs.utterances_per_speaker >= 1 && bs.utterances_per_speaker <= corpus.utterances,
        "train_demo: utterances per speaker must be in [1, M]");
  if (uses_prototypes(cfg.loss)) {
    check(bs.speakers_per_batch >= 2 && bs.utterances_per_speaker >= 2,
          "train_demo: prototypical losses need >= 2 speakers x >= 2 utterances per batch");
  }
  cfg.schedule.validate();

  std::mt19937_64 rng(cfg.seed);
  DemoResult r;
  r.embeddings = corpus.embeddings;
  r.ap = cfg.ap;
  r.classifier = ClassifierWeights::zeros(corpus.speakers, corpus.dim);
  {
    std::normal_distribution<double> normal(0.0, 0.01);
    for (Eigen::Index i = 0; i < r.classifier.weight.size(); ++i) {
      r.classifier.weight.data()[i] = normal(rng);
    }
  }
  const bool train_classifier = uses_classifier(cfg.loss);
  const bool train_ap = uses_prototypes(cfg.loss);

  AdamState emb_state(static_cast<std::size_t>(r.embeddings.size()), cfg.adam);
  AdamState w_state(static_cast<std::size_t>(r.classifier.weight.size()), cfg.adam);
  AdamState b_state(static_cast<std::size_t>(r.classifier.bias.size()), cfg.adam);
  AdamState ap_state(2, cfg.adam);
  Matrix grad_full = Matrix::Zero(r.embeddings.rows(), r.embeddings.cols());

  auto record = [&](int epoch, double lr, double loss) {
    const auto e = compute_eer(heldout_scores(corpus, r.embeddings));
    r.history.push_back({epoch, lr, loss, e.eer});
  };

  // The recorded loss is measured on one fixed batch plan after each epoch so
  // the history is free of batch-sampling noise.
  std::mt19937_64 probe(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto eval_batches = plan_epoch(corpus, bs, probe);
  auto eval_loss = [&] {
    double total = 0.0;
    for (const auto& b : eval_batches) {
      total += evaluate_loss(cfg, gather(r.embeddings, b.rows), b.labels, b.speakers,
                             bs.utterances_per_speaker, r.classifier, r.ap)
                   .value;
    }
    return total / static_cast<double>(eval_batches.size());
  };
  record(0, lr_at(0, cfg.lr0, cfg.schedule), eval_loss());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg.lr0, cfg.schedule);
    const auto batches = plan_epoch(corpus, bs, rng);
    for (const auto& b : batches) {
      const LossResult loss = evaluate_loss(cfg, gather(r.embeddings, b.rows), b.labels,
                                            b.speakers, bs.utterances_per_speaker, r.classifier,
                                            r.ap);
      if (!std::isfinite(loss.value)) {
        throw Error("train_demo: loss diverged at epoch " + std::to_string(epoch + 1));
      }

      grad_full.setZero();
      for (std::size_t i = 0; i < b.rows.size(); ++i) {
        grad_full.row(b.rows[i]) += loss.grads.embeddings.row(static_cast<Eigen::Index>(i));
      }
      emb_state.step(flat(r.embeddings), flat(std::as_const(grad_full)), lr, cfg.weight_decay);
      if (train_classifier) {
        w_state.step(flat(r.classifier.weight), flat(loss.grads.weight), lr, cfg.weight_decay);
        if (cfg.loss == LossKind::Softmax || cfg.loss == LossKind::AngularProtoSoftmax) {
          b_state.step(flat(r.classifier.bias), flat(loss.grads.bias), lr, cfg.weight_decay);
        }
      }
      if (train_ap) {
        double params[2] = {r.ap.w, r.ap.b};
        const double grads[2] = {loss.grads.ap_w, loss.grads.ap_b};
        ap_state.step(params, grads, lr, cfg.weight_decay);
        r.ap.w = std::max(params[0], r.ap.w_min);
        r.ap.b = params[1];
      }
    }
    const double loss = eval_loss();
    if (!std::isfinite(loss)) {
      throw Error("train_demo: loss diverged at epoch " + std::to_string(epoch + 1));
    }
    record(epoch + 1, lr, loss);
  }

  const auto scores = heldout_scores(corpus, r.embeddings);
  r.heldout_eer = compute_eer(scores).eer;
  r.heldout_min_dcf = compute_min_dcf(scores, cfg.dcf).min_dcf;
  return r;
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  std::string out = "epoch,lr,loss,heldout_eer\n";
  char buf[128];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.6f\n", h.epoch, h.lr, h.loss, h.heldout_eer);
    out += buf;
  }
  binio::write_file(path.c_str(), {out.data(), out.size()});
}

}  // namespace svkit
