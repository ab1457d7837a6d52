#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "svkit/losses.h"
#include "svkit/metrics.h"

namespace svkit {

/// Step decay: the learning rate is multiplied by `decay_factor` every
/// `decay_every` epochs.
struct Schedule {
  double decay_factor = 0.9;
  int decay_every = 2;

  void validate() const;
};

double lr_at(int epoch, double lr0, const Schedule& s);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment buffers for one flat parameter block.
class AdamState {
 public:
  AdamState(std::size_t size, AdamConfig config = {});

  /// One bias-corrected Adam update. Weight decay is the classical L2 form,
  /// added to the gradient before the moments.
  void step(std::span<double> params, std::span<const double> grads, double lr,
            double weight_decay);

  long steps() const { return steps_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  AdamConfig config_;
  long steps_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

/// Free embedding parameters for K speakers x M utterances, plus a held-out
/// trial list over pairs of those utterances.
struct SyntheticCorpus {
  int speakers = 0;
  int utterances = 0;
  int dim = 0;
  Matrix embeddings;        // speaker-major rows
  std::vector<int> labels;  // speaker of each row
  std::vector<std::pair<int, int>> heldout_pairs;
  std::vector<bool> heldout_target;
  std::vector<std::pair<int, int>> train_pairs;
  std::vector<bool> train_target;

  static SyntheticCorpus make(int speakers, int utterances, int dim, std::uint64_t seed,
                              int pairs_per_split = 1000);
};

struct BatchSpec {
  int speakers_per_batch = 10;
  int utterances_per_speaker = 2;
};

struct DemoConfig {
  LossKind loss = LossKind::AngularProtoSoftmax;
  int epochs = 200;
  BatchSpec batch;
  double lr0 = 0.01;
  Schedule schedule{0.9, 2};
  double weight_decay = 5e-5;
  AdamConfig adam;
  MarginParams margin;
  APParams ap;
  double softmax_weight = 1.0;
  DCFParams dcf;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double heldout_eer = 0.0;
};

struct DemoResult {
  std::vector<EpochRecord> history;
  Matrix embeddings;
  ClassifierWeights classifier;
  APParams ap;
  double heldout_eer = 0.0;
  double heldout_min_dcf = 0.0;
};

/// Scores the held-out trials by cosine similarity of the rows.
DetectionScores heldout_scores(const SyntheticCorpus& corpus, const Matrix& embeddings);

/// Mean over utterances of (smallest angle to another class direction -
/// angle to the own class direction), in radians. Class directions are the
/// rows of `class_directions`; pass an empty matrix to use the normalized
/// per-speaker centroids instead.
double mean_interclass_angular_gap(const Matrix& embeddings, std::span<const int> labels,
                                   const Matrix& class_directions = {});

/// Trains the free embeddings (and classifier / AP scale) with Adam. Epoch 0
/// in the history is the untrained state.
DemoResult train_demo(const SyntheticCorpus& corpus, const DemoConfig& cfg);

/// Evaluates the named loss on the whole corpus as a single batch.
double corpus_loss(const SyntheticCorpus& corpus, const Matrix& embeddings,
                   const DemoConfig& cfg, const ClassifierWeights& classifier,
                   const APParams& ap);

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);

}  // namespace svkit
