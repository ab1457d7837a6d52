#pragma once

#include <span>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace svkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class LossKind { Softmax, AmSoftmax, AamSoftmax, AngularProto, AngularProtoSoftmax };

/// Accepts the CLI names softmax, amsoftmax, aamsoftmax, ap and ap+softmax.
LossKind parse_loss(std::string_view name);
std::string_view to_string(LossKind kind);
bool uses_classifier(LossKind kind);
bool uses_prototypes(LossKind kind);

struct MarginParams {
  double margin = 0.2;
  double scale = 30.0;
};

/// Learned similarity scale and bias for the angular prototypical head.
struct APParams {
  double w = 10.0;
  double b = -5.0;
  double w_min = 1e-6;
};

/// One row per training speaker. Margin losses ignore the bias and use
/// L2-normalized rows.
struct ClassifierWeights {
  Matrix weight;  // C x D
  Vector bias;    // C

  static ClassifierWeights zeros(int classes, int dim);
};

struct LossGrads {
  Matrix embeddings;
  Matrix weight;
  Vector bias;
  double ap_w = 0.0;
  double ap_b = 0.0;
};

struct LossResult {
  double value = 0.0;
  LossGrads grads;
};

/// Rows of `embeddings` are utterances; `labels` index classifier rows.
LossResult softmax_ce(const Matrix& embeddings, std::span<const int> labels,
                      const ClassifierWeights& classifier);

/// Logits s(cos theta_j - m [j == y]).
LossResult am_softmax(const Matrix& embeddings, std::span<const int> labels,
                      const ClassifierWeights& classifier, const MarginParams& p);

/// True-class logit s cos(theta_y + m), extended as s(cos theta_y - m sin m)
/// once theta_y + m passes pi so the logit stays monotonic.
LossResult aam_softmax(const Matrix& embeddings, std::span<const int> labels,
                       const ClassifierWeights& classifier, const MarginParams& p);

/// Margin-adjusted true-class cosine used by aam_softmax, and its derivative.
double aam_target_logit(double cos_theta, double margin);
double aam_target_logit_derivative(double cos_theta, double margin);

/// Rows are grouped speaker-major: row k*M + i is utterance i of speaker k.
/// The last utterance of each speaker is the query and the mean of the other
/// M-1 is the prototype; S = w cos(query_j, proto_k) + b, cross-entropy
/// against the diagonal.
LossResult angular_prototypical(const Matrix& embeddings, int speakers, int per_speaker,
                                const APParams& p);

/// angular_prototypical + softmax_weight * softmax_ce over all rows; shared
/// embedding gradients are summed.
LossResult ap_plus_softmax(const Matrix& embeddings, std::span<const int> labels, int speakers,
                           int per_speaker, const ClassifierWeights& classifier,
                           const APParams& p, double softmax_weight = 1.0);

}  // namespace svkit
