#include "svkit/losses.h"

#include <cmath>
#include <numbers>
#include <string>

#include "svkit/common.h"

namespace svkit {

LossKind parse_loss(std::string_view name) {
  if (name == "softmax") return LossKind::Softmax;
  if (name == "amsoftmax") return LossKind::AmSoftmax;
  if (name == "aamsoftmax") return LossKind::AamSoftmax;
  if (name == "ap") return LossKind::AngularProto;
  if (name == "ap+softmax") return LossKind::AngularProtoSoftmax;
  throw Error("unknown loss: " + std::string(name));
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Softmax: return "softmax";
    case LossKind::AmSoftmax: return "amsoftmax";
    case LossKind::AamSoftmax: return "aamsoftmax";
    case LossKind::AngularProto: return "ap";
    case LossKind::AngularProtoSoftmax: return "ap+softmax";
  }
  return "?";
}

bool uses_classifier(LossKind kind) { return kind != LossKind::AngularProto; }

bool uses_prototypes(LossKind kind) {
  return kind == LossKind::AngularProto || kind == LossKind::AngularProtoSoftmax;
}

ClassifierWeights ClassifierWeights::zeros(int classes, int dim) {
  return {Matrix::Zero(classes, dim), Vector::Zero(classes)};
}

namespace {

void check_labels(const Matrix& x, std::span<const int> labels, const ClassifierWeights& cls) {
  check(x.rows() >= 1, "loss: empty batch");
  check(static_cast<Eigen::Index>(labels.size()) == x.rows(), "loss: one label per embedding");
  check(cls.weight.cols() == x.cols(), "loss: classifier and embedding dimensions differ");
  check(x.allFinite() && cls.weight.allFinite(), "loss: non-finite input");
  for (int y : labels) {
    check(y >= 0 && y < cls.weight.rows(), "loss: label " + std::to_string(y) + " out of range");
  }
}

// Mean cross-entropy over rows of `logits` with the given targets. Returns the
// value and overwrites `logits` with d(loss)/d(logits).
double cross_entropy_inplace(Matrix& logits, std::span<const int> targets) {
  const auto n = logits.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto row = logits.row(i);
    const double peak = row.maxCoeff();
    const double lse = peak + std::log((row.array() - peak).exp().sum());
    total += lse - row(targets[i]);
    row = (row.array() - lse).exp();
    row(targets[i]) -= 1.0;
  }
  logits /= static_cast<double>(n);
  return total / static_cast<double>(n);
}

struct Normalized {
  Matrix unit;
  Vector norm;
};

Normalized normalize_rows(const Matrix& x, const char* what) {
  Normalized r{x, x.rowwise().norm()};
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    check(r.norm(i) > 0.0, std::string("loss: zero-norm ") + what);
    r.unit.row(i) /= r.norm(i);
  }
  return r;
}

// Back-propagates d/d(unit rows) to d/d(raw rows): (g - u (u.g)) / |x|.
Matrix normalize_backward(const Normalized& n, const Matrix& grad_unit) {
  Matrix g = grad_unit;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double proj = n.unit.row(i).dot(grad_unit.row(i));
    g.row(i) = (grad_unit.row(i) - proj * n.unit.row(i)) / n.norm(i);
  }
  return g;
}

enum class Margin { Additive, Angular };

LossResult margin_softmax(const Matrix& x, std::span<const int> labels,
                          const ClassifierWeights& cls, const MarginParams& p, Margin kind) {
  check_labels(x, labels, cls);
  check(p.scale > 0.0, "margin loss: scale must be positive");
  if (kind == Margin::Additive) {
    check(p.margin >= 0.0 && p.margin < 1.0, "am_softmax: margin must be in [0, 1)");
  } else {
    check(p.margin >= 0.0 && p.margin < std::numbers::pi, "aam_softmax: margin must be in [0, pi)");
  }
  const Normalized xe = normalize_rows(x, "embedding");
  const Normalized wc = normalize_rows(cls.weight, "classifier row");
  const Matrix cosines = xe.unit * wc.unit.transpose();

  Matrix logits = p.scale * cosines;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double c = cosines(i, labels[i]);
    logits(i, labels[i]) = p.scale * (kind == Margin::Additive ? c - p.margin
                                                              : aam_target_logit(c, p.margin));
  }
  LossResult r;
  r.value = cross_entropy_inplace(logits, labels);

  Matrix d_cos = p.scale * logits;
  if (kind == Margin::Angular) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      d_cos(i, labels[i]) *= aam_target_logit_derivative(cosines(i, labels[i]), p.margin);
    }
  }
  r.grads.embeddings = normalize_backward(xe, d_cos * wc.unit);
  r.grads.weight = normalize_backward(wc, d_cos.transpose() * xe.unit);
  r.grads.bias = Vector::Zero(cls.weight.rows());
  return r;
}

}  // namespace

LossResult softmax_ce(const Matrix& x, std::span<const int> labels, const ClassifierWeights& cls) {
  check_labels(x, labels, cls);
  check(cls.bias.size() == cls.weight.rows(), "softmax_ce: bias must have one entry per class");
  Matrix logits = x * cls.weight.transpose();
  logits.rowwise() += cls.bias.transpose();
  LossResult r;
  r.value = cross_entropy_inplace(logits, labels);
  r.grads.embeddings = logits * cls.weight;
  r.grads.weight = logits.transpose() * x;
  r.grads.bias = logits.colwise().sum().transpose();
  return r;
}

LossResult am_softmax(const Matrix& x, std::span<const int> labels, const ClassifierWeights& cls,
                      const MarginParams& p) {
  return margin_softmax(x, labels, cls, p, Margin::Additive);
}

LossResult aam_softmax(const Matrix& x, std::span<const int> labels, const ClassifierWeights& cls,
                       const MarginParams& p) {
  return margin_softmax(x, labels, cls, p, Margin::Angular);
}

double aam_target_logit(double c, double m) {
  // theta + m <= pi  <=>  cos(theta) >= cos(pi - m)
  if (c >= std::cos(std::numbers::pi - m)) {
    const double sine = std::sqrt(std::max(0.0, 1.0 - c * c));
    return c * std::cos(m) - sine * std::sin(m);
  }
  return c - m * std::sin(m);
}

double aam_target_logit_derivative(double c, double m) {
  if (c >= std::cos(std::numbers::pi - m)) {
    const double sine = std::sqrt(std::max(1e-12, 1.0 - c * c));
    return std::cos(m) + c * std::sin(m) / sine;
  }
  return 1.0;
}

LossResult angular_prototypical(const Matrix& x, int speakers, int per_speaker,
                                const APParams& p) {
  check(speakers >= 2, "angular_prototypical: need at least two speakers");
  check(per_speaker >= 2, "angular_prototypical: need at least two utterances per speaker");
  check(x.rows() == static_cast<Eigen::Index>(speakers) * per_speaker,
        "angular_prototypical: batch must hold exactly speakers x per_speaker rows");
  check(x.allFinite() && std::isfinite(p.w) && std::isfinite(p.b),
        "angular_prototypical: non-finite input");
  const int support = per_speaker - 1;
  const Eigen::Index dim = x.cols();

  Matrix queries(speakers, dim), protos(speakers, dim);
  for (int k = 0; k < speakers; ++k) {
    const Eigen::Index base = static_cast<Eigen::Index>(k) * per_speaker;
    queries.row(k) = x.row(base + support);
    protos.row(k) = x.middleRows(base, support).colwise().sum() / support;
  }
  const Normalized q = normalize_rows(queries, "query");
  const Normalized c = normalize_rows(protos, "prototype");
  const Matrix cosines = q.unit * c.unit.transpose();

  Matrix logits = (p.w * cosines).array() + p.b;
  std::vector<int> diag(static_cast<std::size_t>(speakers));
  for (int k = 0; k < speakers; ++k) diag[k] = k;
  LossResult r;
  r.value = cross_entropy_inplace(logits, diag);

  r.grads.ap_w = (logits.array() * cosines.array()).sum();
  r.grads.ap_b = logits.sum();
  const Matrix d_cos = p.w * logits;
  const Matrix d_query = normalize_backward(q, d_cos * c.unit);
  const Matrix d_proto = normalize_backward(c, d_cos.transpose() * q.unit);

  r.grads.embeddings = Matrix::Zero(x.rows(), dim);
  for (int k = 0; k < speakers; ++k) {
    const Eigen::Index base = static_cast<Eigen::Index>(k) * per_speaker;
    r.grads.embeddings.row(base + support) = d_query.row(k);
    for (int i = 0; i < support; ++i) r.grads.embeddings.row(base + i) = d_proto.row(k) / support;
  }
  return r;
}

LossResult ap_plus_softmax(const Matrix& x, std::span<const int> labels, int speakers,
                           int per_speaker, const ClassifierWeights& cls, const APParams& p,
                           double softmax_weight) {
  LossResult ap = angular_prototypical(x, speakers, per_speaker, p);
  const LossResult ce = softmax_ce(x, labels, cls);
  ap.value += softmax_weight * ce.value;
  ap.grads.embeddings += softmax_weight * ce.grads.embeddings;
  ap.grads.weight = softmax_weight * ce.grads.weight;
  ap.grads.bias = softmax_weight * ce.grads.bias;
  return ap;
}

}  // namespace svkit
