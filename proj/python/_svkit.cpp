#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "svkit/augment.h"
#include "svkit/common.h"
#include "svkit/features.h"
#include "svkit/losses.h"
#include "svkit/metrics.h"
#include "svkit/network.h"
#include "svkit/optim.h"
#include "svkit/scoring.h"
#include "svkit/weights.h"

namespace py = pybind11;
using namespace svkit;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Waveform to_wave(const FloatArray& a) {
  if (a.ndim() != 1) throw Error("expected a 1-D sample array");
  Waveform w;
  w.samples.assign(a.data(), a.data() + a.size());
  return w;
}

FloatArray from_wave(const Waveform& w) {
  FloatArray out(static_cast<py::ssize_t>(w.size()));
  std::copy(w.samples.begin(), w.samples.end(), out.mutable_data());
  return out;
}

FeatureMap to_features(const FloatArray& a) {
  if (a.ndim() != 2) throw Error("expected a 2-D (frames, bins) array");
  FeatureMap f(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), f.values.begin());
  return f;
}

FloatArray from_features(const FeatureMap& f) {
  FloatArray out({f.frames, f.bins});
  std::copy(f.values.begin(), f.values.end(), out.mutable_data());
  return out;
}

FloatArray from_rows(const std::vector<Embedding>& rows) {
  const auto dim = rows.empty() ? 0 : static_cast<py::ssize_t>(rows.front().size());
  FloatArray out({static_cast<py::ssize_t>(rows.size()), dim});
  float* dst = out.mutable_data();
  for (const auto& r : rows) dst = std::copy(r.begin(), r.end(), dst);
  return out;
}

std::vector<Embedding> to_rows(const FloatArray& a) {
  if (a.ndim() != 2) throw Error("expected a 2-D (crops, dim) array");
  std::vector<Embedding> rows;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    rows.emplace_back(a.data() + i * a.shape(1), a.data() + (i + 1) * a.shape(1));
  }
  return rows;
}

DetectionScores to_scores(std::vector<double> target, std::vector<double> nontarget) {
  return {std::move(target), std::move(nontarget)};
}

DCFParams dcf_params(double p_target, double c_miss, double c_fa, bool normalize) {
  DCFParams p;
  p.p_target = p_target;
  p.c_miss = c_miss;
  p.c_fa = c_fa;
  p.normalize = normalize;
  return p;
}

py::dict loss_dict(const LossResult& r) {
  py::dict d;
  d["value"] = r.value;
  d["d_embeddings"] = r.grads.embeddings;
  if (r.grads.weight.size() > 0) d["d_weight"] = r.grads.weight;
  if (r.grads.bias.size() > 0) d["d_bias"] = r.grads.bias;
  return d;
}

ClassifierWeights classifier(const Matrix& weight, std::optional<Vector> bias) {
  return {weight, bias ? *bias : Vector::Zero(weight.rows())};
}

py::dict report_dict(const EvaluationReport& r) {
  py::dict d;
  d["eer_pct"] = r.eer_pct;
  d["eer_threshold"] = r.eer_threshold;
  d["min_dcf"] = r.min_dcf;
  d["min_dcf_raw"] = r.min_dcf_raw;
  d["min_dcf_threshold"] = r.min_dcf_threshold;
  d["n_target"] = r.n_target;
  d["n_nontarget"] = r.n_nontarget;
  return d;
}

// Trunk weights bundled with their inferred configuration.
struct Model {
  NetworkWeights weights;
  TrunkConfig config;
};

}  // namespace

PYBIND11_MODULE(_svkit, m) {
  m.doc() = "Speaker verification toolkit: front-end, trunk, losses and metrics";
  py::register_exception<Error>(m, "SvkitError", PyExc_ValueError);

  // Front-end.
  m.def("preemphasize", [](const FloatArray& x, double c) { return from_wave(preemphasize(to_wave(x), c)); },
        py::arg("samples"), py::arg("coeff") = 0.97);
  m.def(
      "crop_segment",
      [](const FloatArray& x, double seconds, std::optional<std::size_t> offset,
         std::optional<std::uint64_t> seed) {
        if (offset && seed) throw Error("crop_segment: pass offset or seed, not both");
        const CropPolicy policy =
            seed ? CropPolicy{RandomOffset{*seed}} : CropPolicy{FixedOffset{offset.value_or(0)}};
        return from_wave(crop_segment(to_wave(x), seconds, policy));
      },
      py::arg("samples"), py::arg("seconds"), py::arg("offset") = py::none(),
      py::arg("seed") = py::none());
  m.def("log_mel_spectrogram",
        [](const FloatArray& x) { return from_features(log_mel_spectrogram(to_wave(x), {})); },
        py::arg("samples"), "(frames, 64) log-mel energies of 16 kHz audio.");
  m.def(
      "extract_features",
      [](const FloatArray& x, double preemphasis) {
        FeatureParams p;
        p.preemphasis = preemphasis;
        return from_features(extract_features(to_wave(x), p));
      },
      py::arg("samples"), py::arg("preemphasis") = 0.97,
      "Pre-emphasis, log-mel and per-bin instance normalization.");
  m.def("instance_normalize",
        [](const FloatArray& f, double eps) { return from_features(instance_normalize(to_features(f), eps)); },
        py::arg("features"), py::arg("eps") = 1e-5);

  // Augmentation.
  m.def("measure_snr_db",
        [](const FloatArray& c, const FloatArray& n) { return measure_snr_db(to_wave(c), to_wave(n)); },
        py::arg("clean"), py::arg("noise"));
  m.def("mix_at_snr",
        [](const FloatArray& c, const FloatArray& n, double snr) {
          return from_wave(mix_at_snr(to_wave(c), to_wave(n), snr));
        },
        py::arg("clean"), py::arg("noise"), py::arg("snr_db"));
  m.def(
      "apply_rir",
      [](const FloatArray& x, const FloatArray& rir, double gain_db) {
        RirCatalog cat;
        cat.entries.push_back(to_wave(rir));
        return from_wave(augment_rir(to_wave(x), cat, 0, {gain_db, gain_db}).output);
      },
      py::arg("samples"), py::arg("rir"), py::arg("gain_db") = 0.0,
      "Convolves with the unit-energy RIR scaled by gain_db; output keeps the input length.");

  // Network.
  py::class_<Model>(m, "Model")
      .def_static(
          "init",
          [](const std::string& variant, std::uint64_t seed, bool embed_bn) {
            TrunkConfig cfg = TrunkConfig::preset(parse_variant(variant));
            cfg.embed_bn = embed_bn;
            return Model{init_weights(cfg, seed), cfg};
          },
          py::arg("variant") = "h-asp", py::arg("seed") = 0, py::arg("embed_bn") = false)
      .def_static("load",
                  [](const std::filesystem::path& p) {
                    auto w = load_weights(p);
                    auto cfg = infer_config(w);
                    return Model{std::move(w), cfg};
                  },
                  py::arg("path"))
      .def("save", [](const Model& self, const std::filesystem::path& p) { save_weights(p, self.weights); },
           py::arg("path"))
      .def_property_readonly("variant", [](const Model& self) { return std::string(to_string(self.config.variant)); })
      .def_property_readonly("parameter_count", [](const Model& self) { return self.weights.parameter_count(); })
      .def("tensor_names",
           [](const Model& self) {
             std::vector<std::string> names;
             for (const auto& t : self.weights.tensors()) names.push_back(t.name);
             return names;
           })
      .def("tensor",
           [](const Model& self, const std::string& name) {
             const auto& t = self.weights.get(name);
             std::vector<py::ssize_t> shape(t.dims.begin(), t.dims.end());
             FloatArray out(shape);
             std::copy(t.data.begin(), t.data.end(), out.mutable_data());
             return out;
           },
           py::arg("name"))
      .def(
          "forward",
          [](const Model& self, const FloatArray& features) {
            const Embedding e = forward(to_features(features), self.weights, self.config);
            return FloatArray(static_cast<py::ssize_t>(e.size()), e.data());
          },
          py::arg("features"))
      .def(
          "trace",
          [](const Model& self, const FloatArray& features) {
            ForwardTrace t;
            forward(to_features(features), self.weights, self.config, &t);
            py::dict d;
            d["stage_shapes"] = t.stage_shapes;
            d["frames"] = t.frames;
            d["frame_dim"] = t.frame_dim;
            d["pooled_dim"] = t.pooled_dim;
            d["embed_dim"] = t.embed_dim;
            return d;
          },
          py::arg("features"))
      .def(
          "embed_crops",
          [](const Model& self, const FloatArray& x, int n_crops, double crop_seconds) {
            const NetworkEmbedder net(self.weights, self.config);
            std::vector<Embedding> crops;
            {
              py::gil_scoped_release release;
              crops = embed_crops(to_wave(x), net, {n_crops, crop_seconds});
            }
            return from_rows(crops);
          },
          py::arg("samples"), py::arg("n_crops") = 10, py::arg("crop_seconds") = 4.0)
      .def(
          "score_pair",
          [](const Model& self, const FloatArray& a, const FloatArray& b, int n_crops,
             double crop_seconds) {
            const NetworkEmbedder net(self.weights, self.config);
            const Waveform wa = to_wave(a), wb = to_wave(b);
            py::gil_scoped_release release;
            return score_pair(wa, wb, net, {n_crops, crop_seconds});
          },
          py::arg("a"), py::arg("b"), py::arg("n_crops") = 10, py::arg("crop_seconds") = 4.0);

  m.def("cosine", [](const FloatArray& a, const FloatArray& b) {
    return cosine(std::span(a.data(), a.size()), std::span(b.data(), b.size()));
  });
  m.def("score_embeddings",
        [](const FloatArray& a, const FloatArray& b) { return score_embeddings(to_rows(a), to_rows(b)); },
        py::arg("a"), py::arg("b"), "Mean pairwise cosine between two sets of crop embeddings.");

  // Losses. Each returns a dict with the value and the analytic gradients.
  m.def("softmax_ce",
        [](const Matrix& x, std::vector<int> y, const Matrix& w, std::optional<Vector> b) {
          return loss_dict(softmax_ce(x, y, classifier(w, b)));
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("weight"), py::arg("bias") = py::none());
  m.def("am_softmax",
        [](const Matrix& x, std::vector<int> y, const Matrix& w, double margin, double scale) {
          return loss_dict(am_softmax(x, y, classifier(w, {}), {margin, scale}));
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("weight"), py::arg("margin") = 0.2,
        py::arg("scale") = 30.0);
  m.def("aam_softmax",
        [](const Matrix& x, std::vector<int> y, const Matrix& w, double margin, double scale) {
          return loss_dict(aam_softmax(x, y, classifier(w, {}), {margin, scale}));
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("weight"), py::arg("margin") = 0.2,
        py::arg("scale") = 30.0);
  m.def("angular_prototypical",
        [](const Matrix& x, int speakers, int per_speaker, double w, double b) {
          const auto r = angular_prototypical(x, speakers, per_speaker, {w, b, 1e-6});
          auto d = loss_dict(r);
          d["d_w"] = r.grads.ap_w;
          d["d_b"] = r.grads.ap_b;
          return d;
        },
        py::arg("embeddings"), py::arg("speakers"), py::arg("per_speaker"), py::arg("w") = 10.0,
        py::arg("b") = -5.0);

  // Metrics.
  m.def("compute_eer",
        [](std::vector<double> t, std::vector<double> n) {
          const auto e = compute_eer(to_scores(std::move(t), std::move(n)));
          return py::make_tuple(e.eer, e.threshold);
        },
        py::arg("target"), py::arg("nontarget"), "Returns (eer, threshold); eer is a fraction.");
  m.def("compute_min_dcf",
        [](std::vector<double> t, std::vector<double> n, double p_target, double c_miss, double c_fa,
           bool normalize) {
          const auto d = compute_min_dcf(to_scores(std::move(t), std::move(n)),
                                         dcf_params(p_target, c_miss, c_fa, normalize));
          return py::make_tuple(d.min_dcf, d.threshold);
        },
        py::arg("target"), py::arg("nontarget"), py::arg("p_target") = 0.05, py::arg("c_miss") = 1.0,
        py::arg("c_fa") = 1.0, py::arg("normalize") = true);
  m.def("evaluate",
        [](std::vector<double> t, std::vector<double> n, double p_target, double c_miss, double c_fa) {
          return report_dict(evaluate(to_scores(std::move(t), std::move(n)),
                                      dcf_params(p_target, c_miss, c_fa, true)));
        },
        py::arg("target"), py::arg("nontarget"), py::arg("p_target") = 0.05, py::arg("c_miss") = 1.0,
        py::arg("c_fa") = 1.0);

  // Training demo.
  m.def("lr_at",
        [](int epoch, double lr0, double factor, int every) { return lr_at(epoch, lr0, {factor, every}); },
        py::arg("epoch"), py::arg("lr0") = 0.01, py::arg("decay_factor") = 0.9, py::arg("decay_every") = 2);
  m.def(
      "train_demo",
      [](const std::string& loss, int epochs, int speakers, int utterances, int dim, int trials,
         std::uint64_t seed) {
        const auto corpus = SyntheticCorpus::make(speakers, utterances, dim, seed, trials);
        DemoConfig cfg;
        cfg.loss = parse_loss(loss);
        cfg.epochs = epochs;
        cfg.seed = seed;
        DemoResult r;
        {
          py::gil_scoped_release release;
          r = train_demo(corpus, cfg);
        }
        py::list history;
        for (const auto& h : r.history) {
          py::dict d;
          d["epoch"] = h.epoch;
          d["lr"] = h.lr;
          d["loss"] = h.loss;
          d["heldout_eer"] = h.heldout_eer;
          history.append(d);
        }
        py::dict out;
        out["history"] = history;
        out["heldout_eer"] = r.heldout_eer;
        out["heldout_min_dcf"] = r.heldout_min_dcf;
        out["angular_gap"] = mean_interclass_angular_gap(
            r.embeddings, corpus.labels,
            uses_classifier(cfg.loss) ? r.classifier.weight : Matrix{});
        return out;
      },
      py::arg("loss") = "ap+softmax", py::arg("epochs") = 200, py::arg("speakers") = 20,
      py::arg("utterances") = 10, py::arg("dim") = 512, py::arg("trials") = 400, py::arg("seed") = 0);
}
