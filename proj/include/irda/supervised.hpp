#pragma once

// One-hidden-layer perceptron trained with full-batch Adam, used as the
// supervised reward-model baseline, plus individual/collective learning
// curves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "irda/core/error.hpp"
#include "irda/core/random.hpp"
#include "irda/metrics.hpp"

namespace irda::supervised {

inline constexpr const char* kModelSchema = "irda-mlp/1";

struct MlpConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 32;
  std::size_t output_dim = 2;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;

  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

inline void validate(const MlpConfig& c) {
  if (c.input_dim < 1 || c.hidden_dim < 1 || c.output_dim < 1) fail(ErrorKind::ConfigInvalid, "dimensions must be >= 1");
  if (!(c.learning_rate > 0.0)) fail(ErrorKind::ConfigInvalid, "learning rate must be > 0");
}

struct LabeledSet {
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;
};

inline std::size_t input_dim(const LabeledSet& d) {
  if (d.inputs.size() != d.labels.size()) fail(ErrorKind::DimensionMismatch, "inputs and labels differ in length");
  if (d.inputs.empty()) return 0;
  const std::size_t dim = d.inputs.front().size();
  for (const auto& x : d.inputs)
    if (x.size() != dim) fail(ErrorKind::DimensionMismatch, "inputs have different dimensions");
  return dim;
}

/// Weights are row-major: w1[h * input + i], w2[o * hidden + h].
struct Mlp {
  MlpConfig config;
  std::vector<double> w1, b1, w2, b2;

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

inline std::size_t parameter_count(const MlpConfig& c) {
  return c.hidden_dim * c.input_dim + c.hidden_dim + c.output_dim * c.hidden_dim + c.output_dim;
}

inline std::vector<double> flatten(const Mlp& m) {
  std::vector<double> p;
  p.reserve(parameter_count(m.config));
  for (const auto* v : {&m.w1, &m.b1, &m.w2, &m.b2}) p.insert(p.end(), v->begin(), v->end());
  return p;
}

inline void unflatten(Mlp& m, std::span<const double> p) {
  if (p.size() != parameter_count(m.config)) fail(ErrorKind::DimensionMismatch, "parameter vector has the wrong size");
  std::size_t at = 0;
  for (auto* v : {&m.w1, &m.b1, &m.w2, &m.b2}) {
    std::copy(p.begin() + static_cast<std::ptrdiff_t>(at), p.begin() + static_cast<std::ptrdiff_t>(at + v->size()),
              v->begin());
    at += v->size();
  }
}

/// He-normal weights, zero biases.
inline Mlp init_mlp(const MlpConfig& c) {
  validate(c);
  Mlp m{c, std::vector<double>(c.hidden_dim * c.input_dim), std::vector<double>(c.hidden_dim, 0.0),
        std::vector<double>(c.output_dim * c.hidden_dim), std::vector<double>(c.output_dim, 0.0)};
  Rng rng(derive_seed(c.seed, "init"));
  const double s1 = std::sqrt(2.0 / static_cast<double>(c.input_dim));
  const double s2 = std::sqrt(2.0 / static_cast<double>(c.hidden_dim));
  for (auto& w : m.w1) w = s1 * standard_normal(rng);
  for (auto& w : m.w2) w = s2 * standard_normal(rng);
  return m;
}

struct Forward {
  std::vector<double> hidden_pre, hidden, probs;
};

inline Forward forward(const Mlp& m, std::span<const double> x) {
  const auto& c = m.config;
  if (x.size() != c.input_dim) fail(ErrorKind::DimensionMismatch, "input has the wrong dimension");
  Forward f;
  f.hidden_pre.resize(c.hidden_dim);
  f.hidden.resize(c.hidden_dim);
  for (std::size_t h = 0; h < c.hidden_dim; ++h) {
    double z = m.b1[h];
    const double* row = &m.w1[h * c.input_dim];
    for (std::size_t i = 0; i < c.input_dim; ++i) z += row[i] * x[i];
    f.hidden_pre[h] = z;
    f.hidden[h] = z > 0.0 ? z : 0.0;
  }
  std::vector<double> logits(c.output_dim);
  for (std::size_t o = 0; o < c.output_dim; ++o) {
    double z = m.b2[o];
    for (std::size_t h = 0; h < c.hidden_dim; ++h) z += m.w2[o * c.hidden_dim + h] * f.hidden[h];
    logits[o] = z;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  f.probs.resize(c.output_dim);
  for (std::size_t o = 0; o < c.output_dim; ++o) sum += f.probs[o] = std::exp(logits[o] - mx);
  for (auto& p : f.probs) p /= sum;
  return f;
}

/// Mean cross-entropy over the set and its gradient in flatten() order.
inline std::pair<double, std::vector<double>> loss_and_gradient(const Mlp& m, const LabeledSet& data) {
  const auto& c = m.config;
  if (input_dim(data) != c.input_dim && !data.inputs.empty())
    fail(ErrorKind::DimensionMismatch, "data dimension does not match the model");
  std::vector<double> g(parameter_count(c), 0.0);
  double* gw1 = g.data();
  double* gb1 = gw1 + c.hidden_dim * c.input_dim;
  double* gw2 = gb1 + c.hidden_dim;
  double* gb2 = gw2 + c.output_dim * c.hidden_dim;
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(std::max<std::size_t>(data.inputs.size(), 1));
  std::vector<double> dlogit(c.output_dim), dh(c.hidden_dim);
  for (std::size_t n = 0; n < data.inputs.size(); ++n) {
    const auto& x = data.inputs[n];
    const auto y = static_cast<std::size_t>(data.labels[n]);
    if (y >= c.output_dim) fail(ErrorKind::OutOfRange, "label outside the output range");
    const Forward f = forward(m, x);
    loss -= std::log(std::max(f.probs[y], 1e-300)) * inv_n;
    for (std::size_t o = 0; o < c.output_dim; ++o) dlogit[o] = (f.probs[o] - (o == y ? 1.0 : 0.0)) * inv_n;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t o = 0; o < c.output_dim; ++o) {
      gb2[o] += dlogit[o];
      for (std::size_t h = 0; h < c.hidden_dim; ++h) {
        gw2[o * c.hidden_dim + h] += dlogit[o] * f.hidden[h];
        dh[h] += dlogit[o] * m.w2[o * c.hidden_dim + h];
      }
    }
    for (std::size_t h = 0; h < c.hidden_dim; ++h) {
      if (f.hidden_pre[h] <= 0.0) continue;
      gb1[h] += dh[h];
      double* row = gw1 + h * c.input_dim;
      for (std::size_t i = 0; i < c.input_dim; ++i) row[i] += dh[h] * x[i];
    }
  }
  return {loss, std::move(g)};
}

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
      fail(ErrorKind::DimensionMismatch, "parameter and gradient sizes differ from the optimizer state");
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
      v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

  std::size_t steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

struct TrainResult {
  Mlp model;
  std::vector<double> loss_history;  // one entry per epoch, before the update
  /// Training labels had one class only.
  bool single_class = false;
};

inline TrainResult train_mlp(const LabeledSet& data, MlpConfig config) {
  const std::size_t dim = input_dim(data);
  if (data.inputs.empty()) fail(ErrorKind::InsufficientSamples, "no training samples");
  if (config.input_dim == 0) config.input_dim = dim;
  if (config.input_dim != dim) fail(ErrorKind::DimensionMismatch, "config input_dim does not match the data");
  TrainResult r;
  r.model = init_mlp(config);
  r.single_class = std::all_of(data.labels.begin(), data.labels.end(), [&](int y) { return y == data.labels[0]; });
  auto params = flatten(r.model);
  AdamOptimizer adam(params.size(), config.learning_rate, config.beta1, config.beta2, config.eps);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    auto [loss, grad] = loss_and_gradient(r.model, data);
    r.loss_history.push_back(loss);
    adam.step(params, grad);
    unflatten(r.model, params);
  }
  return r;
}

struct Prediction {
  int label = 0;
  std::vector<double> probs;
};

/// Argmax of the softmax; ties go to the lower class.
inline Prediction predict(const Mlp& m, std::span<const double> x) {
  Forward f = forward(m, x);
  const auto best = std::max_element(f.probs.begin(), f.probs.end());
  return {static_cast<int>(best - f.probs.begin()), std::move(f.probs)};
}

inline std::vector<int> predict_all(const Mlp& m, const std::vector<std::vector<double>>& xs) {
  std::vector<int> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(predict(m, x).label);
  return out;
}

// ---------------------------------------------------------------------------
// Learning curves

enum class CurveMode { individual, collective };
enum class Metric { balanced_accuracy, accuracy };

inline std::string to_string(CurveMode m) { return m == CurveMode::individual ? "individual" : "collective"; }

struct CurvePoint {
  std::size_t n = 0;
  CurveMode mode = CurveMode::individual;
  std::map<std::string, double> per_participant;
  double mean = 0.0, ci_lo = 0.0, ci_hi = 0.0;
};

inline LabeledSet first_n(const LabeledSet& d, std::size_t n) {
  if (d.inputs.size() < n) fail(ErrorKind::InsufficientSamples, "asked for more samples than available");
  return {{d.inputs.begin(), d.inputs.begin() + static_cast<std::ptrdiff_t>(n)},
          {d.labels.begin(), d.labels.begin() + static_cast<std::ptrdiff_t>(n)}};
}

inline double score(Metric metric, const std::vector<int>& truth, const std::vector<int>& pred) {
  return metric == Metric::balanced_accuracy ? metrics::balanced_accuracy(truth, pred) : metrics::accuracy(truth, pred);
}

/// For every n in `grid`: individual mode trains one model per participant
/// on its first n samples; collective mode trains one model on the union.
/// Each participant's own test set is scored; the CI is a bootstrap over
/// participants.
inline std::vector<CurvePoint> learning_curve(const std::map<std::string, LabeledSet>& train,
                                              const std::map<std::string, LabeledSet>& test, CurveMode mode,
                                              const std::vector<std::size_t>& grid, const MlpConfig& base,
                                              Metric metric = Metric::balanced_accuracy,
                                              std::size_t n_resamples = 10000) {
  if (train.empty()) fail(ErrorKind::InsufficientSamples, "no participants");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1]) fail(ErrorKind::ConfigInvalid, "sample grid must be increasing");
  std::vector<CurvePoint> out;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const std::size_t n = grid[gi];
    CurvePoint pt;
    pt.n = n;
    pt.mode = mode;
    MlpConfig cfg = base;
    cfg.seed = derive_seed(base.seed, n);
    if (mode == CurveMode::collective) {
      LabeledSet all;
      for (const auto& [pid, d] : train) {
        auto part = first_n(d, n);
        all.inputs.insert(all.inputs.end(), part.inputs.begin(), part.inputs.end());
        all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
      }
      const Mlp m = train_mlp(all, cfg).model;
      for (const auto& [pid, t] : test) pt.per_participant[pid] = score(metric, t.labels, predict_all(m, t.inputs));
    } else {
      for (const auto& [pid, d] : train) {
        auto it = test.find(pid);
        if (it == test.end()) fail(ErrorKind::NotFound, "no test set for participant " + pid);
        MlpConfig c = cfg;
        c.seed = derive_seed(cfg.seed, pid);
        const Mlp m = train_mlp(first_n(d, n), c).model;
        pt.per_participant[pid] = score(metric, it->second.labels, predict_all(m, it->second.inputs));
      }
    }
    std::vector<double> scores;
    for (const auto& [_, s] : pt.per_participant) scores.push_back(s);
    const auto ci = metrics::bootstrap_ci(scores, n_resamples, 0.95, derive_seed(base.seed, "curve-ci"));
    pt.mean = ci.mean;
    pt.ci_lo = ci.lo;
    pt.ci_hi = ci.hi;
    out.push_back(std::move(pt));
  }
  return out;
}

inline void write_curve(std::ostream& out, const std::vector<CurvePoint>& curve, char sep = '\t') {
  out << "n" << sep << "mode" << sep << "mean" << sep << "ci_lo" << sep << "ci_hi\n";
  for (const auto& p : curve)
    out << p.n << sep << to_string(p.mode) << sep << p.mean << sep << p.ci_lo << sep << p.ci_hi << '\n';
}

// ---------------------------------------------------------------------------
// Persistence

using nlohmann::json;

inline json model_to_json(const Mlp& m) {
  const auto& c = m.config;
  return json{{"schema", kModelSchema},
              {"config",
               {{"input_dim", c.input_dim},
                {"hidden_dim", c.hidden_dim},
                {"output_dim", c.output_dim},
                {"learning_rate", c.learning_rate},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"eps", c.eps},
                {"epochs", c.epochs},
                {"seed", c.seed}}},
              {"w1", m.w1},
              {"b1", m.b1},
              {"w2", m.w2},
              {"b2", m.b2}};
}

inline Mlp model_from_json(const json& j) {
  if (j.value("schema", std::string{}) != kModelSchema)
    fail(ErrorKind::ParseError, std::string("expected schema ") + kModelSchema);
  const auto& c = j.at("config");
  Mlp m;
  m.config.input_dim = c.at("input_dim");
  m.config.hidden_dim = c.at("hidden_dim");
  m.config.output_dim = c.at("output_dim");
  m.config.learning_rate = c.at("learning_rate");
  m.config.beta1 = c.at("beta1");
  m.config.beta2 = c.at("beta2");
  m.config.eps = c.at("eps");
  m.config.epochs = c.at("epochs");
  m.config.seed = c.at("seed");
  m.w1 = j.at("w1").get<std::vector<double>>();
  m.b1 = j.at("b1").get<std::vector<double>>();
  m.w2 = j.at("w2").get<std::vector<double>>();
  m.b2 = j.at("b2").get<std::vector<double>>();
  if (flatten(m).size() != parameter_count(m.config)) fail(ErrorKind::ParseError, "weight arrays do not match the config");
  return m;
}

}  // namespace irda::supervised
