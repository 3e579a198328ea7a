#include "ant/nn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "ant/rng.hpp"

namespace ant::nn {

std::vector<Shape> infer_shapes(const ModelSpec& spec) {
  if (spec.input_length == 0) throw UsageError("model input length must be positive");
  if (spec.class_count < 2) throw UsageError("model needs at least two classes");
  std::vector<Shape> shapes{{1, spec.input_length}};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    Shape s = shapes.back();
    const std::string where = "layer " + std::to_string(i) + ": ";
    switch (l.kind) {
      case LayerKind::conv1d:
        if (spec.family == ArchFamily::sae) throw UsageError(where + "SAE models are dense-only");
        if (l.units == 0 || l.kernel == 0 || l.stride == 0) throw UsageError(where + "conv1d needs filters, kernel, stride > 0");
        if (s.length < l.kernel) throw UsageError(where + "conv1d kernel longer than its input");
        s = {l.units, (s.length - l.kernel) / l.stride + 1};
        break;
      case LayerKind::maxpool1d:
        if (spec.family == ArchFamily::sae) throw UsageError(where + "SAE models are dense-only");
        if (l.width == 0 || s.length < l.width) throw UsageError(where + "bad max-pool width");
        s = {s.channels, s.length / l.width};
        break;
      case LayerKind::relu: break;
      case LayerKind::flatten: s = {1, s.size()}; break;
      case LayerKind::dense:
        if (l.units == 0) throw UsageError(where + "dense needs units > 0");
        s = {1, l.units};
        break;
      case LayerKind::softmax:
        if (i + 1 != spec.layers.size()) throw UsageError(where + "softmax must be the final layer");
        break;
    }
    shapes.push_back(s);
  }
  if (shapes.back().channels != 1 || shapes.back().length != spec.class_count) {
    throw UsageError("final layer must produce " + std::to_string(spec.class_count) + " logits");
  }
  return shapes;
}

ModelSpec default_cnn(std::size_t input_length, std::size_t k) {
  return {{LayerSpec::conv1d(16, 7, 3), LayerSpec::relu(), LayerSpec::maxpool1d(2), LayerSpec::conv1d(32, 5, 1),
           LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(64), LayerSpec::relu(), LayerSpec::dense(k),
           LayerSpec::softmax()},
          input_length,
          k,
          ArchFamily::cnn1d};
}

ModelSpec default_sae(std::size_t input_length, std::size_t k) {
  return {{LayerSpec::dense(256), LayerSpec::relu(), LayerSpec::dense(128), LayerSpec::relu(), LayerSpec::dense(k),
           LayerSpec::softmax()},
          input_length,
          k,
          ArchFamily::sae};
}

std::string_view to_string(ArchFamily family) { return family == ArchFamily::cnn1d ? "cnn" : "sae"; }

ArchFamily parse_arch_family(std::string_view name) {
  if (name == "cnn") return ArchFamily::cnn1d;
  if (name == "sae") return ArchFamily::sae;
  throw UsageError("unknown architecture '" + std::string(name) + "' (expected cnn or sae)");
}

std::string format_layers(std::span<const LayerSpec> layers) {
  std::string out;
  for (const LayerSpec& l : layers) {
    if (!out.empty()) out += ',';
    switch (l.kind) {
      case LayerKind::conv1d:
        out += "conv" + std::to_string(l.units) + "x" + std::to_string(l.kernel);
        if (l.stride != 1) out += "/" + std::to_string(l.stride);
        break;
      case LayerKind::maxpool1d: out += "pool" + std::to_string(l.width); break;
      case LayerKind::dense: out += "dense" + std::to_string(l.units); break;
      case LayerKind::relu: out += "relu"; break;
      case LayerKind::flatten: out += "flatten"; break;
      case LayerKind::softmax: out += "softmax"; break;
    }
  }
  return out;
}

namespace {

std::size_t layer_number(std::string_view digits, std::string_view token) {
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc() || end != digits.data() + digits.size() || digits.empty() || v == 0) {
    throw UsageError("bad layer '" + std::string(token) + "'");
  }
  return v;
}

LayerSpec parse_layer(std::string_view t) {
  auto starts = [&](std::string_view p) { return t.substr(0, p.size()) == p; };
  if (t == "relu") return LayerSpec::relu();
  if (t == "flatten") return LayerSpec::flatten();
  if (t == "softmax") return LayerSpec::softmax();
  if (starts("pool")) return LayerSpec::maxpool1d(layer_number(t.substr(4), t));
  if (starts("dense")) return LayerSpec::dense(layer_number(t.substr(5), t));
  if (starts("conv")) {
    const std::string_view rest = t.substr(4);
    const auto x = rest.find('x');
    if (x == std::string_view::npos) throw UsageError("bad layer '" + std::string(t) + "'");
    const auto slash = rest.find('/', x);
    const std::size_t filters = layer_number(rest.substr(0, x), t);
    const std::size_t kernel = layer_number(rest.substr(x + 1, slash == std::string_view::npos ? rest.npos : slash - x - 1), t);
    const std::size_t stride = slash == std::string_view::npos ? 1 : layer_number(rest.substr(slash + 1), t);
    return LayerSpec::conv1d(filters, kernel, stride);
  }
  throw UsageError("unknown layer '" + std::string(t) + "'");
}

}  // namespace

std::vector<LayerSpec> parse_layers(std::string_view text) {
  std::vector<LayerSpec> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    std::string_view tok = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    if (tok.empty()) throw UsageError("empty layer in '" + std::string(text) + "'");
    out.push_back(parse_layer(tok));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

namespace {

std::size_t fan_in(const LayerSpec& l, const Shape& in) {
  return l.kind == LayerKind::conv1d ? in.channels * l.kernel : in.size();
}

LayerParams zero_like(const LayerParams& p) {
  return {std::vector<float>(p.weights.size(), 0.0f), std::vector<float>(p.bias.size(), 0.0f)};
}

inline void axpy(float* __restrict y, const float* __restrict x, float a, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline float dot(const float* __restrict a, const float* __restrict b, std::size_t n) {
  float s = 0.0f;
#pragma omp simd reduction(+ : s)
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Model init_model(const ModelSpec& spec, std::uint64_t seed) {
  const auto shapes = infer_shapes(spec);
  Model m;
  m.spec = spec;
  m.seed = seed;
  m.params.resize(spec.layers.size());
  Rng rng(derive_seed(seed, "init"));
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.kind != LayerKind::conv1d && l.kind != LayerKind::dense) continue;
    const Shape& in = shapes[i];
    const std::size_t nw = l.kind == LayerKind::conv1d ? l.units * in.channels * l.kernel : in.size() * l.units;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(l, in)));
    auto& p = m.params[i];
    p.weights.resize(nw);
    for (auto& w : p.weights) w = static_cast<float>(rng.uniform(-bound, bound));
    p.bias.assign(l.units, 0.0f);
  }
  return m;
}

// Single-sample forward/backward executor with reusable activation buffers.
class Executor {
 public:
  explicit Executor(const Model& m) : m_(m), shapes_(infer_shapes(m.spec)) {
    const std::size_t n = m.spec.layers.size();
    if (m.params.size() != n) throw UsageError("model parameters do not match its spec");
    acts_.resize(n + 1);
    cols_.resize(n);
    argmax_.resize(n);
    std::size_t widest = 0;
    for (std::size_t i = 0; i <= n; ++i) {
      acts_[i].resize(shapes_[i].size());
      widest = std::max(widest, shapes_[i].size());
    }
    for (std::size_t i = 0; i < n; ++i) {
      const LayerSpec& l = m.spec.layers[i];
      if (l.kind == LayerKind::conv1d) {
        cols_[i].resize(shapes_[i].channels * l.kernel * shapes_[i + 1].length);
        check_size(i, l.units * shapes_[i].channels * l.kernel, l.units);
      } else if (l.kind == LayerKind::dense) {
        check_size(i, shapes_[i].size() * l.units, l.units);
      } else if (l.kind == LayerKind::maxpool1d) {
        argmax_[i].resize(shapes_[i + 1].size());
      }
    }
    grad_a_.resize(widest);
    grad_b_.resize(widest);
  }

  std::span<const float> run(std::span<const float> x) {
    if (x.size() != m_.spec.input_length) {
      throw UsageError("input length " + std::to_string(x.size()) + " does not match model input length " +
                       std::to_string(m_.spec.input_length));
    }
    std::copy(x.begin(), x.end(), acts_[0].begin());
    for (std::size_t i = 0; i < m_.spec.layers.size(); ++i) forward_layer(i);
    return acts_.back();
  }

  // Back-propagates d loss / d logits. Parameter gradients are accumulated
  // into `pg` when non-null; the input gradient is written to `dx` when
  // non-empty.
  void backward(std::span<const float> dlogits, std::vector<LayerParams>* pg, std::span<float> dx) {
    std::size_t n = m_.spec.layers.size();
    float* g = grad_a_.data();
    float* h = grad_b_.data();
    std::copy(dlogits.begin(), dlogits.end(), g);
    for (std::size_t i = n; i-- > 0;) {
      const bool need_input = i > 0 || !dx.empty();
      if (!need_input && (pg == nullptr || m_.params[i].weights.empty())) break;
      backward_layer(i, g, need_input ? h : nullptr, pg ? &(*pg)[i] : nullptr);
      std::swap(g, h);
      if (i == 0 && !dx.empty()) std::copy(g, g + dx.size(), dx.begin());
    }
  }

 private:
  void check_size(std::size_t i, std::size_t weights, std::size_t bias) const {
    const auto& p = m_.params[i];
    if (p.weights.size() != weights || p.bias.size() != bias) {
      throw UsageError("layer " + std::to_string(i) + " weight shape does not match its spec");
    }
  }

  void forward_layer(std::size_t i) {
    const LayerSpec& l = m_.spec.layers[i];
    const Shape& si = shapes_[i];
    const Shape& so = shapes_[i + 1];
    const float* in = acts_[i].data();
    float* out = acts_[i + 1].data();
    switch (l.kind) {
      case LayerKind::conv1d: {
        const std::size_t ck = si.channels * l.kernel;
        const std::size_t lout = so.length;
        float* cols = cols_[i].data();
        for (std::size_t c = 0; c < si.channels; ++c) {
          for (std::size_t j = 0; j < l.kernel; ++j) {
            float* row = cols + (c * l.kernel + j) * lout;
            const float* src = in + c * si.length + j;
            for (std::size_t t = 0; t < lout; ++t) row[t] = src[t * l.stride];
          }
        }
        const auto& p = m_.params[i];
        for (std::size_t f = 0; f < l.units; ++f) {
          float* o = out + f * lout;
          std::fill(o, o + lout, p.bias[f]);
          const float* w = p.weights.data() + f * ck;
          for (std::size_t r = 0; r < ck; ++r) axpy(o, cols + r * lout, w[r], lout);
        }
        break;
      }
      case LayerKind::relu:
        // written so that NaN propagates instead of being clamped to zero
        for (std::size_t k = 0; k < si.size(); ++k) out[k] = in[k] < 0.0f ? 0.0f : in[k];
        break;
      case LayerKind::maxpool1d: {
        auto& am = argmax_[i];
        for (std::size_t c = 0; c < si.channels; ++c) {
          for (std::size_t t = 0; t < so.length; ++t) {
            const std::size_t base = c * si.length + t * l.width;
            std::size_t best = base;
            // strict > keeps the earliest index on ties; a NaN wins so it propagates
            for (std::size_t j = 1; j < l.width; ++j) {
              if (in[base + j] > in[best] || std::isnan(in[base + j])) best = base + j;
            }
            out[c * so.length + t] = in[best];
            am[c * so.length + t] = static_cast<std::uint32_t>(best);
          }
        }
        break;
      }
      case LayerKind::flatten:
      case LayerKind::softmax: std::copy(in, in + si.size(), out); break;
      case LayerKind::dense: {
        const auto& p = m_.params[i];
        const std::size_t u = l.units;
        std::copy(p.bias.begin(), p.bias.end(), out);
        for (std::size_t k = 0; k < si.size(); ++k) {
          if (in[k] != 0.0f) axpy(out, p.weights.data() + k * u, in[k], u);
        }
        break;
      }
    }
  }

  void backward_layer(std::size_t i, const float* gout, float* gin, LayerParams* pg) {
    const LayerSpec& l = m_.spec.layers[i];
    const Shape& si = shapes_[i];
    const Shape& so = shapes_[i + 1];
    const float* in = acts_[i].data();
    switch (l.kind) {
      case LayerKind::conv1d: {
        const std::size_t ck = si.channels * l.kernel;
        const std::size_t lout = so.length;
        const float* cols = cols_[i].data();
        const auto& p = m_.params[i];
        if (pg) {
          for (std::size_t f = 0; f < l.units; ++f) {
            const float* go = gout + f * lout;
            float* dw = pg->weights.data() + f * ck;
            for (std::size_t r = 0; r < ck; ++r) dw[r] += dot(go, cols + r * lout, lout);
            float s = 0.0f;
#pragma omp simd reduction(+ : s)
            for (std::size_t t = 0; t < lout; ++t) s += go[t];
            pg->bias[f] += s;
          }
        }
        if (gin) {
          dcols_.assign(ck * lout, 0.0f);
          for (std::size_t f = 0; f < l.units; ++f) {
            const float* w = p.weights.data() + f * ck;
            for (std::size_t r = 0; r < ck; ++r) axpy(dcols_.data() + r * lout, gout + f * lout, w[r], lout);
          }
          std::fill(gin, gin + si.size(), 0.0f);
          for (std::size_t c = 0; c < si.channels; ++c) {
            for (std::size_t j = 0; j < l.kernel; ++j) {
              const float* row = dcols_.data() + (c * l.kernel + j) * lout;
              float* dst = gin + c * si.length + j;
              for (std::size_t t = 0; t < lout; ++t) dst[t * l.stride] += row[t];
            }
          }
        }
        break;
      }
      case LayerKind::relu:
        if (gin) {
          for (std::size_t k = 0; k < si.size(); ++k) gin[k] = in[k] > 0.0f ? gout[k] : 0.0f;
        }
        break;
      case LayerKind::maxpool1d:
        if (gin) {
          std::fill(gin, gin + si.size(), 0.0f);
          const auto& am = argmax_[i];
          for (std::size_t k = 0; k < so.size(); ++k) gin[am[k]] += gout[k];
        }
        break;
      case LayerKind::flatten:
      case LayerKind::softmax:
        if (gin) std::copy(gout, gout + si.size(), gin);
        break;
      case LayerKind::dense: {
        const auto& p = m_.params[i];
        const std::size_t u = l.units;
        if (pg) {
          for (std::size_t k = 0; k < si.size(); ++k) {
            if (in[k] != 0.0f) axpy(pg->weights.data() + k * u, gout, in[k], u);
          }
          for (std::size_t j = 0; j < u; ++j) pg->bias[j] += gout[j];
        }
        if (gin) {
          for (std::size_t k = 0; k < si.size(); ++k) gin[k] = dot(p.weights.data() + k * u, gout, u);
        }
        break;
      }
    }
  }

  const Model& m_;
  std::vector<Shape> shapes_;
  std::vector<std::vector<float>> acts_;
  std::vector<std::vector<float>> cols_;
  std::vector<std::vector<std::uint32_t>> argmax_;
  std::vector<float> dcols_;
  std::vector<float> grad_a_;
  std::vector<float> grad_b_;
};

namespace {

void softmax_inplace(std::span<float> z) {
  const float mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : z) v = static_cast<float>(v / sum);
}

}  // namespace

std::vector<float> logits(const Model& model, std::span<const float> x) {
  Executor ex(model);
  auto out = ex.run(x);
  return {out.begin(), out.end()};
}

std::vector<float> forward(const Model& model, std::span<const float> x) {
  auto z = logits(model, x);
  softmax_inplace(z);
  return z;
}

int predict(const Model& model, std::span<const float> x) {
  const auto z = logits(model, x);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

struct GradientEngine::Impl {
  explicit Impl(const Model& m) : model(m), exec(m) {}

  const Model& model;
  Executor exec;
  Gradients grads;
  std::vector<float> dlogits;
};

GradientEngine::GradientEngine(const Model& model) : impl_(new Impl(model)) {}
GradientEngine::~GradientEngine() { delete impl_; }

const Gradients& GradientEngine::compute(Batch batch, std::span<const int> labels, Want want) {
  if (batch.size() != labels.size()) throw UsageError("batch and label counts differ");
  if (batch.empty()) throw UsageError("empty batch");
  const Model& m = impl_->model;
  const std::size_t k = m.spec.class_count;
  Gradients& g = impl_->grads;
  const bool want_params = want != Want::inputs;
  const bool want_inputs = want != Want::params;

  if (want_params) {
    g.params.resize(m.params.size());
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      g.params[i].weights.assign(m.params[i].weights.size(), 0.0f);
      g.params[i].bias.assign(m.params[i].bias.size(), 0.0f);
    }
  } else {
    g.params.clear();
  }
  g.inputs.resize(want_inputs ? batch.size() : 0);

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  impl_->dlogits.resize(k);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw UsageError("label out of range at batch index " + std::to_string(b));
    auto z = impl_->exec.run(batch[b]);
    const float mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (float v : z) sum += std::exp(static_cast<double>(v - mx));
    const double lse = static_cast<double>(mx) + std::log(sum);
    const double loss = lse - static_cast<double>(z[static_cast<std::size_t>(y)]);
    if (!std::isfinite(loss)) throw NonFiniteLossError(b);
    total += loss;
    for (std::size_t c = 0; c < k; ++c) {
      const double p = std::exp(static_cast<double>(z[c]) - lse);
      impl_->dlogits[c] = static_cast<float>((p - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv_b);
    }
    std::span<float> dx;
    if (want_inputs) {
      g.inputs[b].assign(batch[b].size(), 0.0f);
      dx = g.inputs[b];
    }
    impl_->exec.backward(impl_->dlogits, want_params ? &g.params : nullptr, dx);
  }
  g.loss = total * inv_b;
  return g;
}

Gradients loss_and_grads(const Model& model, Batch batch, std::span<const int> labels, Want want) {
  GradientEngine engine(model);
  return engine.compute(batch, labels, want);
}

Metrics metrics_from_predictions(std::span<const int> truth, std::span<const int> predicted, std::size_t k) {
  Metrics m;
  m.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++m.confusion.at(static_cast<std::size_t>(truth[i])).at(static_cast<std::size_t>(predicted[i]));
    if (truth[i] == predicted[i]) ++correct;
  }
  m.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
  m.classes.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = m.confusion[c][c];
    std::size_t actual = 0;
    std::size_t predicted_c = 0;
    for (std::size_t j = 0; j < k; ++j) {
      actual += m.confusion[c][j];
      predicted_c += m.confusion[j][c];
    }
    auto& cm = m.classes[c];
    cm.support = actual;
    cm.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    cm.precision_defined = predicted_c > 0;
    cm.precision = predicted_c ? static_cast<double>(tp) / static_cast<double>(predicted_c) : 0.0;
    cm.fscore = cm.precision + cm.recall > 0 ? 2 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
  }
  return m;
}

namespace {

std::vector<int> predict_all(const Model& model, std::span<const EncodedSample> samples) {
  Executor ex(model);
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    auto z = ex.run(s.values);
    out.push_back(static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin()));
  }
  return out;
}

double accuracy(const Model& model, std::span<const EncodedSample> samples) {
  const auto pred = predict_all(model, samples);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) ok += pred[i] == samples[i].label;
  return samples.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(samples.size());
}

}  // namespace

Metrics evaluate(const Model& model, std::span<const EncodedSample> samples) {
  if (samples.empty()) throw UsageError("cannot evaluate on an empty sample set");
  std::vector<int> truth;
  for (const auto& s : samples) truth.push_back(s.label);
  return metrics_from_predictions(truth, predict_all(model, samples), model.spec.class_count);
}

Model train(const ModelSpec& spec, std::span<const EncodedSample> train_set,
            std::span<const EncodedSample> validation_set, const TrainConfig& cfg,
            std::vector<EpochRecord>* history) {
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0)) {
    throw UsageError("training needs epochs >= 1, batch_size >= 1 and a positive learning rate");
  }
  if (train_set.empty()) throw UsageError("training set is empty");
  for (const auto& s : train_set) {
    if (s.values.size() != spec.input_length) throw UsageError("training sample length does not match the model input");
  }

  Model model = init_model(spec, cfg.seed);
  Model best = model;
  double best_acc = -1.0;
  std::size_t stale = 0;

  std::vector<LayerParams> velocity;
  for (const auto& p : model.params) velocity.push_back(zero_like(p));

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  GradientEngine engine(model);
  std::vector<std::span<const float>> xs;
  std::vector<int> ys;
  const float lr = static_cast<float>(cfg.learning_rate);
  const float mu = static_cast<float>(cfg.momentum);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, "shuffle", {epoch}));
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      xs.clear();
      ys.clear();
      for (std::size_t j = start; j < end; ++j) {
        xs.emplace_back(train_set[order[j]].values);
        ys.push_back(train_set[order[j]].label);
      }
      const Gradients* g = nullptr;
      try {
        g = &engine.compute(xs, ys, Want::params);
      } catch (const NonFiniteLossError& e) {
        throw ComputeError("training diverged at epoch " + std::to_string(epoch) + ", batch starting at " +
                           std::to_string(start) + " (" + e.what() + ")");
      }
      epoch_loss += g->loss;
      ++batches;
      for (std::size_t i = 0; i < model.params.size(); ++i) {
        auto& p = model.params[i];
        auto& v = velocity[i];
        const auto& gp = g->params[i];
        for (std::size_t k = 0; k < p.weights.size(); ++k) {
          v.weights[k] = mu * v.weights[k] - lr * gp.weights[k];
          p.weights[k] += v.weights[k];
        }
        for (std::size_t k = 0; k < p.bias.size(); ++k) {
          v.bias[k] = mu * v.bias[k] - lr * gp.bias[k];
          p.bias[k] += v.bias[k];
        }
      }
    }

    const double acc = validation_set.empty() ? 0.0 : accuracy(model, validation_set);
    if (history) history->push_back({epoch_loss / static_cast<double>(batches), acc});
    if (validation_set.empty() || acc > best_acc) {
      best = model;
      best_acc = acc;
      stale = 0;
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      break;
    }
  }
  return best;
}

}  // namespace ant::nn
