#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ant/error.hpp"
#include "ant/features.hpp"

namespace ant::nn {

enum class LayerKind { conv1d, relu, maxpool1d, flatten, dense, softmax };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;   // conv filters / dense units
  std::size_t kernel = 0;  // conv
  std::size_t stride = 1;  // conv
  std::size_t width = 0;   // max-pool window (and stride)

  static LayerSpec conv1d(std::size_t filters, std::size_t kernel, std::size_t stride = 1) {
    return {LayerKind::conv1d, filters, kernel, stride, 0};
  }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec maxpool1d(std::size_t width) { return {LayerKind::maxpool1d, 0, 0, 1, width}; }
  static LayerSpec flatten() { return {LayerKind::flatten}; }
  static LayerSpec dense(std::size_t units) { return {LayerKind::dense, units}; }
  static LayerSpec softmax() { return {LayerKind::softmax}; }

  bool operator==(const LayerSpec&) const = default;
};

enum class ArchFamily { cnn1d, sae };

struct ModelSpec {
  std::vector<LayerSpec> layers;
  std::size_t input_length = 0;
  std::size_t class_count = 0;
  ArchFamily family = ArchFamily::cnn1d;

  bool operator==(const ModelSpec&) const = default;
};

struct Shape {
  std::size_t channels = 1;
  std::size_t length = 0;

  std::size_t size() const { return channels * length; }
};

// Validates the layer chain and returns the input shape of every layer plus
// the final output shape (size layers+1). Throws UsageError on mismatch.
std::vector<Shape> infer_shapes(const ModelSpec& spec);

// Conv(16,7,3)-ReLU-Pool(2)-Conv(32,5,1)-ReLU-Flatten-Dense(64)-ReLU-Dense(k)-Softmax
ModelSpec default_cnn(std::size_t input_length, std::size_t class_count);
// Dense(256)-ReLU-Dense(128)-ReLU-Dense(k)-Softmax
ModelSpec default_sae(std::size_t input_length, std::size_t class_count);

std::string_view to_string(ArchFamily family);
ArchFamily parse_arch_family(std::string_view name);  // "cnn" or "sae"

// Compact layer notation, comma separated: conv<filters>x<kernel>[/<stride>],
// pool<width>, dense<units>, relu, flatten, softmax. Example:
// "conv16x7/3,relu,pool2,flatten,dense64,relu,dense4,softmax".
std::string format_layers(std::span<const LayerSpec> layers);
std::vector<LayerSpec> parse_layers(std::string_view text);

struct LayerParams {
  std::vector<float> weights;
  std::vector<float> bias;
};

// Conv weights are [filter][channel][tap]; dense weights are [input][unit].
struct Model {
  ModelSpec spec;
  std::vector<LayerParams> params;  // one entry per layer, empty when parameter-free
  EncodingParams encoding;
  std::optional<NormStats> norm_stats;
  std::vector<std::string> labels;
  std::uint64_t seed = 0;

  std::size_t class_count() const { return spec.class_count; }
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
Model init_model(const ModelSpec& spec, std::uint64_t seed);

std::vector<float> logits(const Model& model, std::span<const float> x);
std::vector<float> forward(const Model& model, std::span<const float> x);  // class probabilities
int predict(const Model& model, std::span<const float> x);

enum class Want { params, inputs, both };

struct Gradients {
  double loss = 0.0;                          // mean softmax cross-entropy
  std::vector<LayerParams> params;            // d loss / d weights
  std::vector<std::vector<float>> inputs;     // d loss / d x, one row per sample
};

class NonFiniteLossError : public ComputeError {
 public:
  explicit NonFiniteLossError(std::size_t index)
      : ComputeError("non-finite loss at batch index " + std::to_string(index)), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

using Batch = std::span<const std::span<const float>>;

Gradients loss_and_grads(const Model& model, Batch batch, std::span<const int> labels, Want want = Want::both);

// Same computation, reusing caller-owned gradient storage (sized on first use).
class GradientEngine {
 public:
  explicit GradientEngine(const Model& model);
  ~GradientEngine();
  GradientEngine(const GradientEngine&) = delete;
  GradientEngine& operator=(const GradientEngine&) = delete;

  const Gradients& compute(Batch batch, std::span<const int> labels, Want want);

 private:
  struct Impl;
  Impl* impl_;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  std::size_t patience = 5;  // epochs without validation improvement; 0 disables
};

struct EpochRecord {
  double train_loss = 0.0;
  double validation_accuracy = 0.0;
};

// Mini-batch SGD with momentum on shuffled batches. Returns the weights of
// the epoch with the best validation accuracy (earliest on ties).
Model train(const ModelSpec& spec, std::span<const EncodedSample> train_set,
            std::span<const EncodedSample> validation_set, const TrainConfig& config,
            std::vector<EpochRecord>* history = nullptr);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
  bool precision_defined = true;  // false when the class was never predicted
  std::size_t support = 0;
};

struct Metrics {
  std::vector<ClassMetrics> classes;
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

Metrics metrics_from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                 std::size_t class_count);
Metrics evaluate(const Model& model, std::span<const EncodedSample> samples);

class ModelFormatError : public DataError {
 public:
  enum class Reason { version, checksum, layout };
  ModelFormatError(Reason reason, const std::string& what) : DataError(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

// "ANTM", version u16, u32-length-prefixed JSON spec, per-layer f32 blobs,
// trailing CRC32 of everything before it.
std::vector<std::uint8_t> serialize_model(const Model& model);
Model deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

// Short stable identifier derived from the serialized model.
std::string model_id(const Model& model);

}  // namespace ant::nn
