#pragma once

#include <span>
#include <vector>

#include "ant/dataset.hpp"
#include "ant/features.hpp"
#include "ant/nn.hpp"

namespace ant {

struct ClassifierOptions {
  EncodingParams encoding;
  nn::ArchFamily arch = nn::ArchFamily::cnn1d;
  // Empty selects the family default. A chain that does not end in softmax
  // gets Dense(k) and Softmax appended.
  std::vector<nn::LayerSpec> layers;
  nn::TrainConfig train;
  std::size_t packets_per_flow = 0;  // packet encodings: samples per flow, 0 keeps all
};

nn::ModelSpec classifier_spec(const ClassifierOptions& options, std::size_t class_count);

// Encodes the training and validation splits, fits normalization statistics
// on training flows when the encoding needs them, and trains. The returned
// model carries its encoding, labels and statistics.
nn::Model train_classifier(const Dataset& dataset, const ClassifierOptions& options,
                           std::vector<nn::EpochRecord>* history = nullptr);

// Metrics on every sample the model's encoding extracts from `flows`.
nn::Metrics evaluate_flows(const nn::Model& model, std::span<const Flow> flows);

}  // namespace ant
