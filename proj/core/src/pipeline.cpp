#include "ant/pipeline.hpp"

namespace ant {

nn::ModelSpec classifier_spec(const ClassifierOptions& options, std::size_t class_count) {
  options.encoding.validate();
  const std::size_t len = options.encoding.input_length();
  if (options.layers.empty()) {
    return options.arch == nn::ArchFamily::sae ? nn::default_sae(len, class_count)
                                               : nn::default_cnn(len, class_count);
  }
  nn::ModelSpec spec{options.layers, len, class_count, options.arch};
  if (spec.layers.back().kind != nn::LayerKind::softmax) {
    spec.layers.push_back(nn::LayerSpec::dense(class_count));
    spec.layers.push_back(nn::LayerSpec::softmax());
  }
  nn::infer_shapes(spec);
  return spec;
}

nn::Model train_classifier(const Dataset& dataset, const ClassifierOptions& options,
                           std::vector<nn::EpochRecord>* history) {
  const nn::ModelSpec spec = classifier_spec(options, dataset.class_count());
  std::optional<NormStats> stats;
  if (category(options.encoding.kind) == InputCategory::flow_timeseries) stats = fit_norm_stats(dataset.train);
  const NormStats* sp = stats ? &*stats : nullptr;
  const auto train_set = encode_flows(dataset.train, options.encoding, sp, options.packets_per_flow);
  const auto val_set = encode_flows(dataset.validation, options.encoding, sp, options.packets_per_flow);
  if (train_set.empty()) throw DataError("no encodable training samples for " + std::string(to_string(options.encoding.kind)));
  nn::Model model = nn::train(spec, train_set, val_set, options.train, history);
  model.encoding = options.encoding;
  model.labels = dataset.labels;
  model.norm_stats = stats;
  return model;
}

nn::Metrics evaluate_flows(const nn::Model& model, std::span<const Flow> flows) {
  const NormStats* stats = model.norm_stats ? &*model.norm_stats : nullptr;
  return nn::evaluate(model, encode_flows(flows, model.encoding, stats));
}

}  // namespace ant
