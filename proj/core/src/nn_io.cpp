#include <cstdio>

#include <json.hpp>

#include "ant/binio.hpp"
#include "ant/nn.hpp"

namespace ant::nn {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'A', 'N', 'T', 'M'};
constexpr std::uint16_t kVersion = 1;

const char* layer_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool1d: return "maxpool1d";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

LayerKind layer_kind(const std::string& s) {
  for (LayerKind k : {LayerKind::conv1d, LayerKind::relu, LayerKind::maxpool1d, LayerKind::flatten,
                      LayerKind::dense, LayerKind::softmax}) {
    if (s == layer_name(k)) return k;
  }
  throw ModelFormatError(ModelFormatError::Reason::layout, "unknown layer kind '" + s + "'");
}

json spec_json(const Model& m) {
  json layers = json::array();
  for (const auto& l : m.spec.layers) {
    json j{{"kind", layer_name(l.kind)}};
    switch (l.kind) {
      case LayerKind::conv1d: j["filters"] = l.units; j["kernel"] = l.kernel; j["stride"] = l.stride; break;
      case LayerKind::dense: j["units"] = l.units; break;
      case LayerKind::maxpool1d: j["width"] = l.width; break;
      default: break;
    }
    layers.push_back(j);
  }
  json j{{"layers", layers},
         {"input_length", m.spec.input_length},
         {"class_count", m.spec.class_count},
         {"family", to_string(m.spec.family)},
         {"encoding",
          {{"kind", to_string(m.encoding.kind)},
           {"n", m.encoding.n},
           {"m", m.encoding.m},
           {"max_pkt_size", m.encoding.max_pkt_size}}},
         {"labels", m.labels},
         {"seed", m.seed}};
  if (m.norm_stats) {
    j["norm_stats"] = {{"ps_mean", m.norm_stats->ps_mean},
                       {"ps_std", m.norm_stats->ps_std},
                       {"iat_max", m.norm_stats->iat_max}};
  }
  return j;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& m) {
  infer_shapes(m.spec);
  ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.u16(kVersion);
  const std::string spec = spec_json(m).dump();
  w.u32(static_cast<std::uint32_t>(spec.size()));
  w.str(spec);
  for (const auto& p : m.params) {
    w.u32(static_cast<std::uint32_t>(p.weights.size()));
    for (float v : p.weights) w.f32(v);
    w.u32(static_cast<std::uint32_t>(p.bias.size()));
    for (float v : p.bias) w.f32(v);
  }
  w.u32(crc32(w.data()));
  return std::move(w.data());
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
  using R = ModelFormatError::Reason;
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw ModelFormatError(R::version, "not a model file (bad magic)");
  }
  if (bytes.size() < 10) throw ModelFormatError(R::checksum, "model file truncated");
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader tail(bytes.last(4));
  if (crc32(body) != tail.u32()) throw ModelFormatError(R::checksum, "model checksum mismatch (corrupt or truncated file)");

  ByteReader r(body);
  r.bytes(4);
  const std::uint16_t version = r.u16();
  if (version != kVersion) {
    throw ModelFormatError(R::version, "unsupported model format version " + std::to_string(version));
  }
  Model m;
  try {
    const json j = json::parse(r.str(r.u32()));
    for (const auto& l : j.at("layers")) {
      LayerSpec ls;
      ls.kind = layer_kind(l.at("kind").get<std::string>());
      if (ls.kind == LayerKind::conv1d) {
        ls = LayerSpec::conv1d(l.at("filters"), l.at("kernel"), l.at("stride"));
      } else if (ls.kind == LayerKind::dense) {
        ls = LayerSpec::dense(l.at("units"));
      } else if (ls.kind == LayerKind::maxpool1d) {
        ls = LayerSpec::maxpool1d(l.at("width"));
      }
      m.spec.layers.push_back(ls);
    }
    m.spec.input_length = j.at("input_length");
    m.spec.class_count = j.at("class_count");
    m.spec.family = j.at("family") == "sae" ? ArchFamily::sae : ArchFamily::cnn1d;
    const auto& e = j.at("encoding");
    m.encoding.kind = parse_encoding_kind(e.at("kind").get<std::string>());
    m.encoding.n = e.at("n");
    m.encoding.m = e.at("m");
    m.encoding.max_pkt_size = e.at("max_pkt_size");
    m.labels = j.at("labels").get<std::vector<std::string>>();
    m.seed = j.at("seed");
    if (j.contains("norm_stats")) {
      const auto& s = j["norm_stats"];
      m.norm_stats = NormStats{s.at("ps_mean"), s.at("ps_std"), s.at("iat_max")};
    }
  } catch (const json::exception& ex) {
    throw ModelFormatError(R::layout, std::string("bad model spec block: ") + ex.what());
  }
  const auto shapes = infer_shapes(m.spec);

  m.params.resize(m.spec.layers.size());
  for (auto& p : m.params) {
    p.weights.resize(r.u32());
    for (auto& v : p.weights) v = r.f32();
    p.bias.resize(r.u32());
    for (auto& v : p.bias) v = r.f32();
  }
  if (!r.done()) throw ModelFormatError(R::layout, "trailing bytes after weight blobs");
  for (std::size_t i = 0; i < m.spec.layers.size(); ++i) {
    const LayerSpec& l = m.spec.layers[i];
    std::size_t nw = 0;
    std::size_t nb = 0;
    if (l.kind == LayerKind::conv1d) {
      nw = l.units * shapes[i].channels * l.kernel;
      nb = l.units;
    } else if (l.kind == LayerKind::dense) {
      nw = shapes[i].size() * l.units;
      nb = l.units;
    }
    if (m.params[i].weights.size() != nw || m.params[i].bias.size() != nb) {
      throw ModelFormatError(R::layout, "weight blob " + std::to_string(i) + " does not match the layer spec");
    }
  }
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) { write_file(path, serialize_model(model)); }

Model load_model(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return deserialize_model(bytes);
}

std::string model_id(const Model& model) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", crc32(serialize_model(model)));
  return buf;
}

}  // namespace ant::nn
