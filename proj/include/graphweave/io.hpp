#pragma once

// File formats: Graph JSON and the binary model checkpoint. Both round-trip
// bit-exactly and are byte-identical across platforms for fixed seeds. The
// checkpoint is magic + u32-LE header length + JSON header + payload, with
// float32 little-endian weight/bias arrays, uint8 masks, and a CRC32 of the
// payload recorded in the header.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <zlib.h>

#include <nlohmann/json.hpp>

#include "graphweave/errors.hpp"
#include "graphweave/graph.hpp"
#include "graphweave/models.hpp"

namespace gw {

using json = nlohmann::json;

// --- Graph JSON --------------------------------------------------------------

inline json graph_to_json(const LayeredDag& lg) {
  json j;
  j["version"] = 1;
  j["directed"] = true;
  j["nodes"] = json::array();
  j["edges"] = json::array();
  j["layers"] = json::object();
  if (lg.empty()) return j;
  for (const int v : lg.dag().vertices()) {
    j["nodes"].push_back(v);
    j["layers"][std::to_string(v)] = lg.layer_of(v);
  }
  for (const Edge& e : lg.dag().edges()) j["edges"].push_back({e.first, e.second});
  return j;
}

inline LayeredDag graph_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("graph JSON root must be an object");
  if (!j.contains("version") || !j["version"].is_number_integer())
    throw FormatError("graph JSON missing integer 'version'");
  if (j["version"].get<int>() != 1)
    throw FormatError("unsupported graph format version " +
                      std::to_string(j["version"].get<int>()) + "; supported: 1");
  if (!j.value("directed", false)) throw FormatError("graph JSON must declare directed=true");
  if (!j.contains("nodes") || !j["nodes"].is_array() || !j.contains("edges") ||
      !j["edges"].is_array())
    throw FormatError("graph JSON needs 'nodes' and 'edges' arrays");

  Dag g;
  for (const auto& n : j["nodes"]) {
    if (!n.is_number_integer()) throw FormatError("graph nodes must be integers");
    g.add_vertex(n.get<int>());
  }
  for (const auto& e : j["edges"]) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
      throw FormatError("graph edges must be [from, to] integer pairs");
    const int u = e[0].get<int>(), v = e[1].get<int>();
    if (!g.has_vertex(u) || !g.has_vertex(v))
      throw FormatError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                        ") references an unlisted node");
    g.add_edge(u, v);
  }

  LayeredDag lg = g.vertex_count() == 0 ? LayeredDag() : LayeredDag(g);
  if (j.contains("layers") && !j["layers"].empty()) {
    for (const auto& [key, val] : j["layers"].items()) {
      int v = 0;
      try {
        v = std::stoi(key);
      } catch (const std::exception&) {
        throw FormatError("layer annotation key '" + key + "' is not a vertex id");
      }
      if (!g.has_vertex(v))
        throw FormatError("layer annotation for unknown vertex " + std::to_string(v));
      if (!val.is_number_integer() || val.get<int>() != lg.layer_of(v))
        throw FormatError("layer annotation mismatch at vertex " + std::to_string(v) +
                          ": file says " + val.dump() + ", recomputed layering says " +
                          std::to_string(lg.layer_of(v)));
    }
  }
  return lg;
}

inline void save_graph(const std::string& path, const LayeredDag& lg) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << graph_to_json(lg).dump(2) << "\n";
  if (!out) throw DataError("failed writing " + path);
}

inline LayeredDag load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return graph_from_json(j);
}

// --- model checkpoints -------------------------------------------------------

namespace detail {

constexpr char kCkptMagic[8] = {'G', 'W', 'C', 'K', 'P', 'T', '0', '0'};

inline void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_f32_le(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32_le(out, bits);
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

inline float get_f32_le(const unsigned char* p) {
  const std::uint32_t bits = get_u32_le(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

struct ManifestEntry {
  std::string name;
  long rows = 0, cols = 0;
  std::size_t w_offset = 0, b_offset = 0, m_offset = 0;
};

// Layers that participate in checkpoints, keyed by unique name. For cell
// models these are the per-vertex mixers plus the readout.
inline std::vector<std::pair<std::string, MaskedLinear*>> checkpoint_layers(Model& model) {
  std::vector<std::pair<std::string, MaskedLinear*>> layers;
  if (model.kind() == ModelKind::cell) {
    auto& cm = dynamic_cast<DeepCellDAN&>(model);
    if (cm.constructor_kind() != "linear_mixer")
      throw UnsupportedModelError("only linear_mixer cell models are checkpointable, not '" +
                                  cm.constructor_kind() + "'");
    const LayeredDag& s = cm.structure();
    for (int l = 0; l < s.layer_count(); ++l)
      for (const int v : s.layer(l)) {
        auto* mixer = dynamic_cast<LinearMixerCell*>(&cm.cell(v));
        if (!mixer) throw UnsupportedModelError("cell at vertex " + std::to_string(v) +
                                                " is not a linear mixer");
        layers.emplace_back("cell" + std::to_string(v), &mixer->mixer());
      }
    layers.emplace_back("readout", &cm.readout());
    return layers;
  }
  for (MaskedLinear* layer : model.maskable_layers()) layers.emplace_back(layer->name, layer);
  return layers;
}

}  // namespace detail

inline void save_model(const std::string& path, Model& model) {
  const auto layers = detail::checkpoint_layers(model);

  std::string payload;
  json manifest = json::array();
  for (const auto& [name, layer] : layers) {
    json entry;
    entry["name"] = name;
    entry["rows"] = layer->out_features();
    entry["cols"] = layer->in_features();
    entry["w_offset"] = payload.size();
    for (const float w : layer->weight.data) detail::put_f32_le(payload, w);
    entry["b_offset"] = payload.size();
    for (const float b : layer->bias.data) detail::put_f32_le(payload, b);
    entry["m_offset"] = payload.size();
    for (const float m : layer->mask.data)
      payload.push_back(static_cast<char>(m != 0.0f ? 1 : 0));
    manifest.push_back(std::move(entry));
  }

  json header;
  header["format_version"] = 1;
  header["model_kind"] = model_kind_name(model.kind());
  header["activation"] = activation_name(model.activation());
  header["seed"] = model.seed();
  header["input_size"] = model.input_size();
  header["output_size"] = model.output_size();
  if (model.kind() == ModelKind::ffn) {
    header["hidden_sizes"] = dynamic_cast<MaskedDeepFFN&>(model).hidden_sizes();
  } else if (model.kind() == ModelKind::dan) {
    header["structure"] = graph_to_json(dynamic_cast<MaskedDeepDAN&>(model).structure());
  } else {
    auto& cm = dynamic_cast<DeepCellDAN&>(model);
    header["constructor_kind"] = cm.constructor_kind();
    header["structure"] = graph_to_json(cm.structure());
  }
  header["manifest"] = std::move(manifest);
  header["payload_size"] = payload.size();
  header["crc32"] =
      static_cast<std::uint32_t>(::crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
                                         static_cast<uInt>(payload.size())));

  const std::string header_bytes = header.dump();
  std::string head;
  head.append(detail::kCkptMagic, sizeof detail::kCkptMagic);
  detail::put_u32_le(head, static_cast<std::uint32_t>(header_bytes.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("failed writing " + path);
}

inline std::unique_ptr<Model> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);

  char magic[sizeof detail::kCkptMagic];
  if (!in.read(magic, sizeof magic)) throw TruncationError(path + ": shorter than the magic");
  if (std::memcmp(magic, detail::kCkptMagic, sizeof magic) != 0)
    throw FormatError(path + ": not a model checkpoint (bad magic)");

  unsigned char len_bytes[4];
  if (!in.read(reinterpret_cast<char*>(len_bytes), 4))
    throw TruncationError(path + ": missing header length");
  const std::uint32_t header_len = detail::get_u32_le(len_bytes);

  std::string header_bytes(header_len, '\0');
  if (!in.read(header_bytes.data(), header_len))
    throw TruncationError(path + ": header shorter than declared");

  json header;
  try {
    header = json::parse(header_bytes);
  } catch (const json::exception& e) {
    throw FormatError(path + ": header is not valid JSON: " + e.what());
  }

  const int version = header.value("format_version", -1);
  if (version != 1)
    throw FormatError(path + ": unsupported format version " + std::to_string(version) +
                      "; supported: 1");

  const std::string kind = header.at("model_kind").get<std::string>();
  const Activation act = activation_from_name(header.at("activation").get<std::string>());
  const auto seed = header.at("seed").get<std::uint64_t>();
  const int input_size = header.at("input_size").get<int>();
  const int output_size = header.at("output_size").get<int>();

  std::unique_ptr<Model> model;
  if (kind == "ffn") {
    model = std::make_unique<MaskedDeepFFN>(
        input_size, output_size, header.at("hidden_sizes").get<std::vector<int>>(), act, seed);
  } else if (kind == "dan") {
    model = std::make_unique<MaskedDeepDAN>(input_size, output_size,
                                            graph_from_json(header.at("structure")), act, seed);
  } else if (kind == "cell") {
    const std::string ctor = header.value("constructor_kind", "custom");
    if (ctor != "linear_mixer")
      throw UnsupportedModelError(path + ": cannot reconstruct cell constructor '" + ctor + "'");
    model = std::make_unique<DeepCellDAN>(output_size, input_size,
                                          linear_mixer_constructor(seed),
                                          graph_from_json(header.at("structure")), seed,
                                          "linear_mixer");
  } else {
    throw FormatError(path + ": unknown model kind '" + kind + "'");
  }

  const auto payload_size = header.at("payload_size").get<std::size_t>();
  std::vector<unsigned char> payload(payload_size);
  if (!in.read(reinterpret_cast<char*>(payload.data()),
               static_cast<std::streamsize>(payload_size)))
    throw TruncationError(path + ": payload shorter than declared");

  const auto declared_crc = header.at("crc32").get<std::uint32_t>();
  const auto actual_crc = static_cast<std::uint32_t>(
      ::crc32(0L, payload.data(), static_cast<uInt>(payload.size())));
  if (declared_crc != actual_crc)
    throw FormatError(path + ": payload checksum mismatch (header " +
                      std::to_string(declared_crc) + ", computed " + std::to_string(actual_crc) +
                      ")");

  auto layers = detail::checkpoint_layers(*model);
  std::map<std::string, MaskedLinear*> by_name;
  for (auto& [name, layer] : layers) by_name[name] = layer;

  std::vector<std::pair<std::size_t, std::size_t>> spans;  // (offset, length)
  const auto take_span = [&](std::size_t offset, std::size_t length) {
    if (offset + length > payload_size)
      throw FormatError(path + ": manifest offsets run past the payload");
    spans.emplace_back(offset, length);
    return payload.data() + offset;
  };

  if (!header.contains("manifest") || !header["manifest"].is_array() ||
      header["manifest"].size() != by_name.size())
    throw FormatError(path + ": manifest does not match the model's layer set");

  for (const auto& entry : header["manifest"]) {
    const std::string name = entry.at("name").get<std::string>();
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError(path + ": manifest names unknown layer '" + name + "'");
    MaskedLinear& layer = *it->second;
    if (entry.at("rows").get<long>() != layer.out_features() ||
        entry.at("cols").get<long>() != layer.in_features())
      throw FormatError(path + ": shape mismatch for layer '" + name + "'");

    const std::size_t count = layer.weight.data.size();
    const unsigned char* w = take_span(entry.at("w_offset").get<std::size_t>(), count * 4);
    const unsigned char* b =
        take_span(entry.at("b_offset").get<std::size_t>(), layer.bias.data.size() * 4);
    const unsigned char* m = take_span(entry.at("m_offset").get<std::size_t>(), count);

    for (std::size_t i = 0; i < count; ++i) layer.weight.data[i] = detail::get_f32_le(w + i * 4);
    for (std::size_t i = 0; i < layer.bias.data.size(); ++i)
      layer.bias.data[i] = detail::get_f32_le(b + i * 4);
    for (std::size_t i = 0; i < count; ++i) {
      if (m[i] > 1) throw FormatError(path + ": mask bytes must be 0 or 1");
      layer.mask.data[i] = static_cast<float>(m[i]);
    }
  }

  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i)
    if (spans[i].first < spans[i - 1].first + spans[i - 1].second)
      throw FormatError(path + ": manifest spans overlap");

  return model;
}

}  // namespace gw
