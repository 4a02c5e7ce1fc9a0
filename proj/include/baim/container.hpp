#ifndef BAIM_CONTAINER_HPP
#define BAIM_CONTAINER_HPP

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "baim/graph.hpp"
#include "baim/learner.hpp"
#include "baim/taskmodel.hpp"
#include "baim/types.hpp"

namespace baim {

// `.baim` container layout (all integers little-endian):
//   0x00  magic "BAIMFORG"
//   0x08  u32 version
//   0x0C  u64 manifest length
//   0x14  u64 blob length
//   0x1C  manifest: canonical JSON (topology, specs, squads, edge list
//         with masks, meta/seeds, precision, parameter table)
//   ....  blob: raw IEEE-754 parameter values in manifest order
inline constexpr char kContainerMagic[8] = {'B', 'A', 'I', 'M', 'F', 'O', 'R', 'G'};
inline constexpr std::size_t kHeaderSize = 8 + 4 + 8 + 8;

using Bytes = std::vector<std::uint8_t>;
using Json = nlohmann::json;

namespace detail {

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const Bytes& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | in[at + static_cast<std::size_t>(i)];
  return v;
}

inline std::uint64_t get_u64(const Bytes& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | in[at + static_cast<std::size_t>(i)];
  return v;
}

inline void put_real(Bytes& out, real x) {
  if constexpr (sizeof(real) == 8) {
    put_u64(out, std::bit_cast<std::uint64_t>(static_cast<double>(x)));
  } else {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
}

inline real get_real(const Bytes& in, std::size_t at) {
  if constexpr (sizeof(real) == 8)
    return std::bit_cast<double>(get_u64(in, at));
  else
    return std::bit_cast<float>(get_u32(in, at));
}

inline Json spec_json(const LearnerSpec& s) {
  return Json{{"learner_id", s.learner_id}, {"task_id", s.task_id},
              {"input_dim", s.input_dim},   {"stage_widths", s.stage_widths},
              {"latent_dim", s.latent_dim}, {"stage_of_latent", s.stage_of_latent}};
}

inline LearnerSpec spec_from_json(const Json& j) {
  LearnerSpec s;
  s.learner_id = j.at("learner_id").get<int>();
  s.task_id = j.at("task_id").get<int>();
  s.input_dim = j.at("input_dim").get<int>();
  s.stage_widths = j.at("stage_widths").get<std::vector<int>>();
  s.latent_dim = j.at("latent_dim").get<int>();
  s.stage_of_latent = j.at("stage_of_latent").get<int>();
  return s;
}

inline Json edge_json(const ProjectionEdge& e) {
  return Json{{"id", e.id},
              {"src", {e.src_learner, e.src_stage}},
              {"dst", {e.dst_learner, e.dst_stage}},
              {"active", e.active}};
}

inline Json lsgate_json(const LsGate& g) {
  return Json{{"squad_id", g.squad_id}, {"size", g.squad_size()}, {"k", g.top_k}};
}

}  // namespace detail

enum class ModelKind { kLearner, kGraph, kTaskModel };

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kLearner: return "learner";
    case ModelKind::kGraph: return "baim_graph";
    case ModelKind::kTaskModel: return "task_model";
  }
  return "?";
}

namespace detail {

// Appends the parameter table to the manifest and the raw values to the
// blob; `enumerate` must visit parameters in the model's canonical order.
template <typename Enumerate>
inline Bytes pack(Json manifest, Enumerate&& enumerate, const std::map<std::string, std::string>& meta) {

  Json params = Json::array();
  Bytes blob;
  enumerate([&](Parameter& p) {
    require_finite(p.value, "serialize");
    params.push_back(Json{{"id", p.id}, {"shape", p.value.shape()}, {"trainable", p.trainable}});
    for (long i = 0; i < p.value.size(); ++i) put_real(blob, p.value[i]);
  });
  manifest["params"] = std::move(params);
  manifest["precision"] = kPrecisionName;
  manifest["meta"] = meta;

  const std::string text = manifest.dump();
  Bytes out;
  out.reserve(kHeaderSize + text.size() + blob.size());
  out.insert(out.end(), kContainerMagic, kContainerMagic + 8);
  put_u32(out, kContainerVersion);
  put_u64(out, text.size());
  put_u64(out, blob.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), blob.begin(), blob.end());
  return out;
}

struct Opened {
  Json manifest;
  const Bytes* raw;
  std::size_t blob_at;
  std::size_t blob_len;
};

inline Opened open(const Bytes& bytes) {
  if (bytes.size() < kHeaderSize)
    throw format_error("container truncated at offset " + std::to_string(bytes.size()) +
                       ": header needs " + std::to_string(kHeaderSize) + " bytes");
  if (std::memcmp(bytes.data(), kContainerMagic, 8) != 0)
    throw format_error("bad magic at offset 0");
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kContainerVersion)
    throw format_error("unsupported version " + std::to_string(version) + " at offset 8");
  const std::uint64_t manifest_len = get_u64(bytes, 12);
  const std::uint64_t blob_len = get_u64(bytes, 20);
  if (bytes.size() != kHeaderSize + manifest_len + blob_len)
    throw format_error("container length " + std::to_string(bytes.size()) + " does not match header (expected " +
                       std::to_string(kHeaderSize + manifest_len + blob_len) + "); truncated at offset " +
                       std::to_string(bytes.size()));
  Opened o;
  const char* text = reinterpret_cast<const char*>(bytes.data()) + kHeaderSize;
  try {
    o.manifest = Json::parse(text, text + manifest_len);
  } catch (const Json::exception& e) {
    throw format_error("manifest parse failure at offset " + std::to_string(kHeaderSize) + ": " + e.what());
  }
  o.raw = &bytes;
  o.blob_at = kHeaderSize + manifest_len;
  o.blob_len = blob_len;
  return o;
}

// Reads blob values into parameters following the manifest table, with
// id/shape cross-checks against the reconstructed topology.
template <typename Enumerate>
inline void unpack_params(const Opened& o, Enumerate&& enumerate) {
  if (!o.manifest.contains("params")) throw format_error("manifest missing params table");
  const Json& table = o.manifest.at("params");
  const std::string precision = o.manifest.value("precision", "");
  if (precision != kPrecisionName)
    throw format_error("container precision '" + precision + "' does not match this build (" +
                       kPrecisionName + ")");
  std::size_t at = o.blob_at;
  const std::size_t end = o.blob_at + o.blob_len;
  std::size_t row = 0;
  enumerate([&](Parameter& p) {
    if (row >= table.size()) throw format_error("manifest params table too short");
    const Json& entry = table.at(row);
    const std::string id = entry.at("id").get<std::string>();
    const std::vector<long> shape = entry.at("shape").get<std::vector<long>>();
    if (id != p.id)
      throw format_error("param table mismatch at row " + std::to_string(row) + ": expected " + p.id +
                         ", found " + id);
    if (shape != p.value.shape())
      throw format_error("param shape mismatch for " + p.id);
    p.trainable = entry.at("trainable").get<bool>();
    for (long i = 0; i < p.value.size(); ++i) {
      if (at + sizeof(real) > end)
        throw format_error("blob truncated at offset " + std::to_string(at));
      p.value[i] = get_real(*o.raw, at);
      at += sizeof(real);
    }
    row += 1;
  });
  if (row != table.size()) throw format_error("manifest params table too long");
  if (at != end)
    throw format_error("blob length mismatch: " + std::to_string(end - at) + " unread bytes at offset " +
                       std::to_string(at));
}

}  // namespace detail

using MetaMap = std::map<std::string, std::string>;

inline Bytes serialize(Learner& l) {
  Json m;
  m["kind"] = model_kind_name(ModelKind::kLearner);
  m["learner"] = Json{{"spec", detail::spec_json(l.spec)}};
  return detail::pack(std::move(m), [&](auto&& fn) { l.for_each_param(fn); }, l.meta);
}

inline Bytes serialize(BaimGraph& g) {
  Json m;
  m["kind"] = model_kind_name(ModelKind::kGraph);
  Json topo;
  topo["height"] = g.height;
  topo["default_top_k"] = g.default_top_k;
  topo["squads"] = g.squads;
  Json specs = Json::array();
  for (const auto& l : g.learners) specs.push_back(detail::spec_json(l.spec));
  topo["specs"] = std::move(specs);
  topo["tsgate"] = Json{{"tasks", g.tsgate.tasks()}, {"input_dim", g.tsgate.input_dim()}};
  Json gates = Json::array();
  for (const auto& gate : g.lsgates) gates.push_back(detail::lsgate_json(gate));
  topo["lsgates"] = std::move(gates);
  Json edges = Json::array();
  for (const auto& e : g.edges) edges.push_back(detail::edge_json(e));
  topo["edges"] = std::move(edges);
  m["graph"] = std::move(topo);
  return detail::pack(std::move(m), [&](auto&& fn) { g.for_each_param(fn); }, g.meta);
}

inline Bytes serialize(TaskModel& tm) {
  Json m;
  m["kind"] = model_kind_name(ModelKind::kTaskModel);
  Json topo;
  topo["task_id"] = tm.task_id;
  topo["own_learners"] = tm.own_learners;
  topo["lsgate"] = detail::lsgate_json(tm.lsgate);
  Json parts = Json::array();
  for (const auto& p : tm.parts)
    parts.push_back(Json{{"spec", detail::spec_json(p.learner.spec)}, {"max_stage", p.max_stage}});
  topo["parts"] = std::move(parts);
  Json edges = Json::array();
  for (const auto& e : tm.edges) edges.push_back(detail::edge_json(e));
  topo["edges"] = std::move(edges);
  m["task_model"] = std::move(topo);
  return detail::pack(std::move(m), [&](auto&& fn) { tm.for_each_param(fn); }, tm.meta);
}

inline ModelKind peek_kind(const Bytes& bytes) {
  detail::Opened o = detail::open(bytes);
  const std::string kind = o.manifest.value("kind", "");
  if (kind == "learner") return ModelKind::kLearner;
  if (kind == "baim_graph") return ModelKind::kGraph;
  if (kind == "task_model") return ModelKind::kTaskModel;
  throw format_error("unknown model kind '" + kind + "'");
}

inline MetaMap container_meta(const Bytes& bytes) {
  detail::Opened o = detail::open(bytes);
  return o.manifest.value("meta", MetaMap{});
}

namespace detail {

// Rebuilds a zero-valued learner skeleton with canonical parameter ids.
inline Learner learner_skeleton(const LearnerSpec& spec) {
  Learner l;
  l.spec = spec;
  spec.validate();
  const std::string p = l.prefix();
  const int S = spec.stage_count();
  l.stage_w.resize(static_cast<std::size_t>(S));
  l.stage_b.resize(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    const long in = spec.stage_in_dim(s);
    const long out = spec.stage_out_dim(s);
    if (s == spec.stage_of_latent) {
      l.mu_w = make_zero_param(p + "/latent/mu_W", {out, in});
      l.mu_b = make_zero_param(p + "/latent/mu_b", {out});
      l.logvar_w = make_zero_param(p + "/latent/logvar_W", {out, in});
      l.logvar_b = make_zero_param(p + "/latent/logvar_b", {out});
    } else {
      l.stage_w[static_cast<std::size_t>(s)] =
          make_zero_param(p + "/stage" + std::to_string(s) + "/W", {out, in});
      l.stage_b[static_cast<std::size_t>(s)] =
          make_zero_param(p + "/stage" + std::to_string(s) + "/b", {out});
    }
  }
  return l;
}

inline ProjectionEdge edge_skeleton(const Json& j, const std::vector<LearnerSpec>& specs) {
  ProjectionEdge e;
  e.id = j.at("id").get<int>();
  e.src_learner = j.at("src").at(0).get<int>();
  e.src_stage = j.at("src").at(1).get<int>();
  e.dst_learner = j.at("dst").at(0).get<int>();
  e.dst_stage = j.at("dst").at(1).get<int>();
  e.active = j.at("active").get<bool>();
  const LearnerSpec* src = nullptr;
  const LearnerSpec* dst = nullptr;
  for (const auto& s : specs) {
    if (s.learner_id == e.src_learner) src = &s;
    if (s.learner_id == e.dst_learner) dst = &s;
  }
  if (src == nullptr || dst == nullptr) throw format_error("edge references unknown learner");
  e.W = make_zero_param("edge" + std::to_string(e.id) + "/W",
                        {static_cast<long>(dst->stage_in_dim(e.dst_stage)),
                         static_cast<long>(src->stage_out_dim(e.src_stage))});
  return e;
}

inline LsGate lsgate_skeleton(const Json& j, int input_dim) {
  LsGate g;
  g.squad_id = j.at("squad_id").get<int>();
  const int size = j.at("size").get<int>();
  g.top_k = j.at("k").get<int>();
  g.W = make_zero_param("lsgate" + std::to_string(g.squad_id) + "/W", {size, input_dim});
  g.b = make_zero_param("lsgate" + std::to_string(g.squad_id) + "/b", {size});
  if (g.top_k < 1 || g.top_k > size) throw format_error("lsgate k out of range");
  return g;
}

}  // namespace detail

inline Learner deserialize_learner(const Bytes& bytes) {
  detail::Opened o = detail::open(bytes);
  if (o.manifest.value("kind", "") != "learner") throw format_error("container is not a learner");
  Learner l;
  try {
    l = detail::learner_skeleton(detail::spec_from_json(o.manifest.at("learner").at("spec")));
  } catch (const Json::exception& e) {
    throw format_error(std::string("bad learner manifest: ") + e.what());
  } catch (const config_error& e) {
    throw format_error(std::string("bad learner manifest: ") + e.what());
  }
  detail::unpack_params(o, [&](auto&& fn) { l.for_each_param(fn); });
  l.meta = o.manifest.value("meta", MetaMap{});
  return l;
}

inline BaimGraph deserialize_graph(const Bytes& bytes) {
  detail::Opened o = detail::open(bytes);
  if (o.manifest.value("kind", "") != "baim_graph") throw format_error("container is not a baim_graph");
  BaimGraph g;
  try {
    const Json& topo = o.manifest.at("graph");
    g.height = topo.at("height").get<int>();
    g.default_top_k = topo.at("default_top_k").get<int>();
    g.squads = topo.at("squads").get<std::vector<std::vector<int>>>();
    std::vector<LearnerSpec> specs;
    for (const Json& js : topo.at("specs")) specs.push_back(detail::spec_from_json(js));
    for (const auto& spec : specs) g.learners.push_back(detail::learner_skeleton(spec));
    const int input_dim = topo.at("tsgate").at("input_dim").get<int>();
    const int tasks = topo.at("tsgate").at("tasks").get<int>();
    g.tsgate.W = make_zero_param("tsgate/W", {tasks, input_dim});
    g.tsgate.b = make_zero_param("tsgate/b", {tasks});
    for (const Json& jg : topo.at("lsgates")) g.lsgates.push_back(detail::lsgate_skeleton(jg, input_dim));
    for (const Json& je : topo.at("edges")) g.edges.push_back(detail::edge_skeleton(je, specs));
  } catch (const Json::exception& e) {
    throw format_error(std::string("bad graph manifest: ") + e.what());
  } catch (const config_error& e) {
    throw format_error(std::string("bad graph manifest: ") + e.what());
  }
  detail::unpack_params(o, [&](auto&& fn) { g.for_each_param(fn); });
  g.meta = o.manifest.value("meta", MetaMap{});
  CycleReport cycles = validate_acyclic(g);
  if (!cycles.ok) throw format_error("deserialized graph is cyclic: " + cycles.to_string());
  return g;
}

inline TaskModel deserialize_task_model(const Bytes& bytes) {
  detail::Opened o = detail::open(bytes);
  if (o.manifest.value("kind", "") != "task_model") throw format_error("container is not a task_model");
  TaskModel tm;
  try {
    const Json& topo = o.manifest.at("task_model");
    tm.task_id = topo.at("task_id").get<int>();
    tm.own_learners = topo.at("own_learners").get<std::vector<int>>();
    std::vector<LearnerSpec> specs;
    for (const Json& jp : topo.at("parts")) {
      TaskPart part;
      part.learner = detail::learner_skeleton(detail::spec_from_json(jp.at("spec")));
      part.max_stage = jp.at("max_stage").get<int>();
      specs.push_back(part.learner.spec);
      const auto& spec = part.learner.spec;
      for (int s = part.max_stage + 1; s < spec.stage_count(); ++s) {
        if (s == spec.stage_of_latent) {
          part.learner.mu_w = Parameter();
          part.learner.mu_b = Parameter();
          part.learner.logvar_w = Parameter();
          part.learner.logvar_b = Parameter();
        } else {
          part.learner.stage_w[static_cast<std::size_t>(s)] = Parameter();
          part.learner.stage_b[static_cast<std::size_t>(s)] = Parameter();
        }
      }
      tm.parts.push_back(std::move(part));
    }
    const int input_dim = tm.parts.empty() ? 0 : tm.parts.front().learner.spec.input_dim;
    tm.lsgate = detail::lsgate_skeleton(topo.at("lsgate"), input_dim);
    for (const Json& je : topo.at("edges")) tm.edges.push_back(detail::edge_skeleton(je, specs));
  } catch (const Json::exception& e) {
    throw format_error(std::string("bad task_model manifest: ") + e.what());
  } catch (const config_error& e) {
    throw format_error(std::string("bad task_model manifest: ") + e.what());
  }
  detail::unpack_params(o, [&](auto&& fn) { tm.for_each_param(fn); });
  tm.meta = o.manifest.value("meta", MetaMap{});
  return tm;
}

}  // namespace baim

#endif  // BAIM_CONTAINER_HPP
