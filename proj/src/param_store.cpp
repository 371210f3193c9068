#include "gts/param_store.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace gts::ad {

using nlohmann::json;

Tensor& ParameterStore::add(const std::string& name, Tensor t) {
  if (name.empty()) throw Error("parameter name must be non-empty");
  auto [it, inserted] = entries_.emplace(name, std::move(t));
  if (!inserted) throw Error("duplicate parameter name '" + name + "'");
  return it->second;
}

Tensor& ParameterStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

int64_t ParameterStore::total_elements() const {
  int64_t n = 0;
  for (const auto& [k, v] : entries_) n += v.numel();
  return n;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

ParameterStore ParameterStore::zeros_like() const {
  ParameterStore out;
  for (const auto& [k, v] : entries_) out.add(k, Tensor{v.shape, 0.0});
  return out;
}

namespace {

// Raw blob is little-endian float64. On big-endian hosts, swap on the way
// in and out so files stay portable.
constexpr bool kHostLittle = std::endian::native == std::endian::little;

void write_doubles_le(std::ofstream& f, const std::vector<double>& d) {
  if constexpr (kHostLittle) {
    f.write(reinterpret_cast<const char*>(d.data()),
            static_cast<std::streamsize>(d.size() * sizeof(double)));
  } else {
    for (double v : d) {
      uint64_t bits;
      std::memcpy(&bits, &v, 8);
      char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      f.write(b, 8);
    }
  }
}

void read_doubles_le(std::ifstream& f, std::vector<double>& d) {
  if constexpr (kHostLittle) {
    f.read(reinterpret_cast<char*>(d.data()),
           static_cast<std::streamsize>(d.size() * sizeof(double)));
  } else {
    for (double& v : d) {
      unsigned char b[8];
      f.read(reinterpret_cast<char*>(b), 8);
      uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
      std::memcpy(&v, &bits, 8);
    }
  }
}

}  // namespace

void ParameterStore::save(const std::string& bin_path, const std::string& json_path,
                          const std::string& meta_json) const {
  json index;
  index["format_version"] = 1;
  index["dtype"] = "float64_le";
  if (!meta_json.empty()) {
    try {
      index["meta"] = json::parse(meta_json);
    } catch (const json::exception& e) {
      throw Error(std::string("invalid checkpoint metadata JSON: ") + e.what());
    }
  }
  json tensors = json::object();
  int64_t offset = 0;

  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw Error("cannot open '" + bin_path + "' for writing");
  for (const auto& [name, t] : entries_) {
    tensors[name] = {{"shape", t.shape}, {"offset", offset}, {"numel", t.numel()}};
    write_doubles_le(bin, t.data);
    offset += t.numel();
  }
  index["tensors"] = tensors;
  index["total_elements"] = offset;
  bin.close();
  if (!bin) throw Error("write failed for '" + bin_path + "'");

  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw Error("cannot open '" + json_path + "' for writing");
  js << index.dump(2) << "\n";
  js.close();
  if (!js) throw Error("write failed for '" + json_path + "'");
}

ParameterStore ParameterStore::load(const std::string& bin_path, const std::string& json_path) {
  std::ifstream js(json_path);
  if (!js) throw Error("cannot open '" + json_path + "'");
  json index = json::parse(js, nullptr, true);
  if (!index.contains("tensors") || !index["tensors"].is_object())
    throw Error("parameter index '" + json_path + "' has no tensor table");
  if (index.value("dtype", "") != "float64_le")
    throw Error("parameter index '" + json_path + "' has unsupported dtype");

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error("cannot open '" + bin_path + "'");
  bin.seekg(0, std::ios::end);
  int64_t bytes = bin.tellg();
  int64_t expect = index.value("total_elements", int64_t{-1});
  if (expect >= 0 && bytes != expect * 8)
    throw Error("parameter blob '" + bin_path + "' has " + std::to_string(bytes) +
                " bytes, index expects " + std::to_string(expect * 8));

  ParameterStore out;
  for (const auto& [name, meta] : index["tensors"].items()) {
    Shape shape = meta.at("shape").get<Shape>();
    int64_t offset = meta.at("offset").get<int64_t>();
    Tensor t{shape};
    if ((offset + t.numel()) * 8 > bytes)
      throw Error("parameter '" + name + "' extends past end of blob");
    bin.seekg(offset * 8, std::ios::beg);
    read_doubles_le(bin, t.data);
    if (!bin) throw Error("read failed for parameter '" + name + "'");
    out.add(name, std::move(t));
  }
  return out;
}

std::string ParameterStore::read_meta(const std::string& json_path) {
  std::ifstream js(json_path);
  if (!js) throw Error("cannot open '" + json_path + "'");
  json index = json::parse(js, nullptr, true);
  if (!index.contains("meta")) return {};
  return index["meta"].dump();
}

Var BoundParams::at(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw Error("parameter '" + name + "' not bound");
  return it->second;
}

BoundParams bind(Graph& g, const ParameterStore& params) {
  BoundParams out;
  for (const auto& [name, t] : params) out.vars[name] = g.param(t, name);
  return out;
}

ParameterStore read_gradients(const Graph& g, const BoundParams& bound,
                              const ParameterStore& like) {
  ParameterStore out;
  for (const auto& [name, t] : like) out.add(name, g.grad(bound.at(name)));
  return out;
}

Evaluation evaluate_with_gradients(const Program& program, const ParameterStore& params) {
  Graph g;
  BoundParams bound = bind(g, params);
  Var loss = program(g, bound);
  if (g.value(loss).numel() != 1)
    throw ShapeError("program must produce a scalar loss, got " +
                     shape_str(g.value(loss).shape));
  Evaluation ev;
  ev.value = g.value(loss).at(0);
  g.backward(loss);
  ev.gradients = read_gradients(g, bound, params);
  return ev;
}

double evaluate_value(const Program& program, const ParameterStore& params) {
  Graph g;
  BoundParams bound = bind(g, params);
  Var loss = program(g, bound);
  if (g.value(loss).numel() != 1)
    throw ShapeError("program must produce a scalar loss, got " +
                     shape_str(g.value(loss).shape));
  return g.value(loss).at(0);
}

}  // namespace gts::ad
