#pragma once

#include <functional>
#include <map>
#include <string>

#include "gts/autodiff.hpp"
#include "gts/tensor.hpp"

namespace gts::ad {

// Named parameter tensors with a stable on-disk format: a flat little-endian
// float64 blob plus a JSON index mapping name -> {shape, offset}. Round-trips
// are bit-exact.
class ParameterStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  size_t size() const { return entries_.size(); }
  int64_t total_elements() const;
  std::vector<std::string> names() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  ParameterStore zeros_like() const;

  // `meta_json` (serialized JSON object, may be empty) is stored verbatim
  // under a "meta" key in the index; load() ignores it, read_meta() returns it.
  void save(const std::string& bin_path, const std::string& json_path,
            const std::string& meta_json = {}) const;
  static ParameterStore load(const std::string& bin_path, const std::string& json_path);
  static std::string read_meta(const std::string& json_path);

 private:
  std::map<std::string, Tensor> entries_;
};

// Parameters registered into a live graph; vars keyed by parameter name.
struct BoundParams {
  std::map<std::string, Var> vars;
  Var at(const std::string& name) const;
  bool contains(const std::string& name) const { return vars.count(name) > 0; }
};

BoundParams bind(Graph& g, const ParameterStore& params);

// Gradients of every bound parameter after backward(); zeros where unreached.
ParameterStore read_gradients(const Graph& g, const BoundParams& bound,
                              const ParameterStore& like);

// A differentiable program: builds a scalar loss from a graph and the bound
// parameters. Inputs are captured in the closure.
using Program = std::function<Var(Graph&, const BoundParams&)>;

struct Evaluation {
  double value = 0.0;
  ParameterStore gradients;
};

Evaluation evaluate_with_gradients(const Program& program, const ParameterStore& params);
double evaluate_value(const Program& program, const ParameterStore& params);

}  // namespace gts::ad
