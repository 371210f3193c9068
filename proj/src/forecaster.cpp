#include "gts/forecaster.hpp"

#include <cmath>

namespace gts::gnn {

namespace {

void glorot(Tensor& t, int64_t fan_in, int64_t fan_out, Rng& rng) {
  double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data) v = rng.uniform(-lim, lim);
}

void init_gate(ad::ParameterStore& params, const std::string& prefix, int64_t in_dim,
               int64_t hidden, int64_t K, double bias_init, Rng& rng) {
  for (int64_t k = 0; k <= K; ++k) {
    for (const char* dir : {"fwd", "rev"}) {
      Tensor w{Shape{in_dim, hidden}};
      glorot(w, in_dim, hidden, rng);
      params.add(prefix + ".k" + std::to_string(k) + "." + dir, std::move(w));
    }
  }
  params.add(prefix + ".bias", Tensor{Shape{hidden}, bias_init});
}

void init_cell(ad::ParameterStore& params, const std::string& prefix, int64_t in_dim,
               int64_t hidden, int64_t K, Rng& rng) {
  const int64_t cat = in_dim + hidden;
  init_gate(params, prefix + ".r", cat, hidden, K, 1.0, rng);
  init_gate(params, prefix + ".u", cat, hidden, K, 1.0, rng);
  init_gate(params, prefix + ".c", cat, hidden, K, 0.0, rng);
}

GateWeights bind_gate(const ad::BoundParams& bound, const std::string& prefix, int64_t K) {
  GateWeights w;
  for (int64_t k = 0; k <= K; ++k) {
    w.fwd.push_back(bound.at(prefix + ".k" + std::to_string(k) + ".fwd"));
    w.rev.push_back(bound.at(prefix + ".k" + std::to_string(k) + ".rev"));
  }
  w.bias = bound.at(prefix + ".bias");
  return w;
}

}  // namespace

void init_forecaster_params(ad::ParameterStore& params, const ForecasterConfig& cfg,
                            Rng& rng) {
  if (cfg.hidden < 1 || cfg.layers < 1 || cfg.diffusion_steps < 0)
    throw Error("forecaster: hidden/layers must be >= 1, diffusion_steps >= 0");
  if (cfg.input_dim < 1 || cfg.target_dim < 1)
    throw Error("forecaster: input_dim and target_dim must be >= 1");
  for (int64_t l = 0; l < cfg.layers; ++l) {
    int64_t enc_in = l == 0 ? cfg.input_dim : cfg.hidden;
    int64_t dec_in = l == 0 ? cfg.target_dim : cfg.hidden;
    init_cell(params, "dcgru.enc.l" + std::to_string(l), enc_in, cfg.hidden,
              cfg.diffusion_steps, rng);
    init_cell(params, "dcgru.dec.l" + std::to_string(l), dec_in, cfg.hidden,
              cfg.diffusion_steps, rng);
  }
  Tensor hw{Shape{cfg.hidden, cfg.target_dim}};
  glorot(hw, cfg.hidden, cfg.target_dim, rng);
  params.add("head.weight", std::move(hw));
  params.add("head.bias", Tensor{Shape{cfg.target_dim}, 0.0});
}

CellVars bind_cell(const ad::BoundParams& bound, const std::string& prefix, int64_t K) {
  CellVars cell;
  cell.r = bind_gate(bound, prefix + ".r", K);
  cell.u = bind_gate(bound, prefix + ".u", K);
  cell.c = bind_gate(bound, prefix + ".c", K);
  return cell;
}

Transitions make_transitions(ad::Graph& g, ad::Var adjacency) {
  const Tensor& a = g.value(adjacency);
  if (a.rank() != 2 || a.rows() != a.cols())
    throw ShapeError("make_transitions: adjacency must be square, got " +
                     shape_str(a.shape));
  for (double v : a.data)
    if (v < 0.0) throw Error("make_transitions: adjacency entries must be >= 0");
  Transitions t;
  t.fwd = g.row_normalize(adjacency);
  t.rev = g.row_normalize(g.transpose(adjacency));
  return t;
}

ad::Var diffusion_apply(ad::Graph& g, const Transitions& p, ad::Var y,
                        const GateWeights& w, int64_t block_rows) {
  if (w.fwd.empty() || w.fwd.size() != w.rev.size())
    throw Error("diffusion_apply: need matching forward/reverse weights");
  ad::Var acc = g.add(g.matmul(y, w.fwd[0]), g.matmul(y, w.rev[0]));
  ad::Var tf = y, tr = y;
  for (size_t k = 1; k < w.fwd.size(); ++k) {
    tf = g.block_matmul(p.fwd, tf, block_rows);
    tr = g.block_matmul(p.rev, tr, block_rows);
    acc = g.add(acc, g.add(g.matmul(tf, w.fwd[k]), g.matmul(tr, w.rev[k])));
  }
  return g.add_rows(acc, w.bias);
}

ad::Var diffusion_conv(ad::Graph& g, ad::Var adjacency, ad::Var y,
                       const GateWeights& w, int64_t block_rows) {
  Transitions p = make_transitions(g, adjacency);
  return diffusion_apply(g, p, y, w, block_rows);
}

ad::Var dcgru_step(ad::Graph& g, ad::Var x, ad::Var h, const Transitions& p,
                   const CellVars& cell, int64_t block_rows) {
  ad::Var xh = g.concat_cols(x, h);
  ad::Var r = g.sigmoid(diffusion_apply(g, p, xh, cell.r, block_rows));
  ad::Var u = g.sigmoid(diffusion_apply(g, p, xh, cell.u, block_rows));
  ad::Var xrh = g.concat_cols(x, g.mul(r, h));
  ad::Var c = g.tanh(diffusion_apply(g, p, xrh, cell.c, block_rows));
  return g.add(g.mul(u, h), g.mul(g.one_minus(u), c));
}

std::vector<ad::Var> forecast(ad::Graph& g, const ad::BoundParams& bound,
                              ad::Var adjacency, const std::vector<ad::Var>& inputs,
                              int64_t horizon, const ForecasterConfig& cfg,
                              int64_t block_rows) {
  if (inputs.empty()) throw Error("forecast: need at least one input step");
  if (horizon < 1) throw Error("forecast: horizon must be >= 1");
  const Tensor& x0 = g.value(inputs[0]);
  if (x0.rank() != 2 || x0.cols() != cfg.input_dim)
    throw ShapeError("forecast: inputs must be [(B*n) x " +
                     std::to_string(cfg.input_dim) + "], got " + shape_str(x0.shape));
  if (x0.rows() % block_rows != 0)
    throw ShapeError("forecast: input rows not a multiple of the node count");
  const int64_t rows = x0.rows();

  Transitions p = make_transitions(g, adjacency);

  std::vector<CellVars> enc, dec;
  for (int64_t l = 0; l < cfg.layers; ++l) {
    enc.push_back(bind_cell(bound, "dcgru.enc.l" + std::to_string(l), cfg.diffusion_steps));
    dec.push_back(bind_cell(bound, "dcgru.dec.l" + std::to_string(l), cfg.diffusion_steps));
  }

  std::vector<ad::Var> state(static_cast<size_t>(cfg.layers));
  for (auto& h : state) h = g.input(Tensor{Shape{rows, cfg.hidden}}, "h0");

  for (ad::Var x : inputs) {
    ad::Var inp = x;
    for (int64_t l = 0; l < cfg.layers; ++l) {
      state[static_cast<size_t>(l)] =
          dcgru_step(g, inp, state[static_cast<size_t>(l)], p, enc[static_cast<size_t>(l)],
                     block_rows);
      inp = state[static_cast<size_t>(l)];
    }
  }

  ad::Var head_w = bound.at("head.weight");
  ad::Var head_b = bound.at("head.bias");
  std::vector<ad::Var> preds;
  ad::Var feed = g.input(Tensor{Shape{rows, cfg.target_dim}}, "go");
  for (int64_t t = 0; t < horizon; ++t) {
    ad::Var inp = feed;
    for (int64_t l = 0; l < cfg.layers; ++l) {
      state[static_cast<size_t>(l)] =
          dcgru_step(g, inp, state[static_cast<size_t>(l)], p, dec[static_cast<size_t>(l)],
                     block_rows);
      inp = state[static_cast<size_t>(l)];
    }
    ad::Var y = g.add_rows(g.matmul(inp, head_w), head_b);
    preds.push_back(y);
    feed = y;
  }
  return preds;
}

}  // namespace gts::gnn
