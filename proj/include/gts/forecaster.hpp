#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gts/param_store.hpp"
#include "gts/rng.hpp"

namespace gts::gnn {

// Dual random-walk diffusion convolution. Weights carry one input x hidden
// matrix per diffusion step and direction; k = 0 is the identity term of
// both directions, matching the literal two-term sum.
struct GateWeights {
  std::vector<ad::Var> fwd, rev;  // k = 0..K
  ad::Var bias;
};

struct CellVars {
  GateWeights r, u, c;
};

struct ForecasterConfig {
  int64_t hidden = 32;
  int64_t diffusion_steps = 2;  // K
  int64_t layers = 1;
  int64_t input_dim = 1;   // features fed to the encoder
  int64_t target_dim = 1;  // features predicted by the decoder
};

// Registers encoder/decoder cell weights and the output head. Gate biases
// start at 1 for r and u (open gates) and 0 for c.
void init_forecaster_params(ad::ParameterStore& params, const ForecasterConfig& cfg,
                            Rng& rng);

CellVars bind_cell(const ad::BoundParams& bound, const std::string& prefix,
                   int64_t diffusion_steps);

// Normalized transition matrices for an adjacency: rows of A and of A^T
// scaled to sum to one, zero rows left zero.
struct Transitions {
  ad::Var fwd, rev;
};
Transitions make_transitions(ad::Graph& g, ad::Var adjacency);

// y [(B*n) x q] convolved over each n-row block with both walk directions:
// sum_k P_fwd^k y W_fwd_k + P_rev^k y W_rev_k + bias.
ad::Var diffusion_apply(ad::Graph& g, const Transitions& p, ad::Var y,
                        const GateWeights& w, int64_t block_rows);

// Convenience wrapper normalizing a raw adjacency first.
ad::Var diffusion_conv(ad::Graph& g, ad::Var adjacency, ad::Var y,
                       const GateWeights& w, int64_t block_rows);

// One DCGRU step on a batch stacked as [(B*n) x in_dim] with state
// [(B*n) x hidden].
ad::Var dcgru_step(ad::Graph& g, ad::Var x, ad::Var h, const Transitions& p,
                   const CellVars& cell, int64_t block_rows);

// Encoder-decoder forecast: runs the encoder over the input steps, then
// rolls the decoder forward `horizon` steps feeding back its own
// predictions, starting from a zero GO frame. Returns one prediction per
// horizon step, each [(B*n) x target_dim].
std::vector<ad::Var> forecast(ad::Graph& g, const ad::BoundParams& bound,
                              ad::Var adjacency, const std::vector<ad::Var>& inputs,
                              int64_t horizon, const ForecasterConfig& cfg,
                              int64_t block_rows);

}  // namespace gts::gnn
