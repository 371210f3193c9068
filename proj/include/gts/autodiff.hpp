#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gts/tensor.hpp"

namespace gts::ad {

// Handle into a Graph's node tape.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

enum class Op : uint8_t {
  kInput,
  kParam,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kAddScalar,
  kMulScalar,
  kSigmoid,
  kTanh,
  kRelu,
  kLog,
  kExp,
  kAbs,
  kClamp,
  kMatmul,
  kTranspose,
  kAddRows,
  kConcatCols,
  kConcatRows,
  kSliceCols,
  kSliceRows,
  kGatherRows,
  kReshape,
  kSumAll,
  kMeanAll,
  kRowSums,
  kConv1d,
  kRowNormalize,
  kBlockMatmul,
};

const char* op_name(Op op);

// Reverse-mode tape. Values are computed eagerly as ops are recorded;
// backward() walks the tape once in reverse creation order. Graphs are
// single-use: build, backward, read gradients, discard.
class Graph {
 public:
  Graph() { nodes_.reserve(1024); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Every op checks its output for NaN/inf and throws NonFiniteError naming
  // the op. Disable only in tests that exercise the check itself.
  bool check_finite = true;

  Var input(Tensor value, std::string tag = {});
  Var param(Tensor value, std::string tag);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var add_scalar(Var a, double c);
  Var mul_scalar(Var a, double c);
  // 1 - x, used for gate complements.
  Var one_minus(Var a) { return add_scalar(mul_scalar(a, -1.0), 1.0); }

  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var log(Var a);
  Var exp(Var a);
  Var abs(Var a);
  Var clamp(Var a, double lo, double hi);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  // x [m,q] + row vector b [q] broadcast over rows.
  Var add_rows(Var x, Var b);

  Var concat_cols(Var a, Var b);
  Var concat_rows(Var a, Var b);
  Var slice_cols(Var a, int64_t c0, int64_t c1);
  Var slice_rows(Var a, int64_t r0, int64_t r1);
  Var gather_rows(Var a, std::vector<int64_t> rows);
  Var reshape(Var a, Shape s);

  Var sum_all(Var a);
  Var mean_all(Var a);
  // [m,n] -> [m,1], sum along columns of each row.
  Var row_sums(Var a);

  // x [n, L] (n independent 1-d signals), w [c, k] kernels, b [c] bias.
  // Output [n, c * L_out], L_out = floor((L - k) / stride) + 1, channel-major
  // per position: out[i, c0 * L_out + p].
  Var conv1d(Var x, Var w, Var b, int64_t stride);

  // Row-stochastic normalization: out[i,:] = a[i,:] / rowsum, rows with zero
  // sum stay zero. Used for the random-walk transition matrices.
  Var row_normalize(Var a);

  // P [n,n] applied independently to each n-row block of Y [(B*n), q]:
  // out block b = P * Y_b. Backbone of batched graph convolution.
  Var block_matmul(Var p, Var y, int64_t block_rows);

  void backward(Var loss);

  const Tensor& value(Var v) const;
  // Gradient of the last backward()'s loss w.r.t. v; zeros if v was not
  // reached or does not require grad.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const;
  size_t node_count() const { return nodes_.size(); }

  // Test hook: scale the accumulated gradient of the node with this tag
  // during backward, emulating an incorrect adjoint.
  void debug_scale_grad(const std::string& tag, double factor) {
    fault_tag_ = tag;
    fault_factor_ = factor;
  }

 private:
  struct Node {
    Op op;
    int32_t a = -1, b = -1, c = -1;
    bool needs_grad = false;
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    double x0 = 0.0, x1 = 0.0;
    int64_t i0 = 0, i1 = 0;
    std::vector<int64_t> rows;
    std::string tag;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  std::string fault_tag_;
  double fault_factor_ = 1.0;

  Var push(Node n);
  const Node& node(Var v) const;
  Tensor& grad_buf(int32_t id, const Shape& shape);
  void propagate(int32_t id);
  void check(const Node& n) const;
};

}  // namespace gts::ad
