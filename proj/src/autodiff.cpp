#include "gts/autodiff.hpp"

#include <cmath>

namespace gts::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kAddScalar: return "add_scalar";
    case Op::kMulScalar: return "mul_scalar";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kAbs: return "abs";
    case Op::kClamp: return "clamp";
    case Op::kMatmul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kAddRows: return "add_rows";
    case Op::kConcatCols: return "concat_cols";
    case Op::kConcatRows: return "concat_rows";
    case Op::kSliceCols: return "slice_cols";
    case Op::kSliceRows: return "slice_rows";
    case Op::kGatherRows: return "gather_rows";
    case Op::kReshape: return "reshape";
    case Op::kSumAll: return "sum_all";
    case Op::kMeanAll: return "mean_all";
    case Op::kRowSums: return "row_sums";
    case Op::kConv1d: return "conv1d";
    case Op::kRowNormalize: return "row_normalize";
    case Op::kBlockMatmul: return "block_matmul";
  }
  return "?";
}

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " +
                     shape_str(t.shape));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                     " vs " + shape_str(b.shape));
}

}  // namespace

const Graph::Node& Graph::node(Var v) const {
  if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
    throw Error("invalid Var handle");
  return nodes_[static_cast<size_t>(v.id)];
}

void Graph::check(const Node& n) const {
  if (!check_finite) return;
  for (double v : n.value.data) {
    if (!std::isfinite(v))
      throw NonFiniteError(op_name(n.op), n.tag.empty() ? "" : "tag '" + n.tag + "'");
  }
}

Var Graph::push(Node n) {
  if (n.op != Op::kInput && n.op != Op::kParam) {
    bool needs = false;
    for (int32_t src : {n.a, n.b, n.c})
      if (src >= 0 && nodes_[static_cast<size_t>(src)].needs_grad) needs = true;
    n.needs_grad = needs;
  }
  check(n);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Var Graph::input(Tensor value, std::string tag) {
  Node n;
  n.op = Op::kInput;
  n.value = std::move(value);
  n.tag = std::move(tag);
  n.needs_grad = false;
  return push(std::move(n));
}

Var Graph::param(Tensor value, std::string tag) {
  Node n;
  n.op = Op::kParam;
  n.value = std::move(value);
  n.tag = std::move(tag);
  n.needs_grad = true;
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  require_same_shape(ta, tb, "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = ta;
  for (int64_t i = 0; i < n.value.numel(); ++i) n.value.at(i) += tb.at(i);
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  require_same_shape(ta, tb, "sub");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.value = ta;
  for (int64_t i = 0; i < n.value.numel(); ++i) n.value.at(i) -= tb.at(i);
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  require_same_shape(ta, tb, "mul");
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.value = ta;
  for (int64_t i = 0; i < n.value.numel(); ++i) n.value.at(i) *= tb.at(i);
  return push(std::move(n));
}

Var Graph::div(Var a, Var b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  require_same_shape(ta, tb, "div");
  Node n;
  n.op = Op::kDiv;
  n.a = a.id;
  n.b = b.id;
  n.value = ta;
  for (int64_t i = 0; i < n.value.numel(); ++i) n.value.at(i) /= tb.at(i);
  return push(std::move(n));
}

Var Graph::add_scalar(Var a, double c) {
  Node n;
  n.op = Op::kAddScalar;
  n.a = a.id;
  n.x0 = c;
  n.value = node(a).value;
  for (double& v : n.value.data) v += c;
  return push(std::move(n));
}

Var Graph::mul_scalar(Var a, double c) {
  Node n;
  n.op = Op::kMulScalar;
  n.a = a.id;
  n.x0 = c;
  n.value = node(a).value;
  for (double& v : n.value.data) v *= c;
  return push(std::move(n));
}

Var Graph::sigmoid(Var a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a.id;
  n.value = node(a).value;
  for (double& v : n.value.data) {
    // Stable in both tails.
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  return push(std::move(n));
}

Var Graph::tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a.id;
  n.value = node(a).value;
  for (double& v : n.value.data) v = std::tanh(v);
  return push(std::move(n));
}

Var Graph::relu(Var a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a.id;
  n.value = node(a).value;
  for (double& v : n.value.data)
    if (v < 0.0) v = 0.0;
  return push(std::move(n));
}

Var Graph::log(Var a) {
  Node n;
  n.op = Op::kLog;
  n.a = a.id;
  n.value = node(a).value;
  for (double& v : n.value.data) v = std::log(v);
  return push(std::move(n));
}

Var Graph::exp(Var a) {
  Node n;
  n.op = Op::kExp;
  n.a = a.id;
  n.value = node(a).value;
  for (double& v : n.value.data) v = std::exp(v);
  return push(std::move(n));
}

Var Graph::abs(Var a) {
  Node n;
  n.op = Op::kAbs;
  n.a = a.id;
  n.value = node(a).value;
  for (double& v : n.value.data) v = std::fabs(v);
  return push(std::move(n));
}

Var Graph::clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw Error("clamp: lo > hi");
  Node n;
  n.op = Op::kClamp;
  n.a = a.id;
  n.x0 = lo;
  n.x1 = hi;
  n.value = node(a).value;
  for (double& v : n.value.data) v = v < lo ? lo : (v > hi ? hi : v);
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  require_rank2(ta, "matmul");
  require_rank2(tb, "matmul");
  if (ta.cols() != tb.rows())
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(ta.shape) +
                     " x " + shape_str(tb.shape));
  const int64_t m = ta.rows(), k = ta.cols(), q = tb.cols();
  Node n;
  n.op = Op::kMatmul;
  n.a = a.id;
  n.b = b.id;
  n.value = Tensor{Shape{m, q}};
  const double* pa = ta.data.data();
  const double* pb = tb.data.data();
  double* po = n.value.data.data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t t = 0; t < k; ++t) {
      double aik = pa[i * k + t];
      if (aik == 0.0) continue;
      const double* brow = pb + t * q;
      double* orow = po + i * q;
      for (int64_t j = 0; j < q; ++j) orow[j] += aik * brow[j];
    }
  return push(std::move(n));
}

Var Graph::transpose(Var a) {
  const Tensor& ta = node(a).value;
  require_rank2(ta, "transpose");
  Node n;
  n.op = Op::kTranspose;
  n.a = a.id;
  n.value = ta.transposed();
  return push(std::move(n));
}

Var Graph::add_rows(Var x, Var b) {
  const Tensor& tx = node(x).value;
  const Tensor& tb = node(b).value;
  require_rank2(tx, "add_rows");
  if (tb.rank() != 1 || tb.dim(0) != tx.cols())
    throw ShapeError("add_rows: bias " + shape_str(tb.shape) +
                     " does not match columns of " + shape_str(tx.shape));
  Node n;
  n.op = Op::kAddRows;
  n.a = x.id;
  n.b = b.id;
  n.value = tx;
  const int64_t m = tx.rows(), q = tx.cols();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < q; ++j) n.value.at(i, j) += tb.at(j);
  return push(std::move(n));
}

Var Graph::concat_cols(Var a, Var b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  require_rank2(ta, "concat_cols");
  require_rank2(tb, "concat_cols");
  if (ta.rows() != tb.rows())
    throw ShapeError("concat_cols: row counts disagree, " + shape_str(ta.shape) +
                     " vs " + shape_str(tb.shape));
  const int64_t m = ta.rows(), p = ta.cols(), q = tb.cols();
  Node n;
  n.op = Op::kConcatCols;
  n.a = a.id;
  n.b = b.id;
  n.i0 = p;
  n.value = Tensor{Shape{m, p + q}};
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < p; ++j) n.value.at(i, j) = ta.at(i, j);
    for (int64_t j = 0; j < q; ++j) n.value.at(i, p + j) = tb.at(i, j);
  }
  return push(std::move(n));
}

Var Graph::concat_rows(Var a, Var b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  require_rank2(ta, "concat_rows");
  require_rank2(tb, "concat_rows");
  if (ta.cols() != tb.cols())
    throw ShapeError("concat_rows: column counts disagree, " + shape_str(ta.shape) +
                     " vs " + shape_str(tb.shape));
  const int64_t p = ta.rows(), q = tb.rows(), c = ta.cols();
  Node n;
  n.op = Op::kConcatRows;
  n.a = a.id;
  n.b = b.id;
  n.i0 = p;
  n.value = Tensor{Shape{p + q, c}};
  for (int64_t i = 0; i < p; ++i)
    for (int64_t j = 0; j < c; ++j) n.value.at(i, j) = ta.at(i, j);
  for (int64_t i = 0; i < q; ++i)
    for (int64_t j = 0; j < c; ++j) n.value.at(p + i, j) = tb.at(i, j);
  return push(std::move(n));
}

Var Graph::slice_cols(Var a, int64_t c0, int64_t c1) {
  const Tensor& ta = node(a).value;
  require_rank2(ta, "slice_cols");
  if (c0 < 0 || c1 > ta.cols() || c0 >= c1)
    throw ShapeError("slice_cols: range [" + std::to_string(c0) + ", " +
                     std::to_string(c1) + ") invalid for " + shape_str(ta.shape));
  Node n;
  n.op = Op::kSliceCols;
  n.a = a.id;
  n.i0 = c0;
  n.i1 = c1;
  n.value = Tensor{Shape{ta.rows(), c1 - c0}};
  for (int64_t i = 0; i < ta.rows(); ++i)
    for (int64_t j = c0; j < c1; ++j) n.value.at(i, j - c0) = ta.at(i, j);
  return push(std::move(n));
}

Var Graph::slice_rows(Var a, int64_t r0, int64_t r1) {
  const Tensor& ta = node(a).value;
  require_rank2(ta, "slice_rows");
  if (r0 < 0 || r1 > ta.rows() || r0 >= r1)
    throw ShapeError("slice_rows: range [" + std::to_string(r0) + ", " +
                     std::to_string(r1) + ") invalid for " + shape_str(ta.shape));
  Node n;
  n.op = Op::kSliceRows;
  n.a = a.id;
  n.i0 = r0;
  n.i1 = r1;
  n.value = Tensor{Shape{r1 - r0, ta.cols()}};
  for (int64_t i = r0; i < r1; ++i)
    for (int64_t j = 0; j < ta.cols(); ++j) n.value.at(i - r0, j) = ta.at(i, j);
  return push(std::move(n));
}

Var Graph::gather_rows(Var a, std::vector<int64_t> rows) {
  const Tensor& ta = node(a).value;
  require_rank2(ta, "gather_rows");
  for (int64_t r : rows)
    if (r < 0 || r >= ta.rows())
      throw ShapeError("gather_rows: row " + std::to_string(r) +
                       " out of range for " + shape_str(ta.shape));
  Node n;
  n.op = Op::kGatherRows;
  n.a = a.id;
  n.rows = std::move(rows);
  n.value = Tensor{Shape{static_cast<int64_t>(n.rows.size()), ta.cols()}};
  for (size_t i = 0; i < n.rows.size(); ++i)
    for (int64_t j = 0; j < ta.cols(); ++j)
      n.value.at(static_cast<int64_t>(i), j) = ta.at(n.rows[i], j);
  return push(std::move(n));
}

Var Graph::reshape(Var a, Shape s) {
  const Tensor& ta = node(a).value;
  if (shape_numel(s) != ta.numel())
    throw ShapeError("reshape: cannot view " + shape_str(ta.shape) + " as " +
                     shape_str(s));
  Node n;
  n.op = Op::kReshape;
  n.a = a.id;
  n.value = ta;
  n.value.shape = std::move(s);
  return push(std::move(n));
}

Var Graph::sum_all(Var a) {
  Node n;
  n.op = Op::kSumAll;
  n.a = a.id;
  double s = 0.0;
  for (double v : node(a).value.data) s += v;
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Var Graph::mean_all(Var a) {
  const Tensor& ta = node(a).value;
  if (ta.numel() == 0) throw ShapeError("mean_all: empty tensor");
  Node n;
  n.op = Op::kMeanAll;
  n.a = a.id;
  double s = 0.0;
  for (double v : ta.data) s += v;
  n.value = Tensor::scalar(s / static_cast<double>(ta.numel()));
  return push(std::move(n));
}

Var Graph::row_sums(Var a) {
  const Tensor& ta = node(a).value;
  require_rank2(ta, "row_sums");
  Node n;
  n.op = Op::kRowSums;
  n.a = a.id;
  n.value = Tensor{Shape{ta.rows(), 1}};
  for (int64_t i = 0; i < ta.rows(); ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < ta.cols(); ++j) s += ta.at(i, j);
    n.value.at(i, 0) = s;
  }
  return push(std::move(n));
}

Var Graph::conv1d(Var x, Var w, Var b, int64_t stride) {
  const Tensor& tx = node(x).value;
  const Tensor& tw = node(w).value;
  const Tensor& tb = node(b).value;
  require_rank2(tx, "conv1d");
  require_rank2(tw, "conv1d");
  if (stride < 1) throw ShapeError("conv1d: stride must be >= 1");
  const int64_t nrows = tx.rows(), len = tx.cols();
  const int64_t ch = tw.rows(), k = tw.cols();
  if (k > len)
    throw ShapeError("conv1d: kernel " + shape_str(tw.shape) +
                     " longer than signal " + shape_str(tx.shape));
  if (tb.rank() != 1 || tb.dim(0) != ch)
    throw ShapeError("conv1d: bias " + shape_str(tb.shape) + " vs " +
                     std::to_string(ch) + " channels");
  const int64_t lout = (len - k) / stride + 1;
  Node n;
  n.op = Op::kConv1d;
  n.a = x.id;
  n.b = w.id;
  n.c = b.id;
  n.i0 = stride;
  n.value = Tensor{Shape{nrows, ch * lout}};
  for (int64_t i = 0; i < nrows; ++i)
    for (int64_t c0 = 0; c0 < ch; ++c0)
      for (int64_t p = 0; p < lout; ++p) {
        double s = tb.at(c0);
        for (int64_t j = 0; j < k; ++j) s += tw.at(c0, j) * tx.at(i, p * stride + j);
        n.value.at(i, c0 * lout + p) = s;
      }
  return push(std::move(n));
}

Var Graph::row_normalize(Var a) {
  const Tensor& ta = node(a).value;
  require_rank2(ta, "row_normalize");
  Node n;
  n.op = Op::kRowNormalize;
  n.a = a.id;
  n.value = ta;
  for (int64_t i = 0; i < ta.rows(); ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < ta.cols(); ++j) s += ta.at(i, j);
    if (s != 0.0) {
      double inv = 1.0 / s;
      for (int64_t j = 0; j < ta.cols(); ++j) n.value.at(i, j) = ta.at(i, j) * inv;
    } else {
      for (int64_t j = 0; j < ta.cols(); ++j) n.value.at(i, j) = 0.0;
    }
  }
  return push(std::move(n));
}

Var Graph::block_matmul(Var p, Var y, int64_t block_rows) {
  const Tensor& tp = node(p).value;
  const Tensor& ty = node(y).value;
  require_rank2(tp, "block_matmul");
  require_rank2(ty, "block_matmul");
  if (tp.rows() != tp.cols() || tp.rows() != block_rows)
    throw ShapeError("block_matmul: matrix " + shape_str(tp.shape) +
                     " must be square of size " + std::to_string(block_rows));
  if (ty.rows() % block_rows != 0)
    throw ShapeError("block_matmul: rows of " + shape_str(ty.shape) +
                     " not a multiple of " + std::to_string(block_rows));
  const int64_t nb = ty.rows() / block_rows, q = ty.cols(), nn = block_rows;
  Node n;
  n.op = Op::kBlockMatmul;
  n.a = p.id;
  n.b = y.id;
  n.i0 = block_rows;
  n.value = Tensor{Shape{ty.rows(), q}};
  const double* pp = tp.data.data();
  const double* py = ty.data.data();
  double* po = n.value.data.data();
  for (int64_t blk = 0; blk < nb; ++blk) {
    const double* yb = py + blk * nn * q;
    double* ob = po + blk * nn * q;
    for (int64_t i = 0; i < nn; ++i)
      for (int64_t t = 0; t < nn; ++t) {
        double pit = pp[i * nn + t];
        if (pit == 0.0) continue;
        const double* yrow = yb + t * q;
        double* orow = ob + i * q;
        for (int64_t j = 0; j < q; ++j) orow[j] += pit * yrow[j];
      }
  }
  return push(std::move(n));
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

bool Graph::requires_grad(Var v) const { return node(v).needs_grad; }

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.data.empty()) return Tensor{n.value.shape, 0.0};
  return n.grad;
}

Tensor& Graph::grad_buf(int32_t id, const Shape& shape) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.data.empty()) n.grad = Tensor{shape, 0.0};
  return n.grad;
}

void Graph::backward(Var loss) {
  const Node& ln = node(loss);
  if (ln.value.numel() != 1)
    throw ShapeError("backward: loss must be scalar, got " + shape_str(ln.value.shape));
  if (backward_done_) throw Error("backward: graph already differentiated");
  backward_done_ = true;
  if (!ln.needs_grad) return;  // no parameters feed the loss
  grad_buf(loss.id, ln.value.shape).data[0] = 1.0;
  for (int32_t id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad || n.grad.data.empty()) continue;
    if (fault_factor_ != 1.0 && !fault_tag_.empty() && n.tag == fault_tag_)
      for (double& v : n.grad.data) v *= fault_factor_;
    propagate(id);
  }
  if (check_finite) {
    for (const Node& n : nodes_)
      for (double v : n.grad.data)
        if (!std::isfinite(v))
          throw NonFiniteError(op_name(n.op),
                               "gradient" + (n.tag.empty() ? std::string()
                                                           : ", tag '" + n.tag + "'"));
  }
}

void Graph::propagate(int32_t id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  const Tensor& g = n.grad;
  auto wants = [&](int32_t src) {
    return src >= 0 && nodes_[static_cast<size_t>(src)].needs_grad;
  };
  auto val = [&](int32_t src) -> const Tensor& {
    return nodes_[static_cast<size_t>(src)].value;
  };

  switch (n.op) {
    case Op::kInput:
    case Op::kParam:
      break;

    case Op::kAdd: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.numel(); ++i) da.at(i) += g.at(i);
      }
      if (wants(n.b)) {
        Tensor& db = grad_buf(n.b, val(n.b).shape);
        for (int64_t i = 0; i < g.numel(); ++i) db.at(i) += g.at(i);
      }
      break;
    }
    case Op::kSub: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.numel(); ++i) da.at(i) += g.at(i);
      }
      if (wants(n.b)) {
        Tensor& db = grad_buf(n.b, val(n.b).shape);
        for (int64_t i = 0; i < g.numel(); ++i) db.at(i) -= g.at(i);
      }
      break;
    }
    case Op::kMul: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        const Tensor& vb = val(n.b);
        for (int64_t i = 0; i < g.numel(); ++i) da.at(i) += g.at(i) * vb.at(i);
      }
      if (wants(n.b)) {
        Tensor& db = grad_buf(n.b, val(n.b).shape);
        const Tensor& va = val(n.a);
        for (int64_t i = 0; i < g.numel(); ++i) db.at(i) += g.at(i) * va.at(i);
      }
      break;
    }
    case Op::kDiv: {
      const Tensor& vb = val(n.b);
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.numel(); ++i) da.at(i) += g.at(i) / vb.at(i);
      }
      if (wants(n.b)) {
        Tensor& db = grad_buf(n.b, vb.shape);
        for (int64_t i = 0; i < g.numel(); ++i)
          db.at(i) -= g.at(i) * n.value.at(i) / vb.at(i);
      }
      break;
    }
    case Op::kAddScalar: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.numel(); ++i) da.at(i) += g.at(i);
      }
      break;
    }
    case Op::kMulScalar: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.numel(); ++i) da.at(i) += g.at(i) * n.x0;
      }
      break;
    }
    case Op::kSigmoid: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.numel(); ++i) {
          double s = n.value.at(i);
          da.at(i) += g.at(i) * s * (1.0 - s);
        }
      }
      break;
    }
    case Op::kTanh: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.numel(); ++i) {
          double t = n.value.at(i);
          da.at(i) += g.at(i) * (1.0 - t * t);
        }
      }
      break;
    }
    case Op::kRelu: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        const Tensor& va = val(n.a);
        for (int64_t i = 0; i < g.numel(); ++i)
          if (va.at(i) > 0.0) da.at(i) += g.at(i);
      }
      break;
    }
    case Op::kLog: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        const Tensor& va = val(n.a);
        for (int64_t i = 0; i < g.numel(); ++i) da.at(i) += g.at(i) / va.at(i);
      }
      break;
    }
    case Op::kExp: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.numel(); ++i) da.at(i) += g.at(i) * n.value.at(i);
      }
      break;
    }
    case Op::kAbs: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        const Tensor& va = val(n.a);
        for (int64_t i = 0; i < g.numel(); ++i) {
          double x = va.at(i);
          double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
          da.at(i) += g.at(i) * s;
        }
      }
      break;
    }
    case Op::kClamp: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        const Tensor& va = val(n.a);
        for (int64_t i = 0; i < g.numel(); ++i)
          if (va.at(i) >= n.x0 && va.at(i) <= n.x1) da.at(i) += g.at(i);
      }
      break;
    }
    case Op::kMatmul: {
      const Tensor& va = val(n.a);
      const Tensor& vb = val(n.b);
      const int64_t m = va.rows(), k = va.cols(), q = vb.cols();
      if (wants(n.a)) {  // da += g * b^T
        Tensor& da = grad_buf(n.a, va.shape);
        const double* pg = g.data.data();
        const double* pb = vb.data.data();
        double* pd = da.data.data();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t t = 0; t < k; ++t) {
            double s = 0.0;
            const double* grow = pg + i * q;
            const double* brow = pb + t * q;
            for (int64_t j = 0; j < q; ++j) s += grow[j] * brow[j];
            pd[i * k + t] += s;
          }
      }
      if (wants(n.b)) {  // db += a^T * g
        Tensor& db = grad_buf(n.b, vb.shape);
        const double* pg = g.data.data();
        const double* pa = va.data.data();
        double* pd = db.data.data();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t t = 0; t < k; ++t) {
            double ait = pa[i * k + t];
            if (ait == 0.0) continue;
            const double* grow = pg + i * q;
            double* drow = pd + t * q;
            for (int64_t j = 0; j < q; ++j) drow[j] += ait * grow[j];
          }
      }
      break;
    }
    case Op::kTranspose: {
      if (wants(n.a)) {
        const Tensor& va = val(n.a);
        Tensor& da = grad_buf(n.a, va.shape);
        for (int64_t i = 0; i < va.rows(); ++i)
          for (int64_t j = 0; j < va.cols(); ++j) da.at(i, j) += g.at(j, i);
      }
      break;
    }
    case Op::kAddRows: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.numel(); ++i) da.at(i) += g.at(i);
      }
      if (wants(n.b)) {
        Tensor& db = grad_buf(n.b, val(n.b).shape);
        for (int64_t i = 0; i < g.rows(); ++i)
          for (int64_t j = 0; j < g.cols(); ++j) db.at(j) += g.at(i, j);
      }
      break;
    }
    case Op::kConcatCols: {
      const int64_t p = n.i0;
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.rows(); ++i)
          for (int64_t j = 0; j < p; ++j) da.at(i, j) += g.at(i, j);
      }
      if (wants(n.b)) {
        Tensor& db = grad_buf(n.b, val(n.b).shape);
        for (int64_t i = 0; i < g.rows(); ++i)
          for (int64_t j = p; j < g.cols(); ++j) db.at(i, j - p) += g.at(i, j);
      }
      break;
    }
    case Op::kConcatRows: {
      const int64_t p = n.i0;
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < p; ++i)
          for (int64_t j = 0; j < g.cols(); ++j) da.at(i, j) += g.at(i, j);
      }
      if (wants(n.b)) {
        Tensor& db = grad_buf(n.b, val(n.b).shape);
        for (int64_t i = p; i < g.rows(); ++i)
          for (int64_t j = 0; j < g.cols(); ++j) db.at(i - p, j) += g.at(i, j);
      }
      break;
    }
    case Op::kSliceCols: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.rows(); ++i)
          for (int64_t j = 0; j < g.cols(); ++j) da.at(i, n.i0 + j) += g.at(i, j);
      }
      break;
    }
    case Op::kSliceRows: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.rows(); ++i)
          for (int64_t j = 0; j < g.cols(); ++j) da.at(n.i0 + i, j) += g.at(i, j);
      }
      break;
    }
    case Op::kGatherRows: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (size_t r = 0; r < n.rows.size(); ++r)
          for (int64_t j = 0; j < g.cols(); ++j)
            da.at(n.rows[r], j) += g.at(static_cast<int64_t>(r), j);
      }
      break;
    }
    case Op::kReshape: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        for (int64_t i = 0; i < g.numel(); ++i) da.at(i) += g.at(i);
      }
      break;
    }
    case Op::kSumAll: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        double gs = g.at(0);
        for (double& v : da.data) v += gs;
      }
      break;
    }
    case Op::kMeanAll: {
      if (wants(n.a)) {
        Tensor& da = grad_buf(n.a, val(n.a).shape);
        double gs = g.at(0) / static_cast<double>(da.numel());
        for (double& v : da.data) v += gs;
      }
      break;
    }
    case Op::kRowSums: {
      if (wants(n.a)) {
        const Tensor& va = val(n.a);
        Tensor& da = grad_buf(n.a, va.shape);
        for (int64_t i = 0; i < va.rows(); ++i) {
          double gs = g.at(i, 0);
          for (int64_t j = 0; j < va.cols(); ++j) da.at(i, j) += gs;
        }
      }
      break;
    }
    case Op::kConv1d: {
      const Tensor& vx = val(n.a);
      const Tensor& vw = val(n.b);
      const int64_t stride = n.i0;
      const int64_t nrows = vx.rows(), ch = vw.rows(), k = vw.cols();
      const int64_t lout = (vx.cols() - k) / stride + 1;
      if (wants(n.a)) {
        Tensor& dx = grad_buf(n.a, vx.shape);
        for (int64_t i = 0; i < nrows; ++i)
          for (int64_t c0 = 0; c0 < ch; ++c0)
            for (int64_t p = 0; p < lout; ++p) {
              double gv = g.at(i, c0 * lout + p);
              if (gv == 0.0) continue;
              for (int64_t j = 0; j < k; ++j)
                dx.at(i, p * stride + j) += gv * vw.at(c0, j);
            }
      }
      if (wants(n.b)) {
        Tensor& dw = grad_buf(n.b, vw.shape);
        for (int64_t i = 0; i < nrows; ++i)
          for (int64_t c0 = 0; c0 < ch; ++c0)
            for (int64_t p = 0; p < lout; ++p) {
              double gv = g.at(i, c0 * lout + p);
              if (gv == 0.0) continue;
              for (int64_t j = 0; j < k; ++j)
                dw.at(c0, j) += gv * vx.at(i, p * stride + j);
            }
      }
      if (wants(n.c)) {
        Tensor& db = grad_buf(n.c, val(n.c).shape);
        for (int64_t i = 0; i < nrows; ++i)
          for (int64_t c0 = 0; c0 < ch; ++c0)
            for (int64_t p = 0; p < lout; ++p) db.at(c0) += g.at(i, c0 * lout + p);
      }
      break;
    }
    case Op::kRowNormalize: {
      if (wants(n.a)) {
        const Tensor& va = val(n.a);
        Tensor& da = grad_buf(n.a, va.shape);
        for (int64_t i = 0; i < va.rows(); ++i) {
          double s = 0.0;
          for (int64_t j = 0; j < va.cols(); ++j) s += va.at(i, j);
          if (s == 0.0) continue;
          double dot = 0.0;
          for (int64_t j = 0; j < va.cols(); ++j) dot += g.at(i, j) * n.value.at(i, j);
          double inv = 1.0 / s;
          for (int64_t j = 0; j < va.cols(); ++j)
            da.at(i, j) += (g.at(i, j) - dot) * inv;
        }
      }
      break;
    }
    case Op::kBlockMatmul: {
      const Tensor& vp = val(n.a);
      const Tensor& vy = val(n.b);
      const int64_t nn = n.i0, q = vy.cols(), nb = vy.rows() / nn;
      if (wants(n.a)) {  // dP += sum_b g_b * Y_b^T
        Tensor& dp = grad_buf(n.a, vp.shape);
        for (int64_t blk = 0; blk < nb; ++blk) {
          const double* gb = g.data.data() + blk * nn * q;
          const double* yb = vy.data.data() + blk * nn * q;
          for (int64_t i = 0; i < nn; ++i)
            for (int64_t t = 0; t < nn; ++t) {
              double s = 0.0;
              const double* grow = gb + i * q;
              const double* yrow = yb + t * q;
              for (int64_t j = 0; j < q; ++j) s += grow[j] * yrow[j];
              dp.at(i, t) += s;
            }
        }
      }
      if (wants(n.b)) {  // dY_b += P^T * g_b
        Tensor& dy = grad_buf(n.b, vy.shape);
        const double* pp = vp.data.data();
        for (int64_t blk = 0; blk < nb; ++blk) {
          const double* gb = g.data.data() + blk * nn * q;
          double* db = dy.data.data() + blk * nn * q;
          for (int64_t i = 0; i < nn; ++i)
            for (int64_t t = 0; t < nn; ++t) {
              double pit = pp[i * nn + t];
              if (pit == 0.0) continue;
              const double* grow = gb + i * q;
              double* drow = db + t * q;
              for (int64_t j = 0; j < q; ++j) drow[j] += pit * grow[j];
            }
        }
      }
      break;
    }
  }
}

}  // namespace gts::ad
