#include "gts/tensor.hpp"

#include <cmath>

namespace gts {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(s[i]);
  }
  return out + "]";
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

Tensor Tensor::from(Shape s, std::vector<double> d) {
  if (shape_numel(s) != static_cast<int64_t>(d.size()))
    throw ShapeError("element count " + std::to_string(d.size()) +
                     " does not match shape " + shape_str(s));
  Tensor t;
  t.shape = std::move(s);
  t.data = std::move(d);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::transposed() const {
  if (rank() != 2) throw ShapeError("transpose expects rank-2, got " + shape_str(shape));
  Tensor out{Shape{shape[1], shape[0]}};
  for (int64_t i = 0; i < shape[0]; ++i)
    for (int64_t j = 0; j < shape[1]; ++j) out.at(j, i) = at(i, j);
  return out;
}

Tensor eye(int64_t n) {
  Tensor t{Shape{n, n}};
  for (int64_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

}  // namespace gts
