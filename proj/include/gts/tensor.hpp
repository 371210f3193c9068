#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gts {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& op, const std::string& detail)
      : Error("non-finite value in op '" + op + "'" +
              (detail.empty() ? "" : " (" + detail + ")")),
        op_name(op) {}
  std::string op_name;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid or missing configuration field; `field` is the dotted path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field_path, const std::string& what)
      : Error("config field '" + field_path + "': " + what), field(field_path) {}
  std::string field;
};

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

// Dense row-major tensor of doubles. All numerics in the project are 64-bit.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0)
      : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), fill) {}

  static Tensor scalar(double v) {
    Tensor t{Shape{1}};
    t.data[0] = v;
    return t;
  }
  static Tensor from(Shape s, std::vector<double> d);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t rank() const { return static_cast<int64_t>(shape.size()); }
  int64_t dim(int64_t i) const { return shape[static_cast<size_t>(i)]; }
  int64_t rows() const { return shape.at(0); }
  int64_t cols() const { return shape.at(1); }

  double& at(int64_t i) { return data[static_cast<size_t>(i)]; }
  double at(int64_t i) const { return data[static_cast<size_t>(i)]; }
  double& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
  double at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }
  double& at(int64_t i, int64_t j, int64_t k) {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  double at(int64_t i, int64_t j, int64_t k) const {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;

  Tensor transposed() const;  // rank-2 only
};

Tensor eye(int64_t n);

}  // namespace gts
