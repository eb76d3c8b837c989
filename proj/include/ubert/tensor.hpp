#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ubert {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major float64 array.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  // Rank-2 view; rank-1 tensors read as a single row.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  void fill(double v);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Trainable tensor with a gradient buffer of the same shape. Gradients
// accumulate across backward passes until zero_grad().
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad.fill(0.0); }
};

class Tape;

// Handle to a node on a tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

// Records primitive ops in execution order and replays them in reverse to
// compute gradients. One tape per forward pass; not thread-safe.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a parameter; backward() adds into parameter.grad.
  Var param(Parameter& parameter);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() loss with respect to v (zeros if v did
  // not influence the loss).
  Tensor grad(Var v) const;
  const Shape& shape(Var v) const { return value(v).shape(); }

  Var matmul(Var a, Var b);     // [m,k] x [k,n]
  Var matmul_nt(Var a, Var b);  // [m,k] x [n,k]^T
  Var add(Var a, Var b);
  Var add_row(Var x, Var bias);  // x[m,n] + bias[n] on every row
  Var mul(Var a, Var b);         // elementwise
  Var scale(Var x, double factor);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var softmax_rows(Var x);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  Var slice_cols(Var x, std::size_t begin, std::size_t end);
  Var concat_cols(std::span<const Var> parts);
  Var append_ones(Var x);  // [m,n] -> [m,n+1], last column = 1
  Var gather_rows(Var table, std::span<const std::size_t> ids);
  // score[i][j] = sum_{a,b} hs[i][a] * u[a][0][b] * he[j][b]
  Var biaffine(Var hs, Var u, Var he);
  // All inputs flattened row-major and concatenated into one vector.
  Var flatten_concat(std::span<const Var> parts);
  Var sum(Var x);
  // Summed binary cross-entropy with logits against 0/1 targets of equal
  // size; positive cells are weighted by pos_weight.
  Var bce_with_logits(Var logits, const Tensor& targets, double pos_weight = 1.0);

  // Populates gradients of `loss` (which must hold exactly one element) for
  // every node and accumulates into bound parameters. May run once per tape.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    Parameter* param = nullptr;
    std::function<void(Tape&, std::size_t self)> backprop;
  };

  Var push(Tensor value, std::function<void(Tape&, std::size_t)> backprop);
  Node& node(Var v);
  const Node& node(Var v) const;
  Tensor& grad_buffer(std::size_t id);
  const Tensor& val(std::size_t id) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Reference contraction with explicit loops; used to cross-check the
// kernel-backed path.
Tensor biaffine_naive(const Tensor& hs, const Tensor& u, const Tensor& he);
Tensor matmul_naive(const Tensor& a, const Tensor& b);

}  // namespace ubert
