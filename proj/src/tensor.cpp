#include "ubert/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ubert/errors.hpp"
#include "ubert/kernels.hpp"

namespace ubert {
namespace {

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw ShapeError(op + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void require_matrix(const std::string& op, const Tensor& t) {
  if (t.rank() != 2) throw ShapeError(op + ": expected a matrix, got " + shape_string(t.shape()));
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != product(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const noexcept {
  if (shape_.empty()) return 1;
  return shape_.size() == 1 ? 1 : shape_[0];
}

std::size_t Tensor::cols() const noexcept {
  if (shape_.empty()) return 1;
  return shape_.size() == 1 ? shape_[0] : data_.size() / std::max<std::size_t>(shape_[0], 1);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor matmul_naive(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul_naive", a.shape(), b.shape());
  Tensor c = Tensor::matrix(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a.at(i, p) * b.at(p, j);
      c.at(i, j) = s;
    }
  return c;
}

Tensor biaffine_naive(const Tensor& hs, const Tensor& u, const Tensor& he) {
  const std::size_t l = hs.rows();
  const std::size_t d = hs.cols();
  Tensor out = Tensor::matrix(l, he.rows());
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < he.rows(); ++j) {
      double s = 0.0;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) s += hs.at(i, a) * u[a * d + b] * he.at(j, b);
      out.at(i, j) = s;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Tape plumbing

Var Tape::push(Tensor value, std::function<void(Tape&, std::size_t)> backprop) {
  if (backward_done_) throw UsageError("tape already replayed; record a new forward pass");
  nodes_.push_back(Node{std::move(value), Tensor{}, nullptr, std::move(backprop)});
  return Var{nodes_.size() - 1};
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw UsageError("variable does not belong to this tape");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw UsageError("variable does not belong to this tape");
  return nodes_[v.id];
}

const Tensor& Tape::val(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.param ? n.param->value : n.value;
}

const Tensor& Tape::value(Var v) const {
  node(v);
  return val(v.id);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != val(id).size() || n.grad.shape() != val(id).shape()) {
    n.grad = Tensor(val(id).shape());
  }
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.shape() == val(v.id).shape()) return n.grad;
  return Tensor(val(v.id).shape());
}

Var Tape::constant(Tensor value) { return push(std::move(value), nullptr); }

Var Tape::param(Parameter& parameter) {
  Var v = push(Tensor{}, nullptr);
  nodes_[v.id].param = &parameter;
  return v;
}

void Tape::backward(Var loss) {
  if (backward_done_) throw UsageError("backward already ran on this tape");
  if (value(loss).size() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " + shape_string(shape(loss)));
  }
  backward_done_ = true;
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0 && val(id).size() != 0) continue;  // did not reach the loss
    if (n.backprop) n.backprop(*this, id);
    if (n.param) {
      const auto& k = kernels::active();
      k.axpy(1.0, n.grad.data(), n.param->grad.data(), n.grad.size());
    }
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_matrix("matmul", A);
  require_matrix("matmul", B);
  if (A.cols() != B.rows()) shape_error("matmul", A.shape(), B.shape());
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor out = Tensor::matrix(m, n);
  kernels::active().gemm_nn(m, k, n, A.data(), B.data(), out.data());
  return push(std::move(out), [a, b, m, k, n](Tape& t, std::size_t self) {
    const auto& ks = kernels::active();
    const Tensor& g = t.nodes_[self].grad;
    ks.gemm_nt(m, n, k, g.data(), t.val(b.id).data(), t.grad_buffer(a.id).data());
    ks.gemm_tn(k, m, n, t.val(a.id).data(), g.data(), t.grad_buffer(b.id).data());
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_matrix("matmul_nt", A);
  require_matrix("matmul_nt", B);
  if (A.cols() != B.cols()) shape_error("matmul_nt", A.shape(), B.shape());
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Tensor out = Tensor::matrix(m, n);
  kernels::active().gemm_nt(m, k, n, A.data(), B.data(), out.data());
  return push(std::move(out), [a, b, m, k, n](Tape& t, std::size_t self) {
    const auto& ks = kernels::active();
    const Tensor& g = t.nodes_[self].grad;
    // dA = G B, dB = G^T A
    ks.gemm_nn(m, n, k, g.data(), t.val(b.id).data(), t.grad_buffer(a.id).data());
    ks.gemm_tn(n, m, k, g.data(), t.val(a.id).data(), t.grad_buffer(b.id).data());
  });
}

Var Tape::biaffine(Var hs, Var u, Var he) {
  const Tensor& S = value(hs);
  const Tensor& U = value(u);
  const Tensor& E = value(he);
  require_matrix("biaffine", S);
  require_matrix("biaffine", E);
  const std::size_t d = S.cols();
  if (U.rank() != 3 || U.shape()[0] != d || U.shape()[1] != 1 || U.shape()[2] != d) {
    shape_error("biaffine", S.shape(), U.shape());
  }
  if (E.cols() != d) shape_error("biaffine", S.shape(), E.shape());
  const std::size_t l = S.rows(), r = E.rows();
  const auto& ks = kernels::active();
  // left = hs U, score = left he^T
  Tensor left = Tensor::matrix(l, d);
  ks.gemm_nn(l, d, d, S.data(), U.data(), left.data());
  Tensor out = Tensor::matrix(l, r);
  ks.gemm_nt(l, d, r, left.data(), E.data(), out.data());
  return push(std::move(out), [hs, u, he, l, r, d, left = std::move(left)](Tape& t, std::size_t self) {
    const auto& ks = kernels::active();
    const Tensor& g = t.nodes_[self].grad;
    Tensor dleft = Tensor::matrix(l, d);
    ks.gemm_nn(l, r, d, g.data(), t.val(he.id).data(), dleft.data());
    ks.gemm_tn(r, l, d, g.data(), left.data(), t.grad_buffer(he.id).data());
    ks.gemm_tn(d, l, d, t.val(hs.id).data(), dleft.data(), t.grad_buffer(u.id).data());
    ks.gemm_nt(l, d, d, dleft.data(), t.val(u.id).data(), t.grad_buffer(hs.id).data());
  });
}

// ---------------------------------------------------------------------------
// Elementwise

Var Tape::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) shape_error("add", A.shape(), B.shape());
  Tensor out = A;
  kernels::active().axpy(1.0, B.data(), out.data(), out.size());
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const auto& ks = kernels::active();
    const Tensor& g = t.nodes_[self].grad;
    ks.axpy(1.0, g.data(), t.grad_buffer(a.id).data(), g.size());
    ks.axpy(1.0, g.data(), t.grad_buffer(b.id).data(), g.size());
  });
}

Var Tape::add_row(Var x, Var bias) {
  const Tensor& X = value(x);
  const Tensor& B = value(bias);
  require_matrix("add_row", X);
  if (B.size() != X.cols()) shape_error("add_row", X.shape(), B.shape());
  Tensor out = X;
  const std::size_t m = X.rows(), n = X.cols();
  for (std::size_t i = 0; i < m; ++i) kernels::active().axpy(1.0, B.data(), out.data() + i * n, n);
  return push(std::move(out), [x, bias, m, n](Tape& t, std::size_t self) {
    const auto& ks = kernels::active();
    const Tensor& g = t.nodes_[self].grad;
    ks.axpy(1.0, g.data(), t.grad_buffer(x.id).data(), g.size());
    Tensor& gb = t.grad_buffer(bias.id);
    for (std::size_t i = 0; i < m; ++i) ks.axpy(1.0, g.data() + i * n, gb.data(), n);
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) shape_error("mul", A.shape(), B.shape());
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& av = t.val(a.id);
    const Tensor& bv = t.val(b.id);
    Tensor& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    Tensor& gb = t.grad_buffer(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

Var Tape::scale(Var x, double factor) {
  Tensor out = value(x);
  for (double& v : out.values()) v *= factor;
  return push(std::move(out), [x, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.nodes_[self].grad;
    kernels::active().axpy(factor, g.data(), t.grad_buffer(x.id).data(), g.size());
  });
}

Var Tape::relu(Var x) {
  Tensor out = value(x);
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), [x](Tape& t, std::size_t self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& xv = t.val(x.id);
    Tensor& gx = t.grad_buffer(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += g[i];
    }
  });
}

Var Tape::sigmoid(Var x) {
  Tensor out = value(x);
  for (double& v : out.values()) {
    v = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return push(std::move(out), [x](Tape& t, std::size_t self) {
    const Node& me = t.nodes_[self];
    Tensor& gx = t.grad_buffer(x.id);
    for (std::size_t i = 0; i < me.grad.size(); ++i) {
      const double s = me.value[i];
      gx[i] += me.grad[i] * s * (1.0 - s);
    }
  });
}

Var Tape::softmax_rows(Var x) {
  const Tensor& X = value(x);
  require_matrix("softmax_rows", X);
  Tensor out = X;
  const std::size_t m = X.rows(), n = X.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (row[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) row[j] /= z;
  }
  return push(std::move(out), [x, m, n](Tape& t, std::size_t self) {
    const Node& me = t.nodes_[self];
    Tensor& gx = t.grad_buffer(x.id);
    const auto& ks = kernels::active();
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = me.value.data() + i * n;
      const double* g = me.grad.data() + i * n;
      const double inner = ks.dot(y, g, n);
      double* out_row = gx.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) out_row[j] += y[j] * (g[j] - inner);
    }
  });
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = value(x);
  require_matrix("layer_norm", X);
  const std::size_t m = X.rows(), n = X.cols();
  if (value(gain).size() != n) shape_error("layer_norm", X.shape(), value(gain).shape());
  if (value(bias).size() != n) shape_error("layer_norm", X.shape(), value(bias).shape());
  const Tensor& G = value(gain);
  const Tensor& B = value(bias);
  Tensor xhat = Tensor::matrix(m, n);
  std::vector<double> inv_std(m);
  Tensor out = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = X.data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat.at(i, j) = (row[j] - mean) * inv_std[i];
      out.at(i, j) = xhat.at(i, j) * G[j] + B[j];
    }
  }
  return push(std::move(out), [x, gain, bias, m, n, xhat = std::move(xhat),
                               inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& G = t.val(gain.id);
    Tensor& gx = t.grad_buffer(x.id);
    Tensor& gg = t.grad_buffer(gain.id);
    Tensor& gb = t.grad_buffer(bias.id);
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> dxhat(n);
    for (std::size_t i = 0; i < m; ++i) {
      double sum_d = 0.0, sum_dx = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double gij = g.at(i, j);
        gg[j] += gij * xhat.at(i, j);
        gb[j] += gij;
        dxhat[j] = gij * G[j];
        sum_d += dxhat[j];
        sum_dx += dxhat[j] * xhat.at(i, j);
      }
      for (std::size_t j = 0; j < n; ++j) {
        gx.at(i, j) += inv_std[i] * (dxhat[j] - inv_n * sum_d - xhat.at(i, j) * inv_n * sum_dx);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reshaping

Var Tape::slice_cols(Var x, std::size_t begin, std::size_t end) {
  const Tensor& X = value(x);
  require_matrix("slice_cols", X);
  if (begin > end || end > X.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + shape_string(X.shape()));
  }
  const std::size_t m = X.rows(), n = X.cols(), w = end - begin;
  Tensor out = Tensor::matrix(m, w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(X.data() + i * n + begin, w, out.data() + i * w);
  return push(std::move(out), [x, begin, m, n, w](Tape& t, std::size_t self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gx = t.grad_buffer(x.id);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) gx[i * n + begin + j] += g[i * w + j];
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = value(parts[0]).rows();
  std::size_t total = 0;
  for (Var p : parts) {
    require_matrix("concat_cols", value(p));
    if (value(p).rows() != m) shape_error("concat_cols", value(parts[0]).shape(), value(p).shape());
    total += value(p).cols();
  }
  Tensor out = Tensor::matrix(m, total);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& P = value(p);
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(P.data() + i * P.cols(), P.cols(), out.data() + i * total + off);
    off += P.cols();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(std::move(out), [ids = std::move(ids), m, total](Tape& t, std::size_t self) {
    const Tensor& g = t.nodes_[self].grad;
    std::size_t off = 0;
    for (Var p : ids) {
      Tensor& gp = t.grad_buffer(p.id);
      const std::size_t w = gp.cols();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * total + off + j];
      off += w;
    }
  });
}

Var Tape::append_ones(Var x) {
  const Tensor& X = value(x);
  require_matrix("append_ones", X);
  const std::size_t m = X.rows(), n = X.cols();
  Tensor out = Tensor::matrix(m, n + 1, 1.0);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(X.data() + i * n, n, out.data() + i * (n + 1));
  return push(std::move(out), [x, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gx = t.grad_buffer(x.id);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[i * (n + 1) + j];
  });
}

Var Tape::gather_rows(Var table, std::span<const std::size_t> ids) {
  const Tensor& T = value(table);
  require_matrix("gather_rows", T);
  const std::size_t n = T.cols();
  Tensor out = Tensor::matrix(ids.size(), n);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= T.rows()) {
      throw ValidationError("row id " + std::to_string(ids[i]) + " outside table of " +
                            std::to_string(T.rows()) + " rows");
    }
    std::copy_n(T.data() + ids[i] * n, n, out.data() + i * n);
  }
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return push(std::move(out), [table, n, rows = std::move(rows)](Tape& t, std::size_t self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gt = t.grad_buffer(table.id);
    for (std::size_t i = 0; i < rows.size(); ++i)
      kernels::active().axpy(1.0, g.data() + i * n, gt.data() + rows[i] * n, n);
  });
}

Var Tape::flatten_concat(std::span<const Var> parts) {
  std::size_t total = 0;
  for (Var p : parts) total += value(p).size();
  Tensor out({total});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& P = value(p);
    std::copy_n(P.data(), P.size(), out.data() + off);
    off += P.size();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(std::move(out), [ids = std::move(ids)](Tape& t, std::size_t self) {
    const Tensor& g = t.nodes_[self].grad;
    std::size_t off = 0;
    for (Var p : ids) {
      Tensor& gp = t.grad_buffer(p.id);
      kernels::active().axpy(1.0, g.data() + off, gp.data(), gp.size());
      off += gp.size();
    }
  });
}

Var Tape::sum(Var x) {
  const Tensor& X = value(x);
  double s = 0.0;
  for (double v : X.values()) s += v;
  return push(Tensor({1}, std::vector<double>{s}), [x](Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad[0];
    for (double& v : t.grad_buffer(x.id).values()) v += g;
  });
}

Var Tape::bce_with_logits(Var logits, const Tensor& targets, double pos_weight) {
  const Tensor& X = value(logits);
  if (X.size() != targets.size()) shape_error("bce_with_logits", X.shape(), targets.shape());
  double loss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double y = targets[i];
    // -[w y log s(x) + (1-y) log(1-s(x))] = w y softplus(-x) + (1-y) softplus(x)
    loss += pos_weight * y * softplus(-X[i]) + (1.0 - y) * softplus(X[i]);
  }
  return push(Tensor({1}, std::vector<double>{loss}),
              [logits, targets, pos_weight](Tape& t, std::size_t self) {
                const double g = t.nodes_[self].grad[0];
                const Tensor& xv = t.val(logits.id);
                Tensor& gx = t.grad_buffer(logits.id);
                for (std::size_t i = 0; i < xv.size(); ++i) {
                  const double y = targets[i];
                  const double s = xv[i] >= 0 ? 1.0 / (1.0 + std::exp(-xv[i]))
                                              : std::exp(xv[i]) / (1.0 + std::exp(xv[i]));
                  gx[i] += g * (-pos_weight * y * (1.0 - s) + (1.0 - y) * s);
                }
              });
}

}  // namespace ubert
