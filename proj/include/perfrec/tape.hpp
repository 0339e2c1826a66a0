#pragma once
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "perfrec/matrix.hpp"

namespace perfrec {

// Reverse-mode autodiff over dense matrices. Values are computed eagerly when
// an op is recorded; backward() accumulates adjoints in reverse order.
// A Tape is single-threaded; distinct tapes may run on distinct threads.

using NodeId = std::size_t;

enum class Op : std::uint8_t {
  leaf,
  matmul,
  add,
  sub,
  elementwise_mul,  // also known as hadamard
  scalar_mul,
  transpose_op,
  row_sum,
  total_sum,
  sigmoid_temp,
  row_softmax,
  row_l2_normalize,
  absolute_value,
  exp2_op,
  log2_of_1_plus,
  broadcast_row,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::elementwise_mul: return "elementwise-mul";
    case Op::scalar_mul: return "scalar-mul";
    case Op::transpose_op: return "transpose";
    case Op::row_sum: return "row-sum";
    case Op::total_sum: return "total-sum";
    case Op::sigmoid_temp: return "sigmoid-with-temperature";
    case Op::row_softmax: return "row-softmax";
    case Op::row_l2_normalize: return "row-l2-normalize";
    case Op::absolute_value: return "absolute-value";
    case Op::exp2_op: return "exp2";
    case Op::log2_of_1_plus: return "log2-of-1-plus";
    case Op::broadcast_row: return "broadcast-row";
  }
  return "?";
}

// Exponent guard for exp2; scores here stay in [-1,1]*gain so legitimate
// inputs never get close.
constexpr double kExp2ClampExponent = 60.0;

struct TapeNode {
  Op op = Op::leaf;
  NodeId a = 0;
  NodeId b = 0;
  double param = 0.0;  // temperature for sigmoid, factor for scalar_mul
  Matrix value;
};

class Tape {
 public:
  const Matrix& value(NodeId id) const { return nodes_[id].value; }
  const Matrix& grad(NodeId id) const { return grads_[id]; }
  std::size_t num_nodes() const { return nodes_.size(); }

  NodeId leaf(Matrix m) {
    if (!m.all_finite()) throw std::invalid_argument("leaf: non-finite input");
    return push({Op::leaf, 0, 0, 0.0, std::move(m)});
  }

  NodeId add(NodeId a, NodeId b) { return binary_same_shape(Op::add, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary_same_shape(Op::sub, a, b); }
  NodeId elementwise_mul(NodeId a, NodeId b) {
    return binary_same_shape(Op::elementwise_mul, a, b);
  }
  NodeId hadamard(NodeId a, NodeId b) { return elementwise_mul(a, b); }

  NodeId matmul(NodeId a, NodeId b) {
    const Matrix& A = val(a);
    const Matrix& B = val(b);
    if (A.cols != B.rows)
      throw std::invalid_argument(std::string("matmul: shape mismatch ") + A.shape_str() +
                                  " * " + B.shape_str());
    return push({Op::matmul, a, b, 0.0, perfrec::matmul(A, B)});
  }

  NodeId scalar_mul(double c, NodeId a) {
    Matrix out = val(a);
    for (double& v : out.data) v *= c;
    return push({Op::scalar_mul, a, 0, c, std::move(out)});
  }

  NodeId transpose(NodeId a) {
    return push({Op::transpose_op, a, 0, 0.0, perfrec::transpose(val(a))});
  }

  NodeId row_sum(NodeId a) {
    const Matrix& A = val(a);
    Matrix out(A.rows, 1);
    for (std::size_t i = 0; i < A.rows; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < A.cols; ++j) s += A.at(i, j);
      out.at(i, 0) = s;
    }
    return push({Op::row_sum, a, 0, 0.0, std::move(out)});
  }

  NodeId total_sum(NodeId a) {
    const Matrix& A = val(a);
    double s = 0;
    for (double v : A.data) s += v;
    return push({Op::total_sum, a, 0, 0.0, Matrix(1, 1, {s})});
  }

  NodeId sigmoid_temp(NodeId a, double tau) {
    if (tau <= 0) throw std::invalid_argument("sigmoid-with-temperature: tau must be > 0");
    Matrix out = val(a);
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v / tau));
    return push({Op::sigmoid_temp, a, 0, tau, std::move(out)});
  }

  NodeId row_softmax(NodeId a) {
    const Matrix& A = val(a);
    Matrix out(A.rows, A.cols);
    for (std::size_t i = 0; i < A.rows; ++i) {
      double mx = A.at(i, 0);
      for (std::size_t j = 1; j < A.cols; ++j) mx = std::max(mx, A.at(i, j));
      double denom = 0;
      for (std::size_t j = 0; j < A.cols; ++j) {
        double e = std::exp(A.at(i, j) - mx);
        out.at(i, j) = e;
        denom += e;
      }
      for (std::size_t j = 0; j < A.cols; ++j) out.at(i, j) /= denom;
    }
    return push({Op::row_softmax, a, 0, 0.0, std::move(out)});
  }

  NodeId row_l2_normalize(NodeId a) {
    return push({Op::row_l2_normalize, a, 0, 0.0, normalize_rows(val(a))});
  }

  NodeId absolute_value(NodeId a) {
    Matrix out = val(a);
    for (double& v : out.data) v = std::abs(v);
    return push({Op::absolute_value, a, 0, 0.0, std::move(out)});
  }

  NodeId exp2(NodeId a) {
    const Matrix& A = val(a);
    Matrix out(A.rows, A.cols);
    for (std::size_t i = 0; i < A.size(); ++i) {
      if (A.data[i] > kExp2ClampExponent)
        throw std::overflow_error("exp2: exponent " + std::to_string(A.data[i]) +
                                  " exceeds clamp " + std::to_string(kExp2ClampExponent));
      out.data[i] = std::exp2(A.data[i]);
    }
    return push({Op::exp2_op, a, 0, 0.0, std::move(out)});
  }

  NodeId log2_of_1_plus(NodeId a) {
    const Matrix& A = val(a);
    Matrix out(A.rows, A.cols);
    for (std::size_t i = 0; i < A.size(); ++i) out.data[i] = std::log2(1.0 + A.data[i]);
    return push({Op::log2_of_1_plus, a, 0, 0.0, std::move(out)});
  }

  // Replicates a 1xc row to target_rows x c. Only row-broadcast is supported.
  NodeId broadcast_row(NodeId a, std::size_t target_rows) {
    const Matrix& A = val(a);
    if (A.rows != 1)
      throw std::invalid_argument("broadcast-row: input must be 1xc, got " + A.shape_str());
    Matrix out(target_rows, A.cols);
    for (std::size_t i = 0; i < target_rows; ++i)
      for (std::size_t j = 0; j < A.cols; ++j) out.at(i, j) = A.at(0, j);
    return push({Op::broadcast_row, a, 0, static_cast<double>(target_rows), std::move(out)});
  }

  // True when any absolute-value node sits near (but not exactly on) its
  // kink; grad_check flags such points as excluded instead of reporting a
  // spurious mismatch. Inputs at exactly 0 are structural zeros (e.g. the
  // diagonal of a pairwise-difference matrix): they stay 0 under symmetric
  // perturbation, so central differences agree with the subgradient 0 there.
  bool has_abs_kink(double eps = 1e-9) const {
    for (const TapeNode& n : nodes_) {
      if (n.op != Op::absolute_value) continue;
      for (double v : nodes_[n.a].value.data)
        if (v != 0.0 && std::abs(v) < eps) return true;
    }
    return false;
  }

  // Reverse accumulation from a scalar root. Resets all adjoints first.
  void backward(NodeId root) {
    const Matrix& rv = val(root);
    if (rv.rows != 1 || rv.cols != 1)
      throw std::invalid_argument("backward: root must be scalar (1x1), got " + rv.shape_str());
    grads_.assign(nodes_.size(), Matrix());
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      grads_[i] = Matrix(nodes_[i].value.rows, nodes_[i].value.cols);
    grads_[root].at(0, 0) = 1.0;
    for (std::size_t idx = root + 1; idx-- > 0;) {
      const TapeNode& n = nodes_[idx];
      const Matrix& g = grads_[idx];
      bool any = false;
      for (double v : g.data)
        if (v != 0.0) { any = true; break; }
      if (!any || n.op == Op::leaf) continue;
      propagate(idx, n, g);
    }
  }

 private:
  std::vector<TapeNode> nodes_;
  std::vector<Matrix> grads_;

  const Matrix& val(NodeId id) const { return nodes_[id].value; }

  NodeId push(TapeNode n) {
    if (n.op != Op::leaf && !n.value.all_finite())
      throw std::overflow_error(std::string("non-finite output in op ") + op_name(n.op));
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  NodeId binary_same_shape(Op op, NodeId a, NodeId b) {
    const Matrix& A = val(a);
    const Matrix& B = val(b);
    if (!A.same_shape(B))
      throw std::invalid_argument(std::string(op_name(op)) + ": shape mismatch " +
                                  A.shape_str() + " vs " + B.shape_str());
    Matrix out(A.rows, A.cols);
    for (std::size_t i = 0; i < A.size(); ++i) {
      switch (op) {
        case Op::add: out.data[i] = A.data[i] + B.data[i]; break;
        case Op::sub: out.data[i] = A.data[i] - B.data[i]; break;
        default: out.data[i] = A.data[i] * B.data[i]; break;
      }
    }
    return push({op, a, b, 0.0, std::move(out)});
  }

  void acc(NodeId id, const Matrix& g) {
    Matrix& dst = grads_[id];
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += g.data[i];
  }

  void propagate(NodeId idx, const TapeNode& n, const Matrix& g) {
    const Matrix& out = n.value;
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::add:
        acc(n.a, g);
        acc(n.b, g);
        break;
      case Op::sub: {
        acc(n.a, g);
        Matrix neg = g;
        for (double& v : neg.data) v = -v;
        acc(n.b, neg);
        break;
      }
      case Op::elementwise_mul: {
        const Matrix& A = val(n.a);
        const Matrix& B = val(n.b);
        Matrix ga(A.rows, A.cols), gb(B.rows, B.cols);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data[i] = g.data[i] * B.data[i];
          gb.data[i] = g.data[i] * A.data[i];
        }
        acc(n.a, ga);
        acc(n.b, gb);
        break;
      }
      case Op::matmul: {
        acc(n.a, perfrec::matmul(g, perfrec::transpose(val(n.b))));
        acc(n.b, perfrec::matmul(perfrec::transpose(val(n.a)), g));
        break;
      }
      case Op::scalar_mul: {
        Matrix ga = g;
        for (double& v : ga.data) v *= n.param;
        acc(n.a, ga);
        break;
      }
      case Op::transpose_op:
        acc(n.a, perfrec::transpose(g));
        break;
      case Op::row_sum: {
        const Matrix& A = val(n.a);
        Matrix ga(A.rows, A.cols);
        for (std::size_t i = 0; i < A.rows; ++i)
          for (std::size_t j = 0; j < A.cols; ++j) ga.at(i, j) = g.at(i, 0);
        acc(n.a, ga);
        break;
      }
      case Op::total_sum: {
        const Matrix& A = val(n.a);
        Matrix ga(A.rows, A.cols, g.at(0, 0));
        acc(n.a, ga);
        break;
      }
      case Op::sigmoid_temp: {
        Matrix ga(out.rows, out.cols);
        for (std::size_t i = 0; i < out.size(); ++i)
          ga.data[i] = g.data[i] * out.data[i] * (1.0 - out.data[i]) / n.param;
        acc(n.a, ga);
        break;
      }
      case Op::row_softmax: {
        Matrix ga(out.rows, out.cols);
        for (std::size_t i = 0; i < out.rows; ++i) {
          double s = 0;
          for (std::size_t j = 0; j < out.cols; ++j) s += g.at(i, j) * out.at(i, j);
          for (std::size_t j = 0; j < out.cols; ++j)
            ga.at(i, j) = out.at(i, j) * (g.at(i, j) - s);
        }
        acc(n.a, ga);
        break;
      }
      case Op::row_l2_normalize: {
        const Matrix& A = val(n.a);
        Matrix ga(A.rows, A.cols);
        for (std::size_t i = 0; i < A.rows; ++i) {
          double nrm = row_norm(A, i);
          double yd = 0;
          for (std::size_t j = 0; j < A.cols; ++j) yd += out.at(i, j) * g.at(i, j);
          for (std::size_t j = 0; j < A.cols; ++j)
            ga.at(i, j) = (g.at(i, j) - out.at(i, j) * yd) / nrm;
        }
        acc(n.a, ga);
        break;
      }
      case Op::absolute_value: {
        const Matrix& A = val(n.a);
        Matrix ga(A.rows, A.cols);
        for (std::size_t i = 0; i < A.size(); ++i) {
          // subgradient 0 at the kink
          double sign = A.data[i] > 0 ? 1.0 : (A.data[i] < 0 ? -1.0 : 0.0);
          ga.data[i] = g.data[i] * sign;
        }
        acc(n.a, ga);
        break;
      }
      case Op::exp2_op: {
        static const double ln2 = std::log(2.0);
        Matrix ga(out.rows, out.cols);
        for (std::size_t i = 0; i < out.size(); ++i)
          ga.data[i] = g.data[i] * out.data[i] * ln2;
        acc(n.a, ga);
        break;
      }
      case Op::log2_of_1_plus: {
        static const double ln2 = std::log(2.0);
        const Matrix& A = val(n.a);
        Matrix ga(A.rows, A.cols);
        for (std::size_t i = 0; i < A.size(); ++i)
          ga.data[i] = g.data[i] / ((1.0 + A.data[i]) * ln2);
        acc(n.a, ga);
        break;
      }
      case Op::broadcast_row: {
        Matrix ga(1, out.cols);
        for (std::size_t i = 0; i < out.rows; ++i)
          for (std::size_t j = 0; j < out.cols; ++j) ga.at(0, j) += g.at(i, j);
        acc(n.a, ga);
        break;
      }
    }
  }
};

// Elementwise reciprocal of a strictly positive node, composed from in-tape
// primitives: 1/x = 2^(-log2(1 + (x-1))).
inline NodeId reciprocal_positive(Tape& t, NodeId x) {
  const Matrix& v = t.value(x);
  NodeId ones = t.leaf(Matrix::ones(v.rows, v.cols));
  NodeId shifted = t.sub(x, ones);
  NodeId lg = t.log2_of_1_plus(shifted);
  return t.exp2(t.scalar_mul(-1.0, lg));
}

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  bool excluded_point = false;  // set when the point sits on a known kink
};

// Compares backward gradients against central finite differences.
// builder maps (tape, leaf id) to a scalar node.
inline GradCheckReport grad_check(
    const std::function<NodeId(Tape&, NodeId)>& builder, const Matrix& point,
    double step, double tolerance) {
  if (step <= 0) throw std::invalid_argument("grad_check: step must be > 0");
  GradCheckReport rep;

  Tape t;
  NodeId x = t.leaf(point);
  NodeId root = builder(t, x);
  rep.excluded_point = t.has_abs_kink(1e-3);
  t.backward(root);
  Matrix analytic = t.grad(x);

  auto eval = [&](const Matrix& p) {
    Tape tt;
    NodeId xx = tt.leaf(p);
    return tt.value(builder(tt, xx)).at(0, 0);
  };

  for (std::size_t i = 0; i < point.size(); ++i) {
    Matrix hi = point, lo = point;
    hi.data[i] += step;
    lo.data[i] -= step;
    double numeric = (eval(hi) - eval(lo)) / (2.0 * step);
    double a = analytic.data[i];
    double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    rep.max_rel_err = std::max(rep.max_rel_err, std::abs(a - numeric) / denom);
  }
  rep.pass = rep.max_rel_err <= tolerance;
  return rep;
}

}  // namespace perfrec
