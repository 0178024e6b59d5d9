#include "stlctl/tape.hpp"

#include <algorithm>
#include <cmath>

namespace stlctl::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Const: return "const";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Affine: return "affine";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Relu: return "relu";
    case Op::MatVec: return "matvec";
    case Op::ReduceSum: return "reduce_sum";
    case Op::Index: return "index";
    case Op::Slice: return "slice";
    case Op::Stack: return "stack";
    case Op::Concat: return "concat";
    case Op::SoftMin: return "softmin";
    case Op::SoftMax: return "softmax";
    case Op::HardMin: return "hardmin";
    case Op::HardMax: return "hardmax";
    case Op::SoftmaxVec: return "softmax_vec";
  }
  return "?";
}

void Tape::shape_fail(const Node& n, int id, const std::string& detail) const {
  std::string msg = "node " + std::to_string(id) + " (" + op_name(n.op) + "): " + detail;
  if (n.a >= 0) msg += "; input a=" + std::to_string(n.a) + " shape " + nodes_[static_cast<std::size_t>(n.a)].val.shape_str();
  if (n.b >= 0) msg += "; input b=" + std::to_string(n.b) + " shape " + nodes_[static_cast<std::size_t>(n.b)].val.shape_str();
  throw ShapeError(msg);
}

int Tape::push(Node n) {
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(n));
  eval(nodes_.back());
  return id;
}

int Tape::leaf(Tensor v) {
  Node n;
  n.op = Op::Leaf;
  n.val = std::move(v);
  return push(std::move(n));
}

int Tape::constant(Tensor v) {
  Node n;
  n.op = Op::Const;
  n.val = std::move(v);
  return push(std::move(n));
}

int Tape::unary(Op op, int a) {
  Node n;
  n.op = op;
  n.a = a;
  return push(std::move(n));
}

int Tape::binary(Op op, int a, int b) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}

int Tape::affine(int a, double scale, double shift) {
  Node n;
  n.op = Op::Affine;
  n.a = a;
  n.c0 = scale;
  n.c1 = shift;
  return push(std::move(n));
}

int Tape::index(int a, int i) {
  Node n;
  n.op = Op::Index;
  n.a = a;
  n.idx = i;
  return push(std::move(n));
}

int Tape::slice(int a, int start, int len) {
  Node n;
  n.op = Op::Slice;
  n.a = a;
  n.idx = start;
  n.len = len;
  return push(std::move(n));
}

int Tape::stack(std::span<const int> parts) {
  Node n;
  n.op = Op::Stack;
  n.args.assign(parts.begin(), parts.end());
  return push(std::move(n));
}

int Tape::softmin(int a, double beta) {
  if (!(beta > 0.0)) throw Error("softmin: temperature must be positive, got " + std::to_string(beta));
  Node n;
  n.op = Op::SoftMin;
  n.a = a;
  n.c0 = beta;
  return push(std::move(n));
}

int Tape::softmax(int a, double beta) {
  if (!(beta > 0.0)) throw Error("softmax: temperature must be positive, got " + std::to_string(beta));
  Node n;
  n.op = Op::SoftMax;
  n.a = a;
  n.c0 = beta;
  return push(std::move(n));
}

void Tape::set_leaf(int id, const Tensor& v) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.op != Op::Leaf) throw Error("set_leaf: node " + std::to_string(id) + " is not a leaf");
  if (!n.val.shape.empty() && n.val.shape != v.shape) shape_fail(n, id, "set_leaf shape mismatch " + v.shape_str() + " vs " + n.val.shape_str());
  n.val = v;
}

void Tape::set_leaf(int id, std::span<const double> flat) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.op != Op::Leaf) throw Error("set_leaf: node " + std::to_string(id) + " is not a leaf");
  if (n.val.data.size() != flat.size()) shape_fail(n, id, "set_leaf element count mismatch");
  std::copy(flat.begin(), flat.end(), n.val.data.begin());
}

void Tape::recompute() {
  for (Node& n : nodes_) eval(n);
}

void Tape::eval(Node& n) {
  const int id = static_cast<int>(&n - nodes_.data());
  auto in = [&](int i) -> const Tensor& { return nodes_[static_cast<std::size_t>(i)].val; };
  switch (n.op) {
    case Op::Leaf:
    case Op::Const:
      break;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      const Tensor& a = in(n.a);
      const Tensor& b = in(n.b);
      if (!a.same_shape(b)) shape_fail(n, id, "elementwise shape mismatch");
      n.val.shape = a.shape;
      n.val.data.resize(a.data.size());
      const std::size_t m = a.data.size();
      switch (n.op) {
        case Op::Add: for (std::size_t i = 0; i < m; ++i) n.val.data[i] = a.data[i] + b.data[i]; break;
        case Op::Sub: for (std::size_t i = 0; i < m; ++i) n.val.data[i] = a.data[i] - b.data[i]; break;
        case Op::Mul: for (std::size_t i = 0; i < m; ++i) n.val.data[i] = a.data[i] * b.data[i]; break;
        default:      for (std::size_t i = 0; i < m; ++i) n.val.data[i] = a.data[i] / b.data[i]; break;
      }
      break;
    }
    case Op::Affine: {
      const Tensor& a = in(n.a);
      n.val.shape = a.shape;
      n.val.data.resize(a.data.size());
      for (std::size_t i = 0; i < a.data.size(); ++i) n.val.data[i] = n.c0 * a.data[i] + n.c1;
      break;
    }
    case Op::Tanh:
    case Op::Exp:
    case Op::Log:
    case Op::Sqrt:
    case Op::Sin:
    case Op::Cos:
    case Op::Relu: {
      const Tensor& a = in(n.a);
      n.val.shape = a.shape;
      n.val.data.resize(a.data.size());
      for (std::size_t i = 0; i < a.data.size(); ++i) {
        double x = a.data[i];
        switch (n.op) {
          case Op::Tanh: n.val.data[i] = std::tanh(x); break;
          case Op::Exp: n.val.data[i] = std::exp(x); break;
          case Op::Log: n.val.data[i] = std::log(x); break;
          case Op::Sqrt: n.val.data[i] = std::sqrt(x); break;
          case Op::Sin: n.val.data[i] = std::sin(x); break;
          case Op::Cos: n.val.data[i] = std::cos(x); break;
          default: n.val.data[i] = x > 0.0 ? x : 0.0; break;
        }
      }
      break;
    }
    case Op::MatVec: {
      const Tensor& w = in(n.a);
      const Tensor& x = in(n.b);
      if (w.shape.size() != 2 || x.shape.size() != 1 || w.shape[1] != x.shape[0])
        shape_fail(n, id, "matvec expects {m,n} x {n}");
      const std::size_t rows = w.shape[0], cols = w.shape[1];
      n.val.shape = {rows};
      n.val.data.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        const double* wr = w.data.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x.data[c];
        n.val.data[r] = s;
      }
      break;
    }
    case Op::ReduceSum: {
      const Tensor& a = in(n.a);
      double s = 0.0;
      for (double v : a.data) s += v;
      n.val.shape.clear();
      n.val.data.assign(1, s);
      break;
    }
    case Op::Index: {
      const Tensor& a = in(n.a);
      if (a.shape.size() != 1 || n.idx < 0 || static_cast<std::size_t>(n.idx) >= a.shape[0])
        shape_fail(n, id, "index " + std::to_string(n.idx) + " out of range");
      n.val.shape.clear();
      n.val.data.assign(1, a.data[static_cast<std::size_t>(n.idx)]);
      break;
    }
    case Op::Slice: {
      const Tensor& a = in(n.a);
      if (a.shape.size() != 1 || n.idx < 0 || n.len < 0 ||
          static_cast<std::size_t>(n.idx + n.len) > a.shape[0])
        shape_fail(n, id, "slice out of range");
      n.val.shape = {static_cast<std::size_t>(n.len)};
      n.val.data.assign(a.data.begin() + n.idx, a.data.begin() + n.idx + n.len);
      break;
    }
    case Op::Stack: {
      n.val.shape = {n.args.size()};
      n.val.data.resize(n.args.size());
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        const Tensor& a = in(n.args[i]);
        if (a.data.size() != 1) shape_fail(n, id, "stack expects scalar inputs");
        n.val.data[i] = a.data[0];
      }
      break;
    }
    case Op::Concat: {
      const Tensor& a = in(n.a);
      const Tensor& b = in(n.b);
      if (a.shape.size() != 1 || b.shape.size() != 1) shape_fail(n, id, "concat expects vectors");
      n.val.shape = {a.shape[0] + b.shape[0]};
      n.val.data.resize(a.data.size() + b.data.size());
      std::copy(a.data.begin(), a.data.end(), n.val.data.begin());
      std::copy(b.data.begin(), b.data.end(), n.val.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
      break;
    }
    case Op::SoftMin:
    case Op::SoftMax: {
      const Tensor& a = in(n.a);
      if (a.shape.size() != 1 || a.data.empty()) shape_fail(n, id, "soft reduction expects nonempty vector");
      const double beta = n.c0;
      const double sign = (n.op == Op::SoftMin) ? -1.0 : 1.0;
      // Shifted log-sum-exp: sign/beta * log sum exp(sign*beta*(x - m)) + m.
      double m = a.data[0];
      for (double v : a.data) m = (n.op == Op::SoftMin) ? std::min(m, v) : std::max(m, v);
      double s = 0.0;
      for (double v : a.data) s += std::exp(sign * beta * (v - m));
      n.val.shape.clear();
      n.val.data.assign(1, m + sign * std::log(s) / beta);
      break;
    }
    case Op::HardMin:
    case Op::HardMax: {
      const Tensor& a = in(n.a);
      if (a.shape.size() != 1 || a.data.empty()) shape_fail(n, id, "hard reduction expects nonempty vector");
      double m = a.data[0];
      for (double v : a.data) m = (n.op == Op::HardMin) ? std::min(m, v) : std::max(m, v);
      n.val.shape.clear();
      n.val.data.assign(1, m);
      break;
    }
    case Op::SoftmaxVec: {
      const Tensor& a = in(n.a);
      if (a.shape.size() != 1 || a.data.empty()) shape_fail(n, id, "softmax_vec expects nonempty vector");
      double m = a.data[0];
      for (double v : a.data) m = std::max(m, v);
      n.val.shape = a.shape;
      n.val.data.resize(a.data.size());
      double s = 0.0;
      for (std::size_t i = 0; i < a.data.size(); ++i) {
        n.val.data[i] = std::exp(a.data[i] - m);
        s += n.val.data[i];
      }
      for (double& v : n.val.data) v /= s;
      break;
    }
  }
}

void Tape::backward(int output) {
  Node& out = nodes_[static_cast<std::size_t>(output)];
  if (out.val.data.size() != 1)
    throw ShapeError("backward: output node " + std::to_string(output) + " (" + op_name(out.op) +
                     ") is not scalar, shape " + out.val.shape_str());
  backward_visits_ = 0;
  for (Node& n : nodes_) {
    n.grad.shape = n.val.shape;
    n.grad.data.assign(n.val.data.size(), 0.0);
  }
  out.grad.data[0] = 1.0;

  for (int i = output; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    ++backward_visits_;
    auto& gv = n.grad.data;
    auto ga = [&](int j) -> Tensor& { return nodes_[static_cast<std::size_t>(j)].grad; };
    auto va = [&](int j) -> const Tensor& { return nodes_[static_cast<std::size_t>(j)].val; };
    switch (n.op) {
      case Op::Leaf:
      case Op::Const:
        break;
      case Op::Add:
        for (std::size_t k = 0; k < gv.size(); ++k) {
          ga(n.a).data[k] += gv[k];
          ga(n.b).data[k] += gv[k];
        }
        break;
      case Op::Sub:
        for (std::size_t k = 0; k < gv.size(); ++k) {
          ga(n.a).data[k] += gv[k];
          ga(n.b).data[k] -= gv[k];
        }
        break;
      case Op::Mul:
        for (std::size_t k = 0; k < gv.size(); ++k) {
          ga(n.a).data[k] += gv[k] * va(n.b).data[k];
          ga(n.b).data[k] += gv[k] * va(n.a).data[k];
        }
        break;
      case Op::Div:
        for (std::size_t k = 0; k < gv.size(); ++k) {
          const double bk = va(n.b).data[k];
          ga(n.a).data[k] += gv[k] / bk;
          ga(n.b).data[k] -= gv[k] * va(n.a).data[k] / (bk * bk);
        }
        break;
      case Op::Affine:
        for (std::size_t k = 0; k < gv.size(); ++k) ga(n.a).data[k] += n.c0 * gv[k];
        break;
      case Op::Tanh:
        for (std::size_t k = 0; k < gv.size(); ++k) {
          const double y = n.val.data[k];
          ga(n.a).data[k] += gv[k] * (1.0 - y * y);
        }
        break;
      case Op::Exp:
        for (std::size_t k = 0; k < gv.size(); ++k) ga(n.a).data[k] += gv[k] * n.val.data[k];
        break;
      case Op::Log:
        for (std::size_t k = 0; k < gv.size(); ++k) ga(n.a).data[k] += gv[k] / va(n.a).data[k];
        break;
      case Op::Sqrt:
        for (std::size_t k = 0; k < gv.size(); ++k) ga(n.a).data[k] += gv[k] * 0.5 / n.val.data[k];
        break;
      case Op::Sin:
        for (std::size_t k = 0; k < gv.size(); ++k) ga(n.a).data[k] += gv[k] * std::cos(va(n.a).data[k]);
        break;
      case Op::Cos:
        for (std::size_t k = 0; k < gv.size(); ++k) ga(n.a).data[k] -= gv[k] * std::sin(va(n.a).data[k]);
        break;
      case Op::Relu:
        for (std::size_t k = 0; k < gv.size(); ++k)
          if (va(n.a).data[k] > 0.0) ga(n.a).data[k] += gv[k];
        break;
      case Op::MatVec: {
        const Tensor& w = va(n.a);
        const Tensor& x = va(n.b);
        Tensor& gw = ga(n.a);
        Tensor& gx = ga(n.b);
        const std::size_t rows = w.shape[0], cols = w.shape[1];
        for (std::size_t r = 0; r < rows; ++r) {
          const double g = gv[r];
          if (g == 0.0) continue;
          double* gwr = gw.data.data() + r * cols;
          const double* wr = w.data.data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) {
            gwr[c] += g * x.data[c];
            gx.data[c] += g * wr[c];
          }
        }
        break;
      }
      case Op::ReduceSum: {
        Tensor& g = ga(n.a);
        for (double& v : g.data) v += gv[0];
        break;
      }
      case Op::Index:
        ga(n.a).data[static_cast<std::size_t>(n.idx)] += gv[0];
        break;
      case Op::Slice:
        for (int k = 0; k < n.len; ++k) ga(n.a).data[static_cast<std::size_t>(n.idx + k)] += gv[static_cast<std::size_t>(k)];
        break;
      case Op::Stack:
        for (std::size_t k = 0; k < n.args.size(); ++k) ga(n.args[k]).data[0] += gv[k];
        break;
      case Op::Concat: {
        const std::size_t na = va(n.a).data.size();
        for (std::size_t k = 0; k < na; ++k) ga(n.a).data[k] += gv[k];
        for (std::size_t k = 0; k < va(n.b).data.size(); ++k) ga(n.b).data[k] += gv[na + k];
        break;
      }
      case Op::SoftMin:
      case Op::SoftMax: {
        // d/dx_i = w_i with w the (soft)min/max weights; recomputed with
        // the same shift as the forward pass for bit-stable repeats.
        const Tensor& a = va(n.a);
        const double beta = n.c0;
        const double sign = (n.op == Op::SoftMin) ? -1.0 : 1.0;
        double m = a.data[0];
        for (double v : a.data) m = (n.op == Op::SoftMin) ? std::min(m, v) : std::max(m, v);
        double s = 0.0;
        for (double v : a.data) s += std::exp(sign * beta * (v - m));
        Tensor& g = ga(n.a);
        for (std::size_t k = 0; k < a.data.size(); ++k)
          g.data[k] += gv[0] * std::exp(sign * beta * (a.data[k] - m)) / s;
        break;
      }
      case Op::HardMin:
      case Op::HardMax: {
        const Tensor& a = va(n.a);
        std::size_t arg = 0;
        for (std::size_t k = 1; k < a.data.size(); ++k) {
          const bool better = (n.op == Op::HardMin) ? a.data[k] < a.data[arg] : a.data[k] > a.data[arg];
          if (better) arg = k;  // strict comparison keeps the lowest index on ties
        }
        ga(n.a).data[arg] += gv[0];
        break;
      }
      case Op::SoftmaxVec: {
        const Tensor& y = n.val;
        Tensor& g = ga(n.a);
        double gy = 0.0;
        for (std::size_t k = 0; k < y.data.size(); ++k) gy += gv[k] * y.data[k];
        for (std::size_t k = 0; k < y.data.size(); ++k) g.data[k] += y.data[k] * (gv[k] - gy);
        break;
      }
    }
  }
}

int const_vector(Tape& t, const Vec& v) { return t.constant(Tensor::vector(v)); }

}  // namespace stlctl::ad
