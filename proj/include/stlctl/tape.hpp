#pragma once
#include <cstdint>
#include <span>
#include <vector>

#include "stlctl/tensor.hpp"

namespace stlctl::ad {

enum class Op : std::uint8_t {
  Leaf,
  Const,
  Add,
  Sub,
  Mul,
  Div,
  Affine,     // c0 * x + c1, elementwise
  Tanh,
  Exp,
  Log,
  Sqrt,
  Sin,
  Cos,
  Relu,
  MatVec,     // a: {m,n} matrix, b: {n} vector -> {m}
  ReduceSum,  // any shape -> scalar
  Index,      // vector, idx -> scalar
  Slice,      // vector, [idx, idx+len) -> {len}
  Stack,      // k scalars -> {k}
  Concat,     // {m},{n} -> {m+n}
  SoftMin,    // vector, beta -> scalar: -(1/b) log sum exp(-b x_i)
  SoftMax,    // vector, beta -> scalar: +(1/b) log sum exp(+b x_i)
  HardMin,    // exact min; subgradient to the lowest-index minimizer
  HardMax,
  SoftmaxVec,  // vector -> probability vector
};

const char* op_name(Op op);

// Reverse-mode autodiff tape over dense tensors. Nodes are appended in
// topological order and evaluated eagerly; backward() runs one reverse
// sweep over the node list. A built tape can be re-executed in place
// after overwriting leaf values (recompute()), which keeps the hot
// optimization loops free of allocation churn.
class Tape {
 public:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double c0 = 0.0;  // affine scale / softmin-softmax temperature
    double c1 = 0.0;  // affine shift
    int idx = 0;      // Index position / Slice start
    int len = 0;      // Slice length
    std::vector<int> args;  // Stack inputs
    Tensor val;
    Tensor grad;
  };

  int leaf(Tensor v);
  int constant(Tensor v);
  int constant(double v) { return constant(Tensor::scalar(v)); }

  int add(int a, int b) { return binary(Op::Add, a, b); }
  int sub(int a, int b) { return binary(Op::Sub, a, b); }
  int mul(int a, int b) { return binary(Op::Mul, a, b); }
  int div(int a, int b) { return binary(Op::Div, a, b); }
  int affine(int a, double scale, double shift);
  int tanh(int a) { return unary(Op::Tanh, a); }
  int exp(int a) { return unary(Op::Exp, a); }
  int log(int a) { return unary(Op::Log, a); }
  int sqrt(int a) { return unary(Op::Sqrt, a); }
  int sin(int a) { return unary(Op::Sin, a); }
  int cos(int a) { return unary(Op::Cos, a); }
  int relu(int a) { return unary(Op::Relu, a); }
  int matvec(int w, int x) { return binary(Op::MatVec, w, x); }
  int reduce_sum(int a) { return unary(Op::ReduceSum, a); }
  int index(int a, int i);
  int slice(int a, int start, int len);
  int stack(std::span<const int> parts);
  int concat(int a, int b) { return binary(Op::Concat, a, b); }
  int softmin(int a, double beta);
  int softmax(int a, double beta);
  int hardmin(int a) { return unary(Op::HardMin, a); }
  int hardmax(int a) { return unary(Op::HardMax, a); }
  int softmax_vec(int a) { return unary(Op::SoftmaxVec, a); }

  const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
  const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  Op op(int id) const { return nodes_[static_cast<std::size_t>(id)].op; }

  // Overwrites a leaf's value. Shape must match; call recompute() after.
  void set_leaf(int id, const Tensor& v);
  void set_leaf(int id, std::span<const double> flat);

  // Re-runs the forward pass over all nodes, writing values in place.
  void recompute();

  // Accumulates d(output)/d(node) into every node's grad. `output` must
  // be scalar. Grad tensors are (re)zeroed first; evaluation order is
  // fixed, so repeated runs are bit-identical.
  void backward(int output);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  // Number of node visits performed by the last backward() sweep.
  std::size_t last_backward_visits() const { return backward_visits_; }

 private:
  int unary(Op op, int a);
  int binary(Op op, int a, int b);
  int push(Node n);
  void eval(Node& n);
  [[noreturn]] void shape_fail(const Node& n, int id, const std::string& detail) const;

  std::vector<Node> nodes_;
  std::size_t backward_visits_ = 0;
};

// Convenience: builds a {k} constant vector node.
int const_vector(Tape& t, const Vec& v);

}  // namespace stlctl::ad
