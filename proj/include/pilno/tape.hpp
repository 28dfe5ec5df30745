#pragma once

#include <cstdint>
#include <vector>

#include "pilno/common.hpp"

namespace pilno::ad {

// Reverse-mode tape over matrix-valued nodes. Creation order is the
// topological order, so the backward sweep is a reverse iteration.
// rewind() resets the node cursor but keeps the per-slot matrix storage;
// rebuilding the same graph shape each training step then runs without
// fresh allocations.

enum class Op : std::uint8_t {
  leaf,
  matmul,      // A * B
  matmul_nt,   // A * B^T
  matmul_tn,   // A^T * B
  add,
  sub,
  neg,
  scale,       // alpha * A
  add_rowvec,  // A + ones * b   (b is 1 x K)
  hadamard,    // A .* B
  tanh_fn,
  one_minus_sq,  // 1 - A .* A
  sin_fn,
  cos_fn,
  layer_norm,  // rowwise standardize(A), then gain .* x + bias
  mean_sq,     // mean of squared entries -> 1x1
  mean_all,    // mean of entries -> 1x1
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  struct Node {
    Mat value;
    Mat grad;
    Mat aux;       // layer_norm: cached xhat
    Vec aux_vec;   // layer_norm: cached 1/std per row
    double alpha = 0.0;
    int a = -1, b = -1, c = -1;
    Op op = Op::leaf;
    bool needs_grad = false;
    bool grad_set = false;
  };

  Var leaf(const Mat& value, bool needs_grad);
  Var leaf(Mat&& value, bool needs_grad);
  Var constant(const Mat& value) { return leaf(value, false); }

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);
  Var matmul_tn(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var neg(Var a);
  Var scale(Var a, double alpha);
  Var add_rowvec(Var a, Var rowvec);
  Var hadamard(Var a, Var b);
  Var tanh(Var a);
  Var one_minus_sq(Var a);
  Var sin(Var a);
  Var cos(Var a);
  Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
  Var mean_sq(Var a);
  Var mean_all(Var a);

  const Mat& val(Var v) const { return nodes_[v.id].value; }
  // Whether a gradient reached this node in the last backward sweep.
  bool has_grad(Var v) const { return nodes_[v.id].grad_set; }
  const Mat& grad(Var v) const;

  // Reverse sweep from a 1x1 root. Throws NumericError if the root value
  // is not finite.
  void backward(Var root);

  void rewind() { size_ = 0; }
  int size() const { return size_; }

 private:
  Node& fresh(Op op, int a, int b, int c, bool needs_grad);
  void accumulate(int id, const Mat& g);
  Mat& grad_buf(int id);

  std::vector<Node> nodes_;
  int size_ = 0;
};

}  // namespace pilno::ad
