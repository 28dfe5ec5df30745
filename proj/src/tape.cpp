#include "pilno/tape.hpp"

#include <cmath>

namespace pilno::ad {

namespace {
inline void ensure_shape(Mat& m, Eigen::Index r, Eigen::Index c) {
  if (m.rows() != r || m.cols() != c) m.resize(r, c);
}
}  // namespace

Tape::Node& Tape::fresh(Op op, int a, int b, int c, bool needs_grad) {
  if (size_ == static_cast<int>(nodes_.size())) nodes_.emplace_back();
  Node& n = nodes_[size_++];
  n.op = op;
  n.a = a;
  n.b = b;
  n.c = c;
  n.needs_grad = needs_grad;
  n.grad_set = false;
  n.alpha = 0.0;
  return n;
}

Var Tape::leaf(const Mat& value, bool needs_grad) {
  Node& n = fresh(Op::leaf, -1, -1, -1, needs_grad);
  n.value = value;
  return Var{size_ - 1};
}

Var Tape::leaf(Mat&& value, bool needs_grad) {
  Node& n = fresh(Op::leaf, -1, -1, -1, needs_grad);
  n.value = std::move(value);
  return Var{size_ - 1};
}

#define PILNO_BINARY_PROLOGUE(a, b)                                  \
  const bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad

Var Tape::matmul(Var a, Var b) {
  PILNO_BINARY_PROLOGUE(a, b);
  const Mat& A = nodes_[a.id].value;
  const Mat& B = nodes_[b.id].value;
  if (A.cols() != B.rows()) throw Error("matmul shape mismatch");
  Node& n = fresh(Op::matmul, a.id, b.id, -1, ng);
  ensure_shape(n.value, A.rows(), B.cols());
  n.value.noalias() = A * B;
  return Var{size_ - 1};
}

Var Tape::matmul_nt(Var a, Var b) {
  PILNO_BINARY_PROLOGUE(a, b);
  const Mat& A = nodes_[a.id].value;
  const Mat& B = nodes_[b.id].value;
  if (A.cols() != B.cols()) throw Error("matmul_nt shape mismatch");
  Node& n = fresh(Op::matmul_nt, a.id, b.id, -1, ng);
  ensure_shape(n.value, A.rows(), B.rows());
  n.value.noalias() = A * B.transpose();
  return Var{size_ - 1};
}

Var Tape::matmul_tn(Var a, Var b) {
  PILNO_BINARY_PROLOGUE(a, b);
  const Mat& A = nodes_[a.id].value;
  const Mat& B = nodes_[b.id].value;
  if (A.rows() != B.rows()) throw Error("matmul_tn shape mismatch");
  Node& n = fresh(Op::matmul_tn, a.id, b.id, -1, ng);
  ensure_shape(n.value, A.cols(), B.cols());
  n.value.noalias() = A.transpose() * B;
  return Var{size_ - 1};
}

Var Tape::add(Var a, Var b) {
  PILNO_BINARY_PROLOGUE(a, b);
  const Mat& A = nodes_[a.id].value;
  const Mat& B = nodes_[b.id].value;
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw Error("add shape mismatch");
  Node& n = fresh(Op::add, a.id, b.id, -1, ng);
  ensure_shape(n.value, A.rows(), A.cols());
  n.value = A + B;
  return Var{size_ - 1};
}

Var Tape::sub(Var a, Var b) {
  PILNO_BINARY_PROLOGUE(a, b);
  const Mat& A = nodes_[a.id].value;
  const Mat& B = nodes_[b.id].value;
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw Error("sub shape mismatch");
  Node& n = fresh(Op::sub, a.id, b.id, -1, ng);
  ensure_shape(n.value, A.rows(), A.cols());
  n.value = A - B;
  return Var{size_ - 1};
}

Var Tape::neg(Var a) {
  Node& n = fresh(Op::neg, a.id, -1, -1, nodes_[a.id].needs_grad);
  const Mat& A = nodes_[a.id].value;
  ensure_shape(n.value, A.rows(), A.cols());
  n.value = -A;
  return Var{size_ - 1};
}

Var Tape::scale(Var a, double alpha) {
  Node& n = fresh(Op::scale, a.id, -1, -1, nodes_[a.id].needs_grad);
  n.alpha = alpha;
  const Mat& A = nodes_[a.id].value;
  ensure_shape(n.value, A.rows(), A.cols());
  n.value = alpha * A;
  return Var{size_ - 1};
}

Var Tape::add_rowvec(Var a, Var rowvec) {
  PILNO_BINARY_PROLOGUE(a, rowvec);
  const Mat& A = nodes_[a.id].value;
  const Mat& B = nodes_[rowvec.id].value;
  if (B.rows() != 1 || A.cols() != B.cols())
    throw Error("add_rowvec shape mismatch");
  Node& n = fresh(Op::add_rowvec, a.id, rowvec.id, -1, ng);
  ensure_shape(n.value, A.rows(), A.cols());
  n.value = A.rowwise() + B.row(0);
  return Var{size_ - 1};
}

Var Tape::hadamard(Var a, Var b) {
  PILNO_BINARY_PROLOGUE(a, b);
  const Mat& A = nodes_[a.id].value;
  const Mat& B = nodes_[b.id].value;
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw Error("hadamard shape mismatch");
  Node& n = fresh(Op::hadamard, a.id, b.id, -1, ng);
  ensure_shape(n.value, A.rows(), A.cols());
  n.value = A.cwiseProduct(B);
  return Var{size_ - 1};
}

Var Tape::tanh(Var a) {
  Node& n = fresh(Op::tanh_fn, a.id, -1, -1, nodes_[a.id].needs_grad);
  const Mat& A = nodes_[a.id].value;
  ensure_shape(n.value, A.rows(), A.cols());
  n.value = A.array().tanh();
  return Var{size_ - 1};
}

Var Tape::one_minus_sq(Var a) {
  Node& n = fresh(Op::one_minus_sq, a.id, -1, -1, nodes_[a.id].needs_grad);
  const Mat& A = nodes_[a.id].value;
  ensure_shape(n.value, A.rows(), A.cols());
  n.value = 1.0 - A.array().square();
  return Var{size_ - 1};
}

Var Tape::sin(Var a) {
  Node& n = fresh(Op::sin_fn, a.id, -1, -1, nodes_[a.id].needs_grad);
  const Mat& A = nodes_[a.id].value;
  ensure_shape(n.value, A.rows(), A.cols());
  n.value = A.array().sin();
  return Var{size_ - 1};
}

Var Tape::cos(Var a) {
  Node& n = fresh(Op::cos_fn, a.id, -1, -1, nodes_[a.id].needs_grad);
  const Mat& A = nodes_[a.id].value;
  ensure_shape(n.value, A.rows(), A.cols());
  n.value = A.array().cos();
  return Var{size_ - 1};
}

Var Tape::layer_norm(Var a, Var gain, Var bias, double eps) {
  const bool ng = nodes_[a.id].needs_grad || nodes_[gain.id].needs_grad ||
                  nodes_[bias.id].needs_grad;
  const Mat& A = nodes_[a.id].value;
  const Mat& G = nodes_[gain.id].value;
  const Mat& B = nodes_[bias.id].value;
  if (G.rows() != 1 || B.rows() != 1 || G.cols() != A.cols() ||
      B.cols() != A.cols())
    throw Error("layer_norm shape mismatch");
  Node& n = fresh(Op::layer_norm, a.id, gain.id, bias.id, ng);
  n.alpha = eps;
  const auto rows = A.rows();
  const auto cols = A.cols();
  ensure_shape(n.value, rows, cols);
  ensure_shape(n.aux, rows, cols);
  n.aux_vec.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double mu = A.row(i).mean();
    const double var =
        (A.row(i).array() - mu).square().sum() / static_cast<double>(cols);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    n.aux_vec[i] = inv_std;
    n.aux.row(i) = (A.row(i).array() - mu) * inv_std;
  }
  n.value = (n.aux.array().rowwise() * G.row(0).array()).rowwise() +
            B.row(0).array();
  return Var{size_ - 1};
}

Var Tape::mean_sq(Var a) {
  Node& n = fresh(Op::mean_sq, a.id, -1, -1, nodes_[a.id].needs_grad);
  const Mat& A = nodes_[a.id].value;
  ensure_shape(n.value, 1, 1);
  n.value(0, 0) = A.array().square().mean();
  return Var{size_ - 1};
}

Var Tape::mean_all(Var a) {
  Node& n = fresh(Op::mean_all, a.id, -1, -1, nodes_[a.id].needs_grad);
  const Mat& A = nodes_[a.id].value;
  ensure_shape(n.value, 1, 1);
  n.value(0, 0) = A.mean();
  return Var{size_ - 1};
}

const Mat& Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (!n.grad_set) throw Error("gradient not computed for this node");
  return n.grad;
}

Mat& Tape::grad_buf(int id) {
  Node& n = nodes_[id];
  if (!n.grad_set) {
    ensure_shape(n.grad, n.value.rows(), n.value.cols());
    n.grad.setZero();
    n.grad_set = true;
  }
  return n.grad;
}

void Tape::accumulate(int id, const Mat& g) { grad_buf(id) += g; }

void Tape::backward(Var root) {
  Node& r = nodes_[root.id];
  if (r.value.size() != 1) throw Error("backward root must be a scalar");
  if (!std::isfinite(r.value(0, 0)))
    throw NumericError("non-finite value reached the loss");
  grad_buf(root.id)(0, 0) = 1.0;

  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.grad_set || !n.needs_grad || n.op == Op::leaf) continue;
    const Mat& G = n.grad;
    Node& pa = nodes_[n.a];
    switch (n.op) {
      case Op::matmul: {
        Node& pb = nodes_[n.b];
        if (pa.needs_grad) grad_buf(n.a).noalias() += G * pb.value.transpose();
        if (pb.needs_grad) grad_buf(n.b).noalias() += pa.value.transpose() * G;
        break;
      }
      case Op::matmul_nt: {
        Node& pb = nodes_[n.b];
        if (pa.needs_grad) grad_buf(n.a).noalias() += G * pb.value;
        if (pb.needs_grad) grad_buf(n.b).noalias() += G.transpose() * pa.value;
        break;
      }
      case Op::matmul_tn: {
        Node& pb = nodes_[n.b];
        if (pa.needs_grad) grad_buf(n.a).noalias() += pb.value * G.transpose();
        if (pb.needs_grad) grad_buf(n.b).noalias() += pa.value * G;
        break;
      }
      case Op::add: {
        Node& pb = nodes_[n.b];
        if (pa.needs_grad) accumulate(n.a, G);
        if (pb.needs_grad) accumulate(n.b, G);
        break;
      }
      case Op::sub: {
        Node& pb = nodes_[n.b];
        if (pa.needs_grad) accumulate(n.a, G);
        if (pb.needs_grad) grad_buf(n.b) -= G;
        break;
      }
      case Op::neg:
        if (pa.needs_grad) grad_buf(n.a) -= G;
        break;
      case Op::scale:
        if (pa.needs_grad) grad_buf(n.a) += n.alpha * G;
        break;
      case Op::add_rowvec: {
        Node& pb = nodes_[n.b];
        if (pa.needs_grad) accumulate(n.a, G);
        if (pb.needs_grad) grad_buf(n.b) += G.colwise().sum();
        break;
      }
      case Op::hadamard: {
        Node& pb = nodes_[n.b];
        if (pa.needs_grad) grad_buf(n.a) += G.cwiseProduct(pb.value);
        if (pb.needs_grad) grad_buf(n.b) += G.cwiseProduct(pa.value);
        break;
      }
      case Op::tanh_fn:
        if (pa.needs_grad)
          grad_buf(n.a).array() += G.array() * (1.0 - n.value.array().square());
        break;
      case Op::one_minus_sq:
        if (pa.needs_grad)
          grad_buf(n.a).array() -= 2.0 * G.array() * pa.value.array();
        break;
      case Op::sin_fn:
        if (pa.needs_grad)
          grad_buf(n.a).array() += G.array() * pa.value.array().cos();
        break;
      case Op::cos_fn:
        if (pa.needs_grad)
          grad_buf(n.a).array() -= G.array() * pa.value.array().sin();
        break;
      case Op::layer_norm: {
        Node& pg = nodes_[n.b];
        Node& pb = nodes_[n.c];
        if (pb.needs_grad) grad_buf(n.c) += G.colwise().sum();
        if (pg.needs_grad) grad_buf(n.b) += G.cwiseProduct(n.aux).colwise().sum();
        if (pa.needs_grad) {
          Mat& gA = grad_buf(n.a);
          const auto cols = static_cast<double>(n.value.cols());
          for (Eigen::Index i = 0; i < n.value.rows(); ++i) {
            Eigen::RowVectorXd gx =
                G.row(i).cwiseProduct(pg.value.row(0));  // dL/dxhat
            const double m1 = gx.mean();
            const double m2 = gx.cwiseProduct(n.aux.row(i)).sum() / cols;
            gA.row(i) +=
                n.aux_vec[i] *
                (gx.array() - m1 - n.aux.row(i).array() * m2).matrix();
          }
        }
        break;
      }
      case Op::mean_sq:
        if (pa.needs_grad)
          grad_buf(n.a) +=
              (2.0 * G(0, 0) / static_cast<double>(pa.value.size())) * pa.value;
        break;
      case Op::mean_all:
        if (pa.needs_grad)
          grad_buf(n.a).array() +=
              G(0, 0) / static_cast<double>(pa.value.size());
        break;
      case Op::leaf:
        break;
    }
  }
}

}  // namespace pilno::ad
