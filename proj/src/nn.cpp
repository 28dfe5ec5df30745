#include "pilno/nn.hpp"

namespace pilno::nn {

Mat xavier_init(int in, int out, Rng& rng) {
  if (in < 1 || out < 1) throw ConfigError("xavier_init requires in, out >= 1");
  const double std = std::sqrt(2.0 / static_cast<double>(in + out));
  Mat w(out, in);
  for (int i = 0; i < out; ++i)
    for (int j = 0; j < in; ++j) w(i, j) = std * rng.normal();
  return w;
}

MLPParams MLPParams::init(const MLPSpec& spec, Rng& rng) {
  if (spec.layers.empty()) throw ConfigError("MLP needs at least one layer");
  MLPParams p;
  int in = spec.input;
  for (int out : spec.layers) {
    p.W.push_back(xavier_init(in, out, rng));
    p.b.push_back(Mat::Zero(1, out));
    in = out;
  }
  return p;
}

int64_t MLPParams::param_count() const {
  int64_t n = 0;
  for (size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
  return n;
}

LayerNormParams LayerNormParams::init(int s) {
  return LayerNormParams{Mat::Ones(1, s), Mat::Zero(1, s)};
}

void ParamRegistry::add(std::string name, Mat* m, bool is_matrix) {
  entries_.push_back(Entry{std::move(name), m, is_matrix});
}

void ParamRegistry::add_mlp(const std::string& prefix, MLPParams& p) {
  for (size_t l = 0; l < p.W.size(); ++l) {
    add(prefix + ".W" + std::to_string(l), &p.W[l], true);
    add(prefix + ".b" + std::to_string(l), &p.b[l], false);
  }
}

void ParamRegistry::add_layer_norm(const std::string& prefix,
                                   LayerNormParams& p) {
  add(prefix + ".gain", &p.gain, false);
  add(prefix + ".bias", &p.bias, false);
}

int64_t ParamRegistry::total() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.m->size();
  return n;
}

Vec ParamRegistry::flatten() const {
  Vec v(total());
  int64_t off = 0;
  for (const auto& e : entries_) {
    v.segment(off, e.m->size()) = Eigen::Map<const Vec>(e.m->data(), e.m->size());
    off += e.m->size();
  }
  return v;
}

void ParamRegistry::unflatten(const Eigen::Ref<const Vec>& v) {
  if (v.size() != total()) throw ConfigError("parameter vector size mismatch");
  int64_t off = 0;
  for (const auto& e : entries_) {
    Eigen::Map<Vec>(e.m->data(), e.m->size()) = v.segment(off, e.m->size());
    off += e.m->size();
  }
}

MLPVars bind_mlp(ad::Tape& t, const MLPParams& p, bool linear_output,
                 bool needs_grad, std::vector<ad::Var>* sink) {
  MLPVars v;
  v.linear_output = linear_output;
  for (size_t l = 0; l < p.W.size(); ++l) {
    v.W.push_back(t.leaf(p.W[l], needs_grad));
    v.b.push_back(t.leaf(p.b[l], needs_grad));
    if (sink) {
      sink->push_back(v.W.back());
      sink->push_back(v.b.back());
    }
  }
  return v;
}

LayerNormVars bind_layer_norm(ad::Tape& t, const LayerNormParams& p,
                              bool needs_grad, std::vector<ad::Var>* sink) {
  LayerNormVars v{t.leaf(p.gain, needs_grad), t.leaf(p.bias, needs_grad)};
  if (sink) {
    sink->push_back(v.gain);
    sink->push_back(v.bias);
  }
  return v;
}

ad::Var mlp_apply(ad::Tape& t, const MLPVars& p, ad::Var x) {
  ad::Var h = x;
  for (size_t l = 0; l < p.W.size(); ++l) {
    h = t.add_rowvec(t.matmul_nt(h, p.W[l]), p.b[l]);
    const bool last = (l + 1 == p.W.size());
    if (!last || !p.linear_output) h = t.tanh(h);
  }
  return h;
}

ad::Var layer_norm_apply(ad::Tape& t, const LayerNormVars& p, ad::Var x) {
  return t.layer_norm(x, p.gain, p.bias);
}

SpatialBatch spatial_seed(ad::Tape& t, const Mat& inputs,
                          const std::vector<Mat>& d1_seeds,
                          const std::vector<Mat>& d2_seeds) {
  if (d1_seeds.size() != d2_seeds.size())
    throw ConfigError("spatial seed channel count mismatch");
  SpatialBatch s;
  s.val = t.constant(inputs);
  for (const Mat& m : d1_seeds) s.d1.push_back(t.constant(m));
  for (const Mat& m : d2_seeds) s.d2.push_back(t.constant(m));
  return s;
}

SpatialBatch spatial_coords(ad::Tape& t, const Mat& Y) {
  const int d = static_cast<int>(Y.cols());
  std::vector<Mat> d1(d, Mat::Zero(Y.rows(), d)), d2(d, Mat::Zero(Y.rows(), d));
  for (int i = 0; i < d; ++i) d1[i].col(i).setOnes();
  return spatial_seed(t, Y, d1, d2);
}

SpatialBatch mlp_apply_spatial(ad::Tape& t, const MLPVars& p, SpatialBatch x) {
  const int d = x.dims();
  for (size_t l = 0; l < p.W.size(); ++l) {
    SpatialBatch z;
    z.val = t.add_rowvec(t.matmul_nt(x.val, p.W[l]), p.b[l]);
    for (int i = 0; i < d; ++i) {
      z.d1.push_back(t.matmul_nt(x.d1[i], p.W[l]));
      z.d2.push_back(t.matmul_nt(x.d2[i], p.W[l]));
    }
    const bool last = (l + 1 == p.W.size());
    if (last && p.linear_output) {
      x = z;
      continue;
    }
    // a = tanh(z); da = (1-a^2) dz; d2a = (1-a^2) d2z - 2 a da dz
    SpatialBatch a;
    a.val = t.tanh(z.val);
    const ad::Var tp = t.one_minus_sq(a.val);
    for (int i = 0; i < d; ++i) {
      a.d1.push_back(t.hadamard(tp, z.d1[i]));
      const ad::Var curv =
          t.hadamard(a.val, t.hadamard(a.d1[i], z.d1[i]));
      a.d2.push_back(
          t.sub(t.hadamard(tp, z.d2[i]), t.scale(curv, 2.0)));
    }
    x = a;
  }
  return x;
}

SpatialBatch matmul_spatial(ad::Tape& t, const SpatialBatch& feats,
                            ad::Var z) {
  SpatialBatch out;
  out.val = t.matmul(feats.val, z);
  for (int i = 0; i < feats.dims(); ++i) {
    out.d1.push_back(t.matmul(feats.d1[i], z));
    out.d2.push_back(t.matmul(feats.d2[i], z));
  }
  return out;
}

ad::Var laplacian(ad::Tape& t, const SpatialBatch& u) {
  if (u.d2.empty()) throw ConfigError("laplacian needs derivative channels");
  ad::Var sum = u.d2[0];
  for (size_t i = 1; i < u.d2.size(); ++i) sum = t.add(sum, u.d2[i]);
  return sum;
}

SpatialBatch spatial_add(ad::Tape& t, const SpatialBatch& a,
                         const SpatialBatch& b) {
  SpatialBatch out;
  out.val = t.add(a.val, b.val);
  for (int i = 0; i < a.dims(); ++i) {
    out.d1.push_back(t.add(a.d1[i], b.d1[i]));
    out.d2.push_back(t.add(a.d2[i], b.d2[i]));
  }
  return out;
}

SpatialBatch spatial_mul(ad::Tape& t, const SpatialBatch& a,
                         const SpatialBatch& b) {
  SpatialBatch out;
  out.val = t.hadamard(a.val, b.val);
  for (int i = 0; i < a.dims(); ++i) {
    out.d1.push_back(t.add(t.hadamard(a.d1[i], b.val), t.hadamard(a.val, b.d1[i])));
    // (ab)'' = a'' b + 2 a' b' + a b''
    ad::Var mid = t.scale(t.hadamard(a.d1[i], b.d1[i]), 2.0);
    out.d2.push_back(t.add(t.add(t.hadamard(a.d2[i], b.val), mid),
                           t.hadamard(a.val, b.d2[i])));
  }
  return out;
}

SpatialBatch spatial_scale(ad::Tape& t, const SpatialBatch& a, double alpha) {
  SpatialBatch out;
  out.val = t.scale(a.val, alpha);
  for (int i = 0; i < a.dims(); ++i) {
    out.d1.push_back(t.scale(a.d1[i], alpha));
    out.d2.push_back(t.scale(a.d2[i], alpha));
  }
  return out;
}

SpatialBatch spatial_sin(ad::Tape& t, const SpatialBatch& a) {
  SpatialBatch out;
  out.val = t.sin(a.val);
  const ad::Var c = t.cos(a.val);
  for (int i = 0; i < a.dims(); ++i) {
    out.d1.push_back(t.hadamard(c, a.d1[i]));
    // sin(a)'' = cos(a) a'' - sin(a) (a')^2
    out.d2.push_back(t.sub(t.hadamard(c, a.d2[i]),
                           t.hadamard(out.val, t.hadamard(a.d1[i], a.d1[i]))));
  }
  return out;
}

}  // namespace pilno::nn
