#pragma once

#include <string>
#include <vector>

#include "pilno/common.hpp"
#include "pilno/tape.hpp"

namespace pilno::nn {

// Hidden-layer list in the [a_1, ..., a_P] convention: a_P is the output
// dimension, the input dimension is given separately, every layer has a
// bias, hidden activations are tanh.
struct MLPSpec {
  int input = 1;
  std::vector<int> layers;
  bool linear_output = true;
};

// out x in weight matrix, entries N(0, 2/(in+out)).
Mat xavier_init(int in, int out, Rng& rng);

struct MLPParams {
  std::vector<Mat> W;  // out x in
  std::vector<Mat> b;  // 1 x out

  static MLPParams init(const MLPSpec& spec, Rng& rng);
  int64_t param_count() const;
};

struct LayerNormParams {
  Mat gain;  // 1 x S
  Mat bias;  // 1 x S
  static LayerNormParams init(int s);
};

// Stable parameter ordering for flatten/unflatten, checkpoints and the
// optimizers (is_matrix routes a tensor to the Muon orthogonalized path).
class ParamRegistry {
 public:
  struct Entry {
    std::string name;
    Mat* m;
    bool is_matrix;
  };

  void add(std::string name, Mat* m, bool is_matrix);
  void add_mlp(const std::string& prefix, MLPParams& p);
  void add_layer_norm(const std::string& prefix, LayerNormParams& p);

  const std::vector<Entry>& entries() const { return entries_; }
  int64_t total() const;

  // Column-major within each tensor, entries in registration order.
  Vec flatten() const;
  void unflatten(const Eigen::Ref<const Vec>& v);

 private:
  std::vector<Entry> entries_;
};

// ---- graph builders ----

struct MLPVars {
  std::vector<ad::Var> W, b;
  bool linear_output = true;
};

MLPVars bind_mlp(ad::Tape& t, const MLPParams& p, bool linear_output,
                 bool needs_grad, std::vector<ad::Var>* sink = nullptr);

struct LayerNormVars {
  ad::Var gain, bias;
};

LayerNormVars bind_layer_norm(ad::Tape& t, const LayerNormParams& p,
                              bool needs_grad,
                              std::vector<ad::Var>* sink = nullptr);

// Plain forward: affine -> tanh chain, final layer linear or tanh.
ad::Var mlp_apply(ad::Tape& t, const MLPVars& p, ad::Var x);

ad::Var layer_norm_apply(ad::Tape& t, const LayerNormVars& p, ad::Var x);

// Value plus first and pure second spatial-derivative channels of a batch
// quantity. Channels are ordinary tape nodes, so a reverse sweep through
// them yields parameter gradients of spatial derivatives (the nested
// differentiation needed by the physics losses).
struct SpatialBatch {
  ad::Var val;
  std::vector<ad::Var> d1;
  std::vector<ad::Var> d2;
  int dims() const { return static_cast<int>(d1.size()); }
};

// Seed channels for an input block. inputs is M x c; d1_seeds/d2_seeds
// give d(inputs)/dy_i and d^2(inputs)/dy_i^2 as constant M x c blocks
// (identity columns for the coordinates themselves, analytic derivatives
// for appended fields, zero for per-instance scalars).
SpatialBatch spatial_seed(ad::Tape& t, const Mat& inputs,
                          const std::vector<Mat>& d1_seeds,
                          const std::vector<Mat>& d2_seeds);

// Convenience seed for pure coordinates: inputs = Y (M x d).
SpatialBatch spatial_coords(ad::Tape& t, const Mat& Y);

SpatialBatch mlp_apply_spatial(ad::Tape& t, const MLPVars& p, SpatialBatch x);

// feats (M x R with channels) times a spatially-constant z (R x S).
SpatialBatch matmul_spatial(ad::Tape& t, const SpatialBatch& feats, ad::Var z);

ad::Var laplacian(ad::Tape& t, const SpatialBatch& u);

// Channel-level combinators (product/chain rules), used to compose
// analytic test fields and residual terms.
SpatialBatch spatial_add(ad::Tape& t, const SpatialBatch& a,
                         const SpatialBatch& b);
SpatialBatch spatial_mul(ad::Tape& t, const SpatialBatch& a,
                         const SpatialBatch& b);
SpatialBatch spatial_scale(ad::Tape& t, const SpatialBatch& a, double alpha);
SpatialBatch spatial_sin(ad::Tape& t, const SpatialBatch& a);

}  // namespace pilno::nn
