#pragma once

#include <optional>
#include <vector>

#include "pilno/geometry.hpp"
#include "pilno/nn.hpp"
#include "pilno/spline.hpp"
#include "pilno/tape.hpp"

namespace pilno::lno {

enum class Conditioning { none, scalar_param, pointwise_field };

const char* conditioning_name(Conditioning c);
Conditioning conditioning_from_name(const std::string& s);

struct LNOConfig {
  int embedding_dim = 50;  // S
  int rank = 200;          // R
  int layers = 7;          // T
  bool symmetric = true;
  Conditioning conditioning = Conditioning::none;
  double scalar_scale = 30.0;  // divisor for scalar conditioning input
  int dim = 2;
  std::vector<int> embed_net = {50, 50, 50};    // N_0, input 1
  std::vector<int> update_net = {50, 50};       // N_t, input S
  std::vector<int> decoder_net = {50, 10, 1};   // N_T, input S
  std::vector<int> kernel_hidden = {50, 50, 50};  // psi/phi before the R output

  int kernel_input_dim() const {
    return dim + (conditioning == Conditioning::none ? 0 : 1);
  }
  std::vector<int> kernel_layers() const {
    auto l = kernel_hidden;
    l.push_back(rank);
    return l;
  }
  void validate() const;
};

// Per-instance conditioning input.
struct CondInput {
  Conditioning kind = Conditioning::none;
  double s = 0.0;                                  // scalar_param
  const spline::SplineFunction* field = nullptr;   // pointwise_field

  static CondInput none() { return {}; }
  static CondInput scalar(double value) {
    return CondInput{Conditioning::scalar_param, value, nullptr};
  }
  static CondInput pointwise(const spline::SplineFunction* c) {
    return CondInput{Conditioning::pointwise_field, 0.0, c};
  }
};

struct LNOModel {
  LNOConfig config;
  nn::MLPParams embed;                      // tanh output
  std::vector<nn::MLPParams> update;        // T-1 nets, tanh output
  nn::MLPParams decoder;                    // linear output
  std::vector<nn::MLPParams> psi;           // T kernel nets, linear output
  std::vector<nn::MLPParams> phi;           // empty when symmetric
  std::vector<nn::LayerNormParams> norms;   // T-1
  double input_mean = 0.0;                  // frozen normalization stats
  double input_var = 1.0;
  double domain_volume = 1.0;

  static LNOModel init(const LNOConfig& cfg, double domain_volume, Rng& rng);

  const nn::MLPParams& phi_net(int t) const {  // t in 1..T
    return config.symmetric ? psi[t - 1] : phi[t - 1];
  }
};

// Registration (= flatten/checkpoint) order: embed, update nets, decoder,
// psi_1..psi_T, phi_1..phi_T (asymmetric only), layer norms.
nn::ParamRegistry build_registry(LNOModel& model);

int64_t param_count(LNOModel& model);

// Kernel net input block [P | cond] for a point matrix P.
Mat kernel_input(const LNOConfig& cfg, const Mat& P, const CondInput& cond);

// ---- plain (tape-free) forward paths ----

Mat kernel_features_psi(const LNOModel& m, int t, const Mat& P,
                        const CondInput& cond);
Mat kernel_features_phi(const LNOModel& m, int t, const Mat& P,
                        const CondInput& cond);

// z_T, an R x S matrix.
Mat encode(const LNOModel& m, const Mat& X, const Vec& f_values,
           const CondInput& cond = CondInput::none());

Vec decode(const LNOModel& m, const Mat& z, const Mat& Y,
           const CondInput& cond = CondInput::none());

Vec predict(const LNOModel& m, const Mat& X, const Vec& f_values, const Mat& Y,
            const CondInput& cond = CondInput::none());

// ---- tape graph builders (training / derivative paths) ----

struct LNOGraph {
  nn::MLPVars embed;
  std::vector<nn::MLPVars> update;
  nn::MLPVars decoder;
  std::vector<nn::MLPVars> psi;
  std::vector<nn::MLPVars> phi;
  std::vector<nn::LayerNormVars> norms;
  std::vector<ad::Var> all;  // aligned with build_registry order

  const nn::MLPVars& phi_vars(int t, bool symmetric) const {
    return symmetric ? psi[t - 1] : phi[t - 1];
  }
};

LNOGraph bind_graph(ad::Tape& t, const LNOModel& m, bool needs_grad);

// Flattened gradient aligned with build_registry order (zeros for
// parameters without a path to the loss).
Vec gather_gradient(const ad::Tape& t, LNOModel& m, const LNOGraph& g);

// Encoder kernel features for a fixed sensor cloud; shared across batch
// instances whenever the conditioning input is shared.
struct EncoderFeatures {
  std::vector<ad::Var> psi_X;  // per layer t=1..T (psi_X[T-1] unused by encode)
  std::vector<ad::Var> phi_X;  // per layer t=1..T
};

EncoderFeatures encoder_features_graph(ad::Tape& t, const LNOModel& m,
                                       const LNOGraph& g, const Mat& X,
                                       const CondInput& cond);

ad::Var encode_graph(ad::Tape& t, const LNOModel& m, const LNOGraph& g,
                     const EncoderFeatures& feats, const Vec& f_values,
                     int64_t n_sensors);

// Decoder features psi_T(Y) with spatial-derivative channels.
nn::SpatialBatch decoder_features_spatial(ad::Tape& t, const LNOModel& m,
                                          const LNOGraph& g, const Mat& Y,
                                          const CondInput& cond);

// u(Y) with value/gradient/Laplacian channels from shared features.
nn::SpatialBatch decode_graph_spatial(ad::Tape& t, const LNOModel& m,
                                      const LNOGraph& g,
                                      const nn::SpatialBatch& feats_y,
                                      ad::Var z);

// Plain decoder features (values only), e.g. for boundary points.
ad::Var decoder_features_plain(ad::Tape& t, const LNOModel& m,
                               const LNOGraph& g, const Mat& Y,
                               const CondInput& cond);

ad::Var decode_graph_values(ad::Tape& t, const LNOModel& m, const LNOGraph& g,
                            ad::Var feats_y, ad::Var z);

}  // namespace pilno::lno
