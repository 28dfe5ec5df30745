#include "pilno/lno.hpp"

namespace pilno::lno {

const char* conditioning_name(Conditioning c) {
  switch (c) {
    case Conditioning::none: return "none";
    case Conditioning::scalar_param: return "scalar";
    case Conditioning::pointwise_field: return "field";
  }
  return "none";
}

Conditioning conditioning_from_name(const std::string& s) {
  if (s == "none") return Conditioning::none;
  if (s == "scalar") return Conditioning::scalar_param;
  if (s == "field") return Conditioning::pointwise_field;
  throw ConfigError("unknown conditioning mode: " + s);
}

void LNOConfig::validate() const {
  if (layers < 1) throw ConfigError("layer count T must be >= 1");
  if (embedding_dim < 1 || rank < 1)
    throw ConfigError("embedding dim and rank must be >= 1");
  if (dim < 1) throw ConfigError("spatial dimension must be >= 1");
  if (embed_net.empty() || embed_net.back() != embedding_dim)
    throw ConfigError("embed net must output the embedding dimension");
  if (layers > 1 && (update_net.empty() || update_net.back() != embedding_dim))
    throw ConfigError("update net must output the embedding dimension");
  if (decoder_net.empty() || decoder_net.back() != 1)
    throw ConfigError("decoder net must output a scalar");
  if (scalar_scale <= 0 && conditioning == Conditioning::scalar_param)
    throw ConfigError("scalar conditioning scale must be positive");
}

LNOModel LNOModel::init(const LNOConfig& cfg, double domain_volume, Rng& rng) {
  cfg.validate();
  LNOModel m;
  m.config = cfg;
  m.domain_volume = domain_volume;
  m.embed = nn::MLPParams::init({1, cfg.embed_net, false}, rng);
  for (int t = 1; t < cfg.layers; ++t)
    m.update.push_back(
        nn::MLPParams::init({cfg.embedding_dim, cfg.update_net, false}, rng));
  m.decoder =
      nn::MLPParams::init({cfg.embedding_dim, cfg.decoder_net, true}, rng);
  const nn::MLPSpec kspec{cfg.kernel_input_dim(), cfg.kernel_layers(), true};
  for (int t = 1; t <= cfg.layers; ++t)
    m.psi.push_back(nn::MLPParams::init(kspec, rng));
  if (!cfg.symmetric)
    for (int t = 1; t <= cfg.layers; ++t)
      m.phi.push_back(nn::MLPParams::init(kspec, rng));
  for (int t = 1; t < cfg.layers; ++t)
    m.norms.push_back(nn::LayerNormParams::init(cfg.embedding_dim));
  return m;
}

nn::ParamRegistry build_registry(LNOModel& m) {
  nn::ParamRegistry reg;
  reg.add_mlp("embed", m.embed);
  for (size_t t = 0; t < m.update.size(); ++t)
    reg.add_mlp("update" + std::to_string(t + 1), m.update[t]);
  reg.add_mlp("decoder", m.decoder);
  for (size_t t = 0; t < m.psi.size(); ++t)
    reg.add_mlp("psi" + std::to_string(t + 1), m.psi[t]);
  for (size_t t = 0; t < m.phi.size(); ++t)
    reg.add_mlp("phi" + std::to_string(t + 1), m.phi[t]);
  for (size_t t = 0; t < m.norms.size(); ++t)
    reg.add_layer_norm("norm" + std::to_string(t + 1), m.norms[t]);
  return reg;
}

int64_t param_count(LNOModel& m) { return build_registry(m).total(); }

Mat kernel_input(const LNOConfig& cfg, const Mat& P, const CondInput& cond) {
  if (cond.kind != cfg.conditioning)
    throw ConfigError("conditioning input does not match the model config");
  switch (cfg.conditioning) {
    case Conditioning::none:
      return P;
    case Conditioning::scalar_param: {
      Mat out(P.rows(), P.cols() + 1);
      out.leftCols(P.cols()) = P;
      out.col(P.cols()).setConstant(cond.s / cfg.scalar_scale);
      return out;
    }
    case Conditioning::pointwise_field: {
      if (!cond.field) throw ConfigError("missing pointwise conditioning field");
      Mat out(P.rows(), P.cols() + 1);
      out.leftCols(P.cols()) = P;
      out.col(P.cols()) = cond.field->eval(P);
      return out;
    }
  }
  throw ConfigError("bad conditioning");
}

namespace {

Mat mlp_plain(const nn::MLPParams& p, const Mat& x, bool linear_output) {
  Mat h = x;
  for (size_t l = 0; l < p.W.size(); ++l) {
    Mat z = (h * p.W[l].transpose()).rowwise() + p.b[l].row(0);
    const bool last = (l + 1 == p.W.size());
    if (!last || !linear_output) z = z.array().tanh();
    h = std::move(z);
  }
  return h;
}

Mat layer_norm_plain(const nn::LayerNormParams& p, const Mat& x,
                     double eps = 1e-5) {
  Mat out(x.rows(), x.cols());
  const double cols = static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().sum() / cols;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    out.row(i) = ((x.row(i).array() - mu) * inv_std) * p.gain.row(0).array() +
                 p.bias.row(0).array();
  }
  return out;
}

}  // namespace

Mat kernel_features_psi(const LNOModel& m, int t, const Mat& P,
                        const CondInput& cond) {
  if (t < 1 || t > m.config.layers) throw ConfigError("kernel layer out of range");
  return mlp_plain(m.psi[t - 1], kernel_input(m.config, P, cond), true);
}

Mat kernel_features_phi(const LNOModel& m, int t, const Mat& P,
                        const CondInput& cond) {
  if (t < 1 || t > m.config.layers) throw ConfigError("kernel layer out of range");
  return mlp_plain(m.phi_net(t), kernel_input(m.config, P, cond), true);
}

Mat encode(const LNOModel& m, const Mat& X, const Vec& f_values,
           const CondInput& cond) {
  const int64_t n = X.rows();
  if (n < 1) throw ConfigError("encode requires at least one sensor point");
  if (f_values.size() != n)
    throw ConfigError("sensor value count does not match the point cloud");
  const double w = m.domain_volume / static_cast<double>(n);

  const Mat xc = kernel_input(m.config, X, cond);
  Vec fn = spline::normalize_inputs(f_values, m.input_mean, m.input_var);
  Mat v = mlp_plain(m.embed, fn, false);  // N x S
  for (int t = 1; t < m.config.layers; ++t) {
    const Mat psi_x = mlp_plain(m.psi[t - 1], xc, true);
    const Mat phi_x =
        m.config.symmetric ? psi_x : mlp_plain(m.phi[t - 1], xc, true);
    Mat h = v + w * (psi_x * (phi_x.transpose() * v));
    v = mlp_plain(m.update[t - 1], layer_norm_plain(m.norms[t - 1], h), false);
  }
  const Mat phi_T = mlp_plain(m.phi_net(m.config.layers), xc, true);
  Mat z = w * (phi_T.transpose() * v);
  if (!z.allFinite()) throw NumericError("encode produced non-finite values");
  return z;
}

Vec decode(const LNOModel& m, const Mat& z, const Mat& Y,
           const CondInput& cond) {
  if (z.rows() != m.config.rank || z.cols() != m.config.embedding_dim)
    throw ConfigError("latent code shape does not match the model");
  const Mat yc = kernel_input(m.config, Y, cond);
  const Mat psi_T = mlp_plain(m.psi[m.config.layers - 1], yc, true);
  Mat v_T = psi_T * z;  // M x S
  return mlp_plain(m.decoder, v_T, true).col(0);
}

Vec predict(const LNOModel& m, const Mat& X, const Vec& f_values, const Mat& Y,
            const CondInput& cond) {
  return decode(m, encode(m, X, f_values, cond), Y, cond);
}

LNOGraph bind_graph(ad::Tape& t, const LNOModel& m, bool needs_grad) {
  LNOGraph g;
  g.embed = nn::bind_mlp(t, m.embed, false, needs_grad, &g.all);
  for (const auto& u : m.update)
    g.update.push_back(nn::bind_mlp(t, u, false, needs_grad, &g.all));
  g.decoder = nn::bind_mlp(t, m.decoder, true, needs_grad, &g.all);
  for (const auto& k : m.psi)
    g.psi.push_back(nn::bind_mlp(t, k, true, needs_grad, &g.all));
  for (const auto& k : m.phi)
    g.phi.push_back(nn::bind_mlp(t, k, true, needs_grad, &g.all));
  for (const auto& ln : m.norms)
    g.norms.push_back(nn::bind_layer_norm(t, ln, needs_grad, &g.all));
  return g;
}

Vec gather_gradient(const ad::Tape& t, LNOModel& m, const LNOGraph& g) {
  nn::ParamRegistry reg = build_registry(m);
  const auto& entries = reg.entries();
  if (entries.size() != g.all.size())
    throw Error("graph binding does not match the registry");
  Vec out(reg.total());
  int64_t off = 0;
  for (size_t i = 0; i < entries.size(); ++i) {
    const int64_t n = entries[i].m->size();
    if (t.has_grad(g.all[i])) {
      const Mat& gm = t.grad(g.all[i]);
      out.segment(off, n) = Eigen::Map<const Vec>(gm.data(), gm.size());
    } else {
      // No path from this parameter to the loss: zero gradient.
      out.segment(off, n).setZero();
    }
    off += n;
  }
  return out;
}

EncoderFeatures encoder_features_graph(ad::Tape& t, const LNOModel& m,
                                       const LNOGraph& g, const Mat& X,
                                       const CondInput& cond) {
  EncoderFeatures f;
  const ad::Var xc = t.constant(kernel_input(m.config, X, cond));
  for (int layer = 1; layer <= m.config.layers; ++layer) {
    const ad::Var psi_x = nn::mlp_apply(t, g.psi[layer - 1], xc);
    f.psi_X.push_back(psi_x);
    f.phi_X.push_back(m.config.symmetric
                          ? psi_x
                          : nn::mlp_apply(t, g.phi[layer - 1], xc));
  }
  return f;
}

ad::Var encode_graph(ad::Tape& t, const LNOModel& m, const LNOGraph& g,
                     const EncoderFeatures& feats, const Vec& f_values,
                     int64_t n_sensors) {
  const double w = m.domain_volume / static_cast<double>(n_sensors);
  const Vec fn = spline::normalize_inputs(f_values, m.input_mean, m.input_var);
  ad::Var v = nn::mlp_apply(t, g.embed, t.constant(fn));
  for (int layer = 1; layer < m.config.layers; ++layer) {
    ad::Var conv = t.scale(
        t.matmul(feats.psi_X[layer - 1], t.matmul_tn(feats.phi_X[layer - 1], v)),
        w);
    ad::Var h = t.add(v, conv);
    v = nn::mlp_apply(t, g.update[layer - 1],
                      nn::layer_norm_apply(t, g.norms[layer - 1], h));
  }
  return t.scale(t.matmul_tn(feats.phi_X[m.config.layers - 1], v), w);
}

namespace {

// Spatial seeds for the decoder input block [Y | cond]: coordinate
// columns carry identity first-derivative seeds; a pointwise field column
// carries its analytic first/second derivatives; a scalar column is
// spatially constant.
nn::SpatialBatch decoder_input_spatial(ad::Tape& t, const LNOConfig& cfg,
                                       const Mat& Y, const CondInput& cond) {
  const int d = static_cast<int>(Y.cols());
  const int64_t mrows = Y.rows();
  Mat inputs = kernel_input(cfg, Y, cond);
  const int cols = static_cast<int>(inputs.cols());
  std::vector<Mat> d1(d, Mat::Zero(mrows, cols)), d2(d, Mat::Zero(mrows, cols));
  for (int i = 0; i < d; ++i) d1[i].col(i).setOnes();
  if (cfg.conditioning == Conditioning::pointwise_field) {
    Vec cv;
    Mat cg, ch;
    cond.field->eval_with_derivatives(Y, cv, cg, ch);
    for (int i = 0; i < d; ++i) {
      d1[i].col(cols - 1) = cg.col(i);
      d2[i].col(cols - 1) = ch.col(i);
    }
  }
  return nn::spatial_seed(t, inputs, d1, d2);
}

}  // namespace

nn::SpatialBatch decoder_features_spatial(ad::Tape& t, const LNOModel& m,
                                          const LNOGraph& g, const Mat& Y,
                                          const CondInput& cond) {
  nn::SpatialBatch in = decoder_input_spatial(t, m.config, Y, cond);
  return nn::mlp_apply_spatial(t, g.psi[m.config.layers - 1], in);
}

nn::SpatialBatch decode_graph_spatial(ad::Tape& t, const LNOModel& m,
                                      const LNOGraph& g,
                                      const nn::SpatialBatch& feats_y,
                                      ad::Var z) {
  nn::SpatialBatch v_T = nn::matmul_spatial(t, feats_y, z);
  return nn::mlp_apply_spatial(t, g.decoder, v_T);
}

ad::Var decoder_features_plain(ad::Tape& t, const LNOModel& m,
                               const LNOGraph& g, const Mat& Y,
                               const CondInput& cond) {
  const ad::Var yc = t.constant(kernel_input(m.config, Y, cond));
  return nn::mlp_apply(t, g.psi[m.config.layers - 1], yc);
}

ad::Var decode_graph_values(ad::Tape& t, const LNOModel& m, const LNOGraph& g,
                            ad::Var feats_y, ad::Var z) {
  return nn::mlp_apply(t, g.decoder, t.matmul(feats_y, z));
}

}  // namespace pilno::lno
