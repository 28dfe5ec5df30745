#include "pilno/losses.hpp"

#include <cmath>

namespace pilno::losses {

const char* task_name(Task t) {
  switch (t) {
    case Task::fit: return "fitting";
    case Task::poisson: return "poisson";
    case Task::screened_poisson: return "screened_poisson";
    case Task::darcy: return "darcy";
  }
  return "fitting";
}

Task task_from_name(const std::string& s) {
  if (s == "fitting") return Task::fit;
  if (s == "poisson") return Task::poisson;
  if (s == "screened_poisson") return Task::screened_poisson;
  if (s == "darcy") return Task::darcy;
  throw ConfigError("unknown task: " + s);
}

bool task_is_pde(Task t) { return t != Task::fit; }

double PenaltySchedule::at(int64_t step) const {
  if (step < 0) throw ConfigError("negative step");
  if (doubling_interval < 1) throw ConfigError("doubling interval must be >= 1");
  int64_t e = step / doubling_interval;
  if (e > 4000) e = 4000;
  const double lam = std::ldexp(lambda0, static_cast<int>(e));
  return std::min(lam, lambda_max);
}

lno::CondInput TrainingBatch::cond(Task task, int64_t i) const {
  switch (task) {
    case Task::fit:
    case Task::poisson:
      return lno::CondInput::none();
    case Task::screened_poisson:
      if (i >= static_cast<int64_t>(s.size()))
        throw ConfigError("missing scalar conditioning value");
      return lno::CondInput::scalar(s[i]);
    case Task::darcy:
      if (i >= static_cast<int64_t>(c.size()))
        throw ConfigError("missing coefficient field");
      return lno::CondInput::pointwise(&c[i]);
  }
  return lno::CondInput::none();
}

ad::Var residual_graph(ad::Tape& t, Task task, const nn::SpatialBatch& u,
                       const Vec& f_at_y, double s, const Vec* c_at_y,
                       const Mat* grad_c_at_y) {
  const ad::Var f = t.constant(f_at_y);
  const ad::Var lap = nn::laplacian(t, u);
  switch (task) {
    case Task::fit:
      throw ConfigError("fitting task has no PDE residual");
    case Task::poisson:
      return t.sub(t.neg(lap), f);
    case Task::screened_poisson: {
      if (s < 0) throw ConfigError("screening coefficient must be >= 0");
      ad::Var r = t.sub(t.neg(lap), f);
      if (s != 0.0) r = t.add(r, t.scale(u.val, s));
      return r;
    }
    case Task::darcy: {
      if (!c_at_y || !grad_c_at_y)
        throw ConfigError("darcy residual needs the coefficient field at Y");
      const ad::Var cv = t.constant(*c_at_y);
      ad::Var flux = t.hadamard(cv, lap);  // c lap(u)
      for (int i = 0; i < u.dims(); ++i)
        flux = t.add(flux,
                     t.hadamard(t.constant(grad_c_at_y->col(i)), u.d1[i]));
      return t.sub(t.neg(flux), f);
    }
  }
  throw ConfigError("bad task");
}

namespace {

ad::Var mean_over(ad::Tape& t, const std::vector<ad::Var>& xs) {
  ad::Var acc = xs.at(0);
  for (size_t i = 1; i < xs.size(); ++i) acc = t.add(acc, xs[i]);
  return t.scale(acc, 1.0 / static_cast<double>(xs.size()));
}

}  // namespace

StepLosses build_step_losses(ad::Tape& t, const lno::LNOModel& m,
                             const lno::LNOGraph& g, Task task,
                             const TrainingBatch& batch, double lambda) {
  const int64_t p = batch.size();
  if (p < 1) throw ConfigError("batch must contain at least one instance");
  if (task_is_pde(task) && batch.Yb.rows() < 1)
    throw ConfigError("PDE training requires boundary points");

  const bool shared_cond = (task == Task::fit || task == Task::poisson);

  // Shared features when all instances see the same kernel inputs.
  std::optional<lno::EncoderFeatures> enc_shared;
  std::optional<nn::SpatialBatch> dec_shared;
  ad::Var bnd_shared;
  if (shared_cond) {
    const auto cond = lno::CondInput::none();
    enc_shared = lno::encoder_features_graph(t, m, g, batch.X, cond);
    if (task == Task::fit) {
      bnd_shared = lno::decoder_features_plain(t, m, g, batch.Y, cond);
    } else {
      dec_shared = lno::decoder_features_spatial(t, m, g, batch.Y, cond);
      bnd_shared = lno::decoder_features_plain(t, m, g, batch.Yb, cond);
    }
  }

  std::vector<ad::Var> pde_terms, b_terms, mse_terms;
  for (int64_t i = 0; i < p; ++i) {
    const lno::CondInput cond = batch.cond(task, i);
    const Vec f_at_x = batch.f[i].eval(batch.X);

    lno::EncoderFeatures enc_i;
    if (!shared_cond)
      enc_i = lno::encoder_features_graph(t, m, g, batch.X, cond);
    const lno::EncoderFeatures& enc = shared_cond ? *enc_shared : enc_i;
    const ad::Var z = lno::encode_graph(t, m, g, enc, f_at_x, batch.X.rows());

    if (task == Task::fit) {
      const ad::Var u = lno::decode_graph_values(t, m, g, bnd_shared, z);
      const ad::Var target = t.constant(batch.f[i].eval(batch.Y));
      mse_terms.push_back(t.mean_sq(t.sub(u, target)));
      continue;
    }

    nn::SpatialBatch dec_i;
    if (!shared_cond)
      dec_i = lno::decoder_features_spatial(t, m, g, batch.Y, cond);
    const nn::SpatialBatch& dec = shared_cond ? *dec_shared : dec_i;
    const nn::SpatialBatch u = lno::decode_graph_spatial(t, m, g, dec, z);

    const Vec f_at_y = batch.f[i].eval(batch.Y);
    ad::Var r;
    if (task == Task::darcy) {
      Vec cv;
      Mat cg, ch;
      batch.c[i].eval_with_derivatives(batch.Y, cv, cg, ch);
      r = residual_graph(t, task, u, f_at_y, 0.0, &cv, &cg);
    } else {
      const double s = (task == Task::screened_poisson) ? batch.s[i] : 0.0;
      r = residual_graph(t, task, u, f_at_y, s);
    }
    pde_terms.push_back(t.mean_sq(r));

    const ad::Var bnd =
        shared_cond ? bnd_shared
                    : lno::decoder_features_plain(t, m, g, batch.Yb, cond);
    const ad::Var ub = lno::decode_graph_values(t, m, g, bnd, z);
    b_terms.push_back(t.mean_sq(ub));
  }

  StepLosses out;
  out.lambda = lambda;
  if (task == Task::fit) {
    out.total = mean_over(t, mse_terms);
    out.j_pde = out.total;
    out.j_b = t.scale(out.total, 0.0);
  } else {
    out.j_pde = mean_over(t, pde_terms);
    out.j_b = mean_over(t, b_terms);
    out.total = t.add(out.j_pde, t.scale(out.j_b, lambda));
  }
  return out;
}

namespace {

StepLosses eval_losses(const lno::LNOModel& m, Task task,
                       const TrainingBatch& batch, double lambda,
                       ad::Tape& t) {
  const lno::LNOGraph g = lno::bind_graph(t, m, false);
  return build_step_losses(t, m, g, task, batch, lambda);
}

}  // namespace

double j_pde(const lno::LNOModel& m, Task task, const TrainingBatch& batch) {
  ad::Tape t;
  return t.val(eval_losses(m, task, batch, 0.0, t).j_pde)(0, 0);
}

double j_b(const lno::LNOModel& m, Task task, const TrainingBatch& batch) {
  ad::Tape t;
  return t.val(eval_losses(m, task, batch, 0.0, t).j_b)(0, 0);
}

double j_pi(const lno::LNOModel& m, Task task, const TrainingBatch& batch,
            double lambda) {
  ad::Tape t;
  return t.val(eval_losses(m, task, batch, lambda, t).total)(0, 0);
}

double j_mse(const lno::LNOModel& m, const TrainingBatch& batch) {
  ad::Tape t;
  return t.val(eval_losses(m, Task::fit, batch, 0.0, t).total)(0, 0);
}

Vec residual(const lno::LNOModel& m, Task task, const Mat& X,
             const spline::SplineFunction& f, const lno::CondInput& cond,
             const Mat& Y) {
  ad::Tape t;
  const lno::LNOGraph g = lno::bind_graph(t, m, false);
  const lno::EncoderFeatures enc =
      lno::encoder_features_graph(t, m, g, X, cond);
  const ad::Var z = lno::encode_graph(t, m, g, enc, f.eval(X), X.rows());
  const nn::SpatialBatch feats =
      lno::decoder_features_spatial(t, m, g, Y, cond);
  const nn::SpatialBatch u = lno::decode_graph_spatial(t, m, g, feats, z);
  const Vec f_at_y = f.eval(Y);
  ad::Var r;
  if (task == Task::darcy) {
    Vec cv;
    Mat cg, ch;
    cond.field->eval_with_derivatives(Y, cv, cg, ch);
    r = residual_graph(t, task, u, f_at_y, 0.0, &cv, &cg);
  } else {
    r = residual_graph(t, task, u, f_at_y, cond.s);
  }
  return t.val(r).col(0);
}

}  // namespace pilno::losses
