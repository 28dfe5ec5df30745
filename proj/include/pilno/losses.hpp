#pragma once

#include <vector>

#include "pilno/lno.hpp"

namespace pilno::losses {

// fit trains against sampled function values (mean squared error); the
// PDE tasks train the physics-informed objective.
enum class Task { fit, poisson, screened_poisson, darcy };

const char* task_name(Task t);
Task task_from_name(const std::string& s);
bool task_is_pde(Task t);

// lambda(step) = min(lambda0 * 2^floor(step / interval), lambda_max)
struct PenaltySchedule {
  double lambda0 = 0.1;
  int64_t doubling_interval = 1000;
  double lambda_max = 1000.0;

  double at(int64_t step) const;
};

// One training batch: p sampled instances over shared point clouds.
struct TrainingBatch {
  Mat X;   // sensor points, N x d
  Mat Y;   // interior target points, M x d
  Mat Yb;  // boundary points (may be empty for fitting)
  std::vector<spline::SplineFunction> f;  // p source functions
  std::vector<double> s;                  // screened: p scalar parameters
  std::vector<spline::SplineFunction> c;  // darcy: p coefficient fields

  int64_t size() const { return static_cast<int64_t>(f.size()); }
  lno::CondInput cond(Task task, int64_t i) const;
};

// PDE residual at target points for a field with derivative channels.
// poisson:   r = -lap(u) - f
// screened:  r = -lap(u) + s u - f      (s = 0 reduces to poisson exactly)
// darcy:     r = -(grad c . grad u + c lap(u)) - f, grad c analytic
ad::Var residual_graph(ad::Tape& t, Task task, const nn::SpatialBatch& u,
                       const Vec& f_at_y, double s = 0.0,
                       const Vec* c_at_y = nullptr,
                       const Mat* grad_c_at_y = nullptr);

// All scalar losses of one batch as tape nodes.
struct StepLosses {
  ad::Var j_pde;   // PDE tasks; mean squared residual
  ad::Var j_b;     // PDE tasks; mean squared boundary value
  ad::Var total;   // j_pde + lambda j_b, or j_mse for fitting
  double lambda = 0.0;
};

// Builds encoder/decoder features (shared across the batch whenever the
// conditioning input is shared), applies the model to every instance and
// assembles the objective.
StepLosses build_step_losses(ad::Tape& t, const lno::LNOModel& m,
                             const lno::LNOGraph& g, Task task,
                             const TrainingBatch& batch, double lambda);

// Scalar conveniences (forward-only evaluation on a fresh tape).
double j_pde(const lno::LNOModel& m, Task task, const TrainingBatch& batch);
double j_b(const lno::LNOModel& m, Task task, const TrainingBatch& batch);
double j_pi(const lno::LNOModel& m, Task task, const TrainingBatch& batch,
            double lambda);
double j_mse(const lno::LNOModel& m, const TrainingBatch& batch);

// Residual values of the model prediction for one instance.
Vec residual(const lno::LNOModel& m, Task task, const Mat& X,
             const spline::SplineFunction& f, const lno::CondInput& cond,
             const Mat& Y);

}  // namespace pilno::losses
