#include <cmath>

#include "dcm/errors.hpp"
#include "dcm/solvers.hpp"

namespace dcm {

StepProblem::StepProblem(Eigen::VectorXd stiffness, Eigen::VectorXd anchor, ExternalLoad load,
                         LoadTreatment treatment, Eigen::VectorXd expansion_point, Eigen::VectorXd forcing)
    : stiffness_(std::move(stiffness)),
      anchor_(std::move(anchor)),
      point_(std::move(expansion_point)),
      forcing_(std::move(forcing)),
      load_(std::move(load)),
      treatment_(treatment) {
  const Eigen::Index n = stiffness_.size();
  if (n == 0 || n % 2 != 0) throw ValidationError("step problem: dimension must be a positive even number");
  if (anchor_.size() != n || point_.size() != n) throw ValidationError("step problem: dimension mismatch");
  if (forcing_.size() == 0) forcing_ = Eigen::VectorXd::Zero(n);
  if (forcing_.size() != n) throw ValidationError("step problem: forcing has the wrong dimension");
  if (!(stiffness_.minCoeff() > 0.0)) throw SolverError("step problem: stiffness must be positive (zero theta)");
  if (!load_.value || !load_.gradient) throw ValidationError("step problem: load is missing value or gradient");
  load_at_point_ = load_.value(point_);
  grad_at_point_ = load_.gradient(point_);
  grad_scale_ = grad_at_point_.norm();
  if (treatment_ == LoadTreatment::linearized) {
    closed_form_ = true;
    diag_ = stiffness_;
    linear_ = stiffness_.cwiseProduct(anchor_) - grad_at_point_ - forcing_;
  } else if (load_.curvature) {
    const double h = *load_.curvature;
    closed_form_ = true;
    diag_ = stiffness_.array() + h;
    linear_ = stiffness_.cwiseProduct(anchor_) - grad_at_point_ + h * point_ - forcing_;
  }
}

double StepProblem::model_load(const Eigen::VectorXd& q) const {
  if (treatment_ == LoadTreatment::linearized) return load_at_point_ + grad_at_point_.dot(q - point_);
  return load_.value(q);
}

Eigen::VectorXd StepProblem::model_load_gradient(const Eigen::VectorXd& q) const {
  if (treatment_ == LoadTreatment::linearized) return grad_at_point_;
  return load_.gradient(q);
}

double StepProblem::objective(const Eigen::VectorXd& q) const {
  return 0.5 * stiffness_.dot((q - anchor_).cwiseAbs2()) + model_load(q) + forcing_.dot(q);
}

Eigen::VectorXd StepProblem::gradient(const Eigen::VectorXd& q) const {
  return stiffness_.cwiseProduct(q - anchor_) + model_load_gradient(q) + forcing_;
}

Eigen::MatrixXd StepProblem::hessian(const Eigen::VectorXd& q) const {
  if (closed_form_) return diag_.asDiagonal();
  const Eigen::Index n = q.size();
  Eigen::MatrixXd H(n, n);
  Eigen::VectorXd x = q;
  for (Eigen::Index c = 0; c < n; ++c) {
    const double h = 1e-6 * std::max(1.0, std::abs(q[c]));
    x[c] = q[c] + h;
    const Eigen::VectorXd gp = load_.gradient(x);
    x[c] = q[c] - h;
    const Eigen::VectorXd gm = load_.gradient(x);
    x[c] = q[c];
    H.col(c) = (gp - gm) / (2.0 * h);
  }
  H = 0.5 * (H + H.transpose()).eval();
  H.diagonal() += stiffness_;
  return H;
}

StepProblem make_step_problem(const EnergyContext& ctx, const ExternalLoad& load, LoadTreatment treatment,
                              const Eigen::VectorXd& forcing) {
  const Eigen::VectorXd& theta = ctx.theta();
  if (!(theta.size() > 0 && theta.minCoeff() > 0.0))
    throw SolverError("zero theta: the bond density is empty for at least one particle");
  Eigen::VectorXd stiffness = theta / ctx.epsilon();
  Eigen::VectorXd anchor = ctx.targets().cwiseQuotient(theta);
  return StepProblem(std::move(stiffness), std::move(anchor), load, treatment, ctx.history().back(0), forcing);
}

}  // namespace dcm
