#pragma once

#include <limits>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "pipegrid/errors.hpp"

namespace pipegrid {

using SpMat = Eigen::SparseMatrix<double>;

/// Problem in the form  min f(z)  s.t.  c(z) = 0,  g(z) <= 0.
class NlpModel {
public:
    virtual ~NlpModel() = default;
    virtual int num_vars() const = 0;
    virtual int num_eq() const = 0;
    virtual int num_ineq() const = 0;
    virtual double objective(const Eigen::VectorXd& z) const = 0;
    virtual Eigen::VectorXd gradient(const Eigen::VectorXd& z) const = 0;
    virtual Eigen::VectorXd eq_residual(const Eigen::VectorXd& z) const = 0;
    virtual SpMat eq_jacobian(const Eigen::VectorXd& z) const = 0;
    virtual Eigen::VectorXd ineq_residual(const Eigen::VectorXd& z) const = 0;
    virtual SpMat ineq_jacobian(const Eigen::VectorXd& z) const = 0;
    /// Hessian of f + lam.c + w.g; full symmetric matrix.
    virtual SpMat lagrangian_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& lam,
                                     const Eigen::VectorXd& w) const = 0;
};

struct NlpOptions {
    double tol = 1e-6;  // stationarity, feasibility, complementarity (unscaled)
    int max_iter = 500;
    double mu_shrink = 0.2;
    bool require_convergence = false; // throw instead of returning converged=false
};

struct NlpResult {
    Eigen::VectorXd z;
    Eigen::VectorXd lam_eq;
    Eigen::VectorXd lam_in;
    Eigen::VectorXd slack;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    double stationarity = 0.0;
    double feasibility = 0.0;
    double complementarity = 0.0;
};

/// Primal-dual interior point method with slack variables for inequalities,
/// a filter line search, and inertia-free regularization.
NlpResult solve_nlp(const NlpModel& model, const Eigen::VectorXd& z0, const NlpOptions& opt = {});

constexpr double kInf = std::numeric_limits<double>::infinity();

/// min c.z + c0  s.t.  A_eq z = b_eq,  A_in z <= b_in,  lb <= z <= ub.
/// Empty lb/ub mean unbounded; otherwise they must have one entry per variable.
struct LinearProgram {
    Eigen::VectorXd c;
    double c0 = 0.0;
    SpMat A_eq;
    Eigen::VectorXd b_eq;
    SpMat A_in;
    Eigen::VectorXd b_in;
    Eigen::VectorXd lb;
    Eigen::VectorXd ub;
};

struct LpResult {
    Eigen::VectorXd z;
    double objective = 0.0;
    bool converged = false;
    int iterations = 0;
    Eigen::VectorXd lam_eq; // equality row duals
    Eigen::VectorXd lam_in; // duals of the A_in rows only
};

LpResult solve_lp(const LinearProgram& lp, const NlpOptions& opt = {});

} // namespace pipegrid
