#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pipegrid/attack_chain.hpp"
#include "pipegrid/gas_network.hpp"
#include "pipegrid/pwl.hpp"

namespace pipegrid {

/// State of the lumped-element model: densities at demand nodes and mid-pipe
/// mass flux Phi = (phi_0 + phi_L)/2 per pipe. Nondimensional.
struct GasState {
    Eigen::VectorXd rho;  // n_demand
    Eigen::VectorXd flux; // n_pipes

    Eigen::VectorXd stacked() const;
    static GasState from_stacked(const Eigen::VectorXd& x, int n_demand);
};

/// Time profiles driving the DAE. alpha per compressor (compressor_pipes()
/// order), demand per demand node (demand_nodes() order, nondimensional flow,
/// positive = withdrawal), slack density per slack node. Time in hours.
struct ControlSignal {
    std::vector<PwlProfile> alpha;
    std::vector<PwlProfile> demand;
    std::vector<PwlProfile> slack_density;

    static ControlSignal neutral(const GasNetwork& net);
};

/// Control values at one instant, with slack-density rate per nondimensional
/// time unit (what the mass-balance equation consumes).
struct ControlsAt {
    Eigen::VectorXd alpha_full; // per pipe, 1 on plain pipes
    Eigen::VectorXd demand;     // per demand node
    Eigen::VectorXd s;          // per slack node
    Eigen::VectorXd sdot;       // per slack node, d s / d t_nd
};

ControlsAt controls_at(const GasNetwork& net, const ControlSignal& u, double t_hours);

/// Residual F(xdot, x, u) of the mass-balance and momentum equations.
/// xdot is with respect to nondimensional time.
Eigen::VectorXd dae_residual(const GasNetwork& net, const Eigen::VectorXd& xdot,
                             const GasState& x, const ControlsAt& u);

/// d F / d x + shift * d F / d xdot, for Newton iterations.
Eigen::MatrixXd dae_jacobian(const GasNetwork& net, const GasState& x, const ControlsAt& u,
                             double shift);

/// d F / d alpha for the compressor ratios, (n_demand + n_pipes) x n_compressors.
Eigen::MatrixXd dae_alpha_jacobian(const GasNetwork& net, const Eigen::VectorXd& xdot,
                                   const GasState& x, const ControlsAt& u);

/// Multiplier-weighted second derivatives of the residual, grouped by the
/// variable kinds they couple. Needed by the optimal control transcription.
struct DaeHessian {
    Eigen::MatrixXd xx;  // state-state
    Eigen::MatrixXd xa;  // state-alpha
    Eigen::MatrixXd aa;  // alpha-alpha
    Eigen::MatrixXd dxa; // xdot-alpha
};
DaeHessian dae_weighted_hessian(const GasNetwork& net, const Eigen::VectorXd& xdot,
                                const GasState& x, const ControlsAt& u,
                                const Eigen::VectorXd& mult);

struct SteadyOptions {
    double tol = 1e-10;
    int max_iter = 60;
};

GasState solve_steady_state(const GasNetwork& net, const ControlsAt& u,
                            const SteadyOptions& opt = {});
GasState solve_steady_state(const GasNetwork& net, const ControlSignal& u, double t_hours = 0.0,
                            const SteadyOptions& opt = {});

struct IntegrateOptions {
    double atol = 1e-5;
    double rtol = 1e-6;
    double output_dt_hours = 1.0 / 12.0; // 5-minute grid
    int max_steps = 4000000;
};

struct GasTrajectory {
    std::vector<double> times; // output grid, hours
    std::vector<GasState> states;
    ControlSignal controls;

    // accepted integrator steps (hours; xdot per nondimensional time)
    std::vector<double> step_times;
    std::vector<Eigen::VectorXd> step_x;
    std::vector<Eigen::VectorXd> step_xdot;

    GasState state_at(double t_hours, const GasNetwork& net) const;
};

GasTrajectory integrate(const GasNetwork& net, const GasState& x0, const ControlSignal& u,
                        double horizon_hours, const IntegrateOptions& opt = {});

/// Sets the targeted compressor's boost ratio to 1 inside the window; other
/// controls untouched.
ControlSignal apply_contingency(const GasNetwork& net, const ControlSignal& u,
                                const ContingencyWindow& w);
ControlSignal apply_contingency(const GasNetwork& net, const ControlSignal& u,
                                const std::vector<ContingencyWindow>& windows);

struct PressureViolation {
    std::string node;
    double t_start = 0.0; // h
    double t_end = 0.0;   // h
    double worst_density = 0.0;
};

/// Maximal intervals of the output grid where a nodal density sits below its
/// minimum bound.
std::vector<PressureViolation> min_pressure_violations(const GasTrajectory& traj,
                                                       const GasNetwork& net);

/// Pipe inventory sum_e X_e Lambda_e (alpha_e rho_from + rho_to)/2 at one state.
double linepack(const GasNetwork& net, const GasState& x, const ControlsAt& u);

/// Withdrawal implied at the slack nodes by the trajectory (negative = supply),
/// reconstructed from the stored state derivative.
Eigen::VectorXd implied_slack_withdrawal(const GasNetwork& net, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& xdot, const ControlsAt& u);

struct MassBalanceReport {
    double linepack_change = 0.0;    // linepack(T) - linepack(0)
    double net_injection = 0.0;      // integral of supply minus withdrawals
    double defect() const { return linepack_change - net_injection; }
};

MassBalanceReport mass_balance_report(const GasNetwork& net, const GasTrajectory& traj);

} // namespace pipegrid
