#pragma once

#include <vector>

#include "pipegrid/gas_transient.hpp"
#include "pipegrid/nlp.hpp"

namespace pipegrid {

struct TogfOptions {
    int n_grid = 25;
    double horizon_hours = 24.0;
    bool periodic = true;       // wrap x and alpha around the horizon; when
                                // false the start state is held at the initial
                                // steady operating point instead
    bool free_demand = false;   // withdrawals become variables inside node bounds
    bool discharge_cap = true;  // alpha * rho_suction <= rho_max at the suction node
    double smooth_eps = 1e-8;   // |x| smoothing inside the solver objective
    NlpOptions nlp;
};

struct TogfResult {
    std::vector<double> times; // hours, collocation grid
    std::vector<GasState> states;
    std::vector<Eigen::VectorXd> alpha; // per grid point, compressor order
    ControlSignal controls;             // piecewise-linear view of the solution
    double objective = 0.0;             // compression energy, exact absolute value
    double objective_smooth = 0.0;      // value seen by the solver
    double kkt_stationarity = 0.0;
    double kkt_feasibility = 0.0;
    double kkt_complementarity = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Minimum-energy boost schedule meeting the withdrawal profiles. Demands are
/// nondimensional, one profile per demand node.
TogfResult solve_togf(const GasNetwork& net, const std::vector<PwlProfile>& demand,
                      const TogfOptions& opt = {});

/// Grid-resolution trajectory of a TOGF solution, usable by the same metric
/// helpers as an integrated trajectory.
GasTrajectory togf_trajectory(const GasNetwork& net, const TogfResult& r);

/// Integral (A_e/eta_e) |Phi_e| (alpha_e^kappa - 1) over the horizon, per
/// compressor, trapezoid on the trajectory's output grid. Nondimensional.
Eigen::VectorXd compressor_energy(const GasNetwork& net, const GasTrajectory& traj);

/// Watts corresponding to one nondimensional unit of compression power.
double compressor_power_scale(const GasNetwork& net);

} // namespace pipegrid
