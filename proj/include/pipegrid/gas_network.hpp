#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pipegrid/errors.hpp"
#include "pipegrid/pwl.hpp"

namespace pipegrid {

/// Scales used for the non-dimensional transformation: densities by rho0,
/// fluxes by rho0*c, lengths by ell, time by ell/c, mass flows by rho0*c*area.
struct GasScaling {
    double rho0 = 45.0;     // kg/m^3
    double c = 377.0;       // m/s, isothermal sound speed (p = c^2 rho)
    double ell = 50000.0;   // m
    double area_ref = 1.0;  // m^2

    double seconds_per_time_unit() const { return ell / c; }
    double hours_per_time_unit() const { return ell / c / 3600.0; }
    double pressure_pa(double rho_nd) const { return c * c * rho_nd * rho0; }
    double massflow_unit() const { return rho0 * c * area_ref; } // kg/s
};

/// Node of the pipeline graph. Bounds and boundary data are stored
/// non-dimensional; loaders convert from SI.
struct GasNode {
    std::string id;
    double rho_min = 0.0;
    double rho_max = 0.0;
    double withdrawal_min = 0.0; // d_min <= d <= d_max, positive = withdrawal
    double withdrawal_max = 0.0;
    bool slack = false;           // pressure-specified supply node
    PwlProfile slack_density;     // s(t), hours; slack nodes only
};

struct Pipe {
    std::string id;
    int from = -1;
    int to = -1;
    double length = 0.0;    // nondimensional L_e / ell
    double diameter = 0.0;  // m
    double friction = 0.0;  // Darcy lambda_e
    double area = 0.0;      // nondimensional A_e / area_ref
    bool compressor = false;
    double boost_max = 1.0; // alpha upper bound, >= 1; == 1 iff not compressor
    double efficiency = 0.9;
};

struct NetworkDefect {
    std::string where;
    std::string what;
};

/// Immutable pipeline model with the incidence machinery shared by simulation
/// and optimal control. Demand (non-slack) node ordering defines the rho state.
class GasNetwork {
public:
    GasNetwork(std::vector<GasNode> nodes, std::vector<Pipe> pipes, GasScaling scaling);

    const std::vector<GasNode>& nodes() const { return nodes_; }
    const std::vector<Pipe>& pipes() const { return pipes_; }
    const GasScaling& scaling() const { return scaling_; }

    int n_nodes() const { return static_cast<int>(nodes_.size()); }
    int n_pipes() const { return static_cast<int>(pipes_.size()); }
    int n_demand() const { return static_cast<int>(demand_nodes_.size()); }
    int n_slack() const { return static_cast<int>(slack_nodes_.size()); }

    const std::vector<int>& demand_nodes() const { return demand_nodes_; } // node indices
    const std::vector<int>& slack_nodes() const { return slack_nodes_; }
    const std::vector<int>& compressor_pipes() const { return compressor_pipes_; }

    /// Position of node in the demand (slack) ordering, -1 if not there.
    int demand_position(int node) const { return demand_pos_[node]; }
    int slack_position(int node) const { return slack_pos_[node]; }

    int pipe_index(const std::string& id) const;
    int node_index(const std::string& id) const;
    int compressor_index(const std::string& pipe_id) const; // position in compressor_pipes()

    const Eigen::MatrixXd& incidence() const { return A_; }        // N x E, +1 into, -1 out of
    const Eigen::MatrixXd& incidence_demand() const { return Ad_; }
    const Eigen::MatrixXd& incidence_slack() const { return As_; }
    const Eigen::VectorXd& pipe_length() const { return Lambda_; } // Lambda_ee
    const Eigen::VectorXd& friction_coeff() const { return K_; }   // K_ee = ell*lambda_e/D_e
    const Eigen::VectorXd& pipe_area() const { return X_; }        // X_ee

    double heat_capacity_ratio() const { return gamma_; }
    void set_heat_capacity_ratio(double g) { gamma_ = g; }

    /// Weighted incidence B(alpha) and its slack/demand row splits.
    /// alpha holds one ratio per compressor pipe, in compressor_pipes() order.
    struct WeightedIncidence {
        Eigen::MatrixXd B;
        Eigen::MatrixXd Bs;
        Eigen::MatrixXd Bd;
    };
    WeightedIncidence weighted_incidence(const Eigen::VectorXd& alpha) const;

    /// Per-pipe boost ratio vector (1 for plain pipes) from compressor ratios.
    Eigen::VectorXd expand_alpha(const Eigen::VectorXd& alpha) const;

    std::vector<NetworkDefect> validate() const;

    /// Nodes strictly downstream of `node` in the BFS tree rooted at the
    /// slack node (curtailment escalation order).
    std::vector<int> downstream_of(int node) const;

private:
    std::vector<GasNode> nodes_;
    std::vector<Pipe> pipes_;
    GasScaling scaling_;
    double gamma_ = 1.4;

    std::vector<int> demand_nodes_, slack_nodes_, compressor_pipes_;
    std::vector<int> demand_pos_, slack_pos_;
    Eigen::MatrixXd A_, Ad_, As_;
    Eigen::VectorXd Lambda_, K_, X_;
};

/// Raw SI-unit network description prior to nondimensionalization.
struct GasNetworkSI {
    struct Node {
        std::string id;
        double rho_min = 0.0;        // kg/m^3
        double rho_max = 0.0;        // kg/m^3
        double withdrawal_min = 0.0; // kg/s
        double withdrawal_max = 0.0; // kg/s
        bool slack = false;
        PwlProfile slack_density;    // kg/m^3 vs hours
    };
    struct PipeSI {
        std::string id;
        std::string from, to;
        double length = 0.0;   // m
        double diameter = 0.0; // m
        double friction = 0.0;
        bool compressor = false;
        double boost_max = 1.0;
        double efficiency = 0.9;
    };
    std::vector<Node> nodes;
    std::vector<PipeSI> pipes;
    GasScaling scaling;
    double gamma = 1.4;
};

GasNetwork nondimensionalize(const GasNetworkSI& raw);

} // namespace pipegrid
