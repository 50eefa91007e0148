#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pipegrid/errors.hpp"
#include "pipegrid/nlp.hpp"

namespace pipegrid {

struct PowerBus {
    std::string id;
};

struct Branch {
    std::string id;
    int from = -1;
    int to = -1;
    double susceptance = 0.0; // p.u.
    double flow_min = 0.0;    // MW
    double flow_max = 0.0;    // MW
};

struct Generator {
    std::string id;
    int bus = -1;
    double cost = 0.0;          // $/MWh
    double cost_noload = 0.0;   // $ per committed hour
    double cost_startup = 0.0;  // $
    double cost_shutdown = 0.0; // $
    double cost_reserve = 0.0;  // $/MWh
    double p_min = 0.0;         // MW
    double p_max = 0.0;         // MW
    double ramp_hourly = 0.0;   // MW/h
    double ramp_startup = 0.0;  // MW/h
    double ramp_shutdown = 0.0; // MW/h
    int min_up = 1;             // h
    int min_down = 1;           // h
    double reserve_cap = 0.0;   // MW
    std::string fuel = "other";
};

/// Immutable transmission model. Generator ordering defines the dispatch rows;
/// the reference bus anchors the flow sensitivities.
class PowerSystem {
public:
    PowerSystem(std::vector<PowerBus> buses, std::vector<Branch> branches,
                std::vector<Generator> generators, int reference_bus);

    const std::vector<PowerBus>& buses() const { return buses_; }
    const std::vector<Branch>& branches() const { return branches_; }
    const std::vector<Generator>& generators() const { return generators_; }
    int reference_bus() const { return ref_; }

    int n_buses() const { return static_cast<int>(buses_.size()); }
    int n_branches() const { return static_cast<int>(branches_.size()); }
    int n_generators() const { return static_cast<int>(generators_.size()); }

    int bus_index(const std::string& id) const;
    int generator_index(const std::string& id) const;

private:
    std::vector<PowerBus> buses_;
    std::vector<Branch> branches_;
    std::vector<Generator> generators_;
    int ref_ = 0;
};

/// Branch-flow sensitivity to nodal injections, reference column zero.
/// flows = ptdf * (injections - withdrawals).
Eigen::MatrixXd compute_ptdf(const PowerSystem& sys);

/// Day-ahead commitment: all matrices are generators x hours.
struct CommitmentSchedule {
    Eigen::MatrixXd u; // on/off
    Eigen::MatrixXd v; // start
    Eigen::MatrixXd w; // stop
    Eigen::MatrixXd r; // reserve MW

    int horizon() const { return static_cast<int>(u.cols()); }
};

struct DispatchResult {
    Eigen::MatrixXd p;    // generators x hours, MW
    Eigen::MatrixXd flow; // branches x hours, MW
    Eigen::MatrixXd shed; // buses x hours, MW
    double cost = 0.0;    // $

    double total_shed() const { return shed.size() ? shed.sum() : 0.0; }
};

struct ScucOptions {
    double gap_tol = 1e-4;          // relative optimality gap
    double reserve_fraction = 0.07; // of hourly load
    bool unit_outage_reserve = true;
    int max_nodes = 5000;
    Eigen::VectorXd u_initial; // pre-horizon status per generator; empty = off
    Eigen::VectorXd p_initial; // pre-horizon output MW; empty = zero
    NlpOptions lp;
};

struct ScucResult {
    CommitmentSchedule schedule;
    DispatchResult dispatch;
    double objective = 0.0;
    double bound = 0.0; // best lower bound at termination
    int nodes_explored = 0;
};

/// Branch-and-bound over the hourly commitment statuses with a relaxation at
/// each node; start/stop indicators stay continuous and follow the on/off
/// pattern through the coupling identity. Deterministic for a fixed input.
ScucResult solve_scuc(const PowerSystem& sys, const Eigen::MatrixXd& load,
                      const ScucOptions& opt = {});

struct DcopfOptions {
    double voll = 10000.0; // $/MWh of unserved load
    Eigen::VectorXd p_initial;
    NlpOptions lp;
};

/// A generator forced out of the dispatch from a given hour to the end of the
/// horizon.
struct GeneratorOutage {
    int generator = 0; // index into the system's generator list
    int from_hour = 0;
};

/// Redispatch against a fixed commitment. Outaged generators are pinned to
/// zero output from their outage hour on (an instant trip: ramp rows touching
/// the outage period are dropped); unserved load is priced at voll, so the
/// problem is always feasible.
DispatchResult solve_dcopf(const PowerSystem& sys, const CommitmentSchedule& schedule,
                           const Eigen::MatrixXd& load,
                           const std::vector<GeneratorOutage>& outages = {},
                           const DcopfOptions& opt = {});

} // namespace pipegrid
