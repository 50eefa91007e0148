#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pipegrid/errors.hpp"

namespace pipegrid {

enum class ZoneTier { internet, enterprise, dmz, manufacturing, area, actuator_control };

ZoneTier zone_tier_from_string(const std::string& s);
std::string to_string(ZoneTier t);

struct CyberZone {
    std::string id;
    std::string label;
    ZoneTier tier = ZoneTier::enterprise;
    double holding_rate = 0.0;  // lambda_i, 1/h
    double detection_prob = -1; // embedded jump probability to the detection state
    double detection_score = -1;
    std::string actuator; // compressor id, actuator_control zones only
};

/// One directed firewall-crossing option. Either an explicit embedded jump
/// probability or a vulnerability score in [0,10] that is normalized over the
/// zone's outgoing transitions.
struct ZoneTransition {
    std::string from;
    std::string to;
    double prob = -1;
    double score = -1;
};

struct CyberZoneGraph {
    std::vector<CyberZone> zones;
    std::vector<std::pair<std::string, std::string>> edges; // undirected connectivity
    std::vector<ZoneTransition> transitions;
};

/// CTMC over the cyber zones plus one absorbing detection state (last index).
struct CyberChain {
    int n_states = 0;
    Eigen::MatrixXd Q;      // generator, 1/h; rows sum to 0
    Eigen::VectorXd lambda; // holding rates per state
    int initial_index = 0;
    int absorbing_index = 0;
    std::vector<std::string> state_ids;
    std::map<int, std::string> actuator_map; // state index -> compressor id

    int index_of(const std::string& state_id) const;
};

struct AttackTrajectory {
    struct Visit {
        int state;
        double t; // entry time, h
    };
    std::vector<Visit> visits;
    double horizon = 0.0; // h
};

/// Interval during which a compressor is held at boost ratio 1 by the attacker.
struct ContingencyWindow {
    std::string compressor;
    double t_start = 0.0; // h
    double t_end = 0.0;   // h
};

CyberChain build_chain(const CyberZoneGraph& graph);

/// P(t) = exp(t Q) by uniformization; row-stochastic within 1e-9.
Eigen::MatrixXd transition_matrix(const CyberChain& chain, double t);

/// pi0^T P(t), computed without forming P(t).
Eigen::VectorXd state_distribution(const CyberChain& chain, const Eigen::VectorXd& pi0, double t);

AttackTrajectory sample_trajectory(const CyberChain& chain, double horizon, std::uint64_t seed);

/// Maximal actuator-control sojourns as per-compressor contingency windows,
/// clipped to the horizon; overlapping windows of one compressor are merged.
std::vector<ContingencyWindow> extract_contingencies(const AttackTrajectory& traj,
                                                     const CyberChain& chain);

} // namespace pipegrid
