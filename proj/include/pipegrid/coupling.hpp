#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pipegrid/gas_network.hpp"
#include "pipegrid/gas_transient.hpp"
#include "pipegrid/power_market.hpp"
#include "pipegrid/pwl.hpp"

namespace pipegrid {

/// One gas-fired generator tied to the pipeline node it draws from, with its
/// heat-rate curve a p^2 + b p + c in MMBTU/h for p in MW.
struct FuelLink {
    std::string generator;
    std::string node;          // demand node of the gas network
    std::string turbine_class; // informational: ct, st, cc
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

/// Heat-rate coefficients for the standard turbine classes.
FuelLink standard_link(const std::string& generator, const std::string& node,
                       const std::string& turbine_class);

struct FuelMap {
    std::vector<FuelLink> links;
    double beta = 0.0075;      // kg/s of gas per MMBTU/h of heat
    double ramp_minutes = 5.0; // demand smoothing width at hour boundaries
    // fail when a gas-fired generator with output has no link (else skip it)
    bool require_mapped = true;
};

/// A generator counts as gas-fired when its fuel field is "gas".
bool gas_fired(const Generator& g);

double heat_rate_mmbtu(const FuelLink& link, double p_mw);

void validate_fuel_map(const FuelMap& map, const PowerSystem& sys, const GasNetwork& net);

/// Gas burn per demand node and hour (kg/s, rows aligned with
/// net.demand_nodes()): each committed link draws beta * (a p^2 + b p + c);
/// decommitted hours burn nothing.
Eigen::MatrixXd hourly_gas_demand(const PowerSystem& sys, const GasNetwork& net,
                                  const CommitmentSchedule& schedule, const Eigen::MatrixXd& p,
                                  const FuelMap& map);

/// The same withdrawals as time profiles: held constant within the hour and
/// ramped over map.ramp_minutes at hour boundaries.
std::vector<PwlProfile> gas_demand_from_dispatch(const PowerSystem& sys, const GasNetwork& net,
                                                 const CommitmentSchedule& schedule,
                                                 const Eigen::MatrixXd& p, const FuelMap& map);

/// Hourly rows to boundary-ramped profiles; the engine adds civil gas load to
/// the generator burn before this step.
std::vector<PwlProfile> demand_profiles(const Eigen::MatrixXd& hourly, double ramp_minutes);

/// kg/s profile rescaled to the network's nondimensional flow unit.
PwlProfile to_network_units(const PwlProfile& kg_per_s, const GasScaling& s);

struct Curtailment {
    std::string generator;
    int from_hour = 0;
};

struct CurtailmentDecision {
    std::vector<Curtailment> items;
    std::string rationale;

    bool empty() const { return items.empty(); }
};

/// Picks the generators to force out when pipeline pressure collapses: every
/// mapped generator at a violating node, from the hour the first violation
/// starts. With include_downstream the cut widens to the nodes downstream of
/// the violating ones. Items come out ordered by node id then generator id.
CurtailmentDecision curtailment_policy(const std::vector<PressureViolation>& violations,
                                       const FuelMap& map, const GasNetwork& net,
                                       bool include_downstream = false);

std::vector<GeneratorOutage> to_outages(const CurtailmentDecision& decision,
                                        const PowerSystem& sys);

} // namespace pipegrid
