#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pipegrid/attack_chain.hpp"
#include "pipegrid/coupling.hpp"
#include "pipegrid/gas_optimal_control.hpp"
#include "pipegrid/gas_transient.hpp"
#include "pipegrid/power_market.hpp"

namespace pipegrid {

/// One study, fully cross-referenced: the market, the pipeline it draws from,
/// and the attack surface over its compressors.
struct ScenarioConfig {
    PowerSystem power;
    GasNetwork gas;
    CyberChain chain;
    FuelMap fuel;
    Eigen::MatrixXd load;        // buses x hours, MW
    Eigen::MatrixXd gas_load_kg; // demand nodes x hours, kg/s civil draw; empty = none
    int horizon = 24;            // h
    std::uint64_t base_seed = 1;
    bool escalate_downstream = true; // widen curtailment when violations persist
    int max_curtail_rounds = 8;
    // density deficit below the bound before anyone reacts; absorbs the
    // integration noise of an optimized day that rides the pressure floor
    double violation_margin = 1e-3;
    ScucOptions scuc;
    DcopfOptions dcopf;
    TogfOptions togf;
    IntegrateOptions sim;
};

void validate_config(const ScenarioConfig& cfg);

/// The no-attack operating day every sample is measured against.
struct Baseline {
    ScucResult scuc;
    DispatchResult dispatch;
    Eigen::MatrixXd hourly_kg;           // demand nodes x hours, burn + civil
    std::vector<PwlProfile> withdrawals; // kg/s per demand node
    TogfResult togf;
    GasTrajectory verified; // the optimized day re-integrated by the DAE solver
    double base_cost = 0.0; // energy cost of the dispatch, $
};

/// Commitment, redispatch, gas nominations, boost schedule, then a transient
/// verification: rejected when any stage fails or pressure dips below bounds.
Baseline run_baseline(const ScenarioConfig& cfg);

struct SampleResult {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    std::vector<ContingencyWindow> windows;
    std::vector<Curtailment> curtailed;
    std::vector<PressureViolation> violations; // left after curtailment
    double base_cost = 0.0;
    double cost = 0.0; // with the contingency, $
    double cost_increase_pct = 0.0;
    double shed_mwh = 0.0;
    double shed_pct = 0.0;          // of the day's energy
    double gas_curtailed_kg = 0.0;  // withdrawals removed by curtailment
    double detection_time = 0.0;    // h; +inf when the attack is never caught
};

/// Pipeline response to given compressor windows: curtailment fixpoint, then
/// the redispatch bill. seed and detection_time are left for the caller.
/// An empty window list reproduces the baseline cost bit for bit.
SampleResult assess_windows(const ScenarioConfig& cfg, const Baseline& base,
                            const std::vector<ContingencyWindow>& windows);

/// One attack day: sampled intrusion, then assess_windows on its sojourns.
SampleResult run_sample(const ScenarioConfig& cfg, const Baseline& base, std::uint64_t seed);

struct BoxStats {
    std::string compressor; // "all" for the pooled row
    int count = 0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct AggregateStats {
    std::vector<BoxStats> per_compressor; // sorted by compressor id
    BoxStats pooled;
    // Pearson correlations over samples with a window; NaN when undefined
    double r_cost_gas = 0.0;
    double r_cost_shed = 0.0;
    double r_gas_shed = 0.0;
};

/// Five-number summaries of the cost increase per targeted compressor plus
/// pooled, and the cross-metric correlations.
AggregateStats compute_stats(const std::vector<SampleResult>& results);

struct MonteCarloResult {
    std::vector<SampleResult> samples;
    AggregateStats stats;
    int failures = 0;
};

/// Samples seeds base_seed..base_seed+n-1. The worker count changes nothing
/// but wall time.
MonteCarloResult run_monte_carlo(const ScenarioConfig& cfg, const Baseline& base, int n,
                                 int jobs = 1);

} // namespace pipegrid
