#include "pipegrid/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "pipegrid/errors.hpp"

namespace pipegrid {

FuelLink standard_link(const std::string& generator, const std::string& node,
                       const std::string& turbine_class) {
    FuelLink l;
    l.generator = generator;
    l.node = node;
    l.turbine_class = turbine_class;
    if (turbine_class == "ct") {
        l.a = 4.46;
        l.b = -9.95;
        l.c = 15.11;
    } else if (turbine_class == "st") {
        l.a = 1.7;
        l.b = -3.87;
        l.c = 12.0;
    } else if (turbine_class == "cc") {
        l.a = 5.8;
        l.b = -11.2;
        l.c = 12.87;
    } else {
        throw InputError("unknown turbine class '" + turbine_class + "'");
    }
    return l;
}

bool gas_fired(const Generator& g) { return g.fuel == "gas"; }

double heat_rate_mmbtu(const FuelLink& link, double p_mw) {
    return (link.a * p_mw + link.b) * p_mw + link.c;
}

void validate_fuel_map(const FuelMap& map, const PowerSystem& sys, const GasNetwork& net) {
    if (!(map.beta > 0.0) || !std::isfinite(map.beta))
        throw InputError("fuel map beta must be positive");
    if (!(map.ramp_minutes >= 0.0) || map.ramp_minutes > 60.0)
        throw InputError("fuel map ramp must fit between hour boundaries");
    std::set<std::string> seen;
    for (const FuelLink& l : map.links) {
        sys.generator_index(l.generator);
        const int nd = net.node_index(l.node);
        if (net.demand_position(nd) < 0)
            throw InputError("fuel link node '" + l.node + "' is not a demand node");
        if (!seen.insert(l.generator).second)
            throw InputError("generator '" + l.generator + "' appears in two fuel links");
        if (l.a < 0.0 || !std::isfinite(l.a) || !std::isfinite(l.b) || !std::isfinite(l.c))
            throw InputError("fuel link for '" + l.generator + "' has a bad heat curve");
    }
}

Eigen::MatrixXd hourly_gas_demand(const PowerSystem& sys, const GasNetwork& net,
                                  const CommitmentSchedule& schedule, const Eigen::MatrixXd& p,
                                  const FuelMap& map) {
    validate_fuel_map(map, sys, net);
    const int G = sys.n_generators();
    const int N = static_cast<int>(p.cols());
    if (p.rows() != G || N < 1)
        throw InputError("dispatch does not match the power system");
    if (schedule.u.rows() != G || schedule.u.cols() != N)
        throw InputError("commitment schedule does not match the dispatch");

    std::vector<char> mapped(G, 0);
    for (const FuelLink& l : map.links)
        mapped[sys.generator_index(l.generator)] = 1;
    if (map.require_mapped)
        for (int g = 0; g < G; ++g)
            if (!mapped[g] && gas_fired(sys.generators()[g]) &&
                p.row(g).cwiseAbs().maxCoeff() > 1e-9)
                throw InputError("gas-fired generator '" + sys.generators()[g].id +
                                 "' has output but no fuel link");

    Eigen::MatrixXd vals = Eigen::MatrixXd::Zero(net.n_demand(), N);
    for (const FuelLink& l : map.links) {
        const int g = sys.generator_index(l.generator);
        const int dp = net.demand_position(net.node_index(l.node));
        for (int t = 0; t < N; ++t) {
            if (schedule.u(g, t) < 0.5)
                continue; // no fuel off commitment
            const double heat = heat_rate_mmbtu(l, p(g, t));
            if (heat < 0.0)
                throw InputError("fuel link for '" + l.generator + "' yields negative heat");
            vals(dp, t) += map.beta * heat;
        }
    }
    return vals;
}

std::vector<PwlProfile> demand_profiles(const Eigen::MatrixXd& hourly, double ramp_minutes) {
    std::vector<PwlProfile> out;
    out.reserve(hourly.rows());
    std::vector<double> row(hourly.cols());
    for (int i = 0; i < hourly.rows(); ++i) {
        for (int t = 0; t < hourly.cols(); ++t)
            row[t] = hourly(i, t);
        out.push_back(PwlProfile::from_hourly(row, ramp_minutes / 60.0));
    }
    return out;
}

std::vector<PwlProfile> gas_demand_from_dispatch(const PowerSystem& sys, const GasNetwork& net,
                                                 const CommitmentSchedule& schedule,
                                                 const Eigen::MatrixXd& p, const FuelMap& map) {
    return demand_profiles(hourly_gas_demand(sys, net, schedule, p, map), map.ramp_minutes);
}

PwlProfile to_network_units(const PwlProfile& kg_per_s, const GasScaling& s) {
    std::vector<PwlProfile::Knot> k = kg_per_s.knots();
    for (PwlProfile::Knot& kn : k)
        kn.v /= s.massflow_unit();
    return PwlProfile(std::move(k));
}

CurtailmentDecision curtailment_policy(const std::vector<PressureViolation>& violations,
                                       const FuelMap& map, const GasNetwork& net,
                                       bool include_downstream) {
    CurtailmentDecision d;
    if (violations.empty())
        return d;

    std::set<int> targets;
    double onset = violations.front().t_start;
    const PressureViolation* worst = &violations.front();
    for (const PressureViolation& v : violations) {
        const int nd = net.node_index(v.node);
        targets.insert(nd);
        if (include_downstream)
            for (int q : net.downstream_of(nd))
                targets.insert(q);
        onset = std::min(onset, v.t_start);
        if (v.worst_density < worst->worst_density)
            worst = &v;
    }
    const int from = std::max(0, static_cast<int>(std::floor(onset)));

    std::vector<std::pair<std::string, std::string>> picked; // node id, generator id
    for (const FuelLink& l : map.links)
        if (targets.count(net.node_index(l.node)))
            picked.emplace_back(l.node, l.generator);
    std::sort(picked.begin(), picked.end());
    std::set<std::string> taken;
    for (const auto& pr : picked)
        if (taken.insert(pr.second).second)
            d.items.push_back({pr.second, from});

    char buf[160];
    std::snprintf(buf, sizeof buf, "density %.4g at %s from hour %g", worst->worst_density,
                  worst->node.c_str(), onset);
    d.rationale = buf;
    return d;
}

std::vector<GeneratorOutage> to_outages(const CurtailmentDecision& decision,
                                        const PowerSystem& sys) {
    std::vector<GeneratorOutage> out;
    out.reserve(decision.items.size());
    for (const Curtailment& c : decision.items)
        out.push_back({sys.generator_index(c.generator), c.from_hour});
    return out;
}

} // namespace pipegrid
