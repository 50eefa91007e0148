#include "pipegrid/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <thread>

#include "pipegrid/errors.hpp"

namespace pipegrid {

namespace {

template <class F>
decltype(auto) stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const SolveError& e) {
        throw SolveError(std::string(name) + ": " + e.what());
    }
}

std::vector<PressureViolation> significant(const std::vector<PressureViolation>& vs,
                                           const GasNetwork& net, double margin) {
    std::vector<PressureViolation> out;
    for (const PressureViolation& v : vs) {
        const GasNode& nd = net.nodes()[net.node_index(v.node)];
        if (v.worst_density < nd.rho_min - margin)
            out.push_back(v);
    }
    return out;
}

std::vector<PwlProfile> to_nd(const std::vector<PwlProfile>& kg, const GasScaling& sc) {
    std::vector<PwlProfile> out;
    out.reserve(kg.size());
    for (const PwlProfile& w : kg)
        out.push_back(to_network_units(w, sc));
    return out;
}

double quantile7(const std::vector<double>& sorted, double p) {
    const int n = static_cast<int>(sorted.size());
    const double h = (n - 1) * p;
    const int lo = static_cast<int>(std::floor(h));
    const int hi = std::min(lo + 1, n - 1);
    return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

BoxStats five_numbers(std::string id, std::vector<double> xs) {
    BoxStats b;
    b.compressor = std::move(id);
    b.count = static_cast<int>(xs.size());
    if (xs.empty())
        return b;
    std::sort(xs.begin(), xs.end());
    b.min = xs.front();
    b.q1 = quantile7(xs, 0.25);
    b.median = quantile7(xs, 0.5);
    b.q3 = quantile7(xs, 0.75);
    b.max = xs.back();
    return b;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const int n = static_cast<int>(xs.size());
    if (n < 2)
        return nan;
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0)
        return nan;
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

void validate_config(const ScenarioConfig& cfg) {
    if (cfg.horizon < 1)
        throw InputError("horizon must be at least one hour");
    if (cfg.load.rows() != cfg.power.n_buses() || cfg.load.cols() != cfg.horizon)
        throw InputError("load profile must be buses x horizon");
    validate_fuel_map(cfg.fuel, cfg.power, cfg.gas);
    if (cfg.gas_load_kg.size() != 0) {
        if (cfg.gas_load_kg.rows() != cfg.gas.n_demand() || cfg.gas_load_kg.cols() != cfg.horizon)
            throw InputError("civil gas load must be demand nodes x horizon");
        if (cfg.gas_load_kg.minCoeff() < 0.0)
            throw InputError("civil gas load must be non-negative");
    }
    if (cfg.chain.n_states < 2)
        throw InputError("cyber chain must have at least two states");
    for (const auto& kv : cfg.chain.actuator_map) {
        const int pj = cfg.gas.pipe_index(kv.second);
        if (!cfg.gas.pipes()[pj].compressor)
            throw InputError("actuator target '" + kv.second + "' is not a compressor");
    }
    if (cfg.max_curtail_rounds < 1)
        throw InputError("max curtail rounds must be positive");
    if (cfg.violation_margin < 0.0)
        throw InputError("violation margin must be non-negative");
}

Baseline run_baseline(const ScenarioConfig& cfg) {
    validate_config(cfg);
    Baseline b;
    b.scuc = stage("commitment", [&] { return solve_scuc(cfg.power, cfg.load, cfg.scuc); });
    b.dispatch = stage("redispatch", [&] {
        return solve_dcopf(cfg.power, b.scuc.schedule, cfg.load, {}, cfg.dcopf);
    });
    b.base_cost = b.dispatch.cost;
    b.hourly_kg = hourly_gas_demand(cfg.power, cfg.gas, b.scuc.schedule, b.dispatch.p, cfg.fuel);
    if (cfg.gas_load_kg.size() != 0)
        b.hourly_kg += cfg.gas_load_kg;
    b.withdrawals = demand_profiles(b.hourly_kg, cfg.fuel.ramp_minutes);
    TogfOptions topt = cfg.togf;
    topt.horizon_hours = cfg.horizon;
    b.togf = stage("gas optimization",
                   [&] { return solve_togf(cfg.gas, to_nd(b.withdrawals, cfg.gas.scaling()), topt); });
    if (!b.togf.converged)
        throw SolveError("gas optimization: boost schedule did not converge");
    b.verified = stage("gas verification", [&] {
        return integrate(cfg.gas, b.togf.states.front(), b.togf.controls, cfg.horizon, cfg.sim);
    });
    const auto viol =
        significant(min_pressure_violations(b.verified, cfg.gas), cfg.gas, cfg.violation_margin);
    if (!viol.empty())
        throw SolveError("baseline infeasible: density below bound at " + viol.front().node);
    return b;
}

SampleResult assess_windows(const ScenarioConfig& cfg, const Baseline& base,
                            const std::vector<ContingencyWindow>& windows) {
    SampleResult s;
    s.base_cost = base.base_cost;
    s.cost = base.base_cost;
    s.detection_time = std::numeric_limits<double>::infinity();
    s.windows = windows;
    if (s.windows.empty())
        return s;

    ControlSignal ctrl = apply_contingency(cfg.gas, base.togf.controls, s.windows);
    const GasState x0 = base.togf.states.front();
    CommitmentSchedule sched = base.scuc.schedule; // u zeroed as units are cut
    Eigen::MatrixXd hourly = base.hourly_kg;

    int act_from = -1;
    bool escalate = false;
    std::set<std::string> cut_ids;
    for (int round = 0; round < cfg.max_curtail_rounds; ++round) {
        const GasTrajectory g = stage(
            "gas response", [&] { return integrate(cfg.gas, x0, ctrl, cfg.horizon, cfg.sim); });
        s.violations =
            significant(min_pressure_violations(g, cfg.gas), cfg.gas, cfg.violation_margin);
        if (s.violations.empty())
            break;
        if (act_from < 0) {
            double first = s.violations.front().t_start;
            for (const PressureViolation& v : s.violations)
                first = std::min(first, v.t_start);
            // the operator warns, then curtails at the next market hour
            act_from = static_cast<int>(std::floor(first)) + 1;
        }
        if (act_from >= cfg.horizon)
            break; // too late in the day to act
        std::vector<PressureViolation> actionable;
        for (const PressureViolation& v : s.violations)
            if (v.t_end > act_from)
                actionable.push_back(v);
        if (actionable.empty())
            break;
        const CurtailmentDecision d = curtailment_policy(actionable, cfg.fuel, cfg.gas, escalate);
        std::vector<Curtailment> fresh;
        for (const Curtailment& c : d.items)
            if (!cut_ids.count(c.generator))
                fresh.push_back({c.generator, act_from});
        if (fresh.empty()) {
            if (!escalate && cfg.escalate_downstream) {
                escalate = true;
                continue;
            }
            break; // no curtailable units left
        }
        for (const Curtailment& c : fresh) {
            cut_ids.insert(c.generator);
            s.curtailed.push_back(c);
            const int gi = cfg.power.generator_index(c.generator);
            for (int t = act_from; t < cfg.horizon; ++t)
                sched.u(gi, t) = 0.0;
        }
        hourly = hourly_gas_demand(cfg.power, cfg.gas, sched, base.dispatch.p, cfg.fuel);
        if (cfg.gas_load_kg.size() != 0)
            hourly += cfg.gas_load_kg;
        ctrl.demand = to_nd(demand_profiles(hourly, cfg.fuel.ramp_minutes), cfg.gas.scaling());
    }

    if (!s.curtailed.empty()) {
        std::vector<GeneratorOutage> outs;
        outs.reserve(s.curtailed.size());
        for (const Curtailment& c : s.curtailed)
            outs.push_back({cfg.power.generator_index(c.generator), c.from_hour});
        const DispatchResult re = stage("redispatch", [&] {
            return solve_dcopf(cfg.power, base.scuc.schedule, cfg.load, outs, cfg.dcopf);
        });
        s.cost = re.cost;
        s.shed_mwh = re.total_shed();
        const double energy = cfg.load.sum();
        s.shed_pct = energy > 0.0 ? 100.0 * s.shed_mwh / energy : 0.0;
        // hourly tables integrate exactly: the boundary ramps are centered
        s.gas_curtailed_kg = 3600.0 * (base.hourly_kg - hourly).sum();
    }
    if (s.base_cost != 0.0)
        s.cost_increase_pct = 100.0 * (s.cost - s.base_cost) / s.base_cost;
    return s;
}

SampleResult run_sample(const ScenarioConfig& cfg, const Baseline& base, std::uint64_t seed) {
    const AttackTrajectory traj = sample_trajectory(cfg.chain, cfg.horizon, seed);
    SampleResult s = assess_windows(cfg, base, extract_contingencies(traj, cfg.chain));
    s.seed = seed;
    for (const auto& v : traj.visits)
        if (v.state == cfg.chain.absorbing_index) {
            s.detection_time = v.t;
            break;
        }
    return s;
}

AggregateStats compute_stats(const std::vector<SampleResult>& results) {
    AggregateStats st;
    std::map<std::string, std::vector<double>> per;
    std::vector<double> cost, gas, shed;
    for (const SampleResult& s : results) {
        if (s.failed || s.windows.empty())
            continue;
        std::set<std::string> comps;
        for (const ContingencyWindow& w : s.windows)
            comps.insert(w.compressor);
        for (const std::string& c : comps)
            per[c].push_back(s.cost_increase_pct);
        cost.push_back(s.cost_increase_pct);
        gas.push_back(s.gas_curtailed_kg);
        shed.push_back(s.shed_pct);
    }
    for (auto& kv : per)
        st.per_compressor.push_back(five_numbers(kv.first, std::move(kv.second)));
    st.pooled = five_numbers("all", cost);
    st.r_cost_gas = pearson(gas, cost);
    st.r_cost_shed = pearson(shed, cost);
    st.r_gas_shed = pearson(gas, shed);
    return st;
}

MonteCarloResult run_monte_carlo(const ScenarioConfig& cfg, const Baseline& base, int n,
                                 int jobs) {
    if (n < 1)
        throw InputError("sample count must be positive");
    MonteCarloResult mc;
    mc.samples.resize(n);
    jobs = std::max(1, std::min(jobs, n));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n)
                return;
            const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(i);
            try {
                mc.samples[i] = run_sample(cfg, base, seed);
            } catch (const std::exception& e) {
                mc.samples[i] = SampleResult{};
                mc.samples[i].seed = seed;
                mc.samples[i].failed = true;
                mc.samples[i].error = "sample " + std::to_string(seed) + ": " + e.what();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (int j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
        for (std::thread& th : pool)
            th.join();
    }
    for (const SampleResult& s : mc.samples)
        mc.failures += s.failed ? 1 : 0;
    mc.stats = compute_stats(mc.samples);
    return mc;
}

} // namespace pipegrid
