#include "pipegrid/attack_chain.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_map>

namespace pipegrid {

ZoneTier zone_tier_from_string(const std::string& s) {
    if (s == "internet") return ZoneTier::internet;
    if (s == "enterprise") return ZoneTier::enterprise;
    if (s == "dmz") return ZoneTier::dmz;
    if (s == "manufacturing") return ZoneTier::manufacturing;
    if (s == "area") return ZoneTier::area;
    if (s == "actuator-control") return ZoneTier::actuator_control;
    throw InputError("unknown zone tier '" + s + "'");
}

std::string to_string(ZoneTier t) {
    switch (t) {
        case ZoneTier::internet: return "internet";
        case ZoneTier::enterprise: return "enterprise";
        case ZoneTier::dmz: return "dmz";
        case ZoneTier::manufacturing: return "manufacturing";
        case ZoneTier::area: return "area";
        case ZoneTier::actuator_control: return "actuator-control";
    }
    return "?";
}

int CyberChain::index_of(const std::string& state_id) const {
    for (int i = 0; i < n_states; ++i)
        if (state_ids[i] == state_id)
            return i;
    throw InputError("unknown cyber state '" + state_id + "'");
}

namespace {

constexpr double kRowSumTol = 1e-9;

struct RowSpec {
    std::vector<std::pair<int, double>> probs; // target state -> embedded prob
};

} // namespace

CyberChain build_chain(const CyberZoneGraph& graph) {
    const int nz = static_cast<int>(graph.zones.size());
    if (nz == 0)
        throw InputError("cyber graph has no zones");

    std::unordered_map<std::string, int> idx;
    for (int i = 0; i < nz; ++i) {
        if (idx.count(graph.zones[i].id))
            throw InputError("duplicate zone id '" + graph.zones[i].id + "'");
        idx[graph.zones[i].id] = i;
    }

    int initial = -1;
    for (int i = 0; i < nz; ++i) {
        if (graph.zones[i].tier == ZoneTier::internet) {
            if (initial >= 0)
                throw InputError("more than one internet zone");
            initial = i;
        }
    }
    if (initial < 0)
        throw InputError("no internet zone designated as initial state");

    std::set<std::pair<int, int>> allowed;
    for (const auto& [a, b] : graph.edges) {
        if (!idx.count(a) || !idx.count(b))
            throw InputError("edge references unknown zone '" + a + "'/'" + b + "'");
        int ia = idx[a], ib = idx[b];
        allowed.insert({ia, ib});
        allowed.insert({ib, ia});
    }

    const int det = nz; // detection state appended last
    const int n = nz + 1;

    std::vector<RowSpec> rows(nz);
    std::vector<bool> row_uses_scores(nz, false);
    std::vector<bool> row_uses_probs(nz, false);
    for (const ZoneTransition& tr : graph.transitions) {
        if (!idx.count(tr.from) || !idx.count(tr.to))
            throw InputError("transition references unknown zone '" + tr.from + "'->'" + tr.to + "'");
        int i = idx[tr.from], j = idx[tr.to];
        if (i == j)
            throw InputError("self transition on zone '" + tr.from + "'");
        if (!allowed.empty() && !allowed.count({i, j}))
            throw InputError("transition '" + tr.from + "'->'" + tr.to + "' has no edge");
        const bool has_prob = tr.prob >= 0;
        const bool has_score = tr.score >= 0;
        if (has_prob == has_score)
            throw InputError("transition '" + tr.from + "'->'" + tr.to +
                             "' needs exactly one of prob or score");
        if (has_prob) {
            if (tr.prob > 1.0)
                throw InputError("transition probability out of [0,1] on '" + tr.from + "'");
            row_uses_probs[i] = true;
            rows[i].probs.push_back({j, tr.prob});
        } else {
            if (tr.score > 10.0)
                throw InputError("vulnerability score out of [0,10] on '" + tr.from + "'");
            row_uses_scores[i] = true;
            rows[i].probs.push_back({j, tr.score});
        }
    }

    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n);

    for (int i = 0; i < nz; ++i) {
        const CyberZone& z = graph.zones[i];
        if (z.holding_rate < 0)
            throw InputError("negative holding rate on zone '" + z.id + "'");
        if (z.holding_rate == 0)
            throw InputError("zero holding rate on non-absorbing zone '" + z.id + "'");
        lambda(i) = z.holding_rate;

        if (row_uses_scores[i] && row_uses_probs[i])
            throw InputError("zone '" + z.id + "' mixes explicit probs and scores");

        double pdet = 0.0;
        if (row_uses_scores[i] || (rows[i].probs.empty() && z.detection_score >= 0)) {
            // score convention: exploit probs proportional to the score,
            // normalized over outgoing edges after the detection share
            if (z.detection_prob >= 0 && z.detection_score >= 0)
                throw InputError("zone '" + z.id + "' has both detection prob and score");
            double ssum = 0.0;
            for (auto& [j, s] : rows[i].probs)
                ssum += s;
            if (z.detection_score >= 0)
                ssum += z.detection_score;
            if (ssum <= 0)
                throw InputError("zone '" + z.id + "' has zero total outgoing score");
            if (z.detection_score >= 0) {
                pdet = z.detection_score / ssum;
                for (auto& [j, s] : rows[i].probs)
                    s /= ssum;
            } else {
                pdet = std::clamp(z.detection_prob < 0 ? 0.0 : z.detection_prob, 0.0, 1.0);
                for (auto& [j, s] : rows[i].probs)
                    s = (1.0 - pdet) * s / ssum;
            }
        } else {
            if (z.detection_score >= 0)
                throw InputError("zone '" + z.id + "' mixes explicit probs and scores");
            pdet = z.detection_prob < 0 ? 0.0 : z.detection_prob;
            if (pdet > 1.0)
                throw InputError("detection probability out of [0,1] on zone '" + z.id + "'");
            double psum = pdet;
            for (auto& [j, p] : rows[i].probs)
                psum += p;
            if (std::abs(psum - 1.0) > kRowSumTol)
                throw InputError("outgoing jump probabilities of zone '" + z.id +
                                 "' sum to " + std::to_string(psum) + ", expected 1");
        }

        for (auto& [j, p] : rows[i].probs)
            Q(i, j) = lambda(i) * p;
        Q(i, det) = lambda(i) * pdet;
        Q(i, i) = -lambda(i);
        // fold rounding into the diagonal so rows sum to 0 exactly
        double off = 0.0;
        for (int j = 0; j < n; ++j)
            if (j != i)
                off += Q(i, j);
        Q(i, i) = -off;
        lambda(i) = off;
    }

    CyberChain chain;
    chain.n_states = n;
    chain.Q = std::move(Q);
    chain.lambda = std::move(lambda);
    chain.initial_index = initial;
    chain.absorbing_index = det;
    for (const CyberZone& z : graph.zones)
        chain.state_ids.push_back(z.id);
    chain.state_ids.push_back("detected");
    for (int i = 0; i < nz; ++i) {
        const CyberZone& z = graph.zones[i];
        if (z.tier == ZoneTier::actuator_control) {
            if (z.actuator.empty())
                throw InputError("actuator-control zone '" + z.id + "' maps to no compressor");
            chain.actuator_map[i] = z.actuator;
        } else if (!z.actuator.empty()) {
            throw InputError("zone '" + z.id + "' has an actuator but is not actuator-control");
        }
    }
    return chain;
}

namespace {

// Single uniformization sweep, valid for moderate q*t. apply(M) accumulates
// sum_n w_n * M * Ptilde^n for the Poisson weights w_n, tail < 1e-12.
Eigen::MatrixXd uniformized_propagate(const Eigen::MatrixXd& Q, double t,
                                      const Eigen::MatrixXd& start) {
    const int n = static_cast<int>(Q.rows());
    double q = 0.0;
    for (int i = 0; i < n; ++i)
        q = std::max(q, -Q(i, i));
    const double a = q * t;
    if (a == 0.0)
        return start;
    Eigen::MatrixXd Pt = Eigen::MatrixXd::Identity(n, n) + Q / q;

    Eigen::MatrixXd term = start; // start * Ptilde^n
    double w = std::exp(-a);      // Poisson pmf at n = 0
    double cum = w;
    Eigen::MatrixXd acc = w * term;
    const int nmax = static_cast<int>(a + 40.0 * std::sqrt(a) + 60.0);
    for (int k = 1; k <= nmax && 1.0 - cum > 1e-12; ++k) {
        term = term * Pt;
        w *= a / k;
        cum += w;
        acc += w * term;
    }
    return acc;
}

} // namespace

Eigen::MatrixXd transition_matrix(const CyberChain& chain, double t) {
    if (t < 0)
        throw InputError("transition_matrix: negative time");
    const int n = chain.n_states;
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
    if (t == 0.0)
        return P;
    double q = 0.0;
    for (int i = 0; i < n; ++i)
        q = std::max(q, -chain.Q(i, i));
    if (q == 0.0)
        return P;
    // split so q*dt stays small enough for the Poisson recursion
    int chunks = static_cast<int>(std::ceil(q * t / 200.0));
    chunks = std::max(chunks, 1);
    const double dt = t / chunks;
    for (int c = 0; c < chunks; ++c)
        P = uniformized_propagate(chain.Q, dt, P);
    return P;
}

Eigen::VectorXd state_distribution(const CyberChain& chain, const Eigen::VectorXd& pi0, double t) {
    if (pi0.size() != chain.n_states)
        throw InputError("state_distribution: pi0 has wrong dimension");
    if (pi0.minCoeff() < 0 || std::abs(pi0.sum() - 1.0) > 1e-9)
        throw InputError("state_distribution: pi0 is not a probability vector");
    Eigen::MatrixXd row = pi0.transpose();
    double q = 0.0;
    for (int i = 0; i < chain.n_states; ++i)
        q = std::max(q, -chain.Q(i, i));
    if (q * t == 0.0)
        return pi0;
    int chunks = std::max(1, static_cast<int>(std::ceil(q * t / 200.0)));
    const double dt = t / chunks;
    for (int c = 0; c < chunks; ++c)
        row = uniformized_propagate(chain.Q, dt, row);
    return row.transpose();
}

namespace {

// mt19937_64 with explicit uniform/exponential draws so trajectories are
// bit-identical across platforms.
class TrajectoryRng {
public:
    explicit TrajectoryRng(std::uint64_t seed) : eng_(seed) {}

    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

private:
    std::mt19937_64 eng_;
};

} // namespace

AttackTrajectory sample_trajectory(const CyberChain& chain, double horizon, std::uint64_t seed) {
    if (horizon <= 0)
        throw InputError("sample_trajectory: horizon must be positive");
    TrajectoryRng rng(seed);
    AttackTrajectory traj;
    traj.horizon = horizon;

    int s = chain.initial_index;
    double t = 0.0;
    traj.visits.push_back({s, 0.0});
    while (true) {
        const double rate = -chain.Q(s, s);
        if (rate <= 0.0)
            break; // absorbing
        t += rng.exponential(rate);
        if (t >= horizon)
            break;
        // embedded jump
        const double u = rng.uniform01();
        double cum = 0.0;
        int next = -1;
        for (int j = 0; j < chain.n_states; ++j) {
            if (j == s)
                continue;
            cum += chain.Q(s, j) / rate;
            if (u < cum) {
                next = j;
                break;
            }
        }
        if (next < 0)
            next = chain.absorbing_index; // guard against rounding in cum
        traj.visits.push_back({next, t});
        s = next;
        if (s == chain.absorbing_index)
            break;
    }
    return traj;
}

std::vector<ContingencyWindow> extract_contingencies(const AttackTrajectory& traj,
                                                     const CyberChain& chain) {
    std::vector<ContingencyWindow> raw;
    const auto& v = traj.visits;
    for (std::size_t i = 0; i < v.size(); ++i) {
        auto it = chain.actuator_map.find(v[i].state);
        if (it == chain.actuator_map.end())
            continue;
        const double t_start = v[i].t;
        const double t_end = (i + 1 < v.size()) ? v[i + 1].t : traj.horizon;
        if (t_start >= traj.horizon)
            continue;
        raw.push_back({it->second, t_start, std::min(t_end, traj.horizon)});
    }
    // merge overlapping windows per compressor
    std::sort(raw.begin(), raw.end(), [](const ContingencyWindow& a, const ContingencyWindow& b) {
        if (a.compressor != b.compressor)
            return a.compressor < b.compressor;
        return a.t_start < b.t_start;
    });
    std::vector<ContingencyWindow> out;
    for (const ContingencyWindow& w : raw) {
        if (!out.empty() && out.back().compressor == w.compressor &&
            w.t_start <= out.back().t_end) {
            out.back().t_end = std::max(out.back().t_end, w.t_end);
        } else {
            out.push_back(w);
        }
    }
    return out;
}

} // namespace pipegrid
