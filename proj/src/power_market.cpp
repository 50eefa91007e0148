#include "pipegrid/power_market.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace pipegrid {

namespace {

constexpr double kPenalty = 1e6; // $/MW on relaxation slack

Eigen::VectorXd defaulted(const Eigen::VectorXd& v, int n, const char* what) {
    if (v.size() == 0)
        return Eigen::VectorXd::Zero(n);
    if (v.size() != n)
        throw InputError(std::string(what) + " must have one entry per generator");
    return v;
}

void check_load(const PowerSystem& sys, const Eigen::MatrixXd& load) {
    if (load.rows() != sys.n_buses() || load.cols() < 1)
        throw InputError("load matrix must be buses x hours");
    if (!load.allFinite() || (load.size() && load.minCoeff() < 0.0))
        throw InputError("load entries must be finite and nonnegative");
}

// Relaxed commitment LP over [p, r, u, v, w] plus hourly slack; branch-and-bound
// tightens the u bounds and line rows join lazily as they get violated.
struct UcLp {
    const PowerSystem& sys;
    Eigen::MatrixXd load;
    Eigen::MatrixXd ptdf;
    NlpOptions lp_opt;
    int G, N, B, E, n;
    Eigen::VectorXd u_init, p_init, dtot;
    Eigen::MatrixXd pload; // ptdf * load, branches x hours
    std::vector<int> gbus;
    Eigen::VectorXd cost, lb, ub;
    std::vector<Eigen::Triplet<double>> eq_t, in_t;
    std::vector<double> eq_b, in_b;

    int iP(int g, int t) const { return t * G + g; }
    int ir(int g, int t) const { return G * N + t * G + g; }
    int iu(int g, int t) const { return 2 * G * N + t * G + g; }
    int iv(int g, int t) const { return 3 * G * N + t * G + g; }
    int iw(int g, int t) const { return 4 * G * N + t * G + g; }
    int isp(int t) const { return 5 * G * N + t; }
    int ism(int t) const { return 5 * G * N + N + t; }
    int irs(int t) const { return 5 * G * N + 2 * N + t; }

    UcLp(const PowerSystem& s, const Eigen::MatrixXd& d, Eigen::MatrixXd p, const ScucOptions& opt)
        : sys(s), load(d), ptdf(std::move(p)), lp_opt(opt.lp) {
        G = sys.n_generators();
        N = static_cast<int>(load.cols());
        B = sys.n_buses();
        E = sys.n_branches();
        n = 5 * G * N + 3 * N;
        u_init = defaulted(opt.u_initial, G, "u_initial");
        p_init = defaulted(opt.p_initial, G, "p_initial");
        dtot = load.colwise().sum();
        pload = ptdf * load;
        gbus.resize(G);
        for (int g = 0; g < G; ++g)
            gbus[g] = sys.generators()[g].bus;

        cost = Eigen::VectorXd::Zero(n);
        lb = Eigen::VectorXd::Zero(n);
        ub = Eigen::VectorXd::Constant(n, kInf);
        for (int g = 0; g < G; ++g) {
            const Generator& gen = sys.generators()[g];
            for (int t = 0; t < N; ++t) {
                cost[iP(g, t)] = gen.cost;
                cost[ir(g, t)] = gen.cost_reserve;
                cost[iu(g, t)] = gen.cost_noload;
                cost[iv(g, t)] = gen.cost_startup;
                cost[iw(g, t)] = gen.cost_shutdown;
                ub[iP(g, t)] = gen.p_max;
                ub[ir(g, t)] = std::max(0.0, gen.reserve_cap);
                ub[iu(g, t)] = 1.0;
                ub[iv(g, t)] = 1.0;
                ub[iw(g, t)] = 1.0;
            }
        }
        for (int t = 0; t < N; ++t) {
            cost[isp(t)] = kPenalty;
            cost[ism(t)] = kPenalty;
            cost[irs(t)] = kPenalty;
        }

        // equalities: hourly balance, then the start/stop identity
        int row = 0;
        for (int t = 0; t < N; ++t) {
            for (int g = 0; g < G; ++g)
                eq_t.emplace_back(row, iP(g, t), 1.0);
            eq_t.emplace_back(row, isp(t), 1.0);
            eq_t.emplace_back(row, ism(t), -1.0);
            eq_b.push_back(dtot[t]);
            ++row;
        }
        for (int g = 0; g < G; ++g)
            for (int t = 0; t < N; ++t) {
                eq_t.emplace_back(row, iv(g, t), 1.0);
                eq_t.emplace_back(row, iw(g, t), -1.0);
                eq_t.emplace_back(row, iu(g, t), -1.0);
                if (t > 0)
                    eq_t.emplace_back(row, iu(g, t - 1), 1.0);
                eq_b.push_back(t == 0 ? -u_init[g] : 0.0);
                ++row;
            }

        row = 0;
        auto rhs = [&](double b) {
            in_b.push_back(b);
            ++row;
        };
        for (int g = 0; g < G; ++g) {
            const Generator& gen = sys.generators()[g];
            for (int t = 0; t < N; ++t) {
                // output window shrunk by the reserve held
                in_t.emplace_back(row, iP(g, t), -1.0);
                in_t.emplace_back(row, iu(g, t), gen.p_min);
                in_t.emplace_back(row, ir(g, t), 1.0);
                rhs(0.0);
                in_t.emplace_back(row, iP(g, t), 1.0);
                in_t.emplace_back(row, iu(g, t), -gen.p_max);
                in_t.emplace_back(row, ir(g, t), 1.0);
                rhs(0.0);
                // ramping, with the startup/shutdown allowances
                in_t.emplace_back(row, iP(g, t), 1.0);
                in_t.emplace_back(row, iv(g, t), -gen.ramp_startup);
                if (t > 0) {
                    in_t.emplace_back(row, iP(g, t - 1), -1.0);
                    in_t.emplace_back(row, iu(g, t - 1), -gen.ramp_hourly);
                    rhs(0.0);
                } else {
                    rhs(p_init[g] + gen.ramp_hourly * u_init[g]);
                }
                in_t.emplace_back(row, iP(g, t), -1.0);
                in_t.emplace_back(row, iu(g, t), -gen.ramp_hourly);
                in_t.emplace_back(row, iw(g, t), -gen.ramp_shutdown);
                if (t > 0) {
                    in_t.emplace_back(row, iP(g, t - 1), 1.0);
                    rhs(0.0);
                } else {
                    rhs(-p_init[g]);
                }
            }
            for (int t = gen.min_up - 1; t < N; ++t) {
                for (int s = t - gen.min_up + 1; s <= t; ++s)
                    in_t.emplace_back(row, iv(g, s), 1.0);
                in_t.emplace_back(row, iu(g, t), -1.0);
                rhs(0.0);
            }
            for (int t = gen.min_down - 1; t < N; ++t) {
                for (int s = t - gen.min_down + 1; s <= t; ++s)
                    in_t.emplace_back(row, iw(g, s), 1.0);
                in_t.emplace_back(row, iu(g, t), 1.0);
                rhs(1.0);
            }
            for (int t = 0; t < N; ++t) {
                in_t.emplace_back(row, ir(g, t), 1.0);
                in_t.emplace_back(row, iu(g, t), -std::max(0.0, gen.reserve_cap));
                rhs(0.0);
            }
        }
        if (opt.reserve_fraction > 0.0)
            for (int t = 0; t < N; ++t) {
                for (int g = 0; g < G; ++g)
                    in_t.emplace_back(row, ir(g, t), -1.0);
                in_t.emplace_back(row, irs(t), -1.0);
                rhs(-opt.reserve_fraction * dtot[t]);
            }
        if (opt.unit_outage_reserve)
            for (int g = 0; g < G; ++g)
                for (int t = 0; t < N; ++t) {
                    // the pool must cover the largest single dispatch
                    in_t.emplace_back(row, iP(g, t), 1.0);
                    for (int h = 0; h < G; ++h)
                        if (h != g)
                            in_t.emplace_back(row, ir(h, t), -1.0);
                    in_t.emplace_back(row, irs(t), -1.0);
                    rhs(0.0);
                }
    }

    // flow row key: branch, hour, direction
    static int flow_id(int l, int t, bool upper, int N) { return ((l * N) + t) * 2 + (upper ? 1 : 0); }

    LinearProgram make(const Eigen::VectorXd& ulb, const Eigen::VectorXd& uub,
                       const std::set<int>& flows) const {
        LinearProgram lp;
        lp.c = cost;
        lp.lb = lb;
        lp.ub = ub;
        for (int t = 0; t < N; ++t)
            for (int g = 0; g < G; ++g) {
                lp.lb[iu(g, t)] = ulb[t * G + g];
                lp.ub[iu(g, t)] = uub[t * G + g];
            }
        lp.A_eq.resize(static_cast<int>(eq_b.size()), n);
        lp.A_eq.setFromTriplets(eq_t.begin(), eq_t.end());
        lp.b_eq = Eigen::Map<const Eigen::VectorXd>(eq_b.data(), eq_b.size());

        std::vector<Eigen::Triplet<double>> ti = in_t;
        std::vector<double> bi = in_b;
        int row = static_cast<int>(bi.size());
        for (int id : flows) {
            const bool upper = id % 2;
            const int t = (id / 2) % N;
            const int l = id / (2 * N);
            const double sgn = upper ? 1.0 : -1.0;
            for (int g = 0; g < G; ++g) {
                const double a = sgn * ptdf(l, gbus[g]);
                if (std::abs(a) > 1e-12)
                    ti.emplace_back(row, iP(g, t), a);
            }
            const Branch& br = sys.branches()[l];
            bi.push_back(upper ? br.flow_max + pload(l, t) : -br.flow_min - pload(l, t));
            ++row;
        }
        lp.A_in.resize(row, n);
        lp.A_in.setFromTriplets(ti.begin(), ti.end());
        lp.b_in = Eigen::Map<const Eigen::VectorXd>(bi.data(), bi.size());
        return lp;
    }

    Eigen::MatrixXd flows_of(const Eigen::VectorXd& z) const {
        Eigen::MatrixXd inj = Eigen::MatrixXd::Zero(B, N);
        for (int g = 0; g < G; ++g)
            for (int t = 0; t < N; ++t)
                inj(gbus[g], t) += z[iP(g, t)];
        return ptdf * inj - pload;
    }

    std::vector<int> violated(const Eigen::VectorXd& z, const std::set<int>& have) const {
        std::vector<int> out;
        if (E == 0)
            return out;
        const Eigen::MatrixXd f = flows_of(z);
        for (int l = 0; l < E; ++l) {
            const Branch& br = sys.branches()[l];
            for (int t = 0; t < N; ++t) {
                const double tol = 1e-6 * std::max(1.0, std::max(std::abs(br.flow_max), std::abs(br.flow_min)));
                if (std::isfinite(br.flow_max) && f(l, t) > br.flow_max + tol) {
                    const int id = flow_id(l, t, true, N);
                    if (!have.count(id))
                        out.push_back(id);
                }
                if (std::isfinite(br.flow_min) && f(l, t) < br.flow_min - tol) {
                    const int id = flow_id(l, t, false, N);
                    if (!have.count(id))
                        out.push_back(id);
                }
            }
        }
        return out;
    }

    double slack_sum(const Eigen::VectorXd& z) const {
        double s = 0.0;
        for (int t = 0; t < N; ++t)
            s += z[isp(t)] + z[ism(t)] + z[irs(t)];
        return s;
    }

    std::string slack_family(const Eigen::VectorXd& z) const {
        double sp = 0.0, sm = 0.0, rs = 0.0;
        for (int t = 0; t < N; ++t) {
            sp += z[isp(t)];
            sm += z[ism(t)];
            rs += z[irs(t)];
        }
        if (sp >= sm && sp >= rs)
            return "generation capacity cannot cover the load";
        if (sm >= rs)
            return "committed minimum generation exceeds the load";
        return "the reserve requirement cannot be met";
    }
};

struct NodeSol {
    bool ok = false;
    double obj = kInf;
    double slack = kInf;
    Eigen::VectorXd z;
};

NodeSol solve_node(const UcLp& M, const Eigen::VectorXd& ulb, const Eigen::VectorXd& uub,
                   std::set<int>& flows) {
    for (int round = 0; round < 2 * M.E * M.N + 2; ++round) {
        LinearProgram lp = M.make(ulb, uub, flows);
        LpResult r = solve_lp(lp, M.lp_opt);
        if (!r.converged)
            return {};
        std::vector<int> add = M.violated(r.z, flows);
        if (add.empty()) {
            NodeSol s;
            s.ok = true;
            s.obj = r.objective;
            s.slack = M.slack_sum(r.z);
            s.z = r.z;
            return s;
        }
        flows.insert(add.begin(), add.end());
    }
    return {};
}

// Enforce minimum run lengths on a rounded pattern by committing extra hours;
// adding on-time never breaks capacity, so the result is a safe candidate.
void patch_min_times(Eigen::MatrixXd& U, const PowerSystem& sys, const Eigen::VectorXd& u_init) {
    const int G = static_cast<int>(U.rows());
    const int N = static_cast<int>(U.cols());
    for (int g = 0; g < G; ++g) {
        const int mu = sys.generators()[g].min_up;
        const int md = sys.generators()[g].min_down;
        bool changed = true;
        while (changed) {
            changed = false;
            int t = 0;
            bool on_before = u_init[g] > 0.5;
            while (t < N) {
                if (U(g, t) > 0.5) {
                    on_before = true;
                    ++t;
                    continue;
                }
                const int a = t;
                while (t < N && U(g, t) < 0.5)
                    ++t;
                if (on_before && t < N && t - a < md) {
                    for (int s = a; s < t; ++s)
                        U(g, s) = 1.0;
                    changed = true;
                }
            }
            t = 0;
            while (t < N) {
                if (U(g, t) < 0.5) {
                    ++t;
                    continue;
                }
                const int a = t;
                while (t < N && U(g, t) > 0.5)
                    ++t;
                const bool started_here = a > 0 || u_init[g] < 0.5;
                if (started_here && t - a < mu) {
                    const int end = std::min(N, a + mu);
                    for (int s = t; s < end; ++s)
                        U(g, s) = 1.0;
                    if (end > t)
                        changed = true;
                }
            }
        }
    }
}

} // namespace

PowerSystem::PowerSystem(std::vector<PowerBus> buses, std::vector<Branch> branches,
                         std::vector<Generator> generators, int reference_bus)
    : buses_(std::move(buses)), branches_(std::move(branches)), generators_(std::move(generators)),
      ref_(reference_bus) {
    const int B = n_buses();
    if (B == 0)
        throw InputError("power system needs at least one bus");
    if (ref_ < 0 || ref_ >= B)
        throw InputError("reference bus index out of range");
    std::unordered_set<std::string> ids;
    for (const PowerBus& b : buses_) {
        if (b.id.empty() || !ids.insert("b:" + b.id).second)
            throw InputError("bus ids must be unique and nonempty");
    }
    for (const Branch& br : branches_) {
        if (br.id.empty() || !ids.insert("l:" + br.id).second)
            throw InputError("branch ids must be unique and nonempty");
        if (br.from < 0 || br.from >= B || br.to < 0 || br.to >= B || br.from == br.to)
            throw InputError("branch " + br.id + " has bad endpoints");
        if (!(br.susceptance > 0.0))
            throw InputError("branch " + br.id + " needs a positive susceptance");
        if (br.flow_min > br.flow_max)
            throw InputError("branch " + br.id + " has an empty flow window");
    }
    for (const Generator& g : generators_) {
        if (g.id.empty() || !ids.insert("g:" + g.id).second)
            throw InputError("generator ids must be unique and nonempty");
        if (g.bus < 0 || g.bus >= B)
            throw InputError("generator " + g.id + " references a missing bus");
        if (!(g.p_min >= 0.0) || g.p_min > g.p_max)
            throw InputError("generator " + g.id + " has a bad output range");
        if (g.ramp_hourly < 0.0 || g.ramp_startup < 0.0 || g.ramp_shutdown < 0.0)
            throw InputError("generator " + g.id + " has negative ramp limits");
        if (g.min_up < 1 || g.min_down < 1)
            throw InputError("generator " + g.id + " needs minimum times of at least one hour");
        if (g.reserve_cap < 0.0)
            throw InputError("generator " + g.id + " has a negative reserve limit");
    }
    if (B > 1) {
        std::vector<char> seen(B, 0);
        std::queue<int> q;
        q.push(0);
        seen[0] = 1;
        while (!q.empty()) {
            const int b = q.front();
            q.pop();
            for (const Branch& br : branches_) {
                const int other = br.from == b ? br.to : (br.to == b ? br.from : -1);
                if (other >= 0 && !seen[other]) {
                    seen[other] = 1;
                    q.push(other);
                }
            }
        }
        for (int b = 0; b < B; ++b)
            if (!seen[b])
                throw InputError("bus " + buses_[b].id + " is not connected to the grid");
    }
}

int PowerSystem::bus_index(const std::string& id) const {
    for (int i = 0; i < n_buses(); ++i)
        if (buses_[i].id == id)
            return i;
    throw InputError("unknown bus " + id);
}

int PowerSystem::generator_index(const std::string& id) const {
    for (int i = 0; i < n_generators(); ++i)
        if (generators_[i].id == id)
            return i;
    throw InputError("unknown generator " + id);
}

Eigen::MatrixXd compute_ptdf(const PowerSystem& sys) {
    const int B = sys.n_buses();
    const int E = sys.n_branches();
    const int ref = sys.reference_bus();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(E, B);
    if (E == 0)
        return out;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(E, B);
    Eigen::VectorXd b(E);
    for (int l = 0; l < E; ++l) {
        const Branch& br = sys.branches()[l];
        A(l, br.from) = 1.0;
        A(l, br.to) = -1.0;
        b[l] = br.susceptance;
    }
    const Eigen::MatrixXd H = b.asDiagonal() * A;
    const Eigen::MatrixXd Bp = A.transpose() * H;
    std::vector<int> keep;
    keep.reserve(B - 1);
    for (int i = 0; i < B; ++i)
        if (i != ref)
            keep.push_back(i);
    const int m = static_cast<int>(keep.size());
    Eigen::MatrixXd Bred(m, m), Hred(E, m);
    for (int j = 0; j < m; ++j) {
        Hred.col(j) = H.col(keep[j]);
        for (int i = 0; i < m; ++i)
            Bred(i, j) = Bp(keep[i], keep[j]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Bred);
    if (!lu.isInvertible())
        throw InputError("power network is not electrically connected");
    const Eigen::MatrixXd X = lu.solve(Hred.transpose()); // (B-1) x E
    for (int j = 0; j < m; ++j)
        out.col(keep[j]) = X.row(j).transpose();
    return out;
}

ScucResult solve_scuc(const PowerSystem& sys, const Eigen::MatrixXd& load, const ScucOptions& opt) {
    check_load(sys, load);
    const int G = sys.n_generators();
    const int N = static_cast<int>(load.cols());
    if (G == 0)
        throw InputError("commitment needs at least one generator");

    UcLp M(sys, load, compute_ptdf(sys), opt);
    std::set<int> flows;
    const double slack_tol = 1e-6 * std::max(1.0, M.dtot.maxCoeff());

    Eigen::VectorXd ulb = Eigen::VectorXd::Zero(G * N);
    Eigen::VectorXd uub = Eigen::VectorXd::Ones(G * N);
    NodeSol root = solve_node(M, ulb, uub, flows);
    if (!root.ok)
        throw SolveError("commitment infeasible: the line limits cannot be met");
    if (root.slack > slack_tol)
        throw SolveError("commitment infeasible: " + M.slack_family(root.z));

    double incumbent = kInf;
    Eigen::VectorXd inc_z;
    auto gap_abs = [&] { return opt.gap_tol * std::max(1.0, std::abs(incumbent)); };

    struct Node {
        double bound;
        long long seq;
        Eigen::VectorXd ulb, uub;
    };
    auto later = [](const Node& a, const Node& b) {
        return a.bound > b.bound || (a.bound == b.bound && a.seq > b.seq);
    };
    std::priority_queue<Node, std::vector<Node>, decltype(later)> open(later);
    long long seq = 0;
    int nodes = 1;

    auto handle = [&](const NodeSol& s, const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
        if (!s.ok || s.slack > slack_tol || s.obj >= incumbent - gap_abs())
            return;
        int bg = -1, bt = -1;
        double frac = 1e-5;
        for (int g = 0; g < G; ++g)
            for (int t = 0; t < N; ++t) {
                const double x = s.z[M.iu(g, t)];
                const double f = std::min(x, 1.0 - x);
                if (f > frac) {
                    frac = f;
                    bg = g;
                    bt = t;
                }
            }
        if (bg < 0) {
            if (s.obj < incumbent) {
                incumbent = s.obj;
                inc_z = s.z;
            }
            return;
        }
        Node off{s.obj, seq++, l, u};
        off.uub[bt * G + bg] = 0.0;
        Node on{s.obj, seq++, l, u};
        on.ulb[bt * G + bg] = 1.0;
        open.push(std::move(off));
        open.push(std::move(on));
    };

    handle(root, ulb, uub);

    // rounded-up root pattern as the starting incumbent
    if (incumbent == kInf) {
        Eigen::MatrixXd U(G, N);
        for (int g = 0; g < G; ++g)
            for (int t = 0; t < N; ++t)
                U(g, t) = root.z[M.iu(g, t)] > 1e-6 ? 1.0 : 0.0;
        patch_min_times(U, sys, M.u_init);
        Eigen::VectorXd fix(G * N);
        for (int t = 0; t < N; ++t)
            for (int g = 0; g < G; ++g)
                fix[t * G + g] = U(g, t);
        NodeSol h = solve_node(M, fix, fix, flows);
        if (h.ok && h.slack <= slack_tol && h.obj < incumbent) {
            incumbent = h.obj;
            inc_z = h.z;
        }
    }

    double best_bound = incumbent;
    while (!open.empty()) {
        Node nd = open.top();
        open.pop();
        if (incumbent < kInf && nd.bound >= incumbent - gap_abs()) {
            best_bound = nd.bound;
            break;
        }
        if (++nodes > opt.max_nodes)
            throw SolveError("commitment search exceeded the node budget");
        NodeSol s = solve_node(M, nd.ulb, nd.uub, flows);
        handle(s, nd.ulb, nd.uub);
    }
    if (!(incumbent < kInf))
        throw SolveError("commitment infeasible: no on/off pattern satisfies the constraints");

    ScucResult res;
    res.nodes_explored = nodes;
    CommitmentSchedule& sch = res.schedule;
    sch.u.resize(G, N);
    sch.v.resize(G, N);
    sch.w.resize(G, N);
    sch.r.resize(G, N);
    res.dispatch.p.resize(G, N);
    double obj = 0.0;
    for (int g = 0; g < G; ++g) {
        const Generator& gen = sys.generators()[g];
        for (int t = 0; t < N; ++t) {
            const double uv = inc_z[M.iu(g, t)] > 0.5 ? 1.0 : 0.0;
            const double up = t > 0 ? sch.u(g, t - 1) : M.u_init[g];
            sch.u(g, t) = uv;
            sch.v(g, t) = std::max(uv - up, 0.0);
            sch.w(g, t) = std::max(up - uv, 0.0);
            sch.r(g, t) = std::max(0.0, inc_z[M.ir(g, t)]);
            res.dispatch.p(g, t) = std::max(0.0, inc_z[M.iP(g, t)]);
            obj += gen.cost * res.dispatch.p(g, t) + gen.cost_noload * sch.u(g, t) +
                   gen.cost_startup * sch.v(g, t) + gen.cost_shutdown * sch.w(g, t) +
                   gen.cost_reserve * sch.r(g, t);
        }
    }
    res.objective = obj;
    res.bound = std::min(best_bound, obj);
    res.dispatch.flow = M.flows_of(inc_z);
    res.dispatch.shed = Eigen::MatrixXd::Zero(sys.n_buses(), N);
    double energy = 0.0;
    for (int g = 0; g < G; ++g)
        energy += sys.generators()[g].cost * res.dispatch.p.row(g).sum();
    res.dispatch.cost = energy;
    return res;
}

DispatchResult solve_dcopf(const PowerSystem& sys, const CommitmentSchedule& schedule,
                           const Eigen::MatrixXd& load,
                           const std::vector<GeneratorOutage>& outages, const DcopfOptions& opt) {
    check_load(sys, load);
    const int G = sys.n_generators();
    const int B = sys.n_buses();
    const int E = sys.n_branches();
    const int N = static_cast<int>(load.cols());
    if (schedule.u.rows() != G || schedule.u.cols() != N || schedule.v.rows() != G ||
        schedule.v.cols() != N || schedule.w.rows() != G || schedule.w.cols() != N ||
        schedule.r.rows() != G || schedule.r.cols() != N)
        throw InputError("commitment schedule does not match the system and horizon");
    std::vector<int> out_from(G, N); // first hour the generator is gone; N = never
    for (const GeneratorOutage& o : outages) {
        if (o.generator < 0 || o.generator >= G)
            throw InputError("outaged generator index out of range");
        out_from[o.generator] = std::min(out_from[o.generator], std::max(0, o.from_hour));
    }
    const Eigen::VectorXd p_init = defaulted(opt.p_initial, G, "p_initial");
    const Eigen::MatrixXd ptdf = compute_ptdf(sys);
    const Eigen::MatrixXd pload = ptdf * load;

    const int n = G * N + B * N;
    auto iP = [&](int g, int t) { return t * G + g; };
    auto ish = [&](int b, int t) { return G * N + t * B + b; };

    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd lo = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd hi = Eigen::VectorXd::Zero(n);
    for (int g = 0; g < G; ++g) {
        const Generator& gen = sys.generators()[g];
        for (int t = 0; t < N; ++t) {
            c[iP(g, t)] = gen.cost;
            if (t >= out_from[g] || schedule.u(g, t) < 0.5) {
                lo[iP(g, t)] = hi[iP(g, t)] = 0.0;
            } else {
                const double r = std::max(0.0, schedule.r(g, t));
                double pmin = gen.p_min + r;
                double pmax = gen.p_max - r;
                if (pmin > pmax + 1e-9)
                    throw InputError("reserve on " + gen.id + " leaves no dispatch window");
                lo[iP(g, t)] = std::min(pmin, pmax);
                hi[iP(g, t)] = pmax;
            }
        }
    }
    for (int b = 0; b < B; ++b)
        for (int t = 0; t < N; ++t) {
            c[ish(b, t)] = opt.voll;
            hi[ish(b, t)] = std::max(0.0, load(b, t));
        }

    std::vector<Eigen::Triplet<double>> eq_t, in_t;
    std::vector<double> eq_b, in_b;
    for (int t = 0; t < N; ++t) {
        const int row = t;
        for (int g = 0; g < G; ++g)
            eq_t.emplace_back(row, iP(g, t), 1.0);
        for (int b = 0; b < B; ++b)
            eq_t.emplace_back(row, ish(b, t), 1.0);
        eq_b.push_back(load.col(t).sum());
    }
    int row = 0;
    for (int g = 0; g < G; ++g) {
        const Generator& gen = sys.generators()[g];
        // pre-horizon status recovered from the start/stop identity
        const double u_init =
            std::min(1.0, std::max(0.0, schedule.u(g, 0) - schedule.v(g, 0) + schedule.w(g, 0)));
        for (int t = 0; t < out_from[g]; ++t) {
            const double u_prev = t > 0 ? schedule.u(g, t - 1) : u_init;
            const double p_prev_rhs = t > 0 ? 0.0 : p_init[g];
            in_t.emplace_back(row, iP(g, t), 1.0);
            if (t > 0)
                in_t.emplace_back(row, iP(g, t - 1), -1.0);
            in_b.push_back(p_prev_rhs + gen.ramp_hourly * u_prev +
                           gen.ramp_startup * schedule.v(g, t));
            ++row;
            in_t.emplace_back(row, iP(g, t), -1.0);
            if (t > 0)
                in_t.emplace_back(row, iP(g, t - 1), 1.0);
            in_b.push_back(-p_prev_rhs + gen.ramp_hourly * schedule.u(g, t) +
                           gen.ramp_shutdown * schedule.w(g, t));
            ++row;
        }
    }
    const int base_rows = row;

    std::vector<int> gbus(G);
    for (int g = 0; g < G; ++g)
        gbus[g] = sys.generators()[g].bus;

    auto flows_of = [&](const Eigen::VectorXd& z) {
        Eigen::MatrixXd inj = Eigen::MatrixXd::Zero(B, N);
        for (int g = 0; g < G; ++g)
            for (int t = 0; t < N; ++t)
                inj(gbus[g], t) += z[iP(g, t)];
        Eigen::MatrixXd shed(B, N);
        for (int b = 0; b < B; ++b)
            for (int t = 0; t < N; ++t)
                shed(b, t) = z[ish(b, t)];
        return Eigen::MatrixXd(ptdf * (inj + shed) - pload);
    };

    std::set<int> flows;
    LpResult r;
    for (int round = 0; round < 2 * E * N + 2; ++round) {
        std::vector<Eigen::Triplet<double>> ti = in_t;
        std::vector<double> bi = in_b;
        int rr = base_rows;
        for (int id : flows) {
            const bool upper = id % 2;
            const int t = (id / 2) % N;
            const int l = id / (2 * N);
            const double sgn = upper ? 1.0 : -1.0;
            for (int g = 0; g < G; ++g) {
                const double a = sgn * ptdf(l, gbus[g]);
                if (std::abs(a) > 1e-12)
                    ti.emplace_back(rr, iP(g, t), a);
            }
            for (int b = 0; b < B; ++b) {
                const double a = sgn * ptdf(l, b);
                if (std::abs(a) > 1e-12)
                    ti.emplace_back(rr, ish(b, t), a);
            }
            const Branch& br = sys.branches()[l];
            bi.push_back(upper ? br.flow_max + pload(l, t) : -br.flow_min - pload(l, t));
            ++rr;
        }
        LinearProgram lp;
        lp.c = c;
        lp.lb = lo;
        lp.ub = hi;
        lp.A_eq.resize(static_cast<int>(eq_b.size()), n);
        lp.A_eq.setFromTriplets(eq_t.begin(), eq_t.end());
        lp.b_eq = Eigen::Map<const Eigen::VectorXd>(eq_b.data(), eq_b.size());
        lp.A_in.resize(rr, n);
        lp.A_in.setFromTriplets(ti.begin(), ti.end());
        lp.b_in = Eigen::Map<const Eigen::VectorXd>(bi.data(), bi.size());
        r = solve_lp(lp, opt.lp);
        if (!r.converged)
            throw SolveError("redispatch failed under the fixed commitment");

        std::vector<int> add;
        if (E > 0) {
            const Eigen::MatrixXd f = flows_of(r.z);
            for (int l = 0; l < E; ++l) {
                const Branch& br = sys.branches()[l];
                const double tol =
                    1e-6 * std::max(1.0, std::max(std::abs(br.flow_max), std::abs(br.flow_min)));
                for (int t = 0; t < N; ++t) {
                    if (std::isfinite(br.flow_max) && f(l, t) > br.flow_max + tol &&
                        !flows.count(UcLp::flow_id(l, t, true, N)))
                        add.push_back(UcLp::flow_id(l, t, true, N));
                    if (std::isfinite(br.flow_min) && f(l, t) < br.flow_min - tol &&
                        !flows.count(UcLp::flow_id(l, t, false, N)))
                        add.push_back(UcLp::flow_id(l, t, false, N));
                }
            }
        }
        if (add.empty())
            break;
        flows.insert(add.begin(), add.end());
    }

    DispatchResult out;
    out.p.resize(G, N);
    out.shed.resize(B, N);
    for (int g = 0; g < G; ++g)
        for (int t = 0; t < N; ++t)
            out.p(g, t) = std::max(0.0, r.z[iP(g, t)]);
    for (int b = 0; b < B; ++b)
        for (int t = 0; t < N; ++t)
            out.shed(b, t) = std::max(0.0, r.z[ish(b, t)]);
    out.flow = flows_of(r.z);
    out.cost = r.objective;
    return out;
}

} // namespace pipegrid
