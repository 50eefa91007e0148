#include "doctest.h"

#include <cmath>
#include <vector>

#include "pipegrid/power_market.hpp"

using namespace pipegrid;

namespace {

PowerSystem two_bus(double line_cap) {
    std::vector<PowerBus> buses{{"b1"}, {"b2"}};
    Branch br;
    br.id = "l1";
    br.from = 0;
    br.to = 1;
    br.susceptance = 10.0;
    br.flow_min = -line_cap;
    br.flow_max = line_cap;
    Generator a;
    a.id = "g1";
    a.bus = 0;
    a.cost = 20.0;
    a.p_max = 200.0;
    a.ramp_hourly = a.ramp_startup = a.ramp_shutdown = 200.0;
    Generator b;
    b.id = "g2";
    b.bus = 1;
    b.cost = 45.0;
    b.p_max = 100.0;
    b.ramp_hourly = b.ramp_startup = b.ramp_shutdown = 100.0;
    return PowerSystem(buses, {br}, {a, b}, 0);
}

ScucOptions no_reserve() {
    ScucOptions opt;
    opt.reserve_fraction = 0.0;
    opt.unit_outage_reserve = false;
    return opt;
}

CommitmentSchedule all_on(int G, int N) {
    CommitmentSchedule s;
    s.u = Eigen::MatrixXd::Ones(G, N);
    s.v = Eigen::MatrixXd::Zero(G, N);
    s.v.col(0).setOnes();
    s.w = Eigen::MatrixXd::Zero(G, N);
    s.r = Eigen::MatrixXd::Zero(G, N);
    return s;
}

// truncated-window run rule: every start holds the unit on for min_up hours,
// every stop holds it off for min_down, as far as the horizon reaches
bool runs_ok(const Eigen::MatrixXd& U, int g, int mu, int md) {
    const int N = static_cast<int>(U.cols());
    double prev = 0.0;
    for (int t = 0; t < N; ++t) {
        if (U(g, t) > 0.5 && prev < 0.5)
            for (int s = t; s < std::min(N, t + mu); ++s)
                if (U(g, s) < 0.5)
                    return false;
        if (U(g, t) < 0.5 && prev > 0.5)
            for (int s = t; s < std::min(N, t + md); ++s)
                if (U(g, s) > 0.5)
                    return false;
        prev = U(g, t);
    }
    return true;
}

// dispatch cost of one frozen on/off pattern, built straight from the rules
// rather than through the commitment solver
double pattern_cost(const PowerSystem& sys, const Eigen::MatrixXd& U, const Eigen::VectorXd& d) {
    const int G = sys.n_generators();
    const int N = static_cast<int>(d.size());
    double fixed = 0.0;
    for (int g = 0; g < G; ++g) {
        const Generator& gen = sys.generators()[g];
        if (!runs_ok(U, g, gen.min_up, gen.min_down))
            return kInf;
        double prev = 0.0;
        for (int t = 0; t < N; ++t) {
            fixed += gen.cost_noload * U(g, t);
            if (U(g, t) > 0.5 && prev < 0.5)
                fixed += gen.cost_startup;
            if (U(g, t) < 0.5 && prev > 0.5)
                fixed += gen.cost_shutdown;
            prev = U(g, t);
        }
    }

    LinearProgram lp;
    const int n = G * N;
    auto iP = [&](int g, int t) { return t * G + g; };
    lp.c.resize(n);
    lp.lb.resize(n);
    lp.ub.resize(n);
    for (int g = 0; g < G; ++g)
        for (int t = 0; t < N; ++t) {
            lp.c[iP(g, t)] = sys.generators()[g].cost;
            lp.lb[iP(g, t)] = sys.generators()[g].p_min * U(g, t);
            lp.ub[iP(g, t)] = sys.generators()[g].p_max * U(g, t);
        }
    std::vector<Eigen::Triplet<double>> te, ti;
    std::vector<double> be, bi;
    for (int t = 0; t < N; ++t) {
        for (int g = 0; g < G; ++g)
            te.emplace_back(t, iP(g, t), 1.0);
        be.push_back(d[t]);
    }
    int row = 0;
    for (int g = 0; g < G; ++g) {
        const Generator& gen = sys.generators()[g];
        double prev = 0.0;
        for (int t = 0; t < N; ++t) {
            const double v = U(g, t) > 0.5 && prev < 0.5 ? 1.0 : 0.0;
            const double w = U(g, t) < 0.5 && prev > 0.5 ? 1.0 : 0.0;
            ti.emplace_back(row, iP(g, t), 1.0);
            if (t > 0)
                ti.emplace_back(row, iP(g, t - 1), -1.0);
            bi.push_back(gen.ramp_hourly * prev + gen.ramp_startup * v);
            ++row;
            ti.emplace_back(row, iP(g, t), -1.0);
            if (t > 0)
                ti.emplace_back(row, iP(g, t - 1), 1.0);
            bi.push_back(gen.ramp_hourly * U(g, t) + gen.ramp_shutdown * w);
            ++row;
            prev = U(g, t);
        }
    }
    lp.A_eq.resize(N, n);
    lp.A_eq.setFromTriplets(te.begin(), te.end());
    lp.b_eq = Eigen::Map<const Eigen::VectorXd>(be.data(), be.size());
    lp.A_in.resize(row, n);
    lp.A_in.setFromTriplets(ti.begin(), ti.end());
    lp.b_in = Eigen::Map<const Eigen::VectorXd>(bi.data(), bi.size());
    LpResult r = solve_lp(lp);
    if (!r.converged)
        return kInf;
    return r.objective + fixed;
}

double enumerate_best(const PowerSystem& sys, const Eigen::VectorXd& d) {
    const int G = sys.n_generators();
    const int N = static_cast<int>(d.size());
    double best = kInf;
    for (long mask = 0; mask < (1L << (G * N)); ++mask) {
        Eigen::MatrixXd U(G, N);
        for (int g = 0; g < G; ++g)
            for (int t = 0; t < N; ++t)
                U(g, t) = (mask >> (g * N + t)) & 1 ? 1.0 : 0.0;
        best = std::min(best, pattern_cost(sys, U, d));
    }
    return best;
}

} // namespace

TEST_CASE("line sensitivities match the angle formulation") {
    std::vector<PowerBus> buses{{"b1"}, {"b2"}, {"b3"}, {"b4"}};
    auto line = [](const char* id, int f, int t, double b) {
        Branch br;
        br.id = id;
        br.from = f;
        br.to = t;
        br.susceptance = b;
        br.flow_min = -1e3;
        br.flow_max = 1e3;
        return br;
    };
    std::vector<Branch> lines{line("l1", 0, 1, 5.0), line("l2", 1, 2, 8.0), line("l3", 2, 3, 4.0),
                              line("l4", 3, 0, 6.0), line("l5", 1, 3, 3.0)};
    Generator g;
    g.id = "g1";
    g.bus = 0;
    g.p_max = 10.0;
    PowerSystem sys(buses, lines, {g}, 0);
    const int B = 4, E = 5;
    Eigen::MatrixXd ptdf = compute_ptdf(sys);
    REQUIRE(ptdf.rows() == E);
    REQUIRE(ptdf.cols() == B);
    CHECK(ptdf.col(0).cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(E, B);
    Eigen::VectorXd b(E);
    for (int l = 0; l < E; ++l) {
        A(l, sys.branches()[l].from) = 1.0;
        A(l, sys.branches()[l].to) = -1.0;
        b[l] = sys.branches()[l].susceptance;
    }
    Eigen::MatrixXd Bp = A.transpose() * b.asDiagonal() * A;
    Eigen::MatrixXd Bred = Bp.block(1, 1, B - 1, B - 1); // reference is bus 0
    for (int k = 1; k < B; ++k) {
        Eigen::VectorXd inj = Eigen::VectorXd::Zero(B - 1);
        inj[k - 1] = 1.0;
        Eigen::VectorXd th = Eigen::VectorXd::Zero(B);
        th.tail(B - 1) = Bred.ldlt().solve(inj);
        Eigen::VectorXd flow = b.asDiagonal() * A * th;
        for (int l = 0; l < E; ++l)
            CHECK(ptdf(l, k) == doctest::Approx(flow[l]).epsilon(1e-10));
    }
}

TEST_CASE("equal triangle splits an injection two thirds to one third") {
    std::vector<PowerBus> buses{{"b1"}, {"b2"}, {"b3"}};
    auto line = [](const char* id, int f, int t) {
        Branch br;
        br.id = id;
        br.from = f;
        br.to = t;
        br.susceptance = 1.0;
        br.flow_min = -10.0;
        br.flow_max = 10.0;
        return br;
    };
    Generator g;
    g.id = "g1";
    g.bus = 1;
    g.p_max = 1.0;
    PowerSystem sys(buses, {line("l1", 0, 1), line("l2", 1, 2), line("l3", 0, 2)}, {g}, 0);
    Eigen::MatrixXd ptdf = compute_ptdf(sys);
    CHECK(ptdf(0, 1) == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
    CHECK(ptdf(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(ptdf(2, 1) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("system validation rejects bad definitions") {
    std::vector<PowerBus> buses{{"b1"}, {"b2"}};
    Branch br;
    br.id = "l1";
    br.from = 0;
    br.to = 1;
    br.susceptance = 1.0;
    Generator g;
    g.id = "g1";
    g.bus = 0;
    g.p_max = 10.0;

    CHECK_THROWS_AS(PowerSystem({{"b1"}, {"b1"}}, {br}, {g}, 0), InputError);
    CHECK_THROWS_AS(PowerSystem(buses, {br}, {g}, 5), InputError);
    CHECK_THROWS_AS(PowerSystem({{"b1"}, {"b2"}, {"b3"}}, {br}, {g}, 0), InputError);

    Branch loop = br;
    loop.to = 0;
    CHECK_THROWS_AS(PowerSystem(buses, {loop}, {g}, 0), InputError);
    Branch weak = br;
    weak.susceptance = 0.0;
    CHECK_THROWS_AS(PowerSystem(buses, {weak}, {g}, 0), InputError);

    Generator bad = g;
    bad.p_min = 20.0;
    CHECK_THROWS_AS(PowerSystem(buses, {br}, {bad}, 0), InputError);
    bad = g;
    bad.min_up = 0;
    CHECK_THROWS_AS(PowerSystem(buses, {br}, {bad}, 0), InputError);
    bad = g;
    bad.bus = 7;
    CHECK_THROWS_AS(PowerSystem(buses, {br}, {bad}, 0), InputError);

    PowerSystem ok(buses, {br}, {g}, 0);
    CHECK(ok.bus_index("b2") == 1);
    CHECK(ok.generator_index("g1") == 0);
    CHECK_THROWS_AS(ok.bus_index("nope"), InputError);
    CHECK_THROWS_AS(solve_scuc(ok, Eigen::MatrixXd::Constant(1, 4, 5.0), no_reserve()),
                    InputError); // load rows != buses
}

TEST_CASE("single generator commitment carries a flat load") {
    std::vector<PowerBus> buses{{"b1"}};
    Generator g;
    g.id = "g1";
    g.bus = 0;
    g.cost = 20.0;
    g.cost_noload = 5.0;
    g.cost_startup = 100.0;
    g.p_min = 10.0;
    g.p_max = 100.0;
    g.ramp_hourly = g.ramp_startup = g.ramp_shutdown = 100.0;
    PowerSystem sys(buses, {}, {g}, 0);
    Eigen::MatrixXd load = Eigen::MatrixXd::Constant(1, 24, 50.0);
    ScucResult r = solve_scuc(sys, load, no_reserve());
    CHECK(r.objective == doctest::Approx(24 * (50 * 20.0 + 5.0) + 100.0).epsilon(1e-8));
    for (int t = 0; t < 24; ++t) {
        CHECK(r.schedule.u(0, t) == 1.0);
        CHECK(r.dispatch.p(0, t) == doctest::Approx(50.0).epsilon(1e-7));
    }
    CHECK(r.schedule.v(0, 0) == 1.0);
    CHECK(r.dispatch.total_shed() == 0.0);
}

TEST_CASE("commitment matches exhaustive enumeration") {
    std::vector<PowerBus> buses{{"b1"}};
    Generator a;
    a.id = "base";
    a.bus = 0;
    a.cost = 15.0;
    a.cost_noload = 10.0;
    a.cost_startup = 50.0;
    a.p_min = 20.0;
    a.p_max = 80.0;
    a.ramp_hourly = 40.0;
    a.ramp_startup = 80.0;
    a.ramp_shutdown = 80.0;
    Generator b;
    b.id = "peak";
    b.bus = 0;
    b.cost = 40.0;
    b.cost_noload = 2.0;
    b.cost_startup = 10.0;
    b.p_min = 5.0;
    b.p_max = 60.0;
    b.ramp_hourly = b.ramp_startup = b.ramp_shutdown = 60.0;
    PowerSystem sys(buses, {}, {a, b}, 0);
    Eigen::VectorXd d(3);
    d << 60.0, 110.0, 70.0;

    const double best = enumerate_best(sys, d);
    ScucResult r = solve_scuc(sys, Eigen::MatrixXd(d.transpose()), no_reserve());
    CHECK(r.objective == doctest::Approx(best).epsilon(1e-6));
    CHECK(r.bound <= r.objective + 1e-6 * std::abs(r.objective));
    for (int g = 0; g < 2; ++g)
        CHECK(runs_ok(r.schedule.u, g, sys.generators()[g].min_up, sys.generators()[g].min_down));
    for (int t = 0; t < 3; ++t)
        CHECK(r.dispatch.p.col(t).sum() == doctest::Approx(d[t]).epsilon(1e-8));
}

TEST_CASE("minimum up time holds through a one hour spike") {
    std::vector<PowerBus> buses{{"b1"}};
    Generator a;
    a.id = "base";
    a.bus = 0;
    a.cost = 10.0;
    a.cost_noload = 5.0;
    a.cost_startup = 30.0;
    a.p_min = 20.0;
    a.p_max = 100.0;
    a.ramp_hourly = a.ramp_startup = a.ramp_shutdown = 100.0;
    Generator b;
    b.id = "peak";
    b.bus = 0;
    b.cost = 50.0;
    b.cost_noload = 1.0;
    b.cost_startup = 20.0;
    b.p_min = 10.0;
    b.p_max = 50.0;
    b.ramp_hourly = b.ramp_startup = b.ramp_shutdown = 50.0;
    b.min_up = 3;
    PowerSystem sys(buses, {}, {a, b}, 0);
    Eigen::VectorXd d(4);
    d << 80.0, 120.0, 80.0, 80.0;

    const double best = enumerate_best(sys, d);
    ScucResult r = solve_scuc(sys, Eigen::MatrixXd(d.transpose()), no_reserve());
    CHECK(r.objective == doctest::Approx(best).epsilon(1e-6));
    CHECK(runs_ok(r.schedule.u, 1, 3, 1));
    // the peaker is needed in hour 1, so some three hour run must cover it
    CHECK(r.schedule.u(1, 1) == 1.0);
    CHECK(r.schedule.u.row(1).sum() >= 3.0);
}

TEST_CASE("reserve rules bind the committed fleet") {
    std::vector<PowerBus> buses{{"b1"}};
    Generator a;
    a.id = "g1";
    a.bus = 0;
    a.cost = 15.0;
    a.p_max = 200.0;
    a.ramp_hourly = a.ramp_startup = a.ramp_shutdown = 200.0;
    a.reserve_cap = 60.0;
    a.cost_reserve = 1.0;
    Generator b = a;
    b.id = "g2";
    b.cost = 30.0;
    PowerSystem sys(buses, {}, {a, b}, 0);
    Eigen::MatrixXd load = Eigen::MatrixXd::Constant(1, 2, 100.0);
    ScucResult r = solve_scuc(sys, load, {});

    for (int t = 0; t < 2; ++t) {
        const double pool = r.schedule.r.col(t).sum();
        CHECK(pool >= 0.07 * 100.0 - 1e-6);
        for (int g = 0; g < 2; ++g) {
            const Generator& gen = sys.generators()[g];
            const double u = r.schedule.u(g, t);
            const double rr = r.schedule.r(g, t);
            const double p = r.dispatch.p(g, t);
            CHECK(p + rr <= pool + 1e-6);
            CHECK(rr <= gen.reserve_cap * u + 1e-6);
            CHECK(p >= gen.p_min * u + rr - 1e-6);
            CHECK(p <= gen.p_max * u - rr + 1e-6);
            const double prev = t > 0 ? r.schedule.u(g, t - 1) : 0.0;
            CHECK(r.schedule.v(g, t) - r.schedule.w(g, t) ==
                  doctest::Approx(u - prev).epsilon(1e-12));
        }
    }
    // the pool must fit above both minimums: p = 50/50, r = 50/50 is the vertex
    CHECK(r.objective == doctest::Approx(2 * (50 * 15.0 + 50 * 30.0 + 100.0)).epsilon(1e-6));
}

TEST_CASE("impossible loads are refused with a cause") {
    std::vector<PowerBus> buses{{"b1"}};
    Generator g;
    g.id = "g1";
    g.bus = 0;
    g.cost = 20.0;
    g.p_max = 100.0;
    g.ramp_hourly = g.ramp_startup = g.ramp_shutdown = 100.0;
    PowerSystem sys(buses, {}, {g}, 0);
    CHECK_THROWS_AS(solve_scuc(sys, Eigen::MatrixXd::Constant(1, 3, 500.0), no_reserve()),
                    SolveError);

    PowerSystem grid = two_bus(80.0);
    Eigen::MatrixXd load = Eigen::MatrixXd::Zero(2, 2);
    load.row(1).setConstant(150.0);
    load(1, 0) = 190.0; // line 80 plus the local 100 cannot carry 190
    CHECK_THROWS_AS(solve_scuc(grid, load, no_reserve()), SolveError);
}

TEST_CASE("redispatch reproduces the committed plan when nothing fails") {
    PowerSystem sys = two_bus(150.0);
    Eigen::MatrixXd load = Eigen::MatrixXd::Zero(2, 2);
    load.row(1).setConstant(120.0);
    ScucResult r = solve_scuc(sys, load, no_reserve());
    DispatchResult d = solve_dcopf(sys, r.schedule, load);
    CHECK(d.total_shed() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(d.cost == doctest::Approx(r.dispatch.cost).epsilon(1e-6));
    for (int t = 0; t < 2; ++t)
        CHECK(std::abs(d.flow(0, t)) <= 150.0 + 1e-6);
}

TEST_CASE("curtailed generation moves to the remaining units and sheds the rest") {
    PowerSystem sys = two_bus(150.0);
    Eigen::MatrixXd load = Eigen::MatrixXd::Zero(2, 2);
    load.row(1).setConstant(120.0);
    CommitmentSchedule s = all_on(2, 2);

    DispatchResult base = solve_dcopf(sys, s, load);
    CHECK(base.p(0, 0) == doctest::Approx(120.0).epsilon(1e-7));
    CHECK(base.p(1, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
    CHECK(base.flow(0, 0) == doctest::Approx(120.0).epsilon(1e-7));
    CHECK(base.cost == doctest::Approx(2 * 120 * 20.0).epsilon(1e-7));

    DispatchResult cut = solve_dcopf(sys, s, load, {{0, 0}});
    for (int t = 0; t < 2; ++t) {
        CHECK(cut.p(0, t) == 0.0);
        CHECK(cut.p(1, t) == doctest::Approx(100.0).epsilon(1e-7));
        CHECK(cut.shed(1, t) == doctest::Approx(20.0).epsilon(1e-6));
    }
    CHECK(cut.cost == doctest::Approx(2 * (100 * 45.0 + 20 * 10000.0)).epsilon(1e-7));
}

TEST_CASE("ramp limits stagger the replacement output") {
    std::vector<PowerBus> buses{{"b1"}};
    Generator big;
    big.id = "g1";
    big.bus = 0;
    big.cost = 18.0;
    big.p_max = 150.0;
    big.ramp_hourly = big.ramp_startup = big.ramp_shutdown = 150.0;
    Generator slow;
    slow.id = "g2";
    slow.bus = 0;
    slow.cost = 25.0;
    slow.p_max = 100.0;
    slow.ramp_hourly = 40.0;
    slow.ramp_startup = 40.0;
    slow.ramp_shutdown = 40.0;
    PowerSystem sys(buses, {}, {big, slow}, 0);
    Eigen::MatrixXd load = Eigen::MatrixXd::Constant(1, 3, 100.0);
    CommitmentSchedule s = all_on(2, 3);

    DispatchResult d = solve_dcopf(sys, s, load, {{0, 0}});
    CHECK(d.p(1, 0) == doctest::Approx(40.0).epsilon(1e-7));
    CHECK(d.p(1, 1) == doctest::Approx(80.0).epsilon(1e-7));
    CHECK(d.p(1, 2) == doctest::Approx(100.0).epsilon(1e-7));
    CHECK(d.shed(0, 0) == doctest::Approx(60.0).epsilon(1e-7));
    CHECK(d.shed(0, 1) == doctest::Approx(20.0).epsilon(1e-6));
    CHECK(d.shed(0, 2) == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
    CHECK(d.cost == doctest::Approx(25.0 * 220.0 + 10000.0 * 80.0).epsilon(1e-7));
}

TEST_CASE("a mid horizon trip leaves earlier hours untouched") {
    std::vector<PowerBus> buses{{"b1"}};
    Generator g;
    g.id = "g1";
    g.bus = 0;
    g.cost = 20.0;
    g.p_max = 150.0;
    g.ramp_hourly = 10.0;
    g.ramp_startup = 150.0;
    g.ramp_shutdown = 10.0; // a kept ramp row at the trip hour would cap hour 0 at 10 MW
    PowerSystem sys(buses, {}, {g}, 0);
    Eigen::MatrixXd load = Eigen::MatrixXd::Constant(1, 3, 100.0);
    CommitmentSchedule s = all_on(1, 3);

    DispatchResult d = solve_dcopf(sys, s, load, {{0, 1}});
    CHECK(d.p(0, 0) == doctest::Approx(100.0).epsilon(1e-7));
    CHECK(d.shed(0, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
    CHECK(d.p(0, 1) == 0.0);
    CHECK(d.p(0, 2) == 0.0);
    CHECK(d.shed(0, 1) == doctest::Approx(100.0).epsilon(1e-7));
    CHECK(d.shed(0, 2) == doctest::Approx(100.0).epsilon(1e-7));
    CHECK(d.cost == doctest::Approx(100 * 20.0 + 2 * 100 * 10000.0).epsilon(1e-7));
}

TEST_CASE("repeat commitment solves are bitwise identical") {
    std::vector<PowerBus> buses{{"b1"}};
    Generator a;
    a.id = "g1";
    a.bus = 0;
    a.cost = 15.0;
    a.p_max = 200.0;
    a.ramp_hourly = a.ramp_startup = a.ramp_shutdown = 200.0;
    a.reserve_cap = 60.0;
    a.cost_reserve = 1.0;
    Generator b = a;
    b.id = "g2";
    b.cost = 30.0;
    PowerSystem sys(buses, {}, {a, b}, 0);
    Eigen::MatrixXd load = Eigen::MatrixXd::Constant(1, 2, 100.0);
    ScucResult r1 = solve_scuc(sys, load, {});
    ScucResult r2 = solve_scuc(sys, load, {});
    CHECK(r1.objective == r2.objective);
    CHECK(r1.nodes_explored == r2.nodes_explored);
    CHECK((r1.schedule.u - r2.schedule.u).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r1.dispatch.p - r2.dispatch.p).cwiseAbs().maxCoeff() == 0.0);
}
