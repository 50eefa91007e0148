#include "doctest.h"

#include <cmath>

#include "pipegrid/coupling.hpp"
#include "pipegrid/gas_transient.hpp"

using namespace pipegrid;

namespace {

const double kArea = 0.19634954084936207; // pi/4 * 0.5^2

GasNode cp_node(const std::string& id, bool slack) {
    GasNode n;
    n.id = id;
    n.rho_min = 0.6;
    n.rho_max = 1.5;
    n.withdrawal_max = 0.1;
    n.slack = slack;
    if (slack)
        n.slack_density = PwlProfile::constant(1.0);
    return n;
}

Pipe cp_pipe(const std::string& id, int from, int to) {
    Pipe p;
    p.id = id;
    p.from = from;
    p.to = to;
    p.length = 1.0;
    p.diameter = 0.5;
    p.friction = 0.011;
    p.area = kArea;
    return p;
}

GasNetwork cp_line() {
    return GasNetwork({cp_node("J1", true), cp_node("J2", false)}, {cp_pipe("P1", 0, 1)},
                      GasScaling{});
}

GasNetwork cp_chain3() {
    return GasNetwork({cp_node("J1", true), cp_node("J2", false), cp_node("J3", false)},
                      {cp_pipe("P1", 0, 1), cp_pipe("P2", 1, 2)}, GasScaling{});
}

Generator cp_gen(const std::string& id, double pmax) {
    Generator g;
    g.id = id;
    g.bus = 0;
    g.cost = 30.0;
    g.p_max = pmax;
    g.ramp_hourly = g.ramp_startup = g.ramp_shutdown = pmax;
    g.fuel = "gas";
    return g;
}

PowerSystem one_bus(std::vector<Generator> gens) {
    return PowerSystem({{"b1"}}, {}, std::move(gens), 0);
}

CommitmentSchedule committed(const Eigen::MatrixXd& u) {
    CommitmentSchedule s;
    s.u = u;
    s.v = s.w = s.r = Eigen::MatrixXd::Zero(u.rows(), u.cols());
    return s;
}

} // namespace

TEST_CASE("combustion turbine heat at one hundred megawatts") {
    PowerSystem sys = one_bus({cp_gen("g1", 150.0)});
    GasNetwork net = cp_line();
    FuelMap map;
    map.links = {standard_link("g1", "J2", "ct")};

    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(1, 1, 100.0);
    auto prof = gas_demand_from_dispatch(sys, net, committed(Eigen::MatrixXd::Ones(1, 1)), p, map);
    REQUIRE(prof.size() == 1);
    const double want = 0.0075 * (4.46 * 1e4 - 9.95 * 1e2 + 15.11); // 327.15... kg/s
    CHECK(prof[0].value(0.5) == doctest::Approx(want).epsilon(1e-12));
    CHECK(prof[0].value(0.1) == doctest::Approx(want).epsilon(1e-12));
    CHECK(heat_rate_mmbtu(map.links[0], 100.0) == doctest::Approx(43620.11).epsilon(1e-12));
}

TEST_CASE("commitment gates the burn") {
    PowerSystem sys = one_bus({cp_gen("g1", 150.0)});
    GasNetwork net = cp_line();
    FuelMap map;
    map.links = {standard_link("g1", "J2", "ct")};

    Eigen::MatrixXd u(1, 2), p(1, 2);
    u << 0.0, 1.0;
    p << 0.0, 0.0;
    auto prof = gas_demand_from_dispatch(sys, net, committed(u), p, map);
    // off: nothing, not even the constant term; on at zero output: the no-load burn
    CHECK(prof[0].value(0.5) == 0.0);
    CHECK(prof[0].value(1.5) == doctest::Approx(0.0075 * 15.11).epsilon(1e-12));
}

TEST_CASE("a node aggregates its generators") {
    PowerSystem sys = one_bus({cp_gen("g1", 150.0), cp_gen("g2", 80.0), cp_gen("g3", 100.0)});
    GasNetwork net = cp_chain3();
    FuelMap map;
    map.links = {standard_link("g1", "J2", "ct"), standard_link("g2", "J2", "cc"),
                 standard_link("g3", "J3", "st")};

    Eigen::MatrixXd p(3, 2);
    p << 100.0, 60.0, 50.0, 0.0, 80.0, 80.0;
    auto prof = gas_demand_from_dispatch(sys, net, committed(Eigen::MatrixXd::Ones(3, 2)), p, map);
    REQUIRE(prof.size() == 2);
    const int j2 = net.demand_position(net.node_index("J2"));
    const int j3 = net.demand_position(net.node_index("J3"));
    CHECK(prof[j2].value(0.5) == doctest::Approx(0.0075 * (43620.11 + 13952.87)).epsilon(1e-12));
    CHECK(prof[j2].value(1.5) == doctest::Approx(0.0075 * (15474.11 + 12.87)).epsilon(1e-12));
    CHECK(prof[j3].value(0.5) == doctest::Approx(0.0075 * 10582.4).epsilon(1e-12));
    CHECK(prof[j3].value(1.5) == doctest::Approx(0.0075 * 10582.4).epsilon(1e-12));
    for (const auto& pr : prof)
        for (const auto& k : pr.knots())
            CHECK(k.v >= 0.0);
}

TEST_CASE("boundary ramps take five minutes") {
    PowerSystem sys = one_bus({cp_gen("g1", 150.0)});
    GasNetwork net = cp_line();
    FuelMap map;
    map.links = {standard_link("g1", "J2", "ct")};

    Eigen::MatrixXd p(1, 2);
    p << 60.0, 120.0;
    auto prof = gas_demand_from_dispatch(sys, net, committed(Eigen::MatrixXd::Ones(1, 2)), p, map);
    const double y0 = 0.0075 * 15474.11;
    const double y1 = 0.0075 * (4.46 * 120.0 * 120.0 - 9.95 * 120.0 + 15.11);
    const double half = 0.5 * 5.0 / 60.0;
    CHECK(prof[0].value(1.0 - half) == doctest::Approx(y0).epsilon(1e-12));
    CHECK(prof[0].value(1.0 + half) == doctest::Approx(y1).epsilon(1e-12));
    CHECK(prof[0].value(1.0) == doctest::Approx(0.5 * (y0 + y1)).epsilon(1e-12));
    CHECK(prof[0].slope(1.0) == doctest::Approx((y1 - y0) * 12.0).epsilon(1e-10));
}

TEST_CASE("heat curves stay positive") {
    for (const char* cls : {"ct", "st", "cc"}) {
        FuelLink l = standard_link("g", "J2", cls);
        for (double p = 0.0; p <= 200.0; p += 0.5)
            CHECK(heat_rate_mmbtu(l, p) > 0.0);
    }
}

TEST_CASE("an unmapped gas generator with output is refused") {
    PowerSystem sys = one_bus({cp_gen("g1", 150.0), cp_gen("g2", 80.0)});
    GasNetwork net = cp_line();
    FuelMap map;
    map.links = {standard_link("g1", "J2", "ct")};

    Eigen::MatrixXd u = Eigen::MatrixXd::Ones(2, 1);
    Eigen::MatrixXd p(2, 1);
    p << 100.0, 40.0;
    CHECK_THROWS_AS(gas_demand_from_dispatch(sys, net, committed(u), p, map), InputError);

    map.require_mapped = false;
    auto prof = gas_demand_from_dispatch(sys, net, committed(u), p, map);
    CHECK(prof[0].value(0.5) == doctest::Approx(0.0075 * 43620.11).epsilon(1e-12));

    map.require_mapped = true;
    p(1, 0) = 0.0; // idle unmapped unit is fine
    CHECK_NOTHROW(gas_demand_from_dispatch(sys, net, committed(u), p, map));
}

TEST_CASE("fuel map validation rejects bad links") {
    PowerSystem sys = one_bus({cp_gen("g1", 150.0)});
    GasNetwork net = cp_line();

    FuelMap map;
    map.links = {standard_link("nope", "J2", "ct")};
    CHECK_THROWS_AS(validate_fuel_map(map, sys, net), InputError);

    map.links = {standard_link("g1", "J9", "ct")};
    CHECK_THROWS_AS(validate_fuel_map(map, sys, net), InputError);

    map.links = {standard_link("g1", "J1", "ct")}; // slack node takes no demand
    CHECK_THROWS_AS(validate_fuel_map(map, sys, net), InputError);

    map.links = {standard_link("g1", "J2", "ct"), standard_link("g1", "J2", "cc")};
    CHECK_THROWS_AS(validate_fuel_map(map, sys, net), InputError);

    map.links = {standard_link("g1", "J2", "ct")};
    map.links[0].a = -1.0;
    CHECK_THROWS_AS(validate_fuel_map(map, sys, net), InputError);

    map.links[0].a = 4.46;
    map.beta = 0.0;
    CHECK_THROWS_AS(validate_fuel_map(map, sys, net), InputError);

    map.beta = 0.0075;
    map.ramp_minutes = 61.0;
    CHECK_THROWS_AS(validate_fuel_map(map, sys, net), InputError);

    CHECK_THROWS_AS(standard_link("g1", "J2", "diesel"), InputError);
}

TEST_CASE("curtailment picks the violating node's units") {
    GasNetwork net = cp_chain3();
    FuelMap map;
    map.links = {standard_link("gC", "J2", "ct"), standard_link("gB", "J3", "cc"),
                 standard_link("gA", "J2", "st")};

    std::vector<PressureViolation> v{{"J2", 2.4, 3.1, 0.52}};
    CurtailmentDecision d = curtailment_policy(v, map, net, false);
    REQUIRE(d.items.size() == 2);
    CHECK(d.items[0].generator == "gA");
    CHECK(d.items[1].generator == "gC");
    CHECK(d.items[0].from_hour == 2);
    CHECK(d.items[1].from_hour == 2);
    CHECK(!d.rationale.empty());
}

TEST_CASE("escalation widens the cut downstream") {
    GasNetwork net = cp_chain3();
    FuelMap map;
    map.links = {standard_link("gC", "J2", "ct"), standard_link("gB", "J3", "cc"),
                 standard_link("gA", "J2", "st")};

    std::vector<PressureViolation> v{{"J2", 2.4, 3.1, 0.52}};
    CurtailmentDecision d = curtailment_policy(v, map, net, true);
    REQUIRE(d.items.size() == 3);
    CHECK(d.items[0].generator == "gA"); // J2 before J3, ids within a node
    CHECK(d.items[1].generator == "gC");
    CHECK(d.items[2].generator == "gB");

    // violation at the leaf pulls in nothing new upstream
    std::vector<PressureViolation> leaf{{"J3", 0.6, 1.0, 0.55}};
    CurtailmentDecision dl = curtailment_policy(leaf, map, net, true);
    REQUIRE(dl.items.size() == 1);
    CHECK(dl.items[0].generator == "gB");
    CHECK(dl.items[0].from_hour == 0);
}

TEST_CASE("nothing to curtail yields an empty decision") {
    GasNetwork net = cp_chain3();
    FuelMap map;
    map.links = {standard_link("gC", "J2", "ct")};

    CHECK(curtailment_policy({}, map, net, true).empty());

    std::vector<PressureViolation> v{{"J3", 1.2, 2.0, 0.58}};
    CHECK(curtailment_policy(v, map, net, false).empty());
}

TEST_CASE("dropping a unit lowers its node's withdrawal") {
    PowerSystem sys = one_bus({cp_gen("g1", 150.0), cp_gen("g2", 80.0)});
    GasNetwork net = cp_line();
    FuelMap map;
    map.links = {standard_link("g1", "J2", "ct"), standard_link("g2", "J2", "cc")};

    Eigen::MatrixXd p(2, 2);
    p << 100.0, 100.0, 50.0, 50.0;
    Eigen::MatrixXd u = Eigen::MatrixXd::Ones(2, 2);
    auto base = gas_demand_from_dispatch(sys, net, committed(u), p, map);

    Eigen::MatrixXd uc = u;
    uc(0, 1) = 0.0; // g1 out from hour 1
    Eigen::MatrixXd pc = p;
    pc(0, 1) = 0.0;
    auto cut = gas_demand_from_dispatch(sys, net, committed(uc), pc, map);

    CHECK(cut[0].value(0.5) == doctest::Approx(base[0].value(0.5)).epsilon(1e-12));
    CHECK(cut[0].value(1.5) < base[0].value(1.5) - 1.0);
    CHECK(cut[0].value(1.5) == doctest::Approx(0.0075 * 13952.87).epsilon(1e-12));
}

TEST_CASE("lower demand keeps the pipe denser") {
    PowerSystem sys = one_bus({cp_gen("g1", 25.0)});
    GasNetwork net = cp_line();
    FuelMap map;
    map.links = {standard_link("g1", "J2", "ct")};

    const int N = 4;
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(1, N, 20.0);
    Eigen::MatrixXd u = Eigen::MatrixXd::Ones(1, N);
    Eigen::MatrixXd uc = u;
    uc(0, 2) = uc(0, 3) = 0.0;

    ControlSignal base = ControlSignal::neutral(net);
    base.demand[0] = to_network_units(
        gas_demand_from_dispatch(sys, net, committed(u), p, map)[0], net.scaling());
    ControlSignal cut = ControlSignal::neutral(net);
    cut.demand[0] = to_network_units(
        gas_demand_from_dispatch(sys, net, committed(uc), p, map)[0], net.scaling());

    GasState x0 = solve_steady_state(net, base, 0.0);
    GasTrajectory tb = integrate(net, x0, base, N);
    GasTrajectory tc = integrate(net, x0, cut, N);
    REQUIRE(tb.times.size() == tc.times.size());
    for (std::size_t k = 0; k < tb.times.size(); ++k)
        CHECK(tc.states[k].rho[0] >= tb.states[k].rho[0] - 1e-6);
    const GasState late_b = tb.state_at(3.5, net);
    const GasState late_c = tc.state_at(3.5, net);
    CHECK(late_c.rho[0] > late_b.rho[0] + 5e-3);
}
