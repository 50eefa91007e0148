#include "doctest.h"

#include <cmath>
#include <set>

#include "pipegrid/attack_chain.hpp"

using namespace pipegrid;

namespace {

CyberChain two_state_chain(double rate) {
    CyberChain c;
    c.n_states = 2;
    c.Q.setZero(2, 2);
    c.Q(0, 0) = -rate;
    c.Q(0, 1) = rate;
    c.lambda = Eigen::Vector2d(rate, 0.0);
    c.initial_index = 0;
    c.absorbing_index = 1;
    c.state_ids = {"a", "done"};
    return c;
}

CyberChain three_state_chain() {
    CyberChain c;
    c.n_states = 3;
    c.Q.resize(3, 3);
    c.Q << -2.0, 1.5, 0.5, 0.3, -1.0, 0.7, 0.0, 0.0, 0.0;
    c.lambda = Eigen::Vector3d(2.0, 1.0, 0.0);
    c.initial_index = 0;
    c.absorbing_index = 2;
    c.state_ids = {"a", "b", "done"};
    return c;
}

// reference exponential by plain truncated Taylor series, small t only
Eigen::MatrixXd expm_series(const Eigen::MatrixXd& M, int terms) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(M.rows(), M.cols());
    Eigen::MatrixXd pow = acc;
    double fact = 1.0;
    for (int n = 1; n <= terms; ++n) {
        pow = pow * M;
        fact *= n;
        acc += pow / fact;
    }
    return acc;
}

CyberZoneGraph desk_graph() {
    CyberZoneGraph g;
    g.zones = {
        {"inet", "internet", ZoneTier::internet, 2.0, 0.0, -1, ""},
        {"corp", "enterprise", ZoneTier::enterprise, 1.0, 0.25, -1, ""},
        {"act", "compressor plc", ZoneTier::actuator_control, 0.5, 0.5, -1, "C1"},
    };
    g.edges = {{"inet", "corp"}, {"corp", "act"}};
    g.transitions = {
        {"inet", "corp", 1.0, -1},
        {"corp", "act", 0.75, -1},
        {"act", "corp", 0.5, -1},
    };
    return g;
}

} // namespace

TEST_CASE("transition matrix of the two state chain") {
    auto c = two_state_chain(1.0);
    Eigen::MatrixXd P = transition_matrix(c, 1.0);
    const double em1 = 0.36787944117144233; // exp(-1)
    CHECK(P(0, 0) == doctest::Approx(em1).epsilon(1e-12));
    CHECK(P(0, 1) == doctest::Approx(1.0 - em1).epsilon(1e-12));
    CHECK(P(1, 0) == 0.0);
    CHECK(P(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("t = 0 gives the identity") {
    auto c = three_state_chain();
    Eigen::MatrixXd P = transition_matrix(c, 0.0);
    CHECK((P - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("matches a truncated series at small t") {
    auto c = three_state_chain();
    Eigen::MatrixXd P = transition_matrix(c, 0.05);
    Eigen::MatrixXd ref = expm_series(0.05 * c.Q, 25);
    CHECK((P - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("semigroup property and stochasticity") {
    auto c = three_state_chain();
    Eigen::MatrixXd P1 = transition_matrix(c, 0.7);
    Eigen::MatrixXd P2 = transition_matrix(c, 0.9);
    Eigen::MatrixXd P12 = transition_matrix(c, 1.6);
    CHECK((P1 * P2 - P12).cwiseAbs().maxCoeff() < 1e-10);
    for (int i = 0; i < 3; ++i) {
        CHECK(P12.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(P12.row(i).minCoeff() >= 0.0);
    }
}

TEST_CASE("stiff generator does not overflow") {
    auto c = two_state_chain(3000.0);
    Eigen::MatrixXd P = transition_matrix(c, 1.0);
    CHECK(std::isfinite(P(0, 0)));
    CHECK(P(0, 0) >= 0.0);
    CHECK(P(0, 0) < 1e-200); // exp(-3000) is numerically zero
    CHECK(P.row(0).sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("state distribution agrees with the full matrix") {
    auto c = three_state_chain();
    Eigen::Vector3d pi0(0.6, 0.4, 0.0);
    Eigen::VectorXd pi = state_distribution(c, pi0, 1.3);
    Eigen::VectorXd ref = transition_matrix(c, 1.3).transpose() * pi0;
    CHECK((pi - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(pi.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("build_chain assembles the generator") {
    auto chain = build_chain(desk_graph());
    REQUIRE(chain.n_states == 4); // three zones plus detection
    CHECK(chain.state_ids[0] == "inet");
    CHECK(chain.state_ids[3] == "detected");
    CHECK(chain.absorbing_index == 3);
    CHECK(chain.initial_index == 0);

    // inet: lambda 2, all mass to corp
    CHECK(chain.Q(0, 1) == doctest::Approx(2.0));
    CHECK(chain.Q(0, 0) == doctest::Approx(-2.0));
    // corp: lambda 1, detection 0.25, corp->act 0.75
    CHECK(chain.Q(1, 2) == doctest::Approx(0.75));
    CHECK(chain.Q(1, 3) == doctest::Approx(0.25));
    CHECK(chain.Q(1, 1) == doctest::Approx(-1.0));
    // act: lambda 0.5, detection 0.5, back to corp 0.5
    CHECK(chain.Q(2, 1) == doctest::Approx(0.25));
    CHECK(chain.Q(2, 3) == doctest::Approx(0.25));
    // detection row is absorbing
    CHECK(chain.Q.row(3).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(chain.Q.row(i).sum()) < 1e-12);

    REQUIRE(chain.actuator_map.size() == 1);
    CHECK(chain.actuator_map.at(2) == "C1");
}

TEST_CASE("build_chain normalizes vulnerability scores") {
    CyberZoneGraph g;
    g.zones = {
        {"inet", "", ZoneTier::internet, 1.0, -1, -1, ""},
        {"a", "", ZoneTier::dmz, 1.0, -1, 2.0, ""},
        {"b", "", ZoneTier::area, 1.0, 0.0, -1, ""},
    };
    g.edges = {{"inet", "a"}, {"inet", "b"}, {"a", "b"}};
    g.transitions = {
        {"inet", "a", -1, 6.0},
        {"inet", "b", -1, 2.0},
        {"a", "b", -1, 6.0},
        {"b", "a", 1.0, -1},
    };
    auto chain = build_chain(g);
    // inet has no detection score: 6 and 2 normalize over 8
    CHECK(chain.Q(0, 1) == doctest::Approx(0.75));
    CHECK(chain.Q(0, 2) == doctest::Approx(0.25));
    CHECK(chain.Q(0, 3) == doctest::Approx(0.0));
    // zone a: detection score 2 competes with the 6 toward b
    CHECK(chain.Q(1, 2) == doctest::Approx(0.75));
    CHECK(chain.Q(1, 3) == doctest::Approx(0.25));
}

TEST_CASE("build_chain rejects malformed graphs") {
    auto base = desk_graph();

    auto g = base;
    g.zones.push_back(g.zones[1]);
    CHECK_THROWS_AS(build_chain(g), InputError);

    g = base;
    g.zones[1].tier = ZoneTier::internet;
    CHECK_THROWS_AS(build_chain(g), InputError);

    g = base;
    g.transitions.push_back({"inet", "act", 0.1, -1}); // no such edge
    CHECK_THROWS_AS(build_chain(g), InputError);

    g = base;
    g.transitions[0].score = 5.0; // both prob and score on one transition
    CHECK_THROWS_AS(build_chain(g), InputError);

    g = base;
    g.transitions[1].prob = 0.9; // corp row: 0.9 + 0.25 detection > 1
    CHECK_THROWS_AS(build_chain(g), InputError);

    g = base;
    g.zones[0].holding_rate = 0.0;
    CHECK_THROWS_AS(build_chain(g), InputError);

    g = base;
    g.zones[1].detection_score = 3.0; // mixes scores into an explicit-prob row
    CHECK_THROWS_AS(build_chain(g), InputError);
}

TEST_CASE("sampling is deterministic in the seed") {
    auto chain = build_chain(desk_graph());
    auto a = sample_trajectory(chain, 24.0, 12345);
    auto b = sample_trajectory(chain, 24.0, 12345);
    REQUIRE(a.visits.size() == b.visits.size());
    for (std::size_t i = 0; i < a.visits.size(); ++i) {
        CHECK(a.visits[i].state == b.visits[i].state);
        CHECK(a.visits[i].t == b.visits[i].t);
    }
    auto c = sample_trajectory(chain, 24.0, 54321);
    bool differs = c.visits.size() != a.visits.size();
    for (std::size_t i = 0; !differs && i < a.visits.size(); ++i)
        differs = a.visits[i].t != c.visits[i].t;
    CHECK(differs);
}

TEST_CASE("trajectories start at the initial state at time zero") {
    auto chain = build_chain(desk_graph());
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto tr = sample_trajectory(chain, 8.0, s);
        REQUIRE(!tr.visits.empty());
        CHECK(tr.visits[0].state == chain.initial_index);
        CHECK(tr.visits[0].t == 0.0);
        for (std::size_t i = 1; i < tr.visits.size(); ++i)
            CHECK(tr.visits[i].t > tr.visits[i - 1].t);
        CHECK(tr.horizon == 8.0);
    }
}

TEST_CASE("mean sojourn time matches the holding rate") {
    auto c = two_state_chain(2.0);
    double acc = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        auto tr = sample_trajectory(c, 1e9, 1000 + i);
        REQUIRE(tr.visits.size() == 2);
        acc += tr.visits[1].t;
    }
    CHECK(acc / n == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("empirical state frequencies match the distribution") {
    auto c = three_state_chain();
    const double t = 1.0;
    Eigen::Vector3d counts = Eigen::Vector3d::Zero();
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        auto tr = sample_trajectory(c, t, 777000 + i);
        int state = tr.visits.back().state;
        counts[state] += 1.0;
    }
    Eigen::Vector3d pi0(1.0, 0.0, 0.0);
    Eigen::VectorXd pi = state_distribution(c, pi0, t);
    for (int s = 0; s < 3; ++s)
        CHECK(std::abs(counts[s] / n - pi[s]) < 0.015);
}

TEST_CASE("contingency windows from actuator sojourns") {
    auto chain = build_chain(desk_graph());
    const int act = chain.index_of("act");
    const int corp = chain.index_of("corp");

    AttackTrajectory tr;
    tr.horizon = 10.0;
    tr.visits = {{0, 0.0}, {corp, 1.0}, {act, 2.0}, {corp, 5.0}, {act, 6.0}};
    auto w = extract_contingencies(tr, chain);
    REQUIRE(w.size() == 2);
    CHECK(w[0].compressor == "C1");
    CHECK(w[0].t_start == 2.0);
    CHECK(w[0].t_end == 5.0);
    CHECK(w[1].t_start == 6.0);
    CHECK(w[1].t_end == 10.0); // open sojourn clipped to the horizon

    // touching windows of one compressor merge
    tr.visits = {{0, 0.0}, {act, 2.0}, {corp, 5.0}, {act, 5.0}, {chain.absorbing_index, 7.0}};
    w = extract_contingencies(tr, chain);
    REQUIRE(w.size() == 1);
    CHECK(w[0].t_start == 2.0);
    CHECK(w[0].t_end == 7.0);
}
