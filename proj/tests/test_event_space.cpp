#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "branchcount/event_space.hpp"

using namespace branchcount;

TEST_CASE("events are vector sums over subsets") {
    Rng rng(301);
    StateVector psi = gaussian_state(6, rng);
    EventSpace es = build_event_space(construct(psi, 4, 13));

    CHECK(es.n() == 4);
    CHECK(es.full() == 0b1111);
    CHECK(es.complement_of(0b0101) == 0b1010);
    CHECK(EventSpace::disjoint(0b0101, 0b1010));
    CHECK_FALSE(EventSpace::disjoint(0b0111, 0b0100));

    CHECK(es.event(0).norm() == 0.0);
    CHECK((es.event(es.full()) - psi).norm() < 1e-12 * psi.norm());

    StateVector pair = es.event(0b0011);
    StateVector manual = es.base().microstates[0] + es.base().microstates[1];
    CHECK((pair - manual).norm() == 0.0);

    CHECK(es.all_events().size() == 16);

    // disjoint events are orthogonal because the microstates are
    CHECK(std::abs(inner(es.event(0b0011), es.event(0b1100))) < 1e-12 * psi.squared_norm());
}

TEST_CASE("uniform assignment is a probability measure") {
    Rng rng(302);
    StateVector psi = gaussian_state(8, rng);
    ProbAssignment pa = uniform_assignment(build_event_space(construct(psi, 5, 19)));

    for (int k = 0; k < 5; ++k)
        CHECK(pa.value(Subset{1} << k) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(pa.value(0b00011) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(pa.value(pa.space.full()) == doctest::Approx(1.0).epsilon(1e-12));

    AssignmentReport rep = check_assignment(pa);
    CHECK(rep.pass());
    CHECK(rep.worst_additivity < 1e-12);
}

TEST_CASE("born values on an equiamplitude expansion are uniform") {
    Rng rng(303);
    StateVector psi = gaussian_state(8, rng);
    ProbAssignment pa = born_assignment(build_event_space(construct(psi, 6, 23)));

    for (int k = 0; k < 6; ++k)
        CHECK(pa.value(Subset{1} << k) == doctest::Approx(1.0 / 6).epsilon(1e-9));
    CHECK(check_assignment(pa).pass());
}

TEST_CASE("check_assignment flags corrupted measures") {
    Rng rng(304);
    StateVector psi = gaussian_state(6, rng);
    EventSpace es = build_event_space(construct(psi, 4, 29));

    SUBCASE("weight stolen from one slot") {
        ProbAssignment pa = uniform_assignment(es);
        pa.mu[Subset{1}] = 0.5;
        AssignmentReport rep = check_assignment(pa);
        CHECK_FALSE(rep.pass());
    }
    SUBCASE("value outside the unit interval") {
        ProbAssignment pa = uniform_assignment(es);
        pa.mu[Subset{1}] = 1.2;
        AssignmentReport rep = check_assignment(pa);
        CHECK_FALSE(rep.bounds_ok);
        CHECK(rep.worst_bound >= doctest::Approx(0.2));
    }
    SUBCASE("broken additivity on a named pair") {
        ProbAssignment pa = uniform_assignment(es);
        pa.mu[0b0011] = 0.9;  // singletons still say 0.25 each
        AssignmentReport rep = check_assignment(pa);
        CHECK_FALSE(rep.additive_ok);
        CHECK(rep.worst_additivity == doctest::Approx(0.4).epsilon(1e-9));
    }
}

TEST_CASE("swap triples cycle one microstate into another and back") {
    Rng rng(305);
    StateVector psi = gaussian_state(8, rng);
    Expansion lam = construct(psi, 4, 31);
    SwapTriple t = build_swap_triple(lam, 1, 3, 37);

    CHECK(t.U_a.is_valid());
    CHECK(t.U_b.is_valid());
    CHECK(t.U_c.is_valid());

    const StateVector& xi_i = lam.microstates[1];
    const StateVector& xi_j = lam.microstates[3];
    StateVector phi_c = t.aux_dir * xi_i.norm();

    // the recorded factors are pre-absorption; the stored stages map with
    // only the magnitude left
    CHECK((t.U_a.apply(xi_i) - phi_c).norm() < 1e-10 * xi_i.norm());
    CHECK((t.U_b.apply(xi_j) - xi_i * std::abs(t.z_b)).norm() < 1e-10 * xi_j.norm());
    CHECK((t.U_c.apply(phi_c) - xi_j * std::abs(t.z_a)).norm() < 1e-10 * xi_j.norm());

    // microstates the triple does not move are fixed by every stage
    for (int k : {0, 2}) {
        const StateVector& xi = lam.microstates[k];
        CHECK((t.U_a.apply(xi) - xi).norm() < 1e-10 * xi.norm());
        CHECK((t.U_b.apply(xi) - xi).norm() < 1e-10 * xi.norm());
        CHECK((t.U_c.apply(xi) - xi).norm() < 1e-10 * xi.norm());
    }

    // equal norms make the composite fix psi exactly
    CHECK(std::abs(std::abs(t.z_a) - 1.0) < 1e-10);
    CHECK(std::abs(std::abs(t.z_b) - 1.0) < 1e-10);
    StateVector roundtrip = t.U_c.apply(t.U_b.apply(t.U_a.apply(psi)));
    CHECK((roundtrip - psi).norm() < 1e-10 * psi.norm());
}

TEST_CASE("swap triple rejects bad indices") {
    Rng rng(306);
    StateVector psi = gaussian_state(6, rng);
    Expansion lam = construct(psi, 3, 41);
    CHECK_THROWS_AS(build_swap_triple(lam, 1, 1, 1), Error);
    CHECK_THROWS_AS(build_swap_triple(lam, 0, 3, 1), Error);
    CHECK_THROWS_AS(build_swap_triple(lam, -1, 2, 1), Error);
}

TEST_CASE("swap triple needs a spare direction") {
    Rng rng(307);
    StateVector psi = gaussian_state(3, rng);
    Expansion lam = construct(psi, 3, 43);  // fills the space
    CHECK_THROWS_AS(build_swap_triple(lam, 0, 1, 1), NoFreeDirection);
}

TEST_CASE("forced equalities give the uniform measure on equiamplitude expansions") {
    Rng rng(308);
    for (Eigen::Index n : {2, 3, 5}) {
        StateVector psi = gaussian_state(n + 3, rng);
        Expansion lam = construct(psi, n, rng());
        EqualityClasses eq = forced_equalities(lam, 47);

        INFO("n=", n);
        REQUIRE(eq.classes.size() == 1);
        CHECK(eq.classes[0].size() == static_cast<size_t>(n));
        CHECK(eq.nullity == 0);
        CHECK(eq.residual < 1e-10);
        for (double v : eq.mu)
            CHECK(v == doctest::Approx(1.0 / static_cast<double>(n)).epsilon(1e-8));
    }
}

TEST_CASE("a single microstate forms its own forced class") {
    Rng rng(309);
    StateVector psi = gaussian_state(4, rng);
    EqualityClasses eq = forced_equalities(construct(psi, 1, 53), 1);
    REQUIRE(eq.classes.size() == 1);
    CHECK(eq.mu[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("unequal norms break the forcing") {
    // Hand-built orthogonal decomposition with a norm outlier: swaps only
    // exist between the two equal pieces, so the third stays unconstrained.
    Vec v0 = Vec::Zero(5), v1 = Vec::Zero(5), v2 = Vec::Zero(5);
    v0(0) = 0.5;
    v1(1) = 0.5;
    v2(2) = 2.0;
    Expansion lam;
    lam.microstates = {StateVector(v0), StateVector(v1), StateVector(v2)};
    lam.psi = lam.microstates[0] + lam.microstates[1] + lam.microstates[2];
    lam.n = 3;

    EqualityClasses eq = forced_equalities(lam, 59);
    CHECK(eq.classes.size() == 2);
    CHECK(eq.nullity >= 1);

    bool pair_found = false;
    for (const auto& cls : eq.classes)
        if (cls == std::vector<int>{0, 1}) pair_found = true;
    CHECK(pair_found);
}

TEST_CASE("forced equalities are seed-deterministic") {
    Rng rng(310);
    StateVector psi = gaussian_state(7, rng);
    Expansion lam = construct(psi, 4, 61);
    EqualityClasses a = forced_equalities(lam, 67);
    EqualityClasses b = forced_equalities(lam, 67);
    CHECK(a.classes == b.classes);
    CHECK(a.mu == b.mu);
    CHECK(a.residual == b.residual);
}
