#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "branchcount/hilbert.hpp"

using namespace branchcount;

namespace {

StateVector basis_state(Eigen::Index dim, Eigen::Index k) {
    Vec v = Vec::Zero(dim);
    v(k) = 1.0;
    return StateVector(std::move(v));
}

double op_dist(const Mat& a, const Mat& b) { return (a - b).norm(); }

}  // namespace

TEST_CASE("state arithmetic and normalization") {
    Rng rng(101);
    StateVector psi = gaussian_state(6, rng);
    CHECK(psi.dim() == 6);
    CHECK(psi.norm() > 0.0);

    StateVector unit = psi.normalized();
    CHECK(unit.norm() == doctest::Approx(1.0).epsilon(1e-14));

    StateVector sum = psi + psi;
    CHECK(sum.norm() == doctest::Approx(2.0 * psi.norm()).epsilon(1e-14));
    StateVector diff = sum - psi;
    CHECK((diff - psi).norm() == doctest::Approx(0.0).epsilon(1e-14));

    StateVector scaled = psi * Complex(0.0, 2.0);
    CHECK(scaled.norm() == doctest::Approx(2.0 * psi.norm()).epsilon(1e-14));
}

TEST_CASE("inner product is antilinear in the first argument") {
    Rng rng(102);
    StateVector a = gaussian_state(5, rng);
    StateVector b = gaussian_state(5, rng);
    Complex c(0.7, -1.3);

    Complex lhs = inner(a * c, b);
    CHECK(std::abs(lhs - std::conj(c) * inner(a, b)) < 1e-12);
    Complex rhs = inner(a, b * c);
    CHECK(std::abs(rhs - c * inner(a, b)) < 1e-12);
    CHECK(std::abs(inner(a, a).imag()) < 1e-14);
    CHECK(inner(a, a).real() == doctest::Approx(a.squared_norm()).epsilon(1e-13));
}

TEST_CASE("tensor uses row-major pair indexing") {
    StateVector e1 = basis_state(3, 1);
    StateVector f2 = basis_state(4, 2);
    StateVector t = tensor(e1, f2);
    REQUIRE(t.dim() == 12);
    for (Eigen::Index k = 0; k < 12; ++k)
        CHECK(std::abs(t[k] - (k == 1 * 4 + 2 ? Complex(1.0) : Complex(0.0))) < 1e-15);

    Rng rng(103);
    StateVector a = gaussian_state(3, rng);
    StateVector b = gaussian_state(4, rng);
    CHECK(tensor(a, b).norm() == doctest::Approx(a.norm() * b.norm()).epsilon(1e-13));
}

TEST_CASE("kron acts on tensors factorwise") {
    Rng rng(104);
    Mat ua = haar_unitary(3, rng).mat();
    Mat ub = haar_unitary(2, rng).mat();
    StateVector a = gaussian_state(3, rng);
    StateVector b = gaussian_state(2, rng);

    Vec lhs = kron(ua, ub) * tensor(a, b).vec();
    Vec rhs = tensor(StateVector(ua * a.vec()), StateVector(ub * b.vec())).vec();
    CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("random projectors are valid and carry orthonormal bases") {
    Rng rng(105);
    for (Eigen::Index rank : {0, 1, 3, 6}) {
        ProjectorOp p = random_projector(6, rank, rng);
        CHECK(p.rank() == rank);
        CHECK(p.is_valid());
        CHECK(op_dist(p.mat() * p.mat(), p.mat()) < 1e-12);
        CHECK(op_dist(p.mat(), p.mat().adjoint()) < 1e-12);

        REQUIRE(p.range_basis);
        REQUIRE(p.null_basis);
        const Mat& v = *p.range_basis;
        const Mat& w = *p.null_basis;
        REQUIRE(v.cols() == rank);
        REQUIRE(w.cols() == 6 - rank);
        CHECK(op_dist(v.adjoint() * v, Mat::Identity(rank, rank)) < 1e-12);
        CHECK(op_dist(p.mat() * v, v) < 1e-12);
        CHECK((p.mat() * w).norm() < 1e-12);
    }
}

TEST_CASE("projector complement partitions the space") {
    Rng rng(106);
    ProjectorOp p = random_projector(7, 3, rng);
    ProjectorOp q = p.complement();
    CHECK(q.rank() == 4);
    CHECK(op_dist(p.mat() + q.mat(), Mat::Identity(7, 7)) < 1e-12);
    CHECK((p.mat() * q.mat()).norm() < 1e-12);
    REQUIRE(q.range_basis);
    CHECK(q.range_basis->cols() == 4);
}

TEST_CASE("ensure_bases recovers bases for a hand-built projector") {
    Rng rng(107);
    StateVector s1 = gaussian_state(5, rng);
    StateVector s2 = gaussian_state(5, rng);
    ProjectorOp by_span = projector_onto({s1, s2});
    CHECK(by_span.rank() == 2);
    CHECK((by_span.mat() * s1.vec() - s1.vec()).norm() < 1e-10 * s1.norm());

    ProjectorOp raw(by_span.mat());
    CHECK_FALSE(raw.range_basis);
    raw.ensure_bases();
    REQUIRE(raw.range_basis);
    REQUIRE(raw.null_basis);
    CHECK(raw.range_basis->cols() == 2);
    CHECK(raw.null_basis->cols() == 3);
    CHECK(op_dist(raw.mat() * *raw.range_basis, *raw.range_basis) < 1e-10);
    CHECK((raw.mat() * *raw.null_basis).norm() < 1e-10);
}

TEST_CASE("projector_onto collapses linearly dependent spans") {
    Rng rng(108);
    StateVector s = gaussian_state(4, rng);
    ProjectorOp p = projector_onto({s, s * Complex(2.0, 1.0)});
    CHECK(p.rank() == 1);
}

TEST_CASE("haar unitaries are unitary and seed-deterministic") {
    Rng rng1(109);
    Rng rng2(109);
    UnitaryOp u = haar_unitary(5, rng1);
    UnitaryOp v = haar_unitary(5, rng2);
    CHECK(u.is_valid());
    CHECK(op_dist(u.mat(), v.mat()) == 0.0);
    CHECK(op_dist(u.mat().adjoint() * u.mat(), Mat::Identity(5, 5)) < 1e-12);

    Rng rng3(110);
    CHECK(op_dist(u.mat(), haar_unitary(5, rng3).mat()) > 1e-3);

    StateVector psi = gaussian_state(5, rng3);
    CHECK(u.apply(psi).norm() == doctest::Approx(psi.norm()).epsilon(1e-13));
}

TEST_CASE("unitary composition applies right factor first") {
    Rng rng(111);
    UnitaryOp u = haar_unitary(4, rng);
    UnitaryOp v = haar_unitary(4, rng);
    StateVector psi = gaussian_state(4, rng);
    StateVector lhs = u.compose(v).apply(psi);
    StateVector rhs = u.apply(v.apply(psi));
    CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("orthonormal complement vectors are unit and orthogonal") {
    Rng rng(112);
    std::vector<StateVector> taken;
    for (int k = 0; k < 3; ++k) taken.push_back(gaussian_state(5, rng));
    StateVector c = orthonormal_complement_vector(taken, 5, rng);
    CHECK(c.norm() == doctest::Approx(1.0).epsilon(1e-13));
    for (const auto& t : taken) CHECK(std::abs(inner(t, c)) < 1e-12 * t.norm());

    std::vector<StateVector> full;
    for (int k = 0; k < 5; ++k) full.push_back(gaussian_state(5, rng));
    CHECK_THROWS_AS(orthonormal_complement_vector(full, 5, rng), NoFreeDirection);
}

TEST_CASE("fresh directions stay orthonormal and run out exactly") {
    Rng rng(113);
    FreshDirections pool(4, rng);
    CHECK(pool.capacity() == 4);

    std::vector<StateVector> drawn;
    for (int k = 0; k < 4; ++k) drawn.push_back(pool.draw());
    CHECK(pool.capacity() == 0);
    for (size_t i = 0; i < drawn.size(); ++i) {
        CHECK(drawn[i].norm() == doctest::Approx(1.0).epsilon(1e-13));
        for (size_t j = i + 1; j < drawn.size(); ++j)
            CHECK(std::abs(inner(drawn[i], drawn[j])) < 1e-12);
    }
    CHECK_THROWS_AS(pool.draw(), NoFreeDirection);
}

TEST_CASE("fresh directions respect exclusions") {
    Rng rng(114);
    FreshDirections pool(5, rng);
    StateVector wall = gaussian_state(5, rng);
    pool.exclude(wall);
    CHECK(pool.capacity() == 4);
    for (int k = 0; k < 4; ++k) {
        StateVector d = pool.draw();
        CHECK(std::abs(inner(wall, d)) < 1e-10 * wall.norm());
    }
}

TEST_CASE("subspace pools draw inside the basis span") {
    Rng rng(115);
    ProjectorOp p = random_projector(6, 2, rng);
    FreshDirections pool(p.range_basis, rng);
    CHECK(pool.capacity() == 2);
    StateVector d = pool.draw();
    CHECK((p.mat() * d.vec() - d.vec()).norm() < 1e-12);
}

TEST_CASE("banked draws match the orthogonality contract of unbanked ones") {
    Rng rng(116);
    FreshDirections pool(8, rng);
    StateVector wall = gaussian_state(8, rng);
    pool.exclude(wall);
    StateVector first = pool.draw();

    pool.bank(3);
    std::vector<StateVector> all{wall.normalized(), first};
    for (int k = 0; k < 3; ++k) all.push_back(pool.draw());
    StateVector after_bank = pool.draw();  // past the bank, per-draw path
    all.push_back(after_bank);

    for (size_t i = 0; i < all.size(); ++i) {
        CHECK(all[i].norm() == doctest::Approx(1.0).epsilon(1e-12));
        for (size_t j = i + 1; j < all.size(); ++j)
            CHECK(std::abs(inner(all[i], all[j])) < 1e-10);
    }
}

TEST_CASE("banking more than capacity saturates instead of overflowing") {
    Rng rng(117);
    FreshDirections pool(3, rng);
    pool.bank(10);
    for (int k = 0; k < 3; ++k) pool.draw();
    CHECK_THROWS_AS(pool.draw(), NoFreeDirection);
}

TEST_CASE("gaussian states are seed-deterministic") {
    Rng a(118), b(118);
    StateVector x = gaussian_state(7, a);
    StateVector y = gaussian_state(7, b);
    CHECK((x - y).norm() == 0.0);
}

TEST_CASE("embedding pads with zero amplitude and preserves weights") {
    Rng rng(119);
    StateVector psi = gaussian_state(4, rng);
    StateVector big = embed(psi, 9);
    REQUIRE(big.dim() == 9);
    CHECK(big.norm() == doctest::Approx(psi.norm()).epsilon(1e-14));
    for (Eigen::Index k = 4; k < 9; ++k) CHECK(std::abs(big[k]) == 0.0);

    ProjectorOp p = random_projector(4, 2, rng);
    ProjectorOp ext = embed_projector(p, 3, 2);
    REQUIRE(ext.dim() == 9);
    CHECK(ext.rank() == 5);
    CHECK(ext.is_valid());
    double w_small = (p.mat() * psi.vec()).squaredNorm() / psi.squared_norm();
    double w_big = (ext.mat() * big.vec()).squaredNorm() / big.squared_norm();
    CHECK(w_big == doctest::Approx(w_small).epsilon(1e-13));
    REQUIRE(ext.range_basis);
    REQUIRE(ext.null_basis);
    CHECK(ext.range_basis->cols() == 5);
    CHECK(op_dist(ext.mat() * *ext.range_basis, *ext.range_basis) < 1e-12);
}

TEST_CASE("direct sums act blockwise") {
    Rng rng(120);
    ProjectorOp a = random_projector(3, 1, rng);
    ProjectorOp b = random_projector(2, 2, rng);
    ProjectorOp s = direct_sum(a, b);
    REQUIRE(s.dim() == 5);
    CHECK(s.rank() == 3);
    CHECK(s.is_valid());
    CHECK(op_dist(s.mat().topLeftCorner(3, 3), a.mat()) < 1e-14);
    CHECK(op_dist(s.mat().bottomRightCorner(2, 2), b.mat()) < 1e-14);
    CHECK(s.mat().topRightCorner(3, 2).norm() == 0.0);
    REQUIRE(s.range_basis);
    CHECK(s.range_basis->cols() == 3);
}

TEST_CASE("tensor projectors act factorwise on product states") {
    Rng rng(121);
    ProjectorOp a = random_projector(3, 2, rng);
    ProjectorOp b = random_projector(2, 1, rng);
    ProjectorOp t = tensor_op(a, b);
    REQUIRE(t.dim() == 6);
    CHECK(t.rank() == 2);
    CHECK(t.is_valid());

    StateVector x = gaussian_state(3, rng);
    StateVector y = gaussian_state(2, rng);
    Vec lhs = t.mat() * tensor(x, y).vec();
    Vec rhs = tensor(a.apply(x), b.apply(y)).vec();
    CHECK((lhs - rhs).norm() < 1e-12);
    REQUIRE(t.range_basis);
    CHECK(t.range_basis->cols() == 2);
}

TEST_CASE("tolerance scales against the larger of rel and abs floors") {
    Tolerance tol;
    CHECK(tol.scaled(1.0) == doctest::Approx(1e-10));
    CHECK(tol.scaled(1e6) == doctest::Approx(1e-4));
    CHECK(tol.scaled(0.0) == doctest::Approx(1e-12));
}
