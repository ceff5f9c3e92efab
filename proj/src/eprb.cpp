#include "branchcount/eprb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace branchcount {

namespace {

using RowMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Reshaping the joint state row-major as a dim_a x dim_b matrix X turns
// (A (x) B) psi into A X B^T, so block coordinates and local unitaries never
// materialize a joint-space operator.
Vec kron_coords(const StateVector& psi, const Mat& va, const Mat& vb) {
    Eigen::Map<const RowMat> x(psi.vec().data(), va.rows(), vb.rows());
    RowMat c = va.adjoint() * x * vb.conjugate();
    return Eigen::Map<const Vec>(c.data(), c.size());
}

StateVector apply_on_b(const StateVector& psi, const Mat& u, Eigen::Index dim_a) {
    Eigen::Map<const RowMat> x(psi.vec().data(), dim_a, u.rows());
    RowMat out = x * u.transpose();
    return StateVector(Vec(Eigen::Map<const Vec>(out.data(), out.size())));
}

void check_scenario(const EprbScenario& sc) {
    if (sc.pad_a < 0 || sc.pad_b < 0) throw Error("scenario: negative pad");
    if (sc.state.dim() != sc.dim_a() * sc.dim_b())
        throw DimensionMismatch("scenario: state dim " + std::to_string(sc.state.dim()) +
                                " is not " + std::to_string(sc.dim_a()) + " x " +
                                std::to_string(sc.dim_b()));
    Tolerance tol;
    if (sc.state.squared_norm() <= tol.abs * tol.abs) throw ZeroState("scenario: zero state");
    if (sc.n < 1) throw Error("scenario: n must be at least 1");
}

// Binary count of the local projector extended by identity on the other
// side, run entirely in the block coordinates of the two local eigenbases.
Eigen::Index marginal_count(const StateVector& psi, const ProjectorOp& local, bool alice_side,
                            Eigen::Index other_dim, Eigen::Index n, std::uint64_t seed) {
    Mat id = Mat::Identity(other_dim, other_dim);
    Vec c_in = alice_side ? kron_coords(psi, *local.range_basis, id)
                          : kron_coords(psi, id, *local.range_basis);
    Vec c_out = alice_side ? kron_coords(psi, *local.null_basis, id)
                           : kron_coords(psi, id, *local.null_basis);
    FamilyPeelResult fam = family_peel({std::move(c_in), std::move(c_out)}, n, seed);
    return fam.blocks[0].m;
}

struct LocalSide {
    std::vector<StateVector> states;
    std::vector<char> inside;  // 1 = microstate lies in the +1 eigenspace
    Eigen::Index m = 0;
};

// Adapted expansion of a local state against its outcome projector; the cat,
// if any, counts on the outside.
LocalSide build_local_side(const StateVector& state, const ProjectorOp& q, Eigen::Index n,
                           std::uint64_t seed) {
    FamilyPeelResult fam = family_peel(
        {q.range_basis->adjoint() * state.vec(), q.null_basis->adjoint() * state.vec()}, n, seed);
    LocalSide side;
    side.m = fam.blocks[0].m;
    side.states.reserve(static_cast<size_t>(n));
    for (Eigen::Index k = 0; k < fam.blocks[0].m; ++k) {
        side.states.emplace_back(Vec(*q.range_basis * fam.blocks[0].pieces.col(k)));
        side.inside.push_back(1);
    }
    for (Eigen::Index k = 0; k < fam.blocks[1].m; ++k) {
        side.states.emplace_back(Vec(*q.null_basis * fam.blocks[1].pieces.col(k)));
        side.inside.push_back(0);
    }
    if (fam.cats > 0) {
        Vec cat = Vec::Zero(state.dim());
        for (const auto& [ci, slice] : fam.blocks[0].cat_slices) cat += *q.range_basis * slice;
        for (const auto& [ci, slice] : fam.blocks[1].cat_slices) cat += *q.null_basis * slice;
        side.states.emplace_back(std::move(cat));
        side.inside.push_back(0);
    }
    return side;
}

}  // namespace

ProjectorOp spin_projector(Setting s, int outcome) {
    if (outcome != 1 && outcome != -1) throw Error("spin_projector: outcome must be +1 or -1");
    double h = 0.5 * s.angle;
    // Eigenvectors of n_hat.sigma = [[cos a, sin a], [sin a, -cos a]].
    Vec up(2), down(2);
    up << Complex(std::cos(h), 0.0), Complex(std::sin(h), 0.0);
    down << Complex(-std::sin(h), 0.0), Complex(std::cos(h), 0.0);
    const Vec& r = outcome == 1 ? up : down;
    const Vec& q = outcome == 1 ? down : up;
    ProjectorOp p(r * r.adjoint());
    p.range_basis = std::make_shared<const Mat>(r);
    p.null_basis = std::make_shared<const Mat>(q);
    return p;
}

ProjectorOp local_projector(Setting s, int outcome, Eigen::Index pad) {
    if (pad < 0) throw Error("local_projector: negative pad");
    ProjectorOp plus = embed_projector(spin_projector(s, +1), pad / 2, pad - pad / 2);
    if (outcome == 1) return plus;
    if (outcome == -1) return plus.complement();
    throw Error("local_projector: outcome must be +1 or -1");
}

StateVector embed_local(const StateVector& spin, Eigen::Index pad) {
    if (spin.dim() != 2) throw DimensionMismatch("embed_local: expected a C^2 state");
    return embed(spin, 2 + pad);
}

StateVector product_state(const StateVector& phi, const StateVector& chi, Eigen::Index pad_a,
                          Eigen::Index pad_b) {
    return tensor(embed_local(phi, pad_a), embed_local(chi, pad_b));
}

StateVector singlet(Eigen::Index pad) {
    if (pad < 1) throw DimensionTooSmall("singlet: pad must be at least 1");
    Vec e0(2), e1(2);
    e0 << Complex(1, 0), Complex(0, 0);
    e1 << Complex(0, 0), Complex(1, 0);
    StateVector zero(e0), one(e1);
    StateVector s = product_state(zero, one, pad, pad) - product_state(one, zero, pad, pad);
    return s * (1.0 / std::sqrt(2.0));
}

UnitaryOp measurement_unitary(Setting s, Eigen::Index pad) {
    if (pad < 2)
        throw DimensionTooSmall("measurement_unitary: pad must be at least 2 for pointers");
    Eigen::Index dim = 2 + pad;
    double h = 0.5 * s.angle;
    Vec up = Vec::Zero(dim), down = Vec::Zero(dim);
    up(0) = std::cos(h);
    up(1) = std::sin(h);
    down(0) = -std::sin(h);
    down(1) = std::cos(h);
    Vec p1 = Vec::Unit(dim, 2), p2 = Vec::Unit(dim, 3);
    Mat src(dim, 4), img(dim, 4);
    src.col(0) = up;
    src.col(1) = down;
    src.col(2) = p1;
    src.col(3) = p2;
    const double r = 1.0 / std::sqrt(2.0);
    img.col(0) = (up + p1) * r;
    img.col(1) = (down + p2) * r;
    img.col(2) = (p1 - up) * r;
    img.col(3) = (p2 - down) * r;
    // Maps src_i -> img_i and fixes the orthogonal complement; unitary since
    // both quadruples are orthonormal and span the same subspace.
    Mat u = Mat::Identity(dim, dim) - src * src.adjoint() + img * src.adjoint();
    return UnitaryOp(std::move(u));
}

double JointTable::born_sum() const {
    double s = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) s += cells[i][j].born;
    return s;
}

double JointTable::count_sum() const {
    Eigen::Index m = 0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m += cells[i][j].m;
    return static_cast<double>(m) / static_cast<double>(n);
}

JointTable joint_table(const EprbScenario& sc, Setting a, Setting b) {
    check_scenario(sc);
    ProjectorOp pa[2] = {local_projector(a, +1, sc.pad_a), local_projector(a, -1, sc.pad_a)};
    ProjectorOp pb[2] = {local_projector(b, +1, sc.pad_b), local_projector(b, -1, sc.pad_b)};
    const double psi_sq = sc.state.squared_norm();

    std::vector<Vec> chis;
    chis.reserve(4);
    for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t)
            chis.push_back(kron_coords(sc.state, *pa[s].range_basis, *pb[t].range_basis));

    Rng seeds(sc.seed);
    std::uint64_t joint_seed = seeds();
    std::uint64_t ma_seed[2] = {seeds(), seeds()};
    std::uint64_t mb_seed[2] = {seeds(), seeds()};

    FamilyPeelResult fam = family_peel(chis, sc.n, joint_seed);

    JointTable jt;
    jt.n = sc.n;
    jt.cats = fam.cats;
    const double inv_n = 1.0 / static_cast<double>(sc.n);
    for (int s = 0; s < 2; ++s) {
        for (int t = 0; t < 2; ++t) {
            JointCell& cell = jt.cells[s][t];
            cell.m = fam.blocks[static_cast<size_t>(2 * s + t)].m;
            cell.born = chis[static_cast<size_t>(2 * s + t)].squaredNorm() / psi_sq;
            cell.lo = static_cast<double>(cell.m) * inv_n;
            cell.hi = static_cast<double>(cell.m + fam.cats) * inv_n;
            jt.born_marginal_a[s] += cell.born;
            jt.born_marginal_b[t] += cell.born;
        }
    }
    for (int s = 0; s < 2; ++s)
        jt.count_marginal_a[s] =
            marginal_count(sc.state, pa[s], true, sc.dim_b(), sc.n, ma_seed[s]);
    for (int t = 0; t < 2; ++t)
        jt.count_marginal_b[t] =
            marginal_count(sc.state, pb[t], false, sc.dim_a(), sc.n, mb_seed[t]);
    return jt;
}

bool ParameterIndependenceReport::pass(const Tolerance& tol) const {
    return counts_equal && max_born_dev <= tol.rel;
}

ParameterIndependenceReport parameter_independence(const EprbScenario& sc) {
    check_scenario(sc);
    ProjectorOp pa[2] = {local_projector(sc.a, +1, sc.pad_a), local_projector(sc.a, -1, sc.pad_a)};
    ProjectorOp pb_b[2] = {local_projector(sc.b, +1, sc.pad_b),
                           local_projector(sc.b, -1, sc.pad_b)};
    ProjectorOp pb_bp[2] = {local_projector(sc.bprime, +1, sc.pad_b),
                            local_projector(sc.bprime, -1, sc.pad_b)};
    const double psi_sq = sc.state.squared_norm();
    Mat idb = Mat::Identity(sc.dim_b(), sc.dim_b());

    ParameterIndependenceReport rep;
    for (int s = 0; s < 2; ++s) {
        double under_b = 0.0, under_bp = 0.0;
        for (int t = 0; t < 2; ++t) {
            under_b +=
                kron_coords(sc.state, *pa[s].range_basis, *pb_b[t].range_basis).squaredNorm() /
                psi_sq;
            under_bp +=
                kron_coords(sc.state, *pa[s].range_basis, *pb_bp[t].range_basis).squaredNorm() /
                psi_sq;
        }
        rep.born_under_b[s] = under_b;
        rep.born_under_bprime[s] = under_bp;
        rep.born_binary[s] =
            kron_coords(sc.state, *pa[s].range_basis, idb).squaredNorm() / psi_sq;
        double dev = std::max({std::abs(under_b - under_bp),
                               std::abs(under_b - rep.born_binary[s]),
                               std::abs(under_bp - rep.born_binary[s])});
        rep.max_born_dev = std::max(rep.max_born_dev, dev);
    }

    StateVector after_b = apply_on_b(sc.state, measurement_unitary(sc.b, sc.pad_b).mat(),
                                     sc.dim_a());
    StateVector after_bp = apply_on_b(sc.state, measurement_unitary(sc.bprime, sc.pad_b).mat(),
                                      sc.dim_a());

    Rng seeds(sc.seed);
    std::uint64_t cnt_seed[2] = {seeds(), seeds()};
    rep.counts_equal = true;
    for (int s = 0; s < 2; ++s) {
        rep.m_base[s] = marginal_count(sc.state, pa[s], true, sc.dim_b(), sc.n, cnt_seed[s]);
        rep.m_under_b[s] = marginal_count(after_b, pa[s], true, sc.dim_b(), sc.n, cnt_seed[s]);
        rep.m_under_bprime[s] =
            marginal_count(after_bp, pa[s], true, sc.dim_b(), sc.n, cnt_seed[s]);
        if (rep.m_base[s] != rep.m_under_b[s] || rep.m_base[s] != rep.m_under_bprime[s])
            rep.counts_equal = false;
    }
    return rep;
}

OutcomeIndependenceReport outcome_independence(const EprbScenario& sc, Setting a, Setting b) {
    check_scenario(sc);
    ProjectorOp pa[2] = {local_projector(a, +1, sc.pad_a), local_projector(a, -1, sc.pad_a)};
    ProjectorOp pb[2] = {local_projector(b, +1, sc.pad_b), local_projector(b, -1, sc.pad_b)};
    const double psi_sq = sc.state.squared_norm();
    Tolerance tol;

    OutcomeIndependenceReport rep;
    for (int s = 0; s < 2; ++s) {
        for (int t = 0; t < 2; ++t) {
            double p = kron_coords(sc.state, *pa[s].range_basis, *pb[t].range_basis)
                           .squaredNorm() /
                       psi_sq;
            rep.joint[s][t] = p;
            rep.marginal_a[s] += p;
            rep.marginal_b[t] += p;
        }
    }
    for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t)
            rep.max_factor_dev =
                std::max(rep.max_factor_dev,
                         std::abs(rep.joint[s][t] - rep.marginal_a[s] * rep.marginal_b[t]));
    rep.factorizing = rep.max_factor_dev <= tol.rel;

    for (int s = 0; s < 2; ++s) {
        for (int t = 0; t < 2; ++t) {
            if (rep.marginal_b[t] > tol.abs) {
                rep.conditional[s][t] = rep.joint[s][t] / rep.marginal_b[t];
                rep.max_conditional_dev =
                    std::max(rep.max_conditional_dev,
                             std::abs(rep.conditional[s][t] - rep.marginal_a[s]));
            } else {
                rep.conditional[s][t] = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    return rep;
}

ProductCountingReport product_counting(const StateVector& phi, const StateVector& chi, Setting a,
                                       Setting b, Eigen::Index n_a, Eigen::Index n_b,
                                       std::uint64_t seed) {
    if (phi.dim() < 2 || chi.dim() < 2)
        throw DimensionMismatch("product_counting: local dims must be at least 2");
    Tolerance tol;
    if (phi.squared_norm() <= tol.abs * tol.abs || chi.squared_norm() <= tol.abs * tol.abs)
        throw ZeroState("product_counting: zero local state");
    if (n_a < 1 || n_b < 1) throw Error("product_counting: n must be at least 1");

    ProjectorOp qa = local_projector(a, +1, phi.dim() - 2);
    ProjectorOp qb = local_projector(b, +1, chi.dim() - 2);

    Rng seeds(seed);
    std::uint64_t seed_a = seeds();
    std::uint64_t seed_b = seeds();
    LocalSide sa = build_local_side(phi, qa, n_a, seed_a);
    LocalSide sb = build_local_side(chi, qb, n_b, seed_b);

    ProductCountingReport rep;
    rep.n_a = n_a;
    rep.n_b = n_b;
    rep.m_a = sa.m;
    rep.m_b = sb.m;

    Expansion prod;
    prod.psi = tensor(phi, chi);
    prod.n = n_a * n_b;
    prod.microstates.reserve(static_cast<size_t>(prod.n));
    for (Eigen::Index i = 0; i < n_a; ++i)
        for (Eigen::Index j = 0; j < n_b; ++j)
            prod.microstates.push_back(
                tensor(sa.states[static_cast<size_t>(i)], sb.states[static_cast<size_t>(j)]));
    rep.product_expansion = validate(prod);

    // Eigenstate residuals are checked through the local factors:
    // (Qa (x) Qb)(xi (x) eta) = (Qa xi) (x) (Qb eta).
    std::vector<StateVector> qa_img, qb_img;
    qa_img.reserve(sa.states.size());
    qb_img.reserve(sb.states.size());
    for (const auto& s : sa.states) qa_img.push_back(qa.apply(s));
    for (const auto& s : sb.states) qb_img.push_back(qb.apply(s));

    for (Eigen::Index i = 0; i < n_a; ++i) {
        for (Eigen::Index j = 0; j < n_b; ++j) {
            int ia = sa.inside[static_cast<size_t>(i)] ? 0 : 1;
            int ib = sb.inside[static_cast<size_t>(j)] ? 0 : 1;
            ++rep.families[ia][ib];
            if (ia == 0 && ib == 0) {
                ++rep.joint_count;
                const StateVector& ms =
                    prod.microstates[static_cast<size_t>(i * n_b + j)];
                double dev = (tensor(qa_img[static_cast<size_t>(i)],
                                     qb_img[static_cast<size_t>(j)]) -
                              ms)
                                 .norm() /
                             ms.norm();
                rep.max_eigen_dev = std::max(rep.max_eigen_dev, dev);
            }
        }
    }

    rep.p_joint = static_cast<double>(rep.joint_count) / static_cast<double>(n_a * n_b);
    rep.p_product = (static_cast<double>(rep.m_a) / static_cast<double>(n_a)) *
                    (static_cast<double>(rep.m_b) / static_cast<double>(n_b));
    rep.exact = rep.joint_count == rep.m_a * rep.m_b;
    rep.families_partition_ok =
        rep.families[0][0] == rep.m_a * rep.m_b &&
        rep.families[1][0] == (n_a - rep.m_a) * rep.m_b &&
        rep.families[0][1] == rep.m_a * (n_b - rep.m_b) &&
        rep.families[1][1] == (n_a - rep.m_a) * (n_b - rep.m_b) &&
        rep.families[0][0] + rep.families[0][1] + rep.families[1][0] + rep.families[1][1] ==
            n_a * n_b;
    return rep;
}

ChshReport chsh(const EprbScenario& sc) {
    check_scenario(sc);
    const Setting pairs[4][2] = {{sc.a, sc.b}, {sc.a, sc.bprime}, {sc.aprime, sc.b},
                                 {sc.aprime, sc.bprime}};
    ChshReport rep;
    for (int i = 0; i < 4; ++i) {
        JointTable jt = joint_table(sc, pairs[i][0], pairs[i][1]);
        rep.born_e[i] = jt.cells[0][0].born - jt.cells[0][1].born - jt.cells[1][0].born +
                        jt.cells[1][1].born;
        rep.count_e[i] = static_cast<double>(jt.cells[0][0].m - jt.cells[0][1].m -
                                             jt.cells[1][0].m + jt.cells[1][1].m) /
                         static_cast<double>(sc.n);
    }
    rep.born_s = std::abs(rep.born_e[0] - rep.born_e[1] + rep.born_e[2] + rep.born_e[3]);
    rep.count_s = std::abs(rep.count_e[0] - rep.count_e[1] + rep.count_e[2] + rep.count_e[3]);
    rep.bound = 16.0 / static_cast<double>(sc.n);
    return rep;
}

}  // namespace branchcount
