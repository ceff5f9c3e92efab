#include "branchcount/microprob.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace branchcount {

namespace {

constexpr double kIntegerSnap = 1e-9;  // w*n this close to an integer counts as exact

// Peels `pieces` parts of norm a out of the coordinate vector c, drawing from
// a pool over the same coordinate space. With absorb_last the final part is
// the literal remainder instead of a peel: used when the remainder's norm is
// already a by arithmetic, so no fresh direction is spent and snap-width
// noise cannot leave dust behind. Returns one column per piece; c ends as
// the unpeeled remainder (zero when absorb_last). The pool leaves here with
// c's line excluded and the chain's draws taken, so later cuts of the
// remainder stay orthogonal to every piece.
Mat peel_block(Vec& c, double a, Eigen::Index pieces, FreshDirections& pool, bool absorb_last) {
    Mat out(c.size(), pieces);
    StateVector chi{Vec(c)};
    pool.exclude(chi);
    Eigen::Index full = (absorb_last && pieces >= 1) ? pieces - 1 : pieces;
    pool.bank(full);
    for (Eigen::Index k = 0; k < full; ++k) {
        auto [xi, rest] = peel(chi, a, pool, /*exclude_chi=*/false);
        out.col(k) = xi.vec();
        chi = std::move(rest);
    }
    if (absorb_last && pieces >= 1) {
        out.col(pieces - 1) = chi.vec();
        chi = StateVector(c.size());
    }
    c = chi.vec();
    return out;
}

// Coordinates of psi in the range and nullspace frames of p. The projector
// never has to be applied: with orthonormal columns V, V* P psi = V* psi.
std::pair<Vec, Vec> eigencoords(ProjectorOp& p, const StateVector& psi) {
    p.ensure_bases();
    return {p.range_basis->adjoint() * psi.vec(), p.null_basis->adjoint() * psi.vec()};
}

}  // namespace

FamilyPeelResult family_peel(const std::vector<Vec>& chi_blocks, Eigen::Index n,
                             std::uint64_t seed) {
    const Eigen::Index kBlocks = static_cast<Eigen::Index>(chi_blocks.size());
    if (kBlocks < 1) throw Error("family_peel: no blocks");
    if (n < 1) throw Error("family_peel: n must be at least 1");
    Tolerance tol;
    double psi_sq = 0.0;
    for (const Vec& c : chi_blocks) psi_sq += c.squaredNorm();
    if (psi_sq <= tol.abs * tol.abs) throw ZeroState("family_peel: zero state");
    const double a2 = psi_sq / static_cast<double>(n);
    const double a = std::sqrt(a2);

    struct Cell {
        Eigen::Index m = 0;
        bool integral = false;
    };
    std::vector<Cell> cells(static_cast<size_t>(kBlocks));
    Eigen::Index total_m = 0;
    for (Eigen::Index k = 0; k < kBlocks; ++k) {
        double x = chi_blocks[static_cast<size_t>(k)].squaredNorm() / a2;  // = w_k * n
        double rounded = std::round(x);
        Cell& cell = cells[static_cast<size_t>(k)];
        cell.integral = std::abs(x - rounded) <= kIntegerSnap;
        cell.m = cell.integral ? static_cast<Eigen::Index>(rounded)
                               : static_cast<Eigen::Index>(std::floor(x));
        total_m += cell.m;
    }
    const Eigen::Index cats = n - total_m;
    if (cats < 0 || cats >= kBlocks)
        throw Error("family_peel: remainders inconsistent with block weights");

    // A fractional block needs room for its pieces, the pool exclusion, and
    // (three or more blocks) one cut of its remainder at a cat boundary.
    for (Eigen::Index k = 0; k < kBlocks; ++k) {
        const Cell& cell = cells[static_cast<size_t>(k)];
        Eigen::Index rank = chi_blocks[static_cast<size_t>(k)].size();
        Eigen::Index need = cell.integral ? cell.m : cell.m + (kBlocks <= 2 ? 1 : 2);
        if (need > 0 && rank < need)
            throw DimensionTooSmall("family_peel: block " + std::to_string(k) + " has rank " +
                                    std::to_string(rank) + " but needs " + std::to_string(need) +
                                    "; embed the state first");
    }

    Rng rng(seed);
    std::vector<FreshDirections> pools;
    pools.reserve(static_cast<size_t>(kBlocks));
    for (Eigen::Index k = 0; k < kBlocks; ++k)
        pools.emplace_back(chi_blocks[static_cast<size_t>(k)].size(), rng);

    FamilyPeelResult out;
    out.blocks.resize(static_cast<size_t>(kBlocks));
    out.cats = cats;

    struct Remainder {
        Eigen::Index block;
        StateVector rem;
    };
    std::vector<Remainder> rems;
    for (Eigen::Index k = 0; k < kBlocks; ++k) {
        const Cell& cell = cells[static_cast<size_t>(k)];
        Vec c = chi_blocks[static_cast<size_t>(k)];
        FamilyBlock& blk = out.blocks[static_cast<size_t>(k)];
        blk.m = cell.m;
        blk.pieces = peel_block(c, a, cell.m, pools[static_cast<size_t>(k)], cell.integral);
        if (!cell.integral) {
            rems.push_back({k, StateVector(std::move(c))});
        } else if (cell.m == 0 && cats > 0 && c.squaredNorm() > 0.0) {
            // Weight snapped to zero but the block holds dust; ride it into
            // the last cat so completeness stays exact. (With no cats the
            // dust is dropped: that only happens for eigenstates, where it
            // is rounding noise of the coordinates themselves.)
            out.blocks[static_cast<size_t>(k)].cat_slices.push_back({cats - 1, std::move(c)});
        }
    }

    if (cats > 0) {
        // Largest-remainder walk: a cursor sweeps the remainders in
        // descending size and each cat takes slices until it holds a^2.
        // A remainder is cut at most once, since the leftover of a cut is
        // below a^2 and the next cat swallows it whole.
        std::sort(rems.begin(), rems.end(), [](const Remainder& x, const Remainder& y) {
            double xs = x.rem.squared_norm(), ys = y.rem.squared_norm();
            if (xs != ys) return xs > ys;
            return x.block < y.block;
        });
        size_t cur = 0;
        for (Eigen::Index c = 0; c < cats; ++c) {
            double need = a2;
            bool last = (c == cats - 1);
            while (cur < rems.size()) {
                Remainder& r = rems[cur];
                double sq = r.rem.squared_norm();
                if (last || sq <= need * (1.0 + kIntegerSnap)) {
                    out.blocks[static_cast<size_t>(r.block)].cat_slices.push_back(
                        {c, r.rem.vec()});
                    need -= sq;
                    ++cur;
                    if (!last && need <= a2 * kIntegerSnap) break;
                } else {
                    // The remainder lies inside its block's excluded span, so
                    // no re-exclusion is needed before cutting it.
                    auto [slice, rest] = peel(r.rem, std::sqrt(need),
                                              pools[static_cast<size_t>(r.block)],
                                              /*exclude_chi=*/false);
                    out.blocks[static_cast<size_t>(r.block)].cat_slices.push_back(
                        {c, slice.vec()});
                    r.rem = std::move(rest);
                    break;
                }
            }
        }
    }
    return out;
}

Eigen::Index AdaptedExpansion::count_of(Label l) const {
    return std::count(labels.begin(), labels.end(), l);
}

double born_weight(const ProjectorOp& p, const StateVector& psi) {
    Tolerance tol;
    double nsq = psi.squared_norm();
    if (nsq <= tol.abs * tol.abs) throw ZeroState("born_weight: zero state");
    double w = p.apply(psi).squared_norm() / nsq;
    return std::clamp(w, 0.0, 1.0);
}

AdaptedExpansion adapt(const ProjectorOp& p, const StateVector& psi, Eigen::Index n,
                       std::uint64_t seed) {
    if (n < 1) throw Error("adapt: n must be at least 1");
    if (n > psi.dim())
        throw DimensionTooSmall("adapt: n = " + std::to_string(n) + " exceeds dim = " +
                                std::to_string(psi.dim()));
    ProjectorOp proj = p;
    auto [cp, cq] = eigencoords(proj, psi);
    FamilyPeelResult fam = family_peel({cp, cq}, n, seed);

    Mat amb_p = *proj.range_basis * fam.blocks[0].pieces;
    Mat amb_q = *proj.null_basis * fam.blocks[1].pieces;

    AdaptedExpansion out;
    out.base.psi = psi;
    out.base.n = n;
    out.base.microstates.reserve(static_cast<size_t>(n));
    for (Eigen::Index k = 0; k < fam.blocks[0].m; ++k) {
        out.base.microstates.emplace_back(Vec(amb_p.col(k)));
        out.labels.push_back(Label::IN_P);
    }
    for (Eigen::Index k = 0; k < fam.blocks[1].m; ++k) {
        out.base.microstates.emplace_back(Vec(amb_q.col(k)));
        out.labels.push_back(Label::IN_NOT_P);
    }
    if (fam.cats > 0) {
        // The single cat carries weight (wn - m) a^2 inside the range and
        // the rest in the complement.
        Vec cat = Vec::Zero(psi.dim());
        for (const auto& [ci, slice] : fam.blocks[0].cat_slices) cat += *proj.range_basis * slice;
        for (const auto& [ci, slice] : fam.blocks[1].cat_slices) cat += *proj.null_basis * slice;
        out.base.microstates.emplace_back(std::move(cat));
        out.labels.push_back(Label::CAT);
    }
    return out;
}

BranchCount count(const ProjectorOp& p, const StateVector& psi, Eigen::Index n,
                  std::uint64_t seed) {
    if (n < 1) throw Error("count: n must be at least 1");
    if (n > psi.dim())
        throw DimensionTooSmall("count: n = " + std::to_string(n) + " exceeds dim = " +
                                std::to_string(psi.dim()));
    ProjectorOp proj = p;
    auto [cp, cq] = eigencoords(proj, psi);
    double psi_sq = psi.squared_norm();
    if (psi_sq <= Tolerance{}.abs * Tolerance{}.abs) throw ZeroState("count: zero state");
    // Counting never needs the microstates in ambient space, only the
    // partition sizes, so the peel stays in eigenspace coordinates.
    FamilyPeelResult fam = family_peel({cp, cq}, n, seed);
    BranchCount bc;
    bc.projector = p;
    bc.n = n;
    bc.m = fam.blocks[0].m;
    bc.m_complement = fam.blocks[1].m;
    bc.cats = fam.cats;
    bc.born = std::clamp(cp.squaredNorm() / psi_sq, 0.0, 1.0);
    return bc;
}

bool uniqueness_check(const ProjectorOp& p, const StateVector& psi, Eigen::Index n, int trials,
                      std::uint64_t seed) {
    Rng rng(seed);
    std::optional<std::array<Eigen::Index, 3>> first;
    for (int t = 0; t < trials; ++t) {
        BranchCount bc = count(p, psi, n, rng());
        std::array<Eigen::Index, 3> key{bc.m, bc.m_complement, bc.cats};
        if (!first)
            first = key;
        else if (*first != key)
            return false;
    }
    return true;
}

LocalityReport locality_check(const ProjectorOp& p, const StateVector& psi, const UnitaryOp& u,
                              Eigen::Index n, std::uint64_t seed) {
    Tolerance tol;
    LocalityReport rep;
    StateVector p_psi = p.apply(psi);
    StateVector u_psi = u.apply(psi);
    double scale = psi.norm();
    rep.dev_up = (u.apply(p_psi) - p_psi).norm() / scale;
    rep.dev_pu = (p.apply(u_psi) - p_psi).norm() / scale;
    rep.applicable = rep.dev_up <= tol.rel && rep.dev_pu <= tol.rel;
    if (!rep.applicable) return rep;

    rep.before = count(p, psi, n, seed);
    rep.after = count(p, u_psi, n, seed);
    rep.counts_equal = rep.before->m == rep.after->m && rep.before->cats == rep.after->cats &&
                       rep.before->m_complement == rep.after->m_complement;
    return rep;
}

std::pair<ProjectorOp, StateVector> ensure_capacity(const ProjectorOp& p, const StateVector& psi,
                                                    Eigen::Index n) {
    if (p.dim() != psi.dim()) throw DimensionMismatch("ensure_capacity: projector/state dims");
    Eigen::Index rank_p = p.rank();
    Eigen::Index plus = std::max<Eigen::Index>(0, (n + 1) - rank_p);
    Eigen::Index zero = std::max<Eigen::Index>(0, (n + 1) - (psi.dim() - rank_p));
    if (plus == 0 && zero == 0) return {p, psi};
    return {embed_projector(p, plus, zero), embed(psi, psi.dim() + plus + zero)};
}

std::vector<ConvergeRow> converge(const ProjectorOp& p, const StateVector& psi,
                                  const std::vector<Eigen::Index>& n_grid, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ConvergeRow> table;
    table.reserve(n_grid.size());
    for (Eigen::Index n : n_grid) {
        auto [pn, psin] = ensure_capacity(p, psi, n);
        BranchCount bc = count(pn, psin, n, rng());
        ConvergeRow row;
        row.n = n;
        row.m = bc.m;
        row.cats = bc.cats;
        row.fraction = bc.fraction();
        row.lo = bc.lo();
        row.hi = bc.hi();
        row.born = bc.born;
        row.error = std::abs(row.fraction - row.born);
        table.push_back(row);
    }
    return table;
}

}  // namespace branchcount
