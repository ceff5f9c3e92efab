#include "branchcount/event_space.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace branchcount {

namespace {

constexpr double kEqualNormRel = 1e-9;  // equal-amplitude detection
constexpr double kSvdCutoff = 1e-8;     // rank decisions in the constraint solve

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

// I - xx* - yy* + yx* - xy* : maps x -> y, y -> -x, identity on the rest.
// x and y must be orthonormal.
UnitaryOp block_unitary(const StateVector& x, const StateVector& y) {
    Eigen::Index d = x.dim();
    Mat u = Mat::Identity(d, d);
    u -= x.vec() * x.vec().adjoint();
    u -= y.vec() * y.vec().adjoint();
    u += y.vec() * x.vec().adjoint();
    u -= x.vec() * y.vec().adjoint();
    return UnitaryOp(std::move(u));
}

StateVector orthonormalize_against(const StateVector& v, const StateVector& unit) {
    StateVector out = v - unit * inner(unit, v);
    return out.normalized();
}

}  // namespace

EventSpace::EventSpace(Expansion base) : base_(std::move(base)) {}

StateVector EventSpace::event(Subset s) const {
    StateVector out(base_.psi.dim());
    for (Eigen::Index k = 0; k < n(); ++k)
        if (s & (Subset{1} << k)) out += base_.microstates[static_cast<size_t>(k)];
    return out;
}

std::vector<Subset> EventSpace::all_events() const {
    if (n() > 16) throw Error("event enumeration is limited to n <= 16");
    std::vector<Subset> out;
    out.reserve(Subset{1} << n());
    for (Subset s = 0; s <= full(); ++s) out.push_back(s);
    return out;
}

EventSpace build_event_space(const Expansion& lam) {
    if (lam.n > 63) throw Error("event space subsets are limited to n <= 63");
    if (!validate(lam).pass()) throw Error("build_event_space: expansion fails validation");
    return EventSpace(lam);
}

double ProbAssignment::value(Subset s) const {
    auto it = mu.find(s);
    if (it != mu.end()) return it->second;
    double acc = 0.0;
    for (Eigen::Index k = 0; k < space.n(); ++k) {
        Subset bit = Subset{1} << k;
        if (!(s & bit)) continue;
        auto single = mu.find(bit);
        if (single == mu.end())
            throw Error("assignment missing singleton {" + std::to_string(k) + "}");
        acc += single->second;
    }
    return acc;
}

ProbAssignment uniform_assignment(const EventSpace& space) {
    ProbAssignment pa{space, {}};
    double p = 1.0 / static_cast<double>(space.n());
    for (Eigen::Index k = 0; k < space.n(); ++k) pa.mu[Subset{1} << k] = p;
    return pa;
}

ProbAssignment born_assignment(const EventSpace& space) {
    ProbAssignment pa{space, {}};
    double psi_sq = space.base().psi.squared_norm();
    if (space.n() <= 16) {
        for (Subset s = 0; s <= space.full(); ++s)
            pa.mu[s] = space.event(s).squared_norm() / psi_sq;
    } else {
        for (Eigen::Index k = 0; k < space.n(); ++k) {
            Subset bit = Subset{1} << k;
            pa.mu[bit] = space.event(bit).squared_norm() / psi_sq;
        }
    }
    return pa;
}

AssignmentReport check_assignment(const ProbAssignment& pa, const Tolerance& tol) {
    AssignmentReport rep;
    const EventSpace& es = pa.space;
    double t = tol.scaled(1.0);

    rep.empty_ok = std::abs(pa.value(0)) <= t;
    rep.normalized_ok = std::abs(pa.value(es.full()) - 1.0) <= t;

    auto bound_violation = [](double v) { return std::max({0.0, -v, v - 1.0}); };
    if (es.n() <= 16) {
        for (Subset s = 0; s <= es.full(); ++s)
            rep.worst_bound = std::max(rep.worst_bound, bound_violation(pa.value(s)));
    } else {
        for (Eigen::Index k = 0; k < es.n(); ++k)
            rep.worst_bound = std::max(rep.worst_bound, bound_violation(pa.value(Subset{1} << k)));
        rep.worst_bound = std::max(rep.worst_bound, bound_violation(pa.value(es.full())));
    }
    rep.bounds_ok = rep.worst_bound <= t;

    auto probe = [&](Subset a, Subset b) {
        double gap = std::abs(pa.value(a | b) - pa.value(a) - pa.value(b));
        if (gap > rep.worst_additivity) {
            rep.worst_additivity = gap;
            rep.witness_a = a;
            rep.witness_b = b;
        }
    };
    if (es.n() <= 10) {
        for (Subset a = 1; a <= es.full(); ++a) {
            Subset comp = es.complement_of(a);
            for (Subset b = comp; b; b = (b - 1) & comp)
                if (b < a) probe(a, b);
        }
    } else {
        Rng rng(0xA55Au);
        std::uniform_int_distribution<Subset> dist(0, es.full());
        for (int it = 0; it < 4000; ++it) {
            Subset a = dist(rng) & es.full();
            Subset b = dist(rng) & es.complement_of(a);
            if (a && b) probe(a, b);
        }
    }
    rep.additive_ok = rep.worst_additivity <= t;
    return rep;
}

SwapTriple build_swap_triple(const Expansion& lam, int i, int j, std::uint64_t seed) {
    Eigen::Index n = lam.n;
    if (i == j) throw Error("swap: i and j must differ");
    if (i < 0 || j < 0 || i >= n || j >= n) throw Error("swap: index out of range");

    Rng rng(seed);
    FreshDirections pool(lam.psi.dim(), rng);
    for (const auto& xi : lam.microstates) pool.exclude(xi);
    StateVector phi_c_hat = pool.draw();  // NoFreeDirection when dim == n

    const StateVector& xi_i = lam.microstates[static_cast<size_t>(i)];
    const StateVector& xi_j = lam.microstates[static_cast<size_t>(j)];
    double ni = xi_i.norm(), nj = xi_j.norm();
    StateVector xhat_i = xi_i.normalized();
    StateVector xhat_j = xi_j.normalized();

    SwapTriple t;
    t.i = i;
    t.j = j;
    t.aux_dir = phi_c_hat;

    // The construction itself would map with these phases; recording them and
    // building the blocks with the phase stripped is the absorption step.
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    t.z_b = std::polar(nj / ni, angle(rng));
    t.z_a = std::polar(ni / nj, angle(rng));

    t.U_a = block_unitary(xhat_i, orthonormalize_against(phi_c_hat, xhat_i));
    t.U_b = block_unitary(xhat_j, orthonormalize_against(xhat_i, xhat_j));
    t.U_c = block_unitary(phi_c_hat, orthonormalize_against(xhat_j, phi_c_hat));
    return t;
}

EqualityClasses forced_equalities(const Expansion& lam, std::uint64_t seed) {
    Tolerance tol;
    int n = static_cast<int>(lam.n);
    if (n < 1) throw Error("forced_equalities: empty expansion");
    if (n > 32) throw Error("forced_equalities: constraint system limited to n <= 32");

    std::vector<double> norms(n);
    for (int k = 0; k < n; ++k) norms[k] = lam.microstates[static_cast<size_t>(k)].norm();
    auto equal_norm = [&](int a, int b) {
        return std::abs(norms[a] - norms[b]) <= kEqualNormRel * std::max(norms[a], norms[b]);
    };

    // All equal-norm pairs, or per-group chains when that gets large; chains
    // force the same partition at far fewer unknowns.
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (equal_norm(a, b)) pairs.emplace_back(a, b);
    if (pairs.size() > 64) {
        UnionFind groups(n);
        for (auto [a, b] : pairs) groups.unite(a, b);
        std::vector<std::vector<int>> members(n);
        for (int k = 0; k < n; ++k) members[static_cast<size_t>(groups.find(k))].push_back(k);
        pairs.clear();
        for (const auto& g : members)
            for (size_t m = 1; m < g.size(); ++m) pairs.emplace_back(g[m - 1], g[m]);
    }

    int num_pairs = static_cast<int>(pairs.size());
    int cols = n + 3 * n * num_pairs;
    auto col_of = [&](int pair_idx, int stage, int slot) {
        if (stage == 0) return slot;
        return n + pair_idx * 3 * n + (stage - 1) * n + slot;
    };

    struct Row {
        std::vector<std::pair<int, double>> entries;
        double rhs;
    };
    std::vector<Row> rows;
    rows.push_back({{}, 1.0});  // stage-0 normalization
    for (int k = 0; k < n; ++k) rows.back().entries.emplace_back(k, 1.0);

    Rng pair_seed_rng(seed);
    for (int p = 0; p < num_pairs; ++p) {
        auto [i, j] = pairs[static_cast<size_t>(p)];
        SwapTriple trip = build_swap_triple(lam, i, j, pair_seed_rng());

        // Tracked vectors: microstates by index, the auxiliary direction as id n.
        auto vec_of = [&](int id) -> StateVector {
            if (id < n) return lam.microstates[static_cast<size_t>(id)];
            return trip.aux_dir * norms[static_cast<size_t>(i)];
        };

        const UnitaryOp* steps[3] = {&trip.U_a, &trip.U_b, &trip.U_c};
        std::vector<int> ids(static_cast<size_t>(n));
        std::iota(ids.begin(), ids.end(), 0);

        StateVector state = lam.psi;
        for (int stage = 0; stage < 3; ++stage) {
            const UnitaryOp& u = *steps[stage];
            std::vector<int> next_ids(static_cast<size_t>(n), -1);
            for (int slot = 0; slot < n; ++slot) {
                int id = ids[static_cast<size_t>(slot)];
                if (id < 0) continue;
                StateVector v = vec_of(id);
                StateVector w = u.apply(v);
                if ((w - v).norm() <= tol.scaled(v.norm())) {
                    // The step fixes this element, so its probability carries over.
                    next_ids[static_cast<size_t>(slot)] = id;
                    rows.push_back({{{col_of(p, stage + 1, slot), 1.0},
                                     {col_of(p, stage, slot), -1.0}},
                                    0.0});
                } else {
                    for (int cand = 0; cand <= n; ++cand) {
                        if ((w - vec_of(cand)).norm() <= 1e-8 * v.norm()) {
                            next_ids[static_cast<size_t>(slot)] = cand;
                            break;
                        }
                    }
                }
            }
            ids = std::move(next_ids);
            state = u.apply(state);
            rows.push_back({{}, 1.0});
            for (int k = 0; k < n; ++k) rows.back().entries.emplace_back(col_of(p, stage + 1, k), 1.0);
        }

        // The composite returns psi, so the final stage is the initial event
        // space again: identify each surviving element with its stage-0 slot.
        bool returns = (state - lam.psi).norm() <= tol.scaled(lam.psi.norm());
        if (returns) {
            for (int slot = 0; slot < n; ++slot) {
                int id = ids[static_cast<size_t>(slot)];
                if (id < 0 || id >= n) continue;
                rows.push_back({{{col_of(p, 3, slot), 1.0}, {col_of(p, 0, id), -1.0}}, 0.0});
            }
        }
    }

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), cols);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
    for (size_t r = 0; r < rows.size(); ++r) {
        b(static_cast<Eigen::Index>(r)) = rows[r].rhs;
        for (auto [c, v] : rows[r].entries) a(static_cast<Eigen::Index>(r), c) = v;
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeFullV);
    double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    double cutoff = kSvdCutoff * std::max(1.0, smax);
    Eigen::Index rank = 0;
    for (Eigen::Index s = 0; s < svd.singularValues().size(); ++s)
        if (svd.singularValues()(s) > cutoff) ++rank;

    Eigen::VectorXd proj = svd.matrixU().leftCols(rank).transpose() * b;
    for (Eigen::Index s = 0; s < rank; ++s) proj(s) /= svd.singularValues()(s);
    Eigen::VectorXd x = svd.matrixV().leftCols(rank) * proj;

    EqualityClasses out;
    out.nullity = static_cast<int>(cols - rank);
    out.residual = (a * x - b).norm();
    if (out.residual > 1e-6 * std::max(1.0, b.norm()))
        throw Error("forced_equalities: constraint system inconsistent");
    out.mu.assign(x.data(), x.data() + n);

    // Forced equal = equal in the particular solution and along every
    // direction of the solution space.
    Eigen::MatrixXd null_basis = svd.matrixV().rightCols(cols - rank);
    double scale = std::max(1.0, x.head(n).cwiseAbs().maxCoeff());
    UnionFind uf(n);
    for (int p = 0; p < n; ++p) {
        for (int q = p + 1; q < n; ++q) {
            if (std::abs(x(p) - x(q)) > kSvdCutoff * scale) continue;
            bool same = true;
            for (Eigen::Index c = 0; c < null_basis.cols() && same; ++c)
                same = std::abs(null_basis(p, c) - null_basis(q, c)) <= kSvdCutoff;
            if (same) uf.unite(p, q);
        }
    }
    std::vector<std::vector<int>> grouped(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) grouped[static_cast<size_t>(uf.find(k))].push_back(k);
    for (auto& g : grouped)
        if (!g.empty()) out.classes.push_back(std::move(g));
    std::sort(out.classes.begin(), out.classes.end(),
              [](const auto& l, const auto& r) { return l.front() < r.front(); });
    return out;
}

}  // namespace branchcount
