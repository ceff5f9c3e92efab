#include "branchcount/expansion.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>

namespace branchcount {

namespace {

// Action of exp(theta (psi_hat phi_hat^dag - phi_hat psi_hat^dag)): rotates
// the real plane spanned by psi_hat and phi_hat, identity elsewhere.
// R psi_hat = cos(theta) psi_hat - sin(theta) phi_hat
// R phi_hat = cos(theta) phi_hat + sin(theta) psi_hat
StateVector rotate_in_plane(const StateVector& v, const StateVector& psi_hat,
                            const StateVector& phi_hat, double theta) {
    Complex cp = inner(psi_hat, v);
    Complex cf = inner(phi_hat, v);
    double c = std::cos(theta), s = std::sin(theta);
    StateVector out = v;
    out += psi_hat * ((c - 1.0) * cp + s * cf);
    out += phi_hat * ((c - 1.0) * cf - s * cp);
    return out;
}

// The overlap gap |<psi, R phi>| - |<psi, R xi>| is strictly increasing in
// theta on (0, pi/2): negative at 0, positive at pi/2. Bisection finds its
// unique zero to 1e-12.
double equalizing_theta(const StateVector& psi, const StateVector& xi_rep, const StateVector& phi,
                        const StateVector& psi_hat, const StateVector& phi_hat) {
    auto gap = [&](double th) {
        double over_phi = std::abs(inner(psi, rotate_in_plane(phi, psi_hat, phi_hat, th)));
        double over_xi = std::abs(inner(psi, rotate_in_plane(xi_rep, psi_hat, phi_hat, th)));
        return over_phi - over_xi;
    };
    double lo = 0.0, hi = M_PI / 2.0;
    while (hi - lo > 1e-12) {
        double mid = 0.5 * (lo + hi);
        (gap(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// One induction step with the fresh direction already chosen.
Expansion extend_with(const Expansion& lam, const StateVector& phi_hat) {
    Eigen::Index m = lam.n;
    double a = lam.psi.norm() / std::sqrt(static_cast<double>(m));
    StateVector psi_hat = lam.psi.normalized();
    StateVector phi = phi_hat * a;

    double theta = equalizing_theta(lam.psi, lam.microstates[0], phi, psi_hat, phi_hat);

    std::vector<StateVector> rotated;
    rotated.reserve(m + 1);
    StateVector sum(lam.psi.dim());
    for (const auto& xi : lam.microstates) {
        rotated.push_back(rotate_in_plane(xi, psi_hat, phi_hat, theta));
        sum += rotated.back();
    }
    rotated.push_back(rotate_in_plane(phi, psi_hat, phi_hat, theta));
    sum += rotated.back();

    // At the equalizing angle the sum is psi up to a positive scalar.
    double scale = lam.psi.norm() / sum.norm();
    Expansion out;
    out.psi = lam.psi;
    out.n = m + 1;
    out.microstates.reserve(m + 1);
    for (auto& v : rotated) out.microstates.push_back(v * scale);
    out.theta_log = lam.theta_log;
    out.theta_log.push_back(theta);
    return out;
}

Expansion split_with(const StateVector& psi, const StateVector& phi_hat) {
    StateVector half = phi_hat * psi.norm();
    Expansion out;
    out.psi = psi;
    out.n = 2;
    out.microstates.push_back((psi + half) * 0.5);
    out.microstates.push_back((psi - half) * 0.5);
    // The split is the m = 1 rotation step; its equalizing angle is pi/4.
    out.theta_log.push_back(M_PI / 4.0);
    return out;
}

}  // namespace

double ValidationReport::max_violation() const {
    return std::max({max_cross, max_norm_dev, residual});
}

Expansion split_two(const StateVector& psi, std::uint64_t seed) {
    Tolerance tol;
    if (psi.norm() <= tol.abs) throw ZeroState("split_two: zero state");
    Rng rng(seed);
    StateVector phi_hat = orthonormal_complement_vector({psi}, psi.dim(), rng);
    return split_with(psi, phi_hat);
}

Expansion extend(const Expansion& lam, std::uint64_t seed) {
    if (lam.n < 1 || lam.microstates.empty()) throw Error("extend: empty expansion");
    if (lam.n + 1 > lam.psi.dim())
        throw DimensionTooSmall("extend: expansion already fills the space; embed the state first");
    Rng rng(seed);
    FreshDirections pool(lam.psi.dim(), rng);
    for (const auto& xi : lam.microstates) pool.exclude(xi);
    StateVector phi_hat = pool.draw();
    if (lam.n == 1) return split_with(lam.psi, phi_hat);
    return extend_with(lam, phi_hat);
}

Expansion construct(const StateVector& psi, Eigen::Index n, std::uint64_t seed) {
    Tolerance tol;
    if (psi.norm() <= tol.abs) throw ZeroState("construct: zero state");
    if (n < 1) throw Error("construct: n must be at least 1");
    if (n > psi.dim())
        throw DimensionTooSmall("construct: n = " + std::to_string(n) + " exceeds dim = " +
                                std::to_string(psi.dim()) + "; embed the state first");
    Expansion lam;
    lam.psi = psi;
    lam.n = 1;
    lam.microstates.push_back(psi);
    if (n == 1) return lam;

    // One pool for the whole induction: every microstate ever produced lies
    // in span{psi, draws so far}, so excluding psi once keeps each new draw
    // orthogonal to all current microstates.
    Rng rng(seed);
    FreshDirections pool(psi.dim(), rng);
    pool.exclude(psi);
    lam = split_with(psi, pool.draw());
    while (lam.n < n) lam = extend_with(lam, pool.draw());
    return lam;
}

Expansion randomize(const Expansion& lam, std::uint64_t seed) {
    Eigen::Index d = lam.psi.dim();
    Rng rng(seed);
    Expansion out;
    out.psi = lam.psi;
    out.n = lam.n;
    out.theta_log = lam.theta_log;
    if (d < 2) {
        out.microstates = lam.microstates;
        return out;
    }
    StateVector psi_hat = lam.psi.normalized();
    // Householder QR of psi_hat: the trailing columns of Q are an orthonormal
    // basis of its complement.
    Mat h(d, 1);
    h.col(0) = psi_hat.vec();
    Eigen::HouseholderQR<Mat> qr(h);
    Mat q = qr.householderQ();
    Mat c = q.rightCols(d - 1);
    Mat w_small = haar_unitary(d - 1, rng).mat();
    Mat w = psi_hat.vec() * psi_hat.vec().adjoint() + c * w_small * c.adjoint();
    out.microstates.reserve(lam.microstates.size());
    for (const auto& xi : lam.microstates) out.microstates.push_back(StateVector(w * xi.vec()));
    return out;
}

std::pair<StateVector, StateVector> peel(const StateVector& chi, double a,
                                         FreshDirections& fresh_dirs, bool exclude_chi) {
    Tolerance tol;
    double nsq = chi.squared_norm();
    double asq = a * a;
    if (nsq < asq * (1.0 - tol.rel))
        throw PeelUnderflow("peel: remainder norm^2 " + std::to_string(nsq) +
                            " below requested " + std::to_string(asq));
    if (exclude_chi) fresh_dirs.exclude(chi);
    double ratio = asq / nsq;
    if (ratio >= 1.0 - 1e-12) {
        // Exhaustion: chi already has the requested norm.
        return {chi, StateVector(chi.dim())};
    }
    StateVector phi_hat = fresh_dirs.draw();
    double c = ratio;
    double dcoef = std::sqrt(asq * (1.0 - ratio));
    StateVector xi = chi * c + phi_hat * dcoef;
    StateVector rest = chi - xi;
    return {xi, rest};
}

ValidationReport validate(const Expansion& lam, const Tolerance& tol) {
    ValidationReport rep;
    const auto& xs = lam.microstates;
    rep.shape_ok = lam.n == static_cast<Eigen::Index>(xs.size()) && lam.n >= 1 &&
                   lam.n <= lam.psi.dim();
    if (xs.empty()) return rep;

    double psi_sq = lam.psi.squared_norm();
    double denom_sq = psi_sq > tol.abs * tol.abs ? psi_sq : tol.abs * tol.abs;
    double target = psi_sq / static_cast<double>(xs.size());

    for (size_t j = 0; j < xs.size(); ++j) {
        double nj = xs[j].norm();
        rep.max_norm_dev = std::max(rep.max_norm_dev, std::abs(nj * nj / target - 1.0));
        for (size_t k = j + 1; k < xs.size(); ++k) {
            double cross = std::abs(inner(xs[j], xs[k]));
            double scale = nj * xs[k].norm();
            if (scale < tol.abs) scale = tol.abs;
            rep.max_cross = std::max(rep.max_cross, cross / scale);
        }
    }
    StateVector sum(lam.psi.dim());
    for (const auto& xi : xs) sum += xi;
    rep.residual = (sum - lam.psi).norm() / std::sqrt(denom_sq);

    rep.orthogonality_ok = rep.max_cross <= tol.rel;
    rep.equiamplitude_ok = rep.max_norm_dev <= tol.rel;
    rep.completeness_ok = rep.residual <= tol.rel;
    return rep;
}

}  // namespace branchcount
