#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "branchcount/hilbert.hpp"

namespace branchcount {

// n mutually orthogonal microstates of equal norm |psi|/sqrt(n) summing to
// psi. theta_log records the rotation angle of each induction step, so
// theta_log[k] belongs to the step that grew the expansion from k+1 to k+2
// microstates.
struct Expansion {
    StateVector psi;
    std::vector<StateVector> microstates;
    Eigen::Index n = 0;
    std::vector<double> theta_log;
};

struct ValidationReport {
    // All three magnitudes are relative, directly comparable to tol.rel.
    double max_cross = 0.0;     // max_{j!=k} |<xi_j, xi_k>| / (|xi_j||xi_k|)
    double max_norm_dev = 0.0;  // max_k | n*|xi_k|^2 / |psi|^2 - 1 |
    double residual = 0.0;      // |sum xi - psi| / |psi|
    bool orthogonality_ok = false;
    bool equiamplitude_ok = false;
    bool completeness_ok = false;
    bool shape_ok = false;  // n == microstates.size() and n <= dim

    bool pass() const { return orthogonality_ok && equiamplitude_ok && completeness_ok && shape_ok; }
    double max_violation() const;
};

// xi_{1,2} = (psi +- |psi| phi_hat)/2 for a fresh unit phi_hat orthogonal to
// psi. Logs the angle pi/4 it corresponds to in the rotation picture.
Expansion split_two(const StateVector& psi, std::uint64_t seed);

// Grows an n = m expansion to n = m+1: a fresh orthogonal direction and all
// existing microstates are rotated in the real plane spanned by psi_hat and
// phi_hat through the unique angle that equalizes their overlaps with psi,
// then rescaled so the sum is psi again. The angle comes from bisection on
// the overlap gap, not from its closed form.
Expansion extend(const Expansion& lam, std::uint64_t seed);

// Iterated split_two + extend. n = 1 is the singleton {psi}.
Expansion construct(const StateVector& psi, Eigen::Index n, std::uint64_t seed);

// Conjugates the microstates by a Haar-random unitary that fixes psi,
// yielding a different expansion of the same state.
Expansion randomize(const Expansion& lam, std::uint64_t seed);

// Splits chi into (xi, chi_rest) with xi + chi_rest = chi, <xi, chi_rest> = 0
// and |xi| = a. Draws one direction from fresh_dirs except in the exhaustion
// case |chi| = a, where xi = chi. chi is excluded from the pool on entry so
// later draws stay orthogonal to the whole peel history; callers chaining
// peels pass exclude_chi = false once the original chi is in the pool, since
// every later remainder already lies inside the excluded span.
std::pair<StateVector, StateVector> peel(const StateVector& chi, double a,
                                         FreshDirections& fresh_dirs, bool exclude_chi = true);

ValidationReport validate(const Expansion& lam, const Tolerance& tol = {});

}  // namespace branchcount
