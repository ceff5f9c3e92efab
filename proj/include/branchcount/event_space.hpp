#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "branchcount/expansion.hpp"

namespace branchcount {

// An event is a subset of microstate indices, encoded as a bitmask; its
// vector is the sum of the selected microstates. Disjoint subsets have
// orthogonal vectors by the expansion's orthogonality.
using Subset = std::uint64_t;

class EventSpace {
  public:
    explicit EventSpace(Expansion base);

    const Expansion& base() const { return base_; }
    Eigen::Index n() const { return base_.n; }

    Subset full() const { return (Subset{1} << n()) - 1; }
    Subset complement_of(Subset s) const { return full() & ~s; }
    static bool disjoint(Subset a, Subset b) { return (a & b) == 0; }

    StateVector event(Subset s) const;

    // Every subset, only for n <= 16; larger spaces are handled lazily
    // through event().
    std::vector<Subset> all_events() const;

  private:
    Expansion base_;
};

EventSpace build_event_space(const Expansion& lam);

// mu is explicit data (possibly inconsistent; that is what check_assignment
// probes). Subsets absent from the map are extended additively from the
// singletons.
struct ProbAssignment {
    EventSpace space;
    std::map<Subset, double> mu;

    double value(Subset s) const;
};

ProbAssignment uniform_assignment(const EventSpace& space);

// mu[S] = |event(S)|^2 / |psi|^2 for every subset (n <= 16) or for the
// singletons (larger n).
ProbAssignment born_assignment(const EventSpace& space);

struct AssignmentReport {
    bool bounds_ok = false;
    bool empty_ok = false;
    bool normalized_ok = false;
    bool additive_ok = false;
    double worst_bound = 0.0;       // max distance outside [0,1]
    double worst_additivity = 0.0;  // max |mu(A|B) - mu(A) - mu(B)| over disjoint A,B
    Subset witness_a = 0, witness_b = 0;

    bool pass() const { return bounds_ok && empty_ok && normalized_ok && additive_ok; }
};

AssignmentReport check_assignment(const ProbAssignment& pa, const Tolerance& tol = {});

// Three unitaries that cycle microstate i out through a fresh direction and
// back into microstate j's place: U_a : xi_i -> phi_c, U_b : xi_j -> z_b xi_i,
// U_c : phi_c -> z_a xi_j. Each acts as a 2x2 block in the plane of the two
// vectors it moves and as the identity elsewhere. z_a, z_b are the
// pre-absorption factors; the stored unitaries have them absorbed, so for an
// equal-norm pair the composite U_c U_b U_a fixes psi.
struct SwapTriple {
    int i = 0, j = 0;
    UnitaryOp U_a, U_b, U_c;
    Complex z_a{1, 0}, z_b{1, 0};
    StateVector aux_dir;  // unit vector; phi_c = |xi_i| * aux_dir
};

SwapTriple build_swap_triple(const Expansion& lam, int i, int j, std::uint64_t seed);

// The constraint system a swap triple imposes on candidate probabilities:
// per stage of psi -> U_a psi -> U_b U_a psi -> U_c U_b U_a psi, one unknown
// per expansion slot, with rows for invariance of slots the step's unitary
// fixes, normalization of every stage, and identification of the final stage
// with the initial one (the composite returns psi). Solved by SVD; indices
// land in one class when every solution gives them equal stage-0 values.
struct EqualityClasses {
    std::vector<std::vector<int>> classes;  // partition of {0..n-1}
    std::vector<double> mu;                 // minimum-norm stage-0 solution
    int nullity = 0;                        // solution-space dimension
    double residual = 0.0;                  // |Ax - b| of the returned solution
};

EqualityClasses forced_equalities(const Expansion& lam, std::uint64_t seed = 0);

}  // namespace branchcount
