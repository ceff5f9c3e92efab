#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "branchcount/types.hpp"

namespace branchcount {

using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

// Finite-dimensional state vector. Not normalized by construction; norm
// carries physical meaning throughout (microstates have norm |psi|/sqrt(n)).
class StateVector {
  public:
    StateVector() = default;
    explicit StateVector(Vec v) : v_(std::move(v)) {}
    explicit StateVector(Eigen::Index dim) : v_(Vec::Zero(dim)) {}

    Eigen::Index dim() const { return v_.size(); }
    double norm() const { return v_.norm(); }
    double squared_norm() const { return v_.squaredNorm(); }

    Complex& operator[](Eigen::Index i) { return v_(i); }
    Complex operator[](Eigen::Index i) const { return v_(i); }

    const Vec& vec() const { return v_; }
    Vec& vec() { return v_; }

    StateVector operator+(const StateVector& o) const { return StateVector(v_ + o.v_); }
    StateVector operator-(const StateVector& o) const { return StateVector(v_ - o.v_); }
    StateVector operator*(Complex c) const { return StateVector(v_ * c); }
    StateVector operator*(double c) const { return StateVector(v_ * c); }
    StateVector& operator+=(const StateVector& o) {
        v_ += o.v_;
        return *this;
    }
    StateVector& operator-=(const StateVector& o) {
        v_ -= o.v_;
        return *this;
    }

    StateVector normalized() const;

  private:
    Vec v_;
};

// <a|b>, antilinear in the first argument.
Complex inner(const StateVector& a, const StateVector& b);

// Kronecker product of states: index of (i,j) is i*b.dim() + j.
StateVector tensor(const StateVector& a, const StateVector& b);

Mat kron(const Mat& a, const Mat& b);

// Hermitian idempotent with optional cached orthonormal bases of its range
// and nullspace. Caches are attached by the factories that know the bases
// already; operators built by hand work fine without them.
class ProjectorOp {
  public:
    ProjectorOp() = default;
    explicit ProjectorOp(Mat m) : m_(std::move(m)) {}

    Eigen::Index dim() const { return m_.rows(); }
    const Mat& mat() const { return m_; }

    StateVector apply(const StateVector& psi) const;

    // rank = tr(P) for an exact projector; rounded to the nearest integer.
    Eigen::Index rank() const;

    bool is_valid(const Tolerance& tol = {}) const;

    std::shared_ptr<const Mat> range_basis;  // dim x rank, orthonormal columns
    std::shared_ptr<const Mat> null_basis;   // dim x (dim-rank), orthonormal columns

    // Computes (and caches) both bases if absent. Safe to call repeatedly.
    void ensure_bases();

    ProjectorOp complement() const;

  private:
    Mat m_;
};

class UnitaryOp {
  public:
    UnitaryOp() = default;
    explicit UnitaryOp(Mat m) : m_(std::move(m)) {}

    Eigen::Index dim() const { return m_.rows(); }
    const Mat& mat() const { return m_; }

    StateVector apply(const StateVector& psi) const;
    UnitaryOp compose(const UnitaryOp& rhs) const;  // this * rhs

    bool is_valid(const Tolerance& tol = {}) const;

  private:
    Mat m_;
};

// Some unit vector orthogonal to every column of `taken` (columns need not be
// orthonormal). Throws NoFreeDirection if span(taken) is the whole space.
StateVector orthonormal_complement_vector(const std::vector<StateVector>& taken,
                                          Eigen::Index dim, Rng& rng);

// Supplies fresh unit directions inside a subspace, orthogonal to everything
// handed out or excluded so far. Operates in subspace coordinates when a
// basis is supplied so each draw is O(dim * k), not O(dim^2).
class FreshDirections {
  public:
    // Full-space pool.
    FreshDirections(Eigen::Index dim, Rng& rng);
    // Pool confined to the column span of `basis` (orthonormal columns).
    FreshDirections(std::shared_ptr<const Mat> basis, Rng& rng);

    // Unit vector in the subspace, orthogonal to all prior draws/exclusions.
    StateVector draw();

    // Marks the subspace component of v as taken. No-op if the component is
    // negligible.
    void exclude(const StateVector& v);

    // Pre-orthonormalizes the next `count` draws in one batch; draw() pops
    // the bank before falling back to per-draw orthogonalization. This turns
    // a long peel chain from quadratic to linear in the number of pieces.
    // An exclusion that actually takes a direction drops what is left banked.
    void bank(Eigen::Index count);

    Eigen::Index capacity() const;  // dimensions remaining

  private:
    Vec to_coords(const StateVector& v) const;
    StateVector from_coords(const Vec& c) const;

    std::shared_ptr<const Mat> basis_;  // null => ambient space
    Eigen::Index sub_dim_ = 0;
    std::vector<Vec> used_;  // orthonormal, in coords
    Mat bank_;
    Eigen::Index bank_pos_ = 0;
    Rng* rng_ = nullptr;
};

StateVector gaussian_state(Eigen::Index dim, Rng& rng);

// Haar-distributed via QR of a Ginibre matrix with R-diagonal phase fix.
UnitaryOp haar_unitary(Eigen::Index dim, Rng& rng);

// Projector onto the span of the given (not necessarily orthonormal) states.
// Attaches range_basis; null_basis only when compute_null is set.
ProjectorOp projector_onto(const std::vector<StateVector>& states, bool compute_null = false);

// Rank-r projector with Haar-random range. Attaches both bases.
ProjectorOp random_projector(Eigen::Index dim, Eigen::Index rank, Rng& rng);

// psi zero-padded to new_dim.
StateVector embed(const StateVector& psi, Eigen::Index new_dim);

// P  ->  P (+) I_plus_pad (+) 0_zero_pad.
// Padded coordinates carry no amplitude for embedded states, so weights are
// untouched; the identity block raises the rank so more microstates fit.
ProjectorOp embed_projector(const ProjectorOp& p, Eigen::Index plus_pad, Eigen::Index zero_pad);

// A (+) B on C^{da+db}; propagates cached bases when both operands have them.
ProjectorOp direct_sum(const ProjectorOp& a, const ProjectorOp& b);

// P_a (x) P_b; propagates cached bases when both operands have them.
ProjectorOp tensor_op(const ProjectorOp& a, const ProjectorOp& b);

}  // namespace branchcount
