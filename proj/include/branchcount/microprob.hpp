#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "branchcount/expansion.hpp"

namespace branchcount {

// Count of microstates by eigenspace: m lie inside P, m_complement inside
// I - P, and cats (0 or 1) straddle both. The fraction m/n estimates the
// Born weight to within cats/n.
struct BranchCount {
    ProjectorOp projector;
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    Eigen::Index m_complement = 0;
    Eigen::Index cats = 0;
    double born = 0.0;

    double fraction() const { return static_cast<double>(m) / static_cast<double>(n); }
    double lo() const { return fraction(); }
    double hi() const { return static_cast<double>(m + cats) / static_cast<double>(n); }
};

enum class Label { IN_P, IN_NOT_P, CAT };

// Equiamplitude expansion whose microstates are eigenstates of the projector
// except for at most one cat.
struct AdaptedExpansion {
    Expansion base;
    std::vector<Label> labels;

    Eigen::Index count_of(Label l) const;
};

// One eigenblock of a family peel: m full microstates (one coordinate column
// each) plus the slices this block contributed to cat microstates. A cat is
// reassembled as the sum of its slices mapped back to ambient space.
struct FamilyBlock {
    Eigen::Index m = 0;
    Mat pieces;  // rank x m, coordinate columns
    std::vector<std::pair<Eigen::Index, Vec>> cat_slices;  // (cat index, coord slice)
};

struct FamilyPeelResult {
    std::vector<FamilyBlock> blocks;
    Eigen::Index cats = 0;  // n - sum of block m's, always < number of blocks
};

// Splits n equiamplitude pieces across mutually orthogonal eigenblocks, given
// psi's coordinates in each block. Block k gets floor(n w_k) full pieces
// (rounded instead when n w_k sits within 1e-9 of an integer); the remaining
// cats are packed from the fractional remainders largest-first, so every cat
// sums slices from distinct blocks to norm |psi|/sqrt(n). Blocks must cover
// psi: sum of |chi_k|^2 is |psi|^2.
FamilyPeelResult family_peel(const std::vector<Vec>& chi_blocks, Eigen::Index n,
                             std::uint64_t seed);

// |P psi|^2 / |psi|^2, clamped into [0,1]. Trusts that P is a projector;
// callers validating untrusted input should run ProjectorOp::is_valid first.
double born_weight(const ProjectorOp& p, const StateVector& psi);

// Builds the n-microstate expansion adapted to p: m = floor(w n) microstates
// peeled inside range(p), n - m - 1 inside its complement, and one cat
// carrying the fractional remainder split across both. When w n lands on an
// integer (within 1e-9) the cat degenerates into a pure eigenstate and the
// labeling has no cat at all.
AdaptedExpansion adapt(const ProjectorOp& p, const StateVector& psi, Eigen::Index n,
                       std::uint64_t seed);

BranchCount count(const ProjectorOp& p, const StateVector& psi, Eigen::Index n,
                  std::uint64_t seed);

// Extends (p, psi) so both the range and null blocks can hold n + 1 pieces:
// p gains identity and zero pad blocks, psi gains zero amplitude. The weight
// and the resulting counts are unchanged; returns the inputs untouched when
// they already have room. count() itself stays strict and throws instead.
std::pair<ProjectorOp, StateVector> ensure_capacity(const ProjectorOp& p, const StateVector& psi,
                                                    Eigen::Index n);

// True iff `trials` independently-seeded adapted expansions all yield the
// same (m, m_complement, cats).
bool uniqueness_check(const ProjectorOp& p, const StateVector& psi, Eigen::Index n, int trials,
                      std::uint64_t seed);

// The counting analogue of the invariance condition: when U moves neither
// P psi as a vector (U P psi = P psi) nor the weight P carries (P U psi =
// P psi), the branch counts for psi and U psi must agree. When the
// antecedent fails the condition says nothing and no counts are compared.
struct LocalityReport {
    bool applicable = false;
    double dev_up = 0.0;  // |U P psi - P psi| / |psi|
    double dev_pu = 0.0;  // |P U psi - P psi| / |psi|
    bool counts_equal = false;
    std::optional<BranchCount> before, after;
};

LocalityReport locality_check(const ProjectorOp& p, const StateVector& psi, const UnitaryOp& u,
                              Eigen::Index n, std::uint64_t seed);

struct ConvergeRow {
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    Eigen::Index cats = 0;
    double fraction = 0.0;
    double lo = 0.0, hi = 0.0;
    double born = 0.0;
    double error = 0.0;  // |m/n - born|, always < 1/n
};

std::vector<ConvergeRow> converge(const ProjectorOp& p, const StateVector& psi,
                                  const std::vector<Eigen::Index>& n_grid, std::uint64_t seed);

}  // namespace branchcount
