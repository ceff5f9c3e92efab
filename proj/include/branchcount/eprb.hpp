#pragma once

#include <cstdint>

#include "branchcount/microprob.hpp"

namespace branchcount {

// Measurement direction in the x-z plane: angle a stands for the unit vector
// (sin a, 0, cos a). Radians everywhere inside the library.
struct Setting {
    double angle = 0.0;
};

// Two-party scenario. Each local space is C^2 direct-sum-padded with
// zero-amplitude directions that exist purely as peel room; the joint space
// is their tensor product with index (i, j) -> i * dim_b() + j.
struct EprbScenario {
    StateVector state;
    Eigen::Index pad_a = 0, pad_b = 0;
    Setting a, aprime, b, bprime;
    Eigen::Index n = 0;  // ensemble size for counting
    std::uint64_t seed = 0;

    Eigen::Index dim_a() const { return 2 + pad_a; }
    Eigen::Index dim_b() const { return 2 + pad_b; }
};

// (I + outcome * n_hat.sigma)/2 on C^2, with both eigenbases attached.
// outcome is +1 or -1.
ProjectorOp spin_projector(Setting s, int outcome);

// Spin projector on the padded local space. Outcome +1 annexes the first
// half of the pad as its identity block and outcome -1 the rest, so the two
// extensions are complementary projectors while padded directions still
// carry no Born weight for embedded states.
ProjectorOp local_projector(Setting s, int outcome, Eigen::Index pad);

// C^2 state zero-padded into the local space.
StateVector embed_local(const StateVector& spin, Eigen::Index pad);

// phi (x) chi with both C^2 locals padded.
StateVector product_state(const StateVector& phi, const StateVector& chi, Eigen::Index pad_a,
                          Eigen::Index pad_b);

// (|01> - |10>)/sqrt(2), both sides padded by `pad`. Unit norm.
StateVector singlet(Eigen::Index pad);

// Bob's measurement as a local unitary: each spin eigenvector u of the
// setting develops into the superposition (u + pointer)/sqrt(2) with its own
// pad pointer direction; identity outside that four-dimensional subspace.
// Needs pad >= 2.
UnitaryOp measurement_unitary(Setting s, Eigen::Index pad);

struct JointCell {
    Eigen::Index m = 0;
    double born = 0.0;
    double lo = 0.0, hi = 0.0;  // [m/n, (m + cats)/n]
};

// Outcome index convention for every array in this module: 0 is +1, 1 is -1.
struct JointTable {
    Eigen::Index n = 0;
    Eigen::Index cats = 0;  // 0..3
    JointCell cells[2][2];  // [alice outcome][bob outcome]
    double born_marginal_a[2] = {0.0, 0.0};     // row sums over bob
    double born_marginal_b[2] = {0.0, 0.0};     // column sums over alice
    Eigen::Index count_marginal_a[2] = {0, 0};  // binary count of P_s (x) I
    Eigen::Index count_marginal_b[2] = {0, 0};  // binary count of I (x) P_t

    double born_sum() const;
    double count_sum() const;  // sum of m_st/n = (n - cats)/n
};

// Joint outcome distribution at one setting pair, by Born rule and by a
// four-outcome adapted expansion: m_st = floor(n w_st), snapped when n w_st
// is integral, and the n - sum(m_st) <= 3 leftover microstates are cats.
// Marginal counts use seeds derived from sc.seed alone, so they cannot see
// the other party's setting by construction either.
JointTable joint_table(const EprbScenario& sc, Setting a, Setting b);

struct ParameterIndependenceReport {
    double born_under_b[2] = {0.0, 0.0};       // alice marginal summed under b
    double born_under_bprime[2] = {0.0, 0.0};  // summed under b'
    double born_binary[2] = {0.0, 0.0};        // from P_s (x) I directly
    Eigen::Index m_base[2] = {0, 0};           // binary count on the raw state
    Eigen::Index m_under_b[2] = {0, 0};        // after Bob's interaction at b
    Eigen::Index m_under_bprime[2] = {0, 0};   // after Bob's interaction at b'
    double max_born_dev = 0.0;
    bool counts_equal = false;

    bool pass(const Tolerance& tol = {}) const;
};

// Alice's marginals must not see Bob's choice: her Born marginals summed
// under b and b' agree with the binary value within tolerance, and her count
// for P_s (x) I is the same integer before and after Bob's measurement
// interaction at either setting (same seed on both sides of each recount).
ParameterIndependenceReport parameter_independence(const EprbScenario& sc);

struct OutcomeIndependenceReport {
    double joint[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    double marginal_a[2] = {0.0, 0.0};
    double marginal_b[2] = {0.0, 0.0};
    double max_factor_dev = 0.0;  // max |p(s,t) - p(s) p(t)|
    bool factorizing = false;
    double conditional[2][2] = {{0.0, 0.0}, {0.0, 0.0}};  // p(s|t); NaN if p(t) ~ 0
    double max_conditional_dev = 0.0;  // max |p(s|t) - p(s)| where defined
};

// Born-rule factorization at one setting pair, plus the conditional form
// p(s|t) vs p(s) wherever p(t) is meaningfully nonzero.
OutcomeIndependenceReport outcome_independence(const EprbScenario& sc, Setting a, Setting b);

struct ProductCountingReport {
    Eigen::Index n_a = 0, m_a = 0;
    Eigen::Index n_b = 0, m_b = 0;
    Eigen::Index joint_count = 0;  // products counted inside P_s^a (x) P_t^b
    double p_joint = 0.0;          // joint_count / (n_a n_b)
    double p_product = 0.0;        // (m_a/n_a)(m_b/n_b)
    bool exact = false;            // joint_count == m_a * m_b, as integers
    Eigen::Index families[2][2] = {{0, 0}, {0, 0}};  // [alice side][bob side], 0 = inside
    bool families_partition_ok = false;
    ValidationReport product_expansion;  // the n_a n_b tensor microstates vs phi (x) chi
    double max_eigen_dev = 0.0;  // worst eigenstate residual among counted products
};

// Factorization by construction: adapt each local state to its own outcome
// projector, tensor all n_a n_b microstate pairs, and count by labels. The
// joint fraction equals the product of the marginal fractions in integer
// arithmetic, and the four label families partition the products.
ProductCountingReport product_counting(const StateVector& phi, const StateVector& chi, Setting a,
                                       Setting b, Eigen::Index n_a, Eigen::Index n_b,
                                       std::uint64_t seed);

struct ChshReport {
    // Correlator order: (a,b), (a,b'), (a',b), (a',b').
    double born_e[4] = {0.0, 0.0, 0.0, 0.0};
    double count_e[4] = {0.0, 0.0, 0.0, 0.0};
    double born_s = 0.0;
    double count_s = 0.0;
    double bound = 0.0;  // 16/n, conservative distance of count_s from born_s
    double classical = 2.0;
};

// S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')| from Born entries and from
// counting point estimates.
ChshReport chsh(const EprbScenario& sc);

}  // namespace branchcount
