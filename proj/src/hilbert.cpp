#include "branchcount/hilbert.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

namespace branchcount {

double gaussian(Rng& rng) {
    // Box-Muller; discards the second variate for simplicity.
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u1 = 0.0;
    while (u1 == 0.0) u1 = unif(rng);
    double u2 = unif(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

StateVector StateVector::normalized() const {
    double n = norm();
    if (n == 0.0) throw ZeroState("cannot normalize the zero vector");
    return StateVector(v_ / n);
}

Complex inner(const StateVector& a, const StateVector& b) {
    if (a.dim() != b.dim())
        throw DimensionMismatch("inner: dims " + std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()));
    return a.vec().dot(b.vec());
}

StateVector tensor(const StateVector& a, const StateVector& b) {
    Vec out(a.dim() * b.dim());
    for (Eigen::Index i = 0; i < a.dim(); ++i)
        out.segment(i * b.dim(), b.dim()) = a[i] * b.vec();
    return StateVector(std::move(out));
}

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

StateVector ProjectorOp::apply(const StateVector& psi) const {
    if (psi.dim() != dim())
        throw DimensionMismatch("projector dim " + std::to_string(dim()) + " vs state dim " +
                                std::to_string(psi.dim()));
    return StateVector(m_ * psi.vec());
}

Eigen::Index ProjectorOp::rank() const {
    return static_cast<Eigen::Index>(std::llround(m_.trace().real()));
}

bool ProjectorOp::is_valid(const Tolerance& tol) const {
    double scale = m_.norm() > 1.0 ? m_.norm() : 1.0;
    double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
    double idem = (m_ * m_ - m_).cwiseAbs().maxCoeff();
    return herm <= tol.scaled(scale) && idem <= tol.scaled(scale);
}

void ProjectorOp::ensure_bases() {
    if (range_basis && null_basis) return;
    Eigen::SelfAdjointEigenSolver<Mat> es(m_);
    // Eigenvalues ascend; range eigenvectors sit at the top.
    Eigen::Index r = rank();
    Eigen::Index d = dim();
    if (!range_basis) range_basis = std::make_shared<const Mat>(es.eigenvectors().rightCols(r));
    if (!null_basis) null_basis = std::make_shared<const Mat>(es.eigenvectors().leftCols(d - r));
}

ProjectorOp ProjectorOp::complement() const {
    ProjectorOp q(Mat::Identity(dim(), dim()) - m_);
    q.range_basis = null_basis;
    q.null_basis = range_basis;
    return q;
}

StateVector UnitaryOp::apply(const StateVector& psi) const {
    if (psi.dim() != dim())
        throw DimensionMismatch("unitary dim " + std::to_string(dim()) + " vs state dim " +
                                std::to_string(psi.dim()));
    return StateVector(m_ * psi.vec());
}

UnitaryOp UnitaryOp::compose(const UnitaryOp& rhs) const {
    if (rhs.dim() != dim()) throw DimensionMismatch("compose: dimension mismatch");
    return UnitaryOp(m_ * rhs.mat());
}

bool UnitaryOp::is_valid(const Tolerance& tol) const {
    Mat should_be_id = m_.adjoint() * m_;
    double dev = (should_be_id - Mat::Identity(dim(), dim())).cwiseAbs().maxCoeff();
    return dev <= tol.scaled(1.0);
}

StateVector orthonormal_complement_vector(const std::vector<StateVector>& taken,
                                          Eigen::Index dim, Rng& rng) {
    FreshDirections pool(dim, rng);
    for (const auto& t : taken) pool.exclude(t);
    return pool.draw();
}

FreshDirections::FreshDirections(Eigen::Index dim, Rng& rng) : sub_dim_(dim), rng_(&rng) {}

FreshDirections::FreshDirections(std::shared_ptr<const Mat> basis, Rng& rng)
    : basis_(std::move(basis)), sub_dim_(basis_->cols()), rng_(&rng) {}

Vec FreshDirections::to_coords(const StateVector& v) const {
    if (!basis_) return v.vec();
    return basis_->adjoint() * v.vec();
}

StateVector FreshDirections::from_coords(const Vec& c) const {
    if (!basis_) return StateVector(c);
    return StateVector(*basis_ * c);
}

StateVector FreshDirections::draw() {
    if (bank_pos_ < bank_.cols()) {
        Vec c = bank_.col(bank_pos_++);
        used_.push_back(c);
        return from_coords(c);
    }
    if (static_cast<Eigen::Index>(used_.size()) >= sub_dim_)
        throw NoFreeDirection("subspace exhausted: " + std::to_string(sub_dim_) +
                              " directions already taken");
    // Random Gaussian coordinate vector, Gram-Schmidt against prior draws.
    // A fresh draw is almost surely independent; retry guards degenerate luck.
    for (int attempt = 0; attempt < 64; ++attempt) {
        Vec g(sub_dim_);
        for (Eigen::Index i = 0; i < sub_dim_; ++i) g(i) = Complex(gaussian(*rng_), gaussian(*rng_));
        double orig = g.norm();
        for (const auto& u : used_) g -= u.dot(g) * u;
        double res = g.norm();
        if (res > 1e-6 * orig) {
            g /= res;
            used_.push_back(g);
            return from_coords(g);
        }
    }
    throw NoFreeDirection("failed to find a fresh direction (subspace numerically exhausted)");
}

void FreshDirections::exclude(const StateVector& v) {
    Vec c = to_coords(v);
    for (const auto& u : used_) c -= u.dot(c) * u;
    double res = c.norm();
    if (res > 1e-8) {
        c /= res;
        used_.push_back(std::move(c));
        // Banked directions are orthogonal to the old used_ set only.
        bank_ = Mat();
        bank_pos_ = 0;
    }
}

void FreshDirections::bank(Eigen::Index count) {
    bank_ = Mat();
    bank_pos_ = 0;
    Eigen::Index k0 = static_cast<Eigen::Index>(used_.size());
    count = std::min(count, sub_dim_ - k0);
    if (count <= 0) return;
    // Columns k0..k0+count-1 of any unitary whose leading k0 columns span
    // used_ are valid fresh directions: one Householder QR of used_ supplies
    // the reflectors, and a random phase per column keeps different seeds
    // from producing the same expansion.
    std::uniform_real_distribution<double> unif(0.0, 2.0 * M_PI);
    Mat sel = Mat::Zero(sub_dim_, count);
    for (Eigen::Index j = 0; j < count; ++j) sel(k0 + j, j) = std::polar(1.0, unif(*rng_));
    if (k0 == 0) {
        bank_ = std::move(sel);
        return;
    }
    Mat w(sub_dim_, k0);
    for (Eigen::Index i = 0; i < k0; ++i) w.col(i) = used_[static_cast<size_t>(i)];
    Eigen::HouseholderQR<Mat> qr(w);
    bank_ = qr.householderQ() * sel;
}

Eigen::Index FreshDirections::capacity() const {
    return sub_dim_ - static_cast<Eigen::Index>(used_.size());
}

StateVector gaussian_state(Eigen::Index dim, Rng& rng) {
    Vec v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = Complex(gaussian(rng), gaussian(rng));
    return StateVector(std::move(v));
}

UnitaryOp haar_unitary(Eigen::Index dim, Rng& rng) {
    Mat g(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = Complex(gaussian(rng), gaussian(rng));
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ();
    Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Fix the gauge so the distribution is Haar, not merely unitary.
    for (Eigen::Index i = 0; i < dim; ++i) {
        Complex rii = r(i, i);
        double a = std::abs(rii);
        q.col(i) *= (a == 0.0) ? Complex(1, 0) : rii / a;
    }
    return UnitaryOp(std::move(q));
}

ProjectorOp projector_onto(const std::vector<StateVector>& states, bool compute_null) {
    if (states.empty()) throw Error("projector_onto: no states given");
    Eigen::Index dim = states[0].dim();
    Mat a(dim, static_cast<Eigen::Index>(states.size()));
    for (size_t k = 0; k < states.size(); ++k) {
        if (states[k].dim() != dim) throw DimensionMismatch("projector_onto: mixed dimensions");
        a.col(static_cast<Eigen::Index>(k)) = states[k].vec();
    }
    // Thin SVD gives an orthonormal range basis robust to near-dependence.
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU);
    double cutoff = 1e-12 * svd.singularValues()(0);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > cutoff) ++r;
    Mat u = svd.matrixU().leftCols(r);
    ProjectorOp p(u * u.adjoint());
    p.range_basis = std::make_shared<const Mat>(std::move(u));
    if (compute_null) p.ensure_bases();
    return p;
}

ProjectorOp random_projector(Eigen::Index dim, Eigen::Index rank, Rng& rng) {
    if (rank < 0 || rank > dim) throw Error("random_projector: rank out of range");
    UnitaryOp u = haar_unitary(dim, rng);
    Mat v = u.mat().leftCols(rank);
    ProjectorOp p(v * v.adjoint());
    p.range_basis = std::make_shared<const Mat>(std::move(v));
    p.null_basis = std::make_shared<const Mat>(u.mat().rightCols(dim - rank));
    return p;
}

StateVector embed(const StateVector& psi, Eigen::Index new_dim) {
    if (new_dim < psi.dim()) throw DimensionMismatch("embed: target dimension smaller than state");
    Vec v = Vec::Zero(new_dim);
    v.head(psi.dim()) = psi.vec();
    return StateVector(std::move(v));
}

ProjectorOp embed_projector(const ProjectorOp& p, Eigen::Index plus_pad, Eigen::Index zero_pad) {
    Eigen::Index d = p.dim();
    Eigen::Index nd = d + plus_pad + zero_pad;
    Mat m = Mat::Zero(nd, nd);
    m.topLeftCorner(d, d) = p.mat();
    m.block(d, d, plus_pad, plus_pad) = Mat::Identity(plus_pad, plus_pad);
    ProjectorOp out(std::move(m));
    if (p.range_basis && p.null_basis) {
        Eigen::Index r = p.range_basis->cols();
        Mat rb = Mat::Zero(nd, r + plus_pad);
        rb.topLeftCorner(d, r) = *p.range_basis;
        rb.block(d, r, plus_pad, plus_pad) = Mat::Identity(plus_pad, plus_pad);
        Eigen::Index nr = p.null_basis->cols();
        Mat nb = Mat::Zero(nd, nr + zero_pad);
        nb.topLeftCorner(d, nr) = *p.null_basis;
        nb.block(d + plus_pad, nr, zero_pad, zero_pad) = Mat::Identity(zero_pad, zero_pad);
        out.range_basis = std::make_shared<const Mat>(std::move(rb));
        out.null_basis = std::make_shared<const Mat>(std::move(nb));
    }
    return out;
}

ProjectorOp direct_sum(const ProjectorOp& a, const ProjectorOp& b) {
    Eigen::Index da = a.dim(), db = b.dim();
    Mat m = Mat::Zero(da + db, da + db);
    m.topLeftCorner(da, da) = a.mat();
    m.bottomRightCorner(db, db) = b.mat();
    ProjectorOp out(std::move(m));
    if (a.range_basis && b.range_basis && a.null_basis && b.null_basis) {
        auto stack = [da, db](const Mat& top, const Mat& bot) {
            Mat s = Mat::Zero(da + db, top.cols() + bot.cols());
            s.topLeftCorner(da, top.cols()) = top;
            s.block(da, top.cols(), db, bot.cols()) = bot;
            return s;
        };
        out.range_basis = std::make_shared<const Mat>(stack(*a.range_basis, *b.range_basis));
        out.null_basis = std::make_shared<const Mat>(stack(*a.null_basis, *b.null_basis));
    }
    return out;
}

ProjectorOp tensor_op(const ProjectorOp& a, const ProjectorOp& b) {
    ProjectorOp out(kron(a.mat(), b.mat()));
    if (a.range_basis && b.range_basis) {
        out.range_basis = std::make_shared<const Mat>(kron(*a.range_basis, *b.range_basis));
        // range(I - A(x)B) splits into three blocks; assembling them needs
        // both null bases. Only fill it when everything is on hand.
        if (a.null_basis && b.null_basis) {
            const Mat& ar = *a.range_basis;
            const Mat& an = *a.null_basis;
            const Mat& br = *b.range_basis;
            const Mat& bn = *b.null_basis;
            Mat n1 = kron(ar, bn);
            Mat n2 = kron(an, br);
            Mat n3 = kron(an, bn);
            Mat nb(n1.rows(), n1.cols() + n2.cols() + n3.cols());
            nb << n1, n2, n3;
            out.null_basis = std::make_shared<const Mat>(std::move(nb));
        }
    }
    return out;
}

}  // namespace branchcount
