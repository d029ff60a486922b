// liouvillian.hpp: vectorised Lindblad generator, steady states and
// time propagation.
//
// Vectorisation is column stacking: vec(rho)[i + D*j] = rho(i, j), so that
// vec(A X B) = (B^T (x) A) vec(X).

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>

#include "nvbus/operators.hpp"
#include "nvbus/units.hpp"

namespace nvbus {

struct Superoperator {
    SpMat matrix;
    SpaceLayout layout;

    int hilbert_dim() const { return layout.total(); }
    int dim() const { return static_cast<int>(matrix.rows()); }
};

inline Vec vec(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

inline Mat unvec(const Vec& v, int d) {
    require(v.size() == static_cast<Eigen::Index>(d) * d, ErrorKind::DimensionMismatch, "unvec size mismatch");
    return Eigen::Map<const Mat>(v.data(), d, d);
}

namespace detail {

inline SpMat to_sparse(const Mat& m) { return m.sparseView(0.0, 0.0); }

inline SpMat sparse_identity(int n) {
    SpMat id(n, n);
    id.setIdentity();
    return id;
}

inline SpMat skron(const SpMat& a, const SpMat& b) {
    SpMat out = Eigen::kroneckerProduct(a, b);
    return out;
}

/// Max absolute row sum.
inline double inf_norm(const SpMat& m) {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(m.rows());
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) rows(it.row()) += std::abs(it.value());
    return rows.size() ? rows.maxCoeff() : 0.0;
}

} // namespace detail

inline Superoperator build_liouvillian(const LabeledOperator& H, std::span<const LabeledOperator> collapse) {
    require(H.hermitian_hint() || hermiticity_error(H.matrix()) < 1e-12 * std::max(1.0, H.matrix().cwiseAbs().maxCoeff()),
            ErrorKind::NotHermitian, "Liouvillian needs a Hermitian Hamiltonian");
    const int d = H.dim();
    const SpMat id = detail::sparse_identity(d);
    const SpMat h = detail::to_sparse(H.matrix());
    const SpMat ht = detail::to_sparse(H.matrix().transpose());

    SpMat L = cplx{0.0, -1.0} * (detail::skron(id, h) - detail::skron(ht, id));
    for (const auto& c : collapse) {
        require(c.layout() == H.layout(), ErrorKind::LayoutMismatch, "collapse operator on a different layout");
        if (c.matrix().cwiseAbs().maxCoeff() == 0.0) continue;
        const Mat cdc = c.matrix().adjoint() * c.matrix();
        L += detail::skron(detail::to_sparse(c.matrix().conjugate()), detail::to_sparse(c.matrix()));
        L -= 0.5 * detail::skron(id, detail::to_sparse(cdc));
        L -= 0.5 * detail::skron(detail::to_sparse(cdc.transpose()), id);
    }
    L.prune(cplx{0.0, 0.0});
    L.makeCompressed();
    return {std::move(L), H.layout()};
}

inline Superoperator build_liouvillian(const LabeledOperator& H, const std::vector<LabeledOperator>& collapse) {
    return build_liouvillian(H, std::span<const LabeledOperator>(collapse.data(), collapse.size()));
}

inline Mat apply(const Superoperator& L, const Mat& rho) {
    return unvec(L.matrix * vec(rho), L.hilbert_dim());
}

/// |tr(L x)| bound relative to ||L||: max over columns of |sum of diagonal-row entries|.
inline double trace_preservation_error(const Superoperator& L) {
    const int d = L.hilbert_dim();
    Eigen::VectorXcd col = Eigen::VectorXcd::Zero(L.dim());
    for (int k = 0; k < L.matrix.outerSize(); ++k)
        for (SpMat::InnerIterator it(L.matrix, k); it; ++it)
            if (it.row() % (d + 1) == 0) col(it.col()) += it.value();
    const double norm = detail::inf_norm(L.matrix);
    return norm > 0 ? col.cwiseAbs().maxCoeff() / norm : 0.0;
}

// ---------------------------------------------------------------------------
// steady state

struct SteadyStateOptions {
    double kernel_tolerance{1e-11}; // sigma_min(bordered) / ||L|| below this counts as kernel
    int probe_vectors{4};
    int probe_iterations{8};
    int refinement_steps{2};
};

inline constexpr int dense_kernel_limit = 2500;

struct SteadyStateResult {
    DensityMatrix rho;
    double residual;                         // ||L rho||_inf / (||L||_inf ||rho||_inf)
    int kernel_dim;
    std::vector<double> smallest_singular;   // of the bordered system, relative to ||L||
};

inline double steady_state_residual(const Superoperator& L, const Mat& rho) {
    const Vec x = vec(rho);
    const double norm = detail::inf_norm(L.matrix);
    const double xn = x.cwiseAbs().maxCoeff();
    if (norm == 0.0 || xn == 0.0) return 0.0;
    return (L.matrix * x).cwiseAbs().maxCoeff() / (norm * xn);
}

namespace detail {

// Smallest singular values of the factored matrix via block inverse iteration
// on (B^H B)^{-1}. Returned ascending.
template <typename Solver>
std::vector<double> smallest_singular_values(Solver& lu, int n, int k, int iterations) {
    k = std::min(k, n);
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> nd;
    Mat X(n, k);
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < n; ++i) X(i, j) = cplx{nd(rng), nd(rng)};
    for (int it = 0; it < iterations; ++it) {
        Mat Y = lu.adjoint().solve(X);
        Mat Z = lu.solve(Y);
        Eigen::HouseholderQR<Mat> qr(Z);
        X = qr.householderQ() * Mat::Identity(n, k);
    }
    const Mat W = lu.adjoint().solve(X);
    const Mat G = W.adjoint() * W;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (G + G.adjoint()));
    std::vector<double> sv;
    for (int i = k - 1; i >= 0; --i) {
        const double lam = es.eigenvalues()(i);
        sv.push_back(lam > 0 ? 1.0 / std::sqrt(lam) : std::numeric_limits<double>::infinity());
    }
    return sv;
}

} // namespace detail

/// Steady state from the bordered system: the (0,0) population row of L is
/// replaced by the trace functional. The kernel dimension is checked through
/// the smallest singular values of the bordered matrix; a degenerate kernel
/// is an error, never averaged over.
inline SteadyStateResult steady_state_report(const Superoperator& L, const SteadyStateOptions& opt = {}) {
    const int d = L.hilbert_dim();
    const int n = L.dim();
    const double norm = detail::inf_norm(L.matrix);
    require(norm > 0, ErrorKind::DegenerateSteadyState, "zero Liouvillian: every state is stationary");

    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(L.matrix.nonZeros() + d);
    for (int k = 0; k < L.matrix.outerSize(); ++k)
        for (SpMat::InnerIterator it(L.matrix, k); it; ++it)
            if (it.row() != 0) trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < d; ++i) trip.emplace_back(0, i * (d + 1), cplx{norm, 0.0});
    SpMat B(n, n);
    B.setFromTriplets(trip.begin(), trip.end());
    B.makeCompressed();

    Vec rhs = Vec::Zero(n);
    rhs(0) = norm;

    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(B);
    lu.factorize(B);
    if (lu.info() != Eigen::Success) {
        // Exactly singular pivot: count the kernel densely when affordable.
        std::string dim = ">= 2";
        if (n <= dense_kernel_limit) {
            Eigen::BDCSVD<Mat> svd(Mat(L.matrix));
            const auto& s = svd.singularValues();
            int k = 0;
            for (Eigen::Index i = 0; i < s.size(); ++i)
                if (s(i) < opt.kernel_tolerance * norm) ++k;
            dim = std::to_string(k);
        }
        fail(ErrorKind::DegenerateSteadyState, "Liouvillian kernel has dimension " + dim);
    }

    const auto sv = detail::smallest_singular_values(lu, n, opt.probe_vectors, opt.probe_iterations);
    int kernel_dim = 1;
    std::vector<double> rel;
    for (double s : sv) {
        rel.push_back(s / norm);
        if (s / norm < opt.kernel_tolerance) ++kernel_dim;
    }
    if (kernel_dim > 1)
        fail(ErrorKind::DegenerateSteadyState,
             "Liouvillian kernel has dimension " + std::to_string(kernel_dim) +
                 (kernel_dim > opt.probe_vectors ? " or more" : ""));

    Vec x = lu.solve(rhs);
    for (int r = 0; r < opt.refinement_steps; ++r) x += lu.solve(Vec(rhs - B * x));
    if (!x.allFinite()) fail(ErrorKind::NonConvergence, "steady-state solve produced non-finite values");

    Mat rho = unvec(x, d);
    rho /= rho.trace();
    const double res = steady_state_residual(L, rho);
    return {DensityMatrix(std::move(rho), L.layout), res, kernel_dim, rel};
}

inline DensityMatrix steady_state(const Superoperator& L, const SteadyStateOptions& opt = {}) {
    return steady_state_report(L, opt).rho;
}

// ---------------------------------------------------------------------------
// propagation

struct PropagateOptions {
    double tolerance{1e-12};  // local error per unit time, relative to ||v||
    int krylov_dim{30};
    int max_rejections{20};
    double trace_tolerance{1e-6};
};

/// exp(t A) v by restarted Arnoldi with adaptive sub-steps and a posteriori
/// local error control (the scheme of Sidje's Expokit).
inline Vec krylov_expmv(const SpMat& A, const Vec& v, double t, const PropagateOptions& opt = {}) {
    require(t >= 0, ErrorKind::InvalidParameter, "propagation time must be >= 0");
    const int n = static_cast<int>(A.rows());
    if (t == 0.0 || v.norm() == 0.0) return v;
    const int m = std::min(opt.krylov_dim, n);
    const double anorm = std::max(detail::inf_norm(A), 1e-300);
    const double tol = opt.tolerance;
    const double breakdown = 1e-12 * anorm;
    constexpr double delta = 1.2, gamma = 0.9;

    auto round2 = [](double x) {
        if (x <= 0) return x;
        const double p = std::pow(10.0, std::floor(std::log10(x)) - 1);
        return std::ceil(x / p) * p;
    };

    Vec w = v;
    double beta = w.norm();
    double t_now = 0.0;
    const double xm0 = 1.0 / m;
    const double fact = std::pow((m + 1) / std::exp(1.0), m + 1) * std::sqrt(two_pi * (m + 1));
    double t_new = (1.0 / anorm) * std::pow((fact * tol) / (4.0 * beta * anorm), xm0);
    t_new = round2(t_new);

    Mat V(n, m + 1);
    Mat H(m + 2, m + 2);
    while (t_now < t) {
        double t_step = std::min(t - t_now, t_new);
        V.col(0) = w / beta;
        H.setZero();
        int mb = m;
        int k1 = 2;
        double avnorm = 0.0;
        for (int j = 0; j < m; ++j) {
            Vec p = A * V.col(j);
            for (int i = 0; i <= j; ++i) {
                H(i, j) = V.col(i).dot(p);
                p -= H(i, j) * V.col(i);
            }
            const double s = p.norm();
            if (s < breakdown) {
                k1 = 0;
                mb = j + 1;
                t_step = t - t_now;
                break;
            }
            H(j + 1, j) = s;
            V.col(j + 1) = p / s;
        }
        if (k1 != 0) {
            H(m + 1, m) = 1.0;
            avnorm = (A * V.col(m)).norm();
        }

        Mat F;
        double err_loc = 0.0, xm = xm0;
        int rejections = 0;
        while (true) {
            const int mx = mb + k1;
            F = (t_step * H.topLeftCorner(mx, mx)).exp();
            if (k1 == 0) {
                err_loc = breakdown;
                break;
            }
            const double phi1 = std::abs(beta * F(m, 0));
            const double phi2 = std::abs(beta * F(m + 1, 0) * avnorm);
            if (phi1 > 10.0 * phi2) {
                err_loc = phi2;
                xm = 1.0 / m;
            } else if (phi1 > phi2) {
                err_loc = (phi1 * phi2) / (phi1 - phi2);
                xm = 1.0 / m;
            } else {
                err_loc = phi1;
                xm = 1.0 / std::max(m - 1, 1);
            }
            if (err_loc <= delta * t_step * tol * beta) break;
            t_step = round2(gamma * t_step * std::pow(t_step * tol * beta / err_loc, xm));
            if (++rejections > opt.max_rejections)
                fail(ErrorKind::StepFailure, "Krylov step size control failed to converge");
        }
        const int mx = mb + std::max(0, k1 - 1);
        w = V.leftCols(mx) * (beta * F.col(0).head(mx));
        beta = w.norm();
        t_now += t_step;
        if (err_loc > 0)
            t_new = round2(gamma * t_step * std::pow(t_step * tol * beta / err_loc, xm));
        else
            t_new = t - t_now;
        if (!(t_new > 0)) t_new = t - t_now;
        if (beta == 0.0) break;
    }
    return w;
}

/// rho(t) = exp(L t) rho0. Trace drift beyond the tolerance is a StepFailure;
/// the state is not renormalised.
inline DensityMatrix propagate(const Superoperator& L, const DensityMatrix& rho0, double t,
                               const PropagateOptions& opt = {}) {
    require(rho0.layout() == L.layout, ErrorKind::LayoutMismatch, "state and Liouvillian layouts differ");
    require(t >= 0, ErrorKind::InvalidParameter, "propagation time must be >= 0");
    if (t == 0.0) return rho0;
    const Vec x = krylov_expmv(L.matrix, vec(rho0.matrix()), t, opt);
    Mat rho = unvec(x, L.hilbert_dim());
    const double drift = std::abs(rho.trace() - rho0.matrix().trace());
    require(drift <= opt.trace_tolerance, ErrorKind::StepFailure,
            "trace drifted by " + std::to_string(drift) + " during propagation");
    return DensityMatrix(std::move(rho), L.layout, {1e-8, 1e-6, -1e-8});
}

/// Repeated application of exp(L dt). Small problems use a dense matrix
/// exponential; larger ones a Krylov product per step.
class StepPropagator {
public:
    StepPropagator(const Superoperator& L, double dt, const PropagateOptions& opt = {})
        : L_(L.matrix), dt_(dt), opt_(opt) {
        require(dt > 0, ErrorKind::InvalidParameter, "step must be > 0");
        if (L.dim() <= dense_limit) dense_ = (Mat(L.matrix) * dt).exp();
    }

    Vec step(const Vec& x) const {
        if (dense_.size() > 0) return dense_ * x;
        return krylov_expmv(L_, x, dt_, opt_);
    }

    double dt() const { return dt_; }

    static constexpr int dense_limit = 700;

private:
    SpMat L_;
    double dt_;
    PropagateOptions opt_;
    Mat dense_;
};

// ---------------------------------------------------------------------------
// Fock-space truncation

struct TruncationProbe {
    std::vector<double> populations;     // cavity Fock populations
    std::vector<double> peak_positions;  // in whatever unit the tolerance is expressed
};

/// Smallest N >= start for which probe(N) and probe(N + 2) agree within tol
/// on every population and every peak position.
inline int adaptive_truncation(const std::function<TruncationProbe(int)>& probe, int start, double tolerance,
                               int n_max = 30) {
    require(tolerance > 0, ErrorKind::InvalidParameter, "truncation tolerance must be > 0");
    std::map<int, TruncationProbe> cache;
    auto get = [&](int n) -> const TruncationProbe& {
        auto it = cache.find(n);
        if (it == cache.end()) it = cache.emplace(n, probe(n)).first;
        return it->second;
    };
    auto close = [&](const TruncationProbe& a, const TruncationProbe& b) {
        const std::size_t np = std::max(a.populations.size(), b.populations.size());
        for (std::size_t i = 0; i < np; ++i) {
            const double pa = i < a.populations.size() ? a.populations[i] : 0.0;
            const double pb = i < b.populations.size() ? b.populations[i] : 0.0;
            if (std::abs(pa - pb) >= tolerance) return false;
        }
        if (a.peak_positions.size() != b.peak_positions.size()) return false;
        for (std::size_t i = 0; i < a.peak_positions.size(); ++i)
            if (std::abs(a.peak_positions[i] - b.peak_positions[i]) >= tolerance) return false;
        return true;
    };
    for (int n = std::max(start, 2); n + 2 <= n_max; ++n)
        if (close(get(n), get(n + 2))) return n;
    std::ostringstream msg;
    msg << "no Fock truncation <= " << n_max << " met tolerance " << tolerance;
    fail(ErrorKind::TruncationNotConverged, msg.str());
}

} // namespace nvbus
