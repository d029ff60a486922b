// operators.hpp: elementary operators of the cavity / PCQ / NV factors and
// their embedding into the composite space.
//
// Basis conventions (fixed everywhere):
//   cavity : Fock states |0>, |1>, ..., |N-1>
//   pcq    : (excited, ground), so sigma_z = diag(+1, -1) and sigma_- de-excites
//   nv     : (m_s = +1, 0, -1)
// Factors are always ordered cavity, pcq, nv in Kronecker products; a layout
// may omit factors (e.g. the cavity+pcq sector problems).

#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>

#include "nvbus/errors.hpp"

namespace nvbus {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using SpMat = Eigen::SparseMatrix<cplx>;

inline constexpr cplx I_unit{0.0, 1.0};

enum class Slot { cavity = 0, pcq = 1, nv = 2 };

constexpr std::string_view to_string(Slot s) {
    switch (s) {
    case Slot::cavity: return "cavity";
    case Slot::pcq: return "pcq";
    case Slot::nv: return "nv";
    }
    return "?";
}

class SpaceLayout {
public:
    struct Factor {
        Slot slot;
        int dim;
        friend bool operator==(const Factor&, const Factor&) = default;
    };

    SpaceLayout() = default;

    explicit SpaceLayout(std::vector<Factor> factors) : factors_(std::move(factors)) {
        require(!factors_.empty(), ErrorKind::LayoutMismatch, "layout needs at least one factor");
        for (std::size_t i = 0; i < factors_.size(); ++i) {
            const auto& f = factors_[i];
            if (i > 0)
                require(static_cast<int>(factors_[i - 1].slot) < static_cast<int>(f.slot),
                        ErrorKind::LayoutMismatch, "layout order must be cavity, pcq, nv");
            switch (f.slot) {
            case Slot::cavity:
                require(f.dim >= 2, ErrorKind::DimensionTooSmall, "N_fock must be >= 2");
                break;
            case Slot::pcq:
                require(f.dim == 2, ErrorKind::LayoutMismatch, "pcq factor has dimension 2");
                break;
            case Slot::nv:
                require(f.dim == 3, ErrorKind::LayoutMismatch, "nv factor has dimension 3");
                break;
            }
        }
    }

    static SpaceLayout full(int n_fock) {
        return SpaceLayout({{Slot::cavity, n_fock}, {Slot::pcq, 2}, {Slot::nv, 3}});
    }
    static SpaceLayout cavity_pcq(int n_fock) {
        return SpaceLayout({{Slot::cavity, n_fock}, {Slot::pcq, 2}});
    }
    static SpaceLayout cavity_only(int n_fock) { return SpaceLayout({{Slot::cavity, n_fock}}); }
    static SpaceLayout pcq_only() { return SpaceLayout({{Slot::pcq, 2}}); }
    static SpaceLayout nv_only() { return SpaceLayout({{Slot::nv, 3}}); }

    const std::vector<Factor>& factors() const { return factors_; }
    std::size_t size() const { return factors_.size(); }

    bool has(Slot s) const {
        return std::any_of(factors_.begin(), factors_.end(), [s](const Factor& f) { return f.slot == s; });
    }
    std::size_t index_of(Slot s) const {
        for (std::size_t i = 0; i < factors_.size(); ++i)
            if (factors_[i].slot == s) return i;
        fail(ErrorKind::SlotMismatch, "layout has no " + std::string(to_string(s)) + " factor");
    }
    int dim_of(Slot s) const { return factors_[index_of(s)].dim; }
    int total() const {
        return std::accumulate(factors_.begin(), factors_.end(), 1,
                               [](int acc, const Factor& f) { return acc * f.dim; });
    }

    friend bool operator==(const SpaceLayout&, const SpaceLayout&) = default;

private:
    std::vector<Factor> factors_;
};

inline double hermiticity_error(const Mat& m) {
    if (m.size() == 0) return 0.0;
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

class LabeledOperator {
public:
    LabeledOperator(Mat matrix, SpaceLayout layout, bool hermitian_hint = false)
        : matrix_(std::move(matrix)), layout_(std::move(layout)), hermitian_(hermitian_hint) {
        require(matrix_.rows() == layout_.total() && matrix_.cols() == layout_.total(),
                ErrorKind::LayoutMismatch,
                "operator dimension " + std::to_string(matrix_.rows()) + " does not match layout " +
                    std::to_string(layout_.total()));
        if (hermitian_)
            require(hermiticity_error(matrix_) < 1e-12 * std::max(1.0, matrix_.cwiseAbs().maxCoeff()),
                    ErrorKind::NotHermitian, "operator flagged Hermitian is not");
    }

    const Mat& matrix() const { return matrix_; }
    const SpaceLayout& layout() const { return layout_; }
    bool hermitian_hint() const { return hermitian_; }
    int dim() const { return static_cast<int>(matrix_.rows()); }

private:
    Mat matrix_;
    SpaceLayout layout_;
    bool hermitian_;
};

struct DensityTolerances {
    double hermitian{1e-10};
    double trace{1e-10};
    double min_eigenvalue{-1e-8};
};

struct DensityDiagnostics {
    double hermiticity_error{};
    double trace_error{};
    double min_eigenvalue{};
};

inline DensityDiagnostics diagnose_density(const Mat& rho) {
    DensityDiagnostics d;
    d.hermiticity_error = hermiticity_error(rho);
    d.trace_error = std::abs(rho.trace() - cplx{1.0, 0.0});
    const Mat herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(herm, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = es.eigenvalues().minCoeff();
    return d;
}

class DensityMatrix {
public:
    DensityMatrix(Mat matrix, SpaceLayout layout, DensityTolerances tol = {})
        : matrix_(std::move(matrix)), layout_(std::move(layout)) {
        require(matrix_.rows() == layout_.total() && matrix_.cols() == layout_.total(),
                ErrorKind::LayoutMismatch, "density matrix does not match layout");
        diag_ = diagnose_density(matrix_);
        require(diag_.hermiticity_error < tol.hermitian, ErrorKind::InvalidState,
                "density matrix not Hermitian (" + std::to_string(diag_.hermiticity_error) + ")");
        require(diag_.trace_error < tol.trace, ErrorKind::InvalidState,
                "density matrix trace != 1 (" + std::to_string(diag_.trace_error) + ")");
        require(diag_.min_eigenvalue > tol.min_eigenvalue, ErrorKind::InvalidState,
                "density matrix not positive (" + std::to_string(diag_.min_eigenvalue) + ")");
    }

    const Mat& matrix() const { return matrix_; }
    const SpaceLayout& layout() const { return layout_; }
    const DensityDiagnostics& diagnostics() const { return diag_; }

private:
    Mat matrix_;
    SpaceLayout layout_;
    DensityDiagnostics diag_;
};

// ---------------------------------------------------------------------------
// single-factor operators

inline Mat fock_annihilation(int n) {
    require(n >= 2, ErrorKind::DimensionTooSmall, "Fock truncation must be >= 2");
    Mat a = Mat::Zero(n, n);
    for (int k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    return a;
}

struct LadderSet {
    Mat z;
    Mat plus;
    Mat minus;
};

inline LadderSet pauli_operators() {
    LadderSet p;
    p.z = Mat::Zero(2, 2);
    p.z(0, 0) = 1.0;
    p.z(1, 1) = -1.0;
    p.plus = Mat::Zero(2, 2);
    p.plus(0, 1) = 1.0; // |e><g|
    p.minus = p.plus.adjoint();
    return p;
}

inline LadderSet spin1_operators() {
    LadderSet s;
    s.z = Mat::Zero(3, 3);
    s.z(0, 0) = 1.0;
    s.z(2, 2) = -1.0;
    s.plus = Mat::Zero(3, 3);
    s.plus(0, 1) = std::sqrt(2.0); // |+1><0|
    s.plus(1, 2) = std::sqrt(2.0); // |0><-1|
    s.minus = s.plus.adjoint();
    return s;
}

// ---------------------------------------------------------------------------
// composite-space utilities

inline Mat kron(const Mat& a, const Mat& b) { return Eigen::kroneckerProduct(a, b).eval(); }

inline LabeledOperator embed(const Mat& op, Slot slot, const SpaceLayout& layout,
                             bool hermitian_hint = false) {
    const std::size_t idx = layout.index_of(slot);
    require(op.rows() == layout.factors()[idx].dim && op.cols() == op.rows(), ErrorKind::SlotMismatch,
            "operator of dimension " + std::to_string(op.rows()) + " cannot act on slot " +
                std::string(to_string(slot)));
    Mat out = Mat::Identity(1, 1);
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const int d = layout.factors()[i].dim;
        out = kron(out, i == idx ? op : Mat::Identity(d, d));
    }
    return LabeledOperator(std::move(out), layout, hermitian_hint);
}

inline Mat dagger(const Mat& m) { return m.adjoint(); }

inline Mat commutator(const Mat& a, const Mat& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::DimensionMismatch,
            "commutator of mismatched operators");
    return a * b - b * a;
}

inline Mat anticommutator(const Mat& a, const Mat& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::DimensionMismatch,
            "anticommutator of mismatched operators");
    return a * b + b * a;
}

inline LabeledOperator operator+(const LabeledOperator& a, const LabeledOperator& b) {
    require(a.layout() == b.layout(), ErrorKind::DimensionMismatch, "sum of operators on different layouts");
    return LabeledOperator(a.matrix() + b.matrix(), a.layout(), a.hermitian_hint() && b.hermitian_hint());
}

inline LabeledOperator operator*(const LabeledOperator& a, const LabeledOperator& b) {
    require(a.layout() == b.layout(), ErrorKind::DimensionMismatch,
            "product of operators on different layouts");
    return LabeledOperator(a.matrix() * b.matrix(), a.layout());
}

inline LabeledOperator scale(const LabeledOperator& a, cplx s) {
    return LabeledOperator(s * a.matrix(), a.layout(), a.hermitian_hint() && s.imag() == 0.0);
}

inline cplx trace(const Mat& m) { return m.trace(); }

/// Trace out every factor not listed in keep. The result is ordered as the
/// kept factors appear in the layout.
inline Mat partial_trace(const Mat& op, const SpaceLayout& layout, std::span<const Slot> keep) {
    require(op.rows() == layout.total() && op.cols() == layout.total(), ErrorKind::DimensionMismatch,
            "partial_trace: operator does not match layout");
    const std::size_t nf = layout.size();
    std::vector<int> dims(nf);
    std::vector<bool> kept(nf, false);
    for (std::size_t i = 0; i < nf; ++i) dims[i] = layout.factors()[i].dim;
    for (Slot s : keep) kept[layout.index_of(s)] = true;

    int kdim = 1;
    for (std::size_t i = 0; i < nf; ++i)
        if (kept[i]) kdim *= dims[i];

    // Split a composite index into its kept/traced parts (row-major factor order).
    auto split = [&](int index, int& kept_index, int& traced_index) {
        std::vector<int> digits(nf);
        for (std::size_t i = nf; i-- > 0;) {
            digits[i] = index % dims[i];
            index /= dims[i];
        }
        kept_index = 0;
        traced_index = 0;
        for (std::size_t i = 0; i < nf; ++i) {
            if (kept[i]) kept_index = kept_index * dims[i] + digits[i];
            else traced_index = traced_index * dims[i] + digits[i];
        }
    };

    const int n = layout.total();
    std::vector<int> kept_of(n), traced_of(n);
    for (int i = 0; i < n; ++i) split(i, kept_of[i], traced_of[i]);

    Mat out = Mat::Zero(kdim, kdim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (traced_of[i] == traced_of[j]) out(kept_of[i], kept_of[j]) += op(i, j);
    return out;
}

inline Mat partial_trace(const Mat& op, const SpaceLayout& layout, std::initializer_list<Slot> keep) {
    return partial_trace(op, layout, std::span<const Slot>(keep.begin(), keep.size()));
}

} // namespace nvbus
