// spectrum.hpp: steady-state cavity emission spectrum from the quantum
// regression theorem, a time-domain cross-check, the frozen-NV sector
// decomposition, and peak analysis.
//
// With G(tau) = Tr[A^dag e^{L tau} (A rho_ss)] for tau >= 0 and
// G(-tau) = conj G(tau), the two-sided transform folds to
//
//     S(w) = (1/pi) Re Tr[A^dag (i w - L)^{-1} (A rho_ss)],
//
// where A = a (full mode) or a - <a> (incoherent mode). Frequencies are
// angular and measured in the frame rotating at the drive.

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nvbus/liouvillian.hpp"
#include "nvbus/model.hpp"
#include "nvbus/parallel.hpp"

namespace nvbus {

enum class SpectrumMode { full, incoherent };

inline std::string_view to_string(SpectrumMode m) { return m == SpectrumMode::full ? "full" : "incoherent"; }

struct SteadyStateSummary {
    double residual{};
    double hermiticity_error{};
    double trace_error{};
    double min_eigenvalue{};
    int kernel_dim{1};
};

inline SteadyStateSummary summarize(const SteadyStateResult& r) {
    const auto& d = r.rho.diagnostics();
    return {r.residual, d.hermiticity_error, d.trace_error, d.min_eigenvalue, r.kernel_dim};
}

struct Spectrum {
    std::vector<double> omega;   // rad/s, relative to frame_offset
    std::vector<double> values;  // spectral density, s/rad
    double frame_offset{0.0};    // rad/s in the drive frame
    std::vector<std::pair<std::string, std::string>> metadata;
    std::size_t clipped{0};      // negative values clipped to zero
    double most_negative{0.0};
    std::vector<SteadyStateSummary> steady_states;

    std::vector<double> log10_values(double floor = -30.0) const {
        std::vector<double> out(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
            out[i] = values[i] > 0 ? std::max(floor, std::log10(values[i])) : floor;
        return out;
    }

    double step() const { return omega.size() > 1 ? (omega.back() - omega.front()) / (omega.size() - 1) : 0.0; }
};

inline std::vector<double> linear_grid(double lo, double hi, int points) {
    require(points >= 2 && hi > lo, ErrorKind::EmptyGrid, "grid needs >= 2 points and hi > lo");
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) g[i] = lo + (hi - lo) * i / (points - 1);
    return g;
}

inline std::vector<double> centered_grid(double center, double half_span, int points) {
    return linear_grid(center - half_span, center + half_span, points);
}

namespace detail {

inline void check_grid(std::span<const double> grid) {
    require(!grid.empty(), ErrorKind::EmptyGrid, "empty frequency grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        require(grid[i] > grid[i - 1], ErrorKind::InvalidParameter, "frequency grid must be strictly increasing");
}

/// left^H (i w - L)^{-1} right for every w in the grid, with right traceless.
///
/// The stationary direction is removed so that w = 0 is regular: on
/// traceless vectors (i w - L) agrees with (i w - L + c |rho><I|), which is
/// invertible whenever the kernel of L is one-dimensional. Small problems
/// reduce that deflated matrix to Hessenberg form once and solve each shifted
/// system in O(n^2); larger ones factor the equivalent bordered sparse system
/// per frequency.
class ResolventEvaluator {
public:
    static constexpr int hessenberg_limit = 1000;

    ResolventEvaluator(const SpMat& L, const Vec& left, const Vec& right, const Vec& rho)
        : n_(static_cast<int>(L.rows())) {
        scale_ = inf_norm(L);
        const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_))));
        if (n_ <= hessenberg_limit) {
            Mat dense(L);
            for (int i = 0; i < d; ++i) dense.col(i * (d + 1)) -= scale_ * rho;
            Eigen::HessenbergDecomposition<Mat> hd{dense};
            hess_ = hd.matrixH();
            const Mat q = hd.matrixQ();
            left_ = q.adjoint() * left;
            right_ = q.adjoint() * right;
        } else {
            left_ = left;
            right_ = right;
            std::vector<Eigen::Triplet<cplx>> trip;
            trip.reserve(L.nonZeros() + 2 * n_ + d);
            for (int i = 0; i < n_; ++i) trip.emplace_back(i, i, cplx{0.0, 0.0}); // keeps the diagonal in the pattern
            for (int k = 0; k < L.outerSize(); ++k)
                for (SpMat::InnerIterator it(L, k); it; ++it)
                    trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), -it.value());
            for (int i = 0; i < n_; ++i)
                if (rho(i) != cplx{0.0, 0.0}) trip.emplace_back(i, n_, rho(i));
            for (int i = 0; i < d; ++i) trip.emplace_back(n_, i * (d + 1), cplx{1.0, 0.0});
            bordered_.resize(n_ + 1, n_ + 1);
            bordered_.setFromTriplets(trip.begin(), trip.end());
            bordered_.makeCompressed();
        }
    }

    std::vector<cplx> evaluate(std::span<const double> grid, int threads) const {
        std::vector<cplx> out(grid.size());
        if (n_ <= hessenberg_limit) {
            parallel_for(grid.size(), threads, [&](std::size_t i) { out[i] = hessenberg_point(grid[i]); });
            return out;
        }
        const int workers = std::max(1, std::min<int>(threads, static_cast<int>(grid.size())));
        const std::size_t chunk = (grid.size() + workers - 1) / workers;
        Vec rhs = Vec::Zero(n_ + 1);
        rhs.head(n_) = right_;
        parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t w) {
            SpMat m = bordered_;
            Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
            lu.analyzePattern(m);
            for (std::size_t i = w * chunk; i < std::min(grid.size(), (w + 1) * chunk); ++i) {
                m = bordered_;
                for (int k = 0; k < n_; ++k) m.coeffRef(k, k) += cplx{0.0, grid[i]};
                lu.factorize(m);
                if (lu.info() != Eigen::Success)
                    fail(ErrorKind::SingularResolvent, "i w - L singular at w = " + std::to_string(grid[i]));
                const Vec y = lu.solve(rhs);
                out[i] = left_.dot(y.head(n_));
            }
        });
        return out;
    }

private:
    cplx hessenberg_point(double w) const {
        Mat m = -hess_;
        m.diagonal().array() += cplx{0.0, w};
        Vec b = right_;
        const int n = n_;
        const double tiny = 1e-14 * std::max(scale_, std::abs(w));
        for (int k = 0; k + 1 < n; ++k) {
            if (std::abs(m(k + 1, k)) > std::abs(m(k, k))) {
                m.row(k).tail(n - k).swap(m.row(k + 1).tail(n - k));
                std::swap(b(k), b(k + 1));
            }
            if (std::abs(m(k, k)) <= tiny)
                fail(ErrorKind::SingularResolvent, "i w - L singular at w = " + std::to_string(w));
            const cplx f = m(k + 1, k) / m(k, k);
            if (f != cplx{0.0, 0.0}) {
                m.row(k + 1).tail(n - k) -= f * m.row(k).tail(n - k);
                b(k + 1) -= f * b(k);
            }
        }
        if (std::abs(m(n - 1, n - 1)) <= tiny)
            fail(ErrorKind::SingularResolvent, "i w - L singular at w = " + std::to_string(w));
        for (int k = n - 1; k >= 0; --k) {
            cplx s = b(k);
            for (int j = k + 1; j < n; ++j) s -= m(k, j) * b(j);
            b(k) = s / m(k, k);
        }
        return left_.dot(b);
    }

    int n_;
    double scale_{};
    Mat hess_;
    SpMat bordered_;
    Vec left_, right_;
};

struct CorrelationVectors {
    Vec left;    // vec(A)
    Vec right;   // vec(A rho)
    cplx mean;   // <a>
};

inline CorrelationVectors correlation_vectors(const LabeledOperator& a_op, const Mat& rho, SpectrumMode mode) {
    require(a_op.dim() == rho.rows(), ErrorKind::LayoutMismatch, "operator and state dimensions differ");
    const cplx mean = (a_op.matrix() * rho).trace();
    Mat A = a_op.matrix();
    if (mode == SpectrumMode::incoherent) A -= mean * Mat::Identity(A.rows(), A.cols());
    return {vec(A), vec(Mat(A * rho)), mean};
}

inline void store_values(Spectrum& s, std::span<const double> grid, const std::vector<double>& raw,
                         double frame_offset) {
    s.frame_offset = frame_offset;
    s.omega.resize(grid.size());
    s.values.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        s.omega[i] = grid[i] - frame_offset;
        double v = raw[i];
        if (v < 0) {
            ++s.clipped;
            s.most_negative = std::min(s.most_negative, v);
            v = 0.0;
        }
        s.values[i] = v;
    }
}

} // namespace detail

/// Emission spectrum by resolvent solves on the drive-frame grid `omega_grid`.
/// The returned axis is omega_grid - frame_offset.
inline Spectrum spectrum_resolvent(const Superoperator& L, const LabeledOperator& a_op, const DensityMatrix& rho,
                                   std::span<const double> omega_grid, SpectrumMode mode = SpectrumMode::incoherent,
                                   double frame_offset = 0.0, int threads = 1) {
    detail::check_grid(omega_grid);
    require(a_op.layout() == L.layout && rho.layout() == L.layout, ErrorKind::LayoutMismatch,
            "spectrum inputs on different layouts");
    const auto cv = detail::correlation_vectors(a_op, rho.matrix(), mode);
    if (mode == SpectrumMode::full && std::abs(cv.mean) > 0) {
        const double scale = detail::inf_norm(L.matrix);
        for (double w : omega_grid)
            require(std::abs(w) > 1e-12 * scale, ErrorKind::SingularResolvent,
                    "full-mode spectrum has a coherent delta peak at w = 0 (drive frequency)");
    }
    // Only the traceless part of A rho has a regular resolvent; the rest is
    // |<a>|^2 / (i w), which has no real part away from w = 0.
    const Vec r = vec(rho.matrix());
    const Vec right = cv.right - (a_op.matrix() * rho.matrix()).trace() * r;
    detail::ResolventEvaluator ev(L.matrix, cv.left, right, r);
    const auto z = ev.evaluate(omega_grid, threads);
    std::vector<double> raw(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) raw[i] = z[i].real() / std::numbers::pi;

    Spectrum s;
    detail::store_values(s, omega_grid, raw, frame_offset);
    s.metadata = {{"method", "resolvent"}, {"mode", std::string(to_string(mode))},
                  {"superoperator_dim", std::to_string(L.dim())}};
    return s;
}

/// Same spectrum from the time domain: G(k dt) is propagated with exp(L dt),
/// the folded transform is summed directly on the requested grid, and the
/// trapezoid sum gets Euler-Maclaurin end corrections through dt^6.
inline Spectrum spectrum_fft_crosscheck(const Superoperator& L, const LabeledOperator& a_op, const DensityMatrix& rho,
                                        std::span<const double> omega_grid, double tmax, double dt,
                                        SpectrumMode mode = SpectrumMode::incoherent, double frame_offset = 0.0) {
    detail::check_grid(omega_grid);
    require(dt > 0 && tmax > dt, ErrorKind::InvalidParameter, "need 0 < dt < tmax");
    const auto cv = detail::correlation_vectors(a_op, rho.matrix(), mode);
    const auto steps = static_cast<std::size_t>(std::ceil(tmax / dt));
    StepPropagator prop(L, dt);

    std::vector<cplx> corr(steps + 1);
    Vec x = cv.right;
    corr[0] = cv.left.dot(x);
    for (std::size_t k = 1; k <= steps; ++k) {
        x = prop.step(x);
        corr[k] = cv.left.dot(x);
    }
    const double g0 = std::abs(corr[0]);
    require(g0 == 0.0 || std::abs(corr[steps]) <= 1e-3 * g0, ErrorKind::WindowTooShort,
            "|G(tmax)|/|G(0)| = " + std::to_string(std::abs(corr[steps]) / g0));

    // Euler-Maclaurin end corrections need f^(n)(0) for f = G(t) e^{-i w t};
    // G^(k)(0) = A^dag L^k (A rho).
    std::array<cplx, 6> moment;
    Vec y = cv.right;
    for (std::size_t k = 0; k < moment.size(); ++k) {
        moment[k] = cv.left.dot(y);
        y = L.matrix * y;
    }
    auto derivative = [&](int n, double w) {
        cplx acc{0.0, 0.0};
        double binom = 1.0;
        for (int j = 0; j <= n; ++j) {
            acc += binom * moment[j] * std::pow(cplx{0.0, -w}, n - j);
            binom = binom * (n - j) / (j + 1);
        }
        return acc;
    };

    std::vector<double> raw(omega_grid.size());
    for (std::size_t i = 0; i < omega_grid.size(); ++i) {
        const double w = omega_grid[i];
        const cplx z = std::exp(cplx{0.0, -w * dt});
        cplx acc = corr[steps];
        for (std::size_t k = steps; k-- > 1;) acc = acc * z + corr[k];
        acc *= z;
        cplx integral = dt * (0.5 * corr[0] + acc);
        integral += std::pow(dt, 2) / 12.0 * derivative(1, w) - std::pow(dt, 4) / 720.0 * derivative(3, w) +
                    std::pow(dt, 6) / 30240.0 * derivative(5, w);
        raw[i] = integral.real() / std::numbers::pi;
    }
    Spectrum s;
    detail::store_values(s, omega_grid, raw, frame_offset);
    s.metadata = {{"method", "time_domain"}, {"mode", std::string(to_string(mode))},
                  {"dt", std::to_string(dt)}, {"tmax", std::to_string(tmax)}};
    return s;
}

// ---------------------------------------------------------------------------
// model-level spectra

using SectorWeights = std::array<double, 3>; // m_s = +1, 0, -1

inline SectorWeights uniform_weights() { return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}; }

inline void validate_weights(const SectorWeights& w) {
    double sum = 0;
    for (double x : w) {
        require(x >= 0 && std::isfinite(x), ErrorKind::WeightsInvalid, "sector weights must be >= 0");
        sum += x;
    }
    require(std::abs(sum - 1.0) < 1e-9, ErrorKind::WeightsInvalid, "sector weights must sum to 1");
}

struct SpectrumRequest {
    std::vector<double> omega_grid;   // drive frame, rad/s
    double frame_offset{0.0};
    SpectrumMode mode{SpectrumMode::incoherent};
    int threads{1};
    SteadyStateOptions steady{};
};

/// Cavity+PCQ steady state and spectrum for the frozen NV sector S_z = m_s.
struct SectorSolution {
    SteadyStateResult steady;
    Spectrum spectrum;
};

inline SectorSolution solve_sector(const ModelParams& p, const DecoherenceRates& rates, int m_s,
                                   const SpectrumRequest& req) {
    const auto layout = SpaceLayout::cavity_pcq(p.N_fock);
    const auto H = build_sector_hamiltonian(p, m_s, layout);
    DecoherenceRates r = rates;
    r.gamma_nv = r.gamma_phi_nv = 0.0;
    const auto C = build_collapse_operators(r, layout);
    const auto L = build_liouvillian(H, C);
    auto ss = steady_state_report(L, req.steady);
    const auto a = embed(fock_annihilation(p.N_fock), Slot::cavity, layout);
    auto sp = spectrum_resolvent(L, a, ss.rho, req.omega_grid, req.mode, req.frame_offset, req.threads);
    return {std::move(ss), std::move(sp)};
}

/// Weighted sum of frozen-NV sector spectra. NV relaxation and dephasing do
/// not enter; each sector is an independent cavity+PCQ problem with qubit
/// detuning delta + eta * m_s.
inline Spectrum nv_sector_spectrum(const ModelParams& p, const DecoherenceRates& rates, const SectorWeights& weights,
                                   const SpectrumRequest& req) {
    validate_weights(weights);
    p.validate();
    require(!req.omega_grid.empty(), ErrorKind::EmptyGrid, "empty frequency grid");
    Spectrum total;
    constexpr std::array<int, 3> ms{+1, 0, -1};
    bool first = true;
    for (int k = 0; k < 3; ++k) {
        if (weights[k] == 0.0) continue;
        auto sol = solve_sector(p, rates, ms[k], req);
        if (first) {
            total = sol.spectrum;
            for (auto& v : total.values) v *= weights[k];
            first = false;
        } else {
            for (std::size_t i = 0; i < total.values.size(); ++i) total.values[i] += weights[k] * sol.spectrum.values[i];
            total.clipped += sol.spectrum.clipped;
            total.most_negative = std::min(total.most_negative, sol.spectrum.most_negative);
        }
        total.steady_states.push_back(summarize(sol.steady));
    }
    total.metadata = {{"method", "resolvent"},
                      {"nv_mode", "sector"},
                      {"mode", std::string(to_string(req.mode))},
                      {"weights", std::to_string(weights[0]) + " " + std::to_string(weights[1]) + " " +
                                      std::to_string(weights[2])}};
    return total;
}

/// Spectrum of the full cavity x PCQ x NV master equation with all five
/// collapse channels.
inline Spectrum full_space_spectrum(const ModelParams& p, const DecoherenceRates& rates, NvRelaxation relax,
                                    const SpectrumRequest& req, std::optional<SteadyStateResult>* steady_out = nullptr) {
    const auto layout = SpaceLayout::full(p.N_fock);
    const auto H = build_interaction_hamiltonian(p, layout);
    const auto C = build_collapse_operators(rates, layout, relax);
    const auto L = build_liouvillian(H, C);
    auto ss = steady_state_report(L, req.steady);
    const auto a = embed(fock_annihilation(p.N_fock), Slot::cavity, layout);
    auto s = spectrum_resolvent(L, a, ss.rho, req.omega_grid, req.mode, req.frame_offset, req.threads);
    s.steady_states.push_back(summarize(ss));
    s.metadata.emplace_back("nv_mode", "full");
    s.metadata.emplace_back("nv_relaxation", std::string(to_string(relax)));
    if (steady_out) steady_out->emplace(std::move(ss));
    return s;
}

// ---------------------------------------------------------------------------
// peaks

struct Peak {
    double position{};  // rad/s on the spectrum axis
    double height{};
    double fwhm{};      // rad/s
};

struct PeakReport {
    std::vector<Peak> peaks;
    bool resolved{false};
    double dip_depth{0.0};  // largest 1 - valley / lower-peak over adjacent pairs
};

struct PeakOptions {
    double noise_floor{1e-6};      // relative to the global maximum
    double min_prominence{1e-6};   // relative dip below which neighbouring maxima merge
    int min_points_per_width{8};
};

namespace detail {

inline double half_width_side(const Spectrum& s, std::size_t i, double half, int dir) {
    const auto n = static_cast<std::ptrdiff_t>(s.values.size());
    std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i);
    while (j + dir >= 0 && j + dir < n && s.values[j + dir] > half) j += dir;
    if (j + dir < 0 || j + dir >= n) return std::abs(s.omega[j] - s.omega[i]);
    const double v0 = s.values[j], v1 = s.values[j + dir];
    const double frac = (v0 - half) / (v0 - v1);
    const double w = s.omega[j] + frac * (s.omega[j + dir] - s.omega[j]);
    return std::abs(w - s.omega[i]);
}

/// Abscissa of the parabola through the maximum and its two neighbours.
inline double vertex(const Spectrum& s, std::size_t i) {
    const double x0 = s.omega[i - 1], x1 = s.omega[i], x2 = s.omega[i + 1];
    const double y0 = s.values[i - 1], y1 = s.values[i], y2 = s.values[i + 1];
    const double d0 = (y1 - y0) / (x1 - x0), d1 = (y2 - y1) / (x2 - x1);
    const double curv = (d1 - d0) / (x2 - x0);
    if (!(curv < 0)) return x1;
    const double x = 0.5 * (x0 + x1) - d0 / (2 * curv);
    return std::clamp(x, x0, x2);
}

} // namespace detail

inline PeakReport find_peaks(const Spectrum& s, double dip_fraction, const PeakOptions& opt = {}) {
    PeakReport rep;
    const std::size_t n = s.values.size();
    if (n < 3) return rep;
    const double top = *std::max_element(s.values.begin(), s.values.end());
    if (!(top > 0)) return rep;

    std::vector<std::size_t> idx;
    for (std::size_t i = 1; i + 1 < n; ++i)
        if (s.values[i] > opt.noise_floor * top && s.values[i] > s.values[i - 1] && s.values[i] >= s.values[i + 1])
            idx.push_back(i);

    auto valley = [&](std::size_t a, std::size_t b) {
        return *std::min_element(s.values.begin() + a, s.values.begin() + b + 1);
    };
    for (bool merged = true; merged && idx.size() > 1;) {
        merged = false;
        for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
            const double lo = std::min(s.values[idx[k]], s.values[idx[k + 1]]);
            if (lo - valley(idx[k], idx[k + 1]) < opt.min_prominence * lo) {
                idx.erase(idx.begin() + (s.values[idx[k]] < s.values[idx[k + 1]] ? k : k + 1));
                merged = true;
                break;
            }
        }
    }

    for (std::size_t i : idx) {
        const double h = s.values[i];
        const double w = detail::half_width_side(s, i, 0.5 * h, -1) + detail::half_width_side(s, i, 0.5 * h, +1);
        const double step = std::abs(s.omega[i + 1] - s.omega[i - 1]) / 2;
        require(w >= opt.min_points_per_width * step, ErrorKind::GridTooCoarse,
                "peak at " + std::to_string(s.omega[i]) + " spans fewer than " +
                    std::to_string(opt.min_points_per_width) + " grid points");
        rep.peaks.push_back({detail::vertex(s, i), h, w});
    }
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
        const double lo = std::min(s.values[idx[k]], s.values[idx[k + 1]]);
        rep.dip_depth = std::max(rep.dip_depth, 1.0 - valley(idx[k], idx[k + 1]) / lo);
    }
    rep.resolved = rep.peaks.size() >= 2 && rep.dip_depth >= dip_fraction;
    return rep;
}

struct LorentzianFit {
    double center{};
    double fwhm{};
    double amplitude{};
};

/// Fits A / (1 + ((w - w0) / hw)^2) around the global maximum. The reciprocal
/// of a Lorentzian is a parabola, so the fit is a weighted linear least
/// squares on points above a fraction of the peak.
inline LorentzianFit fit_lorentzian(const Spectrum& s, double min_fraction = 0.2) {
    const auto it = std::max_element(s.values.begin(), s.values.end());
    require(it != s.values.end() && *it > 0, ErrorKind::InvalidParameter, "no peak to fit");
    const double top = *it;
    const double w_ref = s.omega[static_cast<std::size_t>(it - s.values.begin())];
    std::vector<std::size_t> pts;
    for (std::size_t i = 0; i < s.values.size(); ++i)
        if (s.values[i] >= min_fraction * top) pts.push_back(i);
    require(pts.size() >= 3, ErrorKind::GridTooCoarse, "too few points above the fit threshold");

    Eigen::MatrixXd A(pts.size(), 3);
    Eigen::VectorXd b(pts.size());
    for (std::size_t r = 0; r < pts.size(); ++r) {
        const double x = s.omega[pts[r]] - w_ref;
        const double v = s.values[pts[r]];
        const double wgt = v * v; // de-weights the noisy wings of 1/v
        A(r, 0) = wgt;
        A(r, 1) = wgt * x;
        A(r, 2) = wgt * x * x;
        b(r) = wgt / v;
    }
    const Eigen::Vector3d c = A.colPivHouseholderQr().solve(b);
    require(c(2) > 0, ErrorKind::NonConvergence, "Lorentzian fit failed (non-convex reciprocal)");
    const double x0 = -c(1) / (2 * c(2));
    const double inv_a = c(0) - c(2) * x0 * x0;
    require(inv_a > 0, ErrorKind::NonConvergence, "Lorentzian fit failed (negative amplitude)");
    const double amp = 1.0 / inv_a;
    const double hw = std::sqrt(1.0 / (amp * c(2)));
    return {w_ref + x0, 2 * hw, amp};
}

} // namespace nvbus
