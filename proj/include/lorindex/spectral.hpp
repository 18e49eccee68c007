#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lorindex/common.hpp"
#include "lorindex/interval.hpp"

namespace lorindex {

// Dense Hermitian matrix in a fixed truncated mode basis.
struct HermitianMatrix {
    cxmat entries;
    std::string basis_tag;

    int dim() const { return static_cast<int>(entries.rows()); }

    // Validates Hermiticity to 1e-12 relative to the largest entry.
    static HermitianMatrix checked(cxmat m, std::string tag = {}) {
        if (m.rows() != m.cols()) throw config_error("hermitian matrix must be square");
        const double scale = m.cwiseAbs().maxCoeff();
        const double dev = (m - m.adjoint().eval()).cwiseAbs().maxCoeff();
        if (scale > 0.0 && dev > 1e-12 * scale) {
            std::ostringstream os;
            os << "not Hermitian within tolerance: max |H - H*| = " << dev
               << ", max |entry| = " << scale;
            throw numerical_error(os.str());
        }
        HermitianMatrix h;
        h.entries = 0.5 * (m + m.adjoint().eval());
        h.basis_tag = std::move(tag);
        return h;
    }
};

// Eigendecomposition with ascending eigenvalues and deterministically
// phase-fixed eigenvector columns.
struct SpectrumList {
    rvec eigenvalues;   // ascending
    cxmat eigenvectors; // column j pairs with eigenvalues(j)
    double kernel_tol = kDefaultKernelTol;
};

namespace detail {

// Fix each column's phase so its first component of non-negligible modulus
// is real and positive. Makes block matrices reproducible across runs.
inline void fix_phases(cxmat& v) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            const double a = std::abs(v(i, j));
            if (a > 1e-9) {
                v.col(j) *= std::conj(v(i, j)) / a;
                break;
            }
        }
    }
}

inline bool is_numerically_diagonal(const cxmat& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (i != j && std::abs(m(i, j)) > 1e-15 * scale) return false;
    return true;
}

}  // namespace detail

inline SpectrumList eigendecompose(const HermitianMatrix& h,
                                   double kernel_tol = kDefaultKernelTol) {
    SpectrumList out;
    out.kernel_tol = kernel_tol;
    const Eigen::Index n = h.entries.rows();

    if (detail::is_numerically_diagonal(h.entries)) {
        // Sorting a diagonal matrix; avoids the O(n^3) solver on the
        // exactly solvable families.
        std::vector<Eigen::Index> idx(static_cast<size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
            return h.entries(a, a).real() < h.entries(b, b).real();
        });
        out.eigenvalues.resize(n);
        out.eigenvectors = cxmat::Zero(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            out.eigenvalues(j) = h.entries(idx[static_cast<size_t>(j)],
                                           idx[static_cast<size_t>(j)]).real();
            out.eigenvectors(idx[static_cast<size_t>(j)], j) = 1.0;
        }
        return out;
    }

    Eigen::SelfAdjointEigenSolver<cxmat> es(h.entries);
    if (es.info() != Eigen::Success) throw numerical_error("eigendecomposition failed");
    out.eigenvalues = es.eigenvalues();
    out.eigenvectors = es.eigenvectors();
    detail::fix_phases(out.eigenvectors);

    const double unit = (out.eigenvectors.adjoint() * out.eigenvectors -
                         cxmat::Identity(n, n)).cwiseAbs().maxCoeff();
    if (unit > 1e-10) throw numerical_error("eigenvector basis not unitary to 1e-10");
    const double scale = std::max(1.0, h.entries.cwiseAbs().maxCoeff());
    const double rec = (out.eigenvectors * out.eigenvalues.asDiagonal() *
                            out.eigenvectors.adjoint() - h.entries).cwiseAbs().maxCoeff();
    if (rec > 1e-10 * scale) throw numerical_error("spectral reconstruction residual above 1e-10");
    return out;
}

// Orthogonal projector onto the eigenspaces with eigenvalue in I, under the
// tolerance-based endpoint rule of IntervalSpec.
inline HermitianMatrix spectral_projector(const SpectrumList& spec, const IntervalSpec& I,
                                          double tol) {
    const Eigen::Index n = spec.eigenvalues.size();
    cxmat p = cxmat::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (I.contains(spec.eigenvalues(j), tol))
            p += spec.eigenvectors.col(j) * spec.eigenvectors.col(j).adjoint();
    }
    HermitianMatrix out;
    out.entries = 0.5 * (p + p.adjoint().eval());
    out.basis_tag = "projector";
    return out;
}

namespace detail {

// Two-decade gap rule at zero: eigenvalues with tol < |l| < 100*tol make the
// kernel count untrustworthy.
inline void enforce_kernel_gap(double abs_lambda, double tol) {
    if (abs_lambda > tol && abs_lambda < 100.0 * tol) {
        std::ostringstream os;
        os << "ill-conditioned kernel: |eigenvalue| = " << abs_lambda
           << " lies inside the gap window (tol, 100*tol), tol = " << tol;
        throw numerical_error(os.str());
    }
}

}  // namespace detail

inline int kernel_dim(const SpectrumList& spec, double tol) {
    int h = 0;
    for (Eigen::Index j = 0; j < spec.eigenvalues.size(); ++j) {
        const double a = std::abs(spec.eigenvalues(j));
        detail::enforce_kernel_gap(a, tol);
        if (a <= tol) ++h;
    }
    return h;
}

// The spectrum { m + offset : m integer }, all multiplicities 1. Closed-form
// data for the circle with flux; its invariants never require truncation.
struct LatticeSpectrum {
    double offset = 0.0;

    // distance of the spectrum to 0
    double min_abs() const {
        const double f = offset - std::floor(offset);
        return std::min(f, 1.0 - f);
    }
};

inline int kernel_dim(const LatticeSpectrum& lat, double tol) {
    const double a = lat.min_abs();
    detail::enforce_kernel_gap(a, tol);
    return a <= tol ? 1 : 0;
}

// eta invariant of the lattice spectrum Z + c:
//   0            when c is an integer (symmetric spectrum, zero mode excluded),
//   1 - 2*frac(c) otherwise.
// Offsets within tol of an integer are snapped to the integer case so that
// (h, eta) stay a consistent pair.
inline double eta_lattice(double c, double tol = 1e-9) {
    const double f = c - std::floor(c);
    if (f <= tol || 1.0 - f <= tol) return 0.0;
    return 1.0 - 2.0 * f;
}

// xi(A) = (h(A) + eta(A)) / 2
inline double xi(int h, double eta) {
    if (h < 0) throw config_error("xi: kernel dimension must be nonnegative");
    return 0.5 * (static_cast<double>(h) + eta);
}

}  // namespace lorindex
