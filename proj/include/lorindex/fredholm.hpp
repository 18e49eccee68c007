#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "lorindex/common.hpp"
#include "lorindex/evolution.hpp"

namespace lorindex {

// Numerical kernel of a matrix by singular-value thresholding. The rank
// decision is only trusted when accepted and rejected singular values are
// separated by two decades.
struct NumericalKernel {
    rvec singular_values;  // descending
    int accepted_rank = 0;
    cxmat kernel_basis;    // orthonormal columns spanning the numerical kernel
    double gap_ratio = std::numeric_limits<double>::infinity();

    int dim() const { return static_cast<int>(kernel_basis.cols()); }
};

inline NumericalKernel numeric_kernel(const cxmat& m, double tol) {
    if (!(tol > 0.0)) throw config_error("numeric_kernel: tol must be positive");
    if (!m.allFinite()) throw config_error("numeric_kernel: matrix has non-finite entries");
    NumericalKernel out;
    const Eigen::Index cols = m.cols();
    if (m.rows() == 0 || cols == 0 || m.cwiseAbs().maxCoeff() == 0.0) {
        // zero (or empty) matrix: the kernel is the whole domain
        out.singular_values = rvec::Zero(std::min(m.rows(), cols));
        out.accepted_rank = 0;
        out.kernel_basis = cxmat::Identity(cols, cols);
        return out;
    }
    Eigen::BDCSVD<cxmat> svd(m, Eigen::ComputeFullV);
    out.singular_values = svd.singularValues();
    const double smax = out.singular_values(0);
    const double threshold = tol * smax;
    int r = 0;
    while (r < out.singular_values.size() && out.singular_values(r) >= threshold) ++r;
    out.accepted_rank = r;
    if (r < out.singular_values.size()) {
        const double rejected = out.singular_values(r);
        const double accepted = r > 0 ? out.singular_values(r - 1) : smax;
        out.gap_ratio = rejected > 0.0 ? accepted / rejected
                                       : std::numeric_limits<double>::infinity();
        if (out.gap_ratio < 100.0) {
            std::ostringstream os;
            os << "ill-conditioned rank decision: smallest accepted sigma = " << accepted
               << ", largest rejected sigma = " << rejected << " (gap ratio "
               << out.gap_ratio << " < 100)";
            throw numerical_error(os.str());
        }
    }
    out.kernel_basis = svd.matrixV().rightCols(cols - r);
    return out;
}

// Fredholm data of the lower-right block: kernel from Qmm, cokernel from the
// kernel of the adjoint.
struct IndexResult {
    int dim_ker = 0;
    int dim_coker = 0;
    int index = 0;
    double tol = kDefaultKernelTol;
    double gap_ker = std::numeric_limits<double>::infinity();
    double gap_coker = std::numeric_limits<double>::infinity();
};

inline IndexResult index_of_block(const BlockDecomposition& b, double tol) {
    const NumericalKernel ker = numeric_kernel(b.Qmm, tol);
    const NumericalKernel coker = numeric_kernel(b.Qmm.adjoint(), tol);
    IndexResult r;
    r.dim_ker = ker.dim();
    r.dim_coker = coker.dim();
    r.index = r.dim_ker - r.dim_coker;
    r.tol = tol;
    r.gap_ker = ker.gap_ratio;
    r.gap_coker = coker.gap_ratio;
    return r;
}

// For every v in ker(Qmm), Qpm restricts to an isometry onto ker(Qpp*):
// Qpm* Qpm v = v, and the two kernels have equal dimension.
struct KernelIsomorphismReport {
    double residual = 0.0;
    int dim_ker_qmm = 0;
    int dim_ker_qpp_adj = 0;
    int dim_mismatch() const { return std::abs(dim_ker_qmm - dim_ker_qpp_adj); }
};

inline KernelIsomorphismReport kernel_isomorphism_check(const BlockDecomposition& b,
                                                        double tol) {
    KernelIsomorphismReport rep;
    const NumericalKernel ker = numeric_kernel(b.Qmm, tol);
    const NumericalKernel adj = numeric_kernel(b.Qpp.adjoint(), tol);
    rep.dim_ker_qmm = ker.dim();
    rep.dim_ker_qpp_adj = adj.dim();
    for (Eigen::Index j = 0; j < ker.kernel_basis.cols(); ++j) {
        const cxvec v = ker.kernel_basis.col(j);
        rep.residual = std::max(rep.residual,
                                (b.Qpm.adjoint() * (b.Qpm * v) - v).norm());
    }
    return rep;
}

// Log-log decay data with a least-squares slope fitted over the upper half
// of the frequency window. Values below the floor count as exact zeros.
struct DecayTable {
    std::vector<double> frequency;
    std::vector<double> value;
    double slope = 0.0;
    bool empty = false;  // nothing above the floor in the fit window
};

namespace detail {

inline DecayTable fit_upper_half(std::vector<double> freq, std::vector<double> val,
                                 double floor) {
    DecayTable t;
    t.frequency = std::move(freq);
    t.value = std::move(val);
    if (t.frequency.empty()) {
        t.empty = true;
        return t;
    }
    double fmin = t.frequency.front(), fmax = t.frequency.front();
    for (double f : t.frequency) {
        fmin = std::min(fmin, f);
        fmax = std::max(fmax, f);
    }
    const double cut = 0.5 * (fmin + fmax);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (size_t i = 0; i < t.frequency.size(); ++i) {
        if (t.frequency[i] < cut || t.frequency[i] <= 0.0) continue;
        if (t.value[i] <= floor) continue;
        const double x = std::log(t.frequency[i]);
        const double y = std::log(t.value[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 3) {
        t.empty = true;
        t.slope = -std::numeric_limits<double>::infinity();
        return t;
    }
    t.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return t;
}

}  // namespace detail

// Column norms of Qpm against the source frequency |eigenvalue at t1| of the
// strictly-negative subspace. The off-diagonal block gains one order of
// smoothing, so the fitted slope is expected at or below -1 up to
// model-specific structure in the low modes.
inline DecayTable smoothing_profile(const BlockDecomposition& b) {
    std::vector<double> freq, val;
    double peak = 0.0;
    for (Eigen::Index j = 0; j < b.Qpm.cols(); ++j) {
        freq.push_back(std::abs(b.f1m(j)));
        val.push_back(b.Qpm.col(j).norm());
        peak = std::max(peak, val.back());
    }
    return detail::fit_upper_half(std::move(freq), std::move(val),
                                  std::max(1e-13, 1e-13 * peak));
}

// Decay exponent p of |coefficient| ~ f^{-p} for kernel vectors expressed in
// the boundary eigenbasis. Coefficients that vanish identically at high
// frequency report +infinity.
struct SmoothnessReport {
    double exponent = 0.0;
    bool smooth = false;  // exponent >= bar
};

inline SmoothnessReport kernel_smoothness_check(const cxmat& kernel_basis,
                                                const rvec& frequencies,
                                                double bar = 4.0) {
    if (kernel_basis.cols() == 0) throw numerical_error("vacuous: empty kernel");
    if (kernel_basis.rows() != frequencies.size())
        throw config_error("kernel basis and frequency labels disagree");
    SmoothnessReport rep;
    rep.exponent = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < kernel_basis.cols(); ++j) {
        const double peak = kernel_basis.col(j).cwiseAbs().maxCoeff();
        std::vector<double> freq, val;
        for (Eigen::Index i = 0; i < frequencies.size(); ++i) {
            freq.push_back(std::abs(frequencies(i)));
            val.push_back(std::abs(kernel_basis(i, j)));
        }
        DecayTable t = detail::fit_upper_half(std::move(freq), std::move(val),
                                              std::max(1e-14, 1e-12 * peak));
        const double p = t.empty ? std::numeric_limits<double>::infinity() : -t.slope;
        rep.exponent = std::min(rep.exponent, p);
    }
    rep.smooth = rep.exponent >= bar;
    return rep;
}

}  // namespace lorindex
