#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "lorindex/common.hpp"
#include "lorindex/models.hpp"
#include "lorindex/spectral.hpp"

namespace lorindex {

// Discretization of the evolution d/dt u = i A(t) u.
struct EvolutionConfig {
    enum class Method { cf4, rk4 };
    Method method = Method::cf4;
    int step_count = 0;          // 0: derived from the smoothness budget
    double adaptive_tol = 0.0;   // > 0: step-doubling control instead of fixed steps
    double unitarity_threshold = 1e-8;
};

namespace detail {

inline int auto_steps(const OperatorFamily& fam, double span) {
    const double scale = std::max(1.0, fam.smoothness_budget);
    const int n = static_cast<int>(std::ceil(std::abs(span) * 96.0 * scale));
    return std::clamp(n, 192, 16384);
}

// exp(i H) for Hermitian H
inline cxmat unitary_exp(const cxmat& h) {
    Eigen::SelfAdjointEigenSolver<cxmat> es(h);
    if (es.info() != Eigen::Success) throw numerical_error("matrix exponential failed");
    cxvec phases(es.eigenvalues().size());
    for (Eigen::Index j = 0; j < phases.size(); ++j)
        phases(j) = std::exp(cx(0.0, es.eigenvalues()(j)));
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

// Fourth-order commutator-free step over [t, t+h]: two exponentials built
// from the Gauss-Legendre nodes, the first applied factor weighting the
// earlier node.
struct Cf4Step {
    static constexpr double kNodeOffset = 0.28867513459481287;  // sqrt(3)/6
    static constexpr double kW1 = 0.25 + kNodeOffset;
    static constexpr double kW2 = 0.25 - kNodeOffset;

    static cxmat dense(const OperatorFamily& fam, double t, double h) {
        const cxmat a1 = fam.dense_fn(t + (0.5 - kNodeOffset) * h);
        const cxmat a2 = fam.dense_fn(t + (0.5 + kNodeOffset) * h);
        const cxmat first = unitary_exp(h * (kW1 * a1 + kW2 * a2));
        const cxmat second = unitary_exp(h * (kW2 * a1 + kW1 * a2));
        return second * first;
    }

    // diagonal families: the two factors commute and collapse to the
    // Gauss-Legendre quadrature of the phase integral
    static cxvec diagonal_phase(const OperatorFamily& fam, double t, double h) {
        const rvec a1 = fam.diag_fn(t + (0.5 - kNodeOffset) * h);
        const rvec a2 = fam.diag_fn(t + (0.5 + kNodeOffset) * h);
        cxvec ph(a1.size());
        for (Eigen::Index j = 0; j < ph.size(); ++j)
            ph(j) = std::exp(cx(0.0, 0.5 * h * (a1(j) + a2(j))));
        return ph;
    }
};

inline cxmat rk4_step(const OperatorFamily& fam, const cxmat& u, double t, double h) {
    auto f = [&](double s, const cxmat& m) -> cxmat {
        return cx(0.0, 1.0) * (fam.dense_fn(s) * m);
    };
    const cxmat k1 = f(t, u);
    const cxmat k2 = f(t + 0.5 * h, u + 0.5 * h * k1);
    const cxmat k3 = f(t + 0.5 * h, u + 0.5 * h * k2);
    const cxmat k4 = f(t + h, u + h * k3);
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline cxmat propagate_fixed(const OperatorFamily& fam, double t_from, double t_to,
                             const EvolutionConfig& cfg) {
    const int n = fam.dim();
    if (t_from == t_to) return cxmat::Identity(n, n);
    const int steps = cfg.step_count > 0 ? cfg.step_count
                                         : auto_steps(fam, t_to - t_from);
    if (cfg.step_count > 0 && cfg.step_count < 8)
        throw config_error("fixed-step evolution needs step_count >= 8");
    const double h = (t_to - t_from) / steps;

    if (cfg.method == EvolutionConfig::Method::cf4 && fam.diagonal) {
        cxvec phases = cxvec::Ones(n);
        for (int k = 0; k < steps; ++k)
            phases = phases.cwiseProduct(Cf4Step::diagonal_phase(fam, t_from + k * h, h));
        return cxmat(phases.asDiagonal());
    }

    cxmat q = cxmat::Identity(n, n);
    for (int k = 0; k < steps; ++k) {
        const double t = t_from + k * h;
        if (cfg.method == EvolutionConfig::Method::cf4)
            q = Cf4Step::dense(fam, t, h) * q;
        else
            q = rk4_step(fam, q, t, h);
    }
    return q;
}

inline cxmat propagate_adaptive(const OperatorFamily& fam, double t_from, double t_to,
                                const EvolutionConfig& cfg) {
    const int n = fam.dim();
    cxmat q = cxmat::Identity(n, n);
    const double span = t_to - t_from;
    if (span == 0.0) return q;
    const double dir = span > 0.0 ? 1.0 : -1.0;
    double t = t_from;
    double h = span / 64.0;
    while (dir * (t_to - t) > 1e-15 * std::abs(span)) {
        if (std::abs(h) > std::abs(t_to - t)) h = t_to - t;
        if (std::abs(h) < 1e-12 * std::abs(span))
            throw numerical_error("stiffness: step-size underflow in adaptive evolution");
        const cxmat coarse = Cf4Step::dense(fam, t, h);
        const cxmat fine =
            Cf4Step::dense(fam, t + 0.5 * h, 0.5 * h) * Cf4Step::dense(fam, t, 0.5 * h);
        const double err = (coarse - fine).cwiseAbs().maxCoeff();
        const double budget = cfg.adaptive_tol * std::abs(h) / std::abs(span);
        if (err <= budget) {
            q = fine * q;
            t += h;
            h *= std::min(2.0, 0.9 * std::pow(budget / std::max(err, 1e-300), 0.2));
        } else {
            h *= std::max(0.1, 0.9 * std::pow(budget / err, 0.2));
        }
    }
    return q;
}

}  // namespace detail

// Solve d/dt u = i A(t) u from t_from to t_to (either direction).
inline cxvec evolve_state(const OperatorFamily& fam, const cxvec& u0, double t_from,
                          double t_to, const EvolutionConfig& cfg = {}) {
    if (u0.size() != fam.dim()) throw config_error("state length must be 2K+1");
    const cxmat q = cfg.adaptive_tol > 0.0
                        ? detail::propagate_adaptive(fam, t_from, t_to, cfg)
                        : detail::propagate_fixed(fam, t_from, t_to, cfg);
    return q * u0;
}

// The wave evolution operator Q(t2, t1) in the truncated mode basis.
struct PropagatorMatrix {
    cxmat Q;
    double t1 = 0.0, t2 = 0.0;
    int K = 0;
    std::string model_tag;
    double unitarity_residual = 0.0;
};

inline double unitarity_residual(const cxmat& q) {
    const cxmat d = q.adjoint() * q - cxmat::Identity(q.rows(), q.cols());
    return hermitian_op_norm(d);
}

inline double unitarity_residual(const PropagatorMatrix& p) {
    return unitarity_residual(p.Q);
}

inline PropagatorMatrix assemble_Q(const OperatorFamily& fam, double t1, double t2,
                                   const EvolutionConfig& cfg = {}) {
    PropagatorMatrix out;
    out.t1 = t1;
    out.t2 = t2;
    out.K = fam.K;
    out.model_tag = fam.tag;
    out.Q = cfg.adaptive_tol > 0.0 ? detail::propagate_adaptive(fam, t1, t2, cfg)
                                   : detail::propagate_fixed(fam, t1, t2, cfg);
    out.unitarity_residual = unitarity_residual(out.Q);
    if (out.unitarity_residual > cfg.unitarity_threshold) {
        std::ostringstream os;
        os << "unitarity residual " << out.unitarity_residual << " exceeds threshold "
           << cfg.unitarity_threshold;
        throw numerical_error(os.str());
    }
    return out;
}

// Q cut into the 2x2 block matrix against the boundary spectral splittings.
// Zero modes at t1 sit on the "+" side ([0, inf)), zero modes at t2 on the
// "-" side ((-inf, 0]).
struct BlockDecomposition {
    cxmat Qpp, Qpm, Qmp, Qmm;
    cxmat B1p, B1m, B2p, B2m;  // eigenbasis columns of the four subspaces
    rvec f1p, f1m, f2p, f2m;   // matching eigenvalues
    double tol = kDefaultKernelTol;

    int rank_dom_plus() const { return static_cast<int>(B1p.cols()); }
    int rank_dom_minus() const { return static_cast<int>(B1m.cols()); }
    int rank_cod_plus() const { return static_cast<int>(B2p.cols()); }
    int rank_cod_minus() const { return static_cast<int>(B2m.cols()); }

    // reassemble Q from the four blocks; bookkeeping check
    cxmat reassemble() const {
        const Eigen::Index n = B1p.rows();
        cxmat u1(n, n), u2(n, n);
        u1 << B1p, B1m;
        u2 << B2p, B2m;
        cxmat blocks(n, n);
        blocks.topLeftCorner(B2p.cols(), B1p.cols()) = Qpp;
        blocks.topRightCorner(B2p.cols(), B1m.cols()) = Qpm;
        blocks.bottomLeftCorner(B2m.cols(), B1p.cols()) = Qmp;
        blocks.bottomRightCorner(B2m.cols(), B1m.cols()) = Qmm;
        return u2 * blocks * u1.adjoint();
    }
};

namespace detail {

inline void scan_endpoint_ambiguity(const rvec& ev, double tol) {
    for (Eigen::Index j = 0; j < ev.size(); ++j) {
        const double a = std::abs(ev(j));
        if (a > tol && a < 10.0 * tol) {
            std::ostringstream os;
            os << "endpoint ambiguity: eigenvalue " << ev(j)
               << " lies within (tol, 10*tol) of 0, tol = " << tol;
            throw numerical_error(os.str());
        }
    }
}

struct SignSplit {
    cxmat plus, minus;
    rvec fplus, fminus;
};

// zero_to_plus: which side the |lambda| <= tol eigenvalues join
inline SignSplit split_by_sign(const SpectrumList& spec, double tol, bool zero_to_plus) {
    scan_endpoint_ambiguity(spec.eigenvalues, tol);
    std::vector<Eigen::Index> plus, minus;
    for (Eigen::Index j = 0; j < spec.eigenvalues.size(); ++j) {
        const double l = spec.eigenvalues(j);
        const bool zero = std::abs(l) <= tol;
        if ((zero && zero_to_plus) || (!zero && l > 0.0))
            plus.push_back(j);
        else
            minus.push_back(j);
    }
    SignSplit s;
    const Eigen::Index n = spec.eigenvectors.rows();
    s.plus.resize(n, static_cast<Eigen::Index>(plus.size()));
    s.fplus.resize(static_cast<Eigen::Index>(plus.size()));
    for (size_t i = 0; i < plus.size(); ++i) {
        s.plus.col(static_cast<Eigen::Index>(i)) = spec.eigenvectors.col(plus[i]);
        s.fplus(static_cast<Eigen::Index>(i)) = spec.eigenvalues(plus[i]);
    }
    s.minus.resize(n, static_cast<Eigen::Index>(minus.size()));
    s.fminus.resize(static_cast<Eigen::Index>(minus.size()));
    for (size_t i = 0; i < minus.size(); ++i) {
        s.minus.col(static_cast<Eigen::Index>(i)) = spec.eigenvectors.col(minus[i]);
        s.fminus(static_cast<Eigen::Index>(i)) = spec.eigenvalues(minus[i]);
    }
    return s;
}

}  // namespace detail

inline BlockDecomposition block_decompose(const PropagatorMatrix& prop,
                                          const SpectrumList& spec_t1,
                                          const SpectrumList& spec_t2, double tol) {
    if (spec_t1.eigenvalues.size() != prop.Q.rows() ||
        spec_t2.eigenvalues.size() != prop.Q.rows())
        throw config_error("boundary spectra do not match the propagator dimension");

    const auto s1 = detail::split_by_sign(spec_t1, tol, /*zero_to_plus=*/true);
    const auto s2 = detail::split_by_sign(spec_t2, tol, /*zero_to_plus=*/false);

    BlockDecomposition b;
    b.tol = tol;
    b.B1p = s1.plus;
    b.B1m = s1.minus;
    b.f1p = s1.fplus;
    b.f1m = s1.fminus;
    b.B2p = s2.plus;
    b.B2m = s2.minus;
    b.f2p = s2.fplus;
    b.f2m = s2.fminus;
    b.Qpp = b.B2p.adjoint() * prop.Q * b.B1p;
    b.Qpm = b.B2p.adjoint() * prop.Q * b.B1m;
    b.Qmp = b.B2m.adjoint() * prop.Q * b.B1p;
    b.Qmm = b.B2m.adjoint() * prop.Q * b.B1m;
    return b;
}

// Residuals of the four unitarity identities of the block matrix:
//   Qpp*Qpp + Qmp*Qmp = 1,  Qmm*Qmm + Qpm*Qpm = 1,
//   Qmp*Qmm + Qpp*Qpm = 0,  Qpm*Qpp + Qmm*Qmp = 0.
inline std::array<double, 4> qstar_identities_residual(const BlockDecomposition& b) {
    const Eigen::Index np = b.Qpp.cols();
    const Eigen::Index nm = b.Qmm.cols();
    const cxmat i_p = cxmat::Identity(np, np);
    const cxmat i_m = cxmat::Identity(nm, nm);
    return {
        op_norm(b.Qpp.adjoint() * b.Qpp + b.Qmp.adjoint() * b.Qmp - i_p),
        op_norm(b.Qmm.adjoint() * b.Qmm + b.Qpm.adjoint() * b.Qpm - i_m),
        op_norm(b.Qmp.adjoint() * b.Qmm + b.Qpp.adjoint() * b.Qpm),
        op_norm(b.Qpm.adjoint() * b.Qpp + b.Qmm.adjoint() * b.Qmp),
    };
}

}  // namespace lorindex
