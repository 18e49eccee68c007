#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "lorindex/feynman.hpp"

namespace lorindex {

namespace fey {

// Piecewise polynomial on a window, each piece written in its normalized
// coordinate y = (t - lo) / (hi - lo). Knots are expected to sit on grid
// nodes so that every grid cell lies inside a single piece.
struct PiecewisePoly {
    struct Piece {
        double lo = 0.0, hi = 0.0;
        Poly p;
    };
    std::vector<Piece> pieces;

    double eval(double t) const {
        for (const auto& pc : pieces) {
            if (t <= pc.hi || &pc == &pieces.back()) {
                const double w = pc.hi - pc.lo;
                const double y = w > 0.0 ? (t - pc.lo) / w : 0.0;
                return poly_eval(pc.p, cx(y)).real();
            }
        }
        return 0.0;
    }

    PiecewisePoly derivative() const {
        PiecewisePoly d;
        for (const auto& pc : pieces) {
            Piece q;
            q.lo = pc.lo;
            q.hi = pc.hi;
            const double w = pc.hi - pc.lo;
            if (w > 0.0) {
                q.p = poly_deriv(pc.p);
                for (auto& c : q.p) c /= w;
            } else {
                q.p = {cx(0.0)};
            }
            d.pieces.push_back(std::move(q));
        }
        return d;
    }

    // polynomial of the piece covering grid cell k, in local x
    Poly cell_poly(double t0, double dt, int k) const {
        const double a = t0 + dt * k;
        const double b = a + dt;
        const double mid = 0.5 * (a + b);
        for (const auto& pc : pieces) {
            if (mid >= pc.lo && mid <= pc.hi) {
                const double w = pc.hi - pc.lo;
                return poly_affine(pc.p, cx((a - pc.lo) / w), cx(dt / w));
            }
        }
        return {cx(0.0)};
    }
};

// smoothstep x^{n+1} sum_k C(n+k,k) C(2n+1,n-k) (-x)^k of order 2n+1;
// C^n at both ends
inline Poly smoothstep_poly(int order) {
    if (order < 3 || order % 2 == 0) throw config_error("smoothstep order must be odd >= 3");
    const int n = (order - 1) / 2;
    Poly p(static_cast<size_t>(order) + 1, cx(0.0));
    double sign = 1.0;
    for (int k = 0; k <= n; ++k) {
        const double c = static_cast<double>(binomial(n + k, k)) *
                         static_cast<double>(binomial(2 * n + 1, n - k));
        p[static_cast<size_t>(n + 1 + k)] = sign * c;
        sign = -sign;
    }
    return p;
}

// cutoff that is c_before left of [lo, hi], transitions by a smoothstep, and
// is c_after to the right
inline PiecewisePoly make_cutoff(double window_lo, double window_hi, double lo, double hi,
                                 double c_before, double c_after, int order) {
    PiecewisePoly f;
    if (!(hi > lo)) {  // constant cutoff
        f.pieces.push_back({window_lo, window_hi, {cx(c_after)}});
        return f;
    }
    const Poly s = smoothstep_poly(order);
    Poly ramp(s.size(), cx(0.0));
    for (size_t i = 0; i < s.size(); ++i) ramp[i] = (c_after - c_before) * s[i];
    ramp[0] += c_before;
    f.pieces.push_back({window_lo, lo, {cx(c_before)}});
    f.pieces.push_back({lo, hi, std::move(ramp)});
    f.pieces.push_back({hi, window_hi, {cx(c_after)}});
    return f;
}

}  // namespace fey

// ---------------------------------------------------------------------------
// Gluing of two per-mode product parametrices on overlapping windows
// U1 = (-T, delta), U2 = (-delta, T):
//   G = th1 G1 f1 + th2 G2 f2 - th1 G1 [f1, L] G2 f2 - th2 G2 [f2, L] G1 f1
// with [f, L] = -f'' - 2 f' d/dt for L = d^2/dt^2 + lambda^2.
// ---------------------------------------------------------------------------

struct GlueConfig {
    double T = 2.0;      // window is [-T, T]
    double delta = 0.5;  // overlap is (-delta, delta)
    int order = 7;       // cutoff smoothstep order (C^3 by default)
    int cells = 8192;
    bool degenerate = false;  // th1 = f1 = 1, th2 = 0: G collapses to G1

    // transition intervals, snapped to grid nodes on use
    double theta_lo = 0.0, theta_hi = 0.0;
    double phi1_lo = 0.0, phi1_hi = 0.0;
    double phi2_lo = 0.0, phi2_hi = 0.0;

    static GlueConfig standard(double T = 2.0, double delta = 0.5, int cells = 8192,
                               int order = 7) {
        GlueConfig c;
        c.T = T;
        c.delta = delta;
        c.cells = cells;
        c.order = order;
        c.theta_lo = -delta / 8.0;
        c.theta_hi = delta / 8.0;
        c.phi1_lo = delta / 2.0;
        c.phi1_hi = 3.0 * delta / 4.0;
        c.phi2_lo = -3.0 * delta / 4.0;
        c.phi2_hi = -delta / 2.0;
        return c;
    }

    double dt() const { return 2.0 * T / cells; }

    double snap(double t) const {
        return -T + dt() * std::round((t + T) / dt());
    }
};

namespace detail {

struct GlueCutoffs {
    fey::PiecewisePoly th1, th2, f1, f2;
    fey::PiecewisePoly f1_d1, f1_d2, f1_d3;
    fey::PiecewisePoly f2_d1, f2_d2, f2_d3;
};

inline GlueCutoffs build_cutoffs(const GlueConfig& cfg) {
    GlueCutoffs c;
    const double lo = -cfg.T, hi = cfg.T;
    if (cfg.degenerate) {
        c.th1 = fey::make_cutoff(lo, hi, lo, lo, 1.0, 1.0, cfg.order);
        c.th2 = fey::make_cutoff(lo, hi, lo, lo, 0.0, 0.0, cfg.order);
        c.f1 = fey::make_cutoff(lo, hi, lo, lo, 1.0, 1.0, cfg.order);
        c.f2 = fey::make_cutoff(lo, hi, cfg.snap(cfg.phi2_lo), cfg.snap(cfg.phi2_hi), 0.0,
                                1.0, cfg.order);
    } else {
        c.th1 = fey::make_cutoff(lo, hi, cfg.snap(cfg.theta_lo), cfg.snap(cfg.theta_hi),
                                 1.0, 0.0, cfg.order);
        c.th2 = fey::make_cutoff(lo, hi, cfg.snap(cfg.theta_lo), cfg.snap(cfg.theta_hi),
                                 0.0, 1.0, cfg.order);
        c.f1 = fey::make_cutoff(lo, hi, cfg.snap(cfg.phi1_lo), cfg.snap(cfg.phi1_hi), 1.0,
                                0.0, cfg.order);
        c.f2 = fey::make_cutoff(lo, hi, cfg.snap(cfg.phi2_lo), cfg.snap(cfg.phi2_hi), 0.0,
                                1.0, cfg.order);
    }
    c.f1_d1 = c.f1.derivative();
    c.f1_d2 = c.f1_d1.derivative();
    c.f1_d3 = c.f1_d2.derivative();
    c.f2_d1 = c.f2.derivative();
    c.f2_d2 = c.f2_d1.derivative();
    c.f2_d3 = c.f2_d2.derivative();
    return c;
}

inline void validate_glue_support(const GlueConfig& cfg, const GlueCutoffs& c) {
    if (cfg.degenerate) return;  // explicit single-chart carve-out
    const int n = cfg.cells + 1;
    const double dt = cfg.dt();
    for (int i = 0; i < n; ++i) {
        const double t = -cfg.T + dt * i;
        const double th1 = c.th1.eval(t), th2 = c.th2.eval(t);
        if (std::abs(th1 + th2 - 1.0) > 1e-12)
            throw config_error("support condition violated: th1 + th2 != 1");
        if (th1 > 1e-14 && std::abs(c.f1.eval(t) - 1.0) > 1e-12)
            throw config_error("support condition violated: f1 != 1 on supp th1");
        if (th2 > 1e-14 && std::abs(c.f2.eval(t) - 1.0) > 1e-12)
            throw config_error("support condition violated: f2 != 1 on supp th2");
        if (t >= cfg.delta && std::abs(c.f1.eval(t)) > 1e-14)
            throw config_error("support condition violated: supp f1 not inside U1");
        if (t <= -cfg.delta && std::abs(c.f2.eval(t)) > 1e-14)
            throw config_error("support condition violated: supp f2 not inside U2");
    }
}

// multiply a cell integrand by a piecewise-polynomial cutoff
inline fey::CellIntegrand cutoff_times(const fey::PiecewisePoly& f,
                                       const fey::CellIntegrand& c) {
    fey::CellIntegrand out;
    out.t0 = c.t0;
    out.dt = c.dt;
    out.carrier = c.carrier;
    out.cells.resize(c.cells.size());
    for (size_t k = 0; k < c.cells.size(); ++k)
        out.cells[k] = fey::poly_mul(f.cell_poly(c.t0, c.dt, static_cast<int>(k)),
                                     c.cells[k]);
    return out;
}

}  // namespace detail

// Per-mode glued parametrix for L = d^2/dt^2 + lambda^2 on [-T, T].
struct GluedParametrix {
    GlueConfig cfg;
    double lambda = 0.0;
    detail::GlueCutoffs cutoffs;

    static GluedParametrix build(const GlueConfig& cfg, double lambda) {
        GluedParametrix g;
        g.cfg = cfg;
        g.lambda = lambda;
        g.cutoffs = detail::build_cutoffs(cfg);
        detail::validate_glue_support(cfg, g.cutoffs);
        return g;
    }

    // nodal values of G applied to the integrand
    cxvec apply(const fey::CellIntegrand& c) const {
        const int n = cfg.cells + 1;
        const double dt = cfg.dt();
        const double t0 = -cfg.T;

        auto commutator_stage = [&](const fey::CellIntegrand& masked,
                                    const fey::PiecewisePoly& fd1,
                                    const fey::PiecewisePoly& fd2,
                                    const fey::PiecewisePoly& fd3) {
            // inner parametrix, then [f, L] v = -f'' v - 2 f' v'
            const fey::NodalField v = fey::conv_g(masked, lambda);
            cxvec q(n), qd(n);
            for (int i = 0; i < n; ++i) {
                const double t = t0 + dt * i;
                const cx v2 = masked.value_at_node(i) - lambda * lambda * v.value(i);
                const double d1 = fd1.eval(t), d2 = fd2.eval(t), d3 = fd3.eval(t);
                q(i) = -d2 * v.value(i) - 2.0 * d1 * v.deriv(i);
                qd(i) = -d3 * v.value(i) - 3.0 * d2 * v.deriv(i) - 2.0 * d1 * v2;
            }
            return fey::CellIntegrand::from_nodal_hermite(t0, dt, q, qd);
        };

        const auto f1c = detail::cutoff_times(cutoffs.f1, c);
        const auto f2c = detail::cutoff_times(cutoffs.f2, c);
        const fey::NodalField g1_f1 = fey::conv_g(f1c, lambda);
        const fey::NodalField g2_f2 = fey::conv_g(f2c, lambda);

        // th1 G1 [f1, L] G2 f2  and  th2 G2 [f2, L] G1 f1
        const auto q1 = commutator_stage(f2c, cutoffs.f1_d1, cutoffs.f1_d2, cutoffs.f1_d3);
        const auto q2 = commutator_stage(f1c, cutoffs.f2_d1, cutoffs.f2_d2, cutoffs.f2_d3);
        const fey::NodalField g1_q1 = fey::conv_g(q1, lambda);
        const fey::NodalField g2_q2 = fey::conv_g(q2, lambda);

        cxvec out(n);
        for (int i = 0; i < n; ++i) {
            const double t = t0 + dt * i;
            out(i) = cutoffs.th1.eval(t) * (g1_f1.value(i) - g1_q1.value(i)) +
                     cutoffs.th2.eval(t) * (g2_f2.value(i) - g2_q2.value(i));
        }
        return out;
    }
};

// Probe sections W(t) exp(i f t) with a C^n plateau window supported away
// from the ends; L is applied analytically.
namespace detail {

struct GlueProbe {
    fey::PiecewisePoly W, W1, W2;
    double freq = 0.0;

    cx value(double t) const { return W.eval(t) * std::exp(cx(0.0, freq * t)); }
};

inline GlueProbe build_probe(const GlueConfig& cfg, double freq) {
    GlueProbe p;
    p.freq = freq;
    const double lo = -cfg.T, hi = cfg.T;
    const double r0 = cfg.snap(-0.7 * cfg.T), r1 = cfg.snap(-0.5 * cfg.T);
    const double s0 = cfg.snap(0.5 * cfg.T), s1 = cfg.snap(0.7 * cfg.T);
    const fey::Poly step = fey::smoothstep_poly(cfg.order);
    fey::PiecewisePoly w;
    w.pieces.push_back({lo, r0, {cx(0.0)}});
    w.pieces.push_back({r0, r1, step});
    w.pieces.push_back({r1, s0, {cx(1.0)}});
    fey::Poly fall = step;
    {  // 1 - S(y)
        for (auto& cth : fall) cth = -cth;
        fall[0] += 1.0;
    }
    w.pieces.push_back({s0, s1, fall});
    w.pieces.push_back({s1, hi, {cx(0.0)}});
    p.W = w;
    p.W1 = w.derivative();
    p.W2 = p.W1.derivative();
    return p;
}

// cell integrand of L(W e^{ift}) = (W'' + 2 i f W' + (l^2 - f^2) W) e^{ift}
inline fey::CellIntegrand probe_L(const GlueProbe& p, const GlueConfig& cfg,
                                  double lambda) {
    fey::CellIntegrand c;
    c.t0 = -cfg.T;
    c.dt = cfg.dt();
    c.carrier = p.freq;
    c.cells.resize(static_cast<size_t>(cfg.cells));
    const cx two_if(0.0, 2.0 * p.freq);
    const cx amp(lambda * lambda - p.freq * p.freq, 0.0);
    for (int k = 0; k < cfg.cells; ++k) {
        fey::Poly w = p.W.cell_poly(c.t0, c.dt, k);
        fey::Poly w1 = p.W1.cell_poly(c.t0, c.dt, k);
        fey::Poly w2 = p.W2.cell_poly(c.t0, c.dt, k);
        size_t len = std::max({w.size(), w1.size(), w2.size()});
        fey::Poly cell(len, cx(0.0));
        for (size_t i = 0; i < w2.size(); ++i) cell[i] += w2[i];
        for (size_t i = 0; i < w1.size(); ++i) cell[i] += two_if * w1[i];
        for (size_t i = 0; i < w.size(); ++i) cell[i] += amp * w[i];
        c.cells[static_cast<size_t>(k)] = std::move(cell);
    }
    return c;
}

}  // namespace detail

// Residual ||(G L - 1) w_f|| of the glued parametrix against probe sections
// of increasing frequency; the fitted log-log slope quantifies how strongly
// the residual smooths.
inline DecayTable residual_smoothness(double lambda, const GlueConfig& cfg,
                                      const std::vector<double>& probe_freqs) {
    const auto glued = GluedParametrix::build(cfg, lambda);
    DecayTable table;
    double peak = 0.0;
    for (double f : probe_freqs) {
        const auto probe = detail::build_probe(cfg, f);
        const auto lv = detail::probe_L(probe, cfg, lambda);
        const cxvec glw = glued.apply(lv);
        double worst = 0.0;
        for (int i = 0; i <= cfg.cells; ++i) {
            const double t = -cfg.T + cfg.dt() * i;
            worst = std::max(worst, std::abs(glw(i) - probe.value(t)));
        }
        table.frequency.push_back(f);
        table.value.push_back(worst);
        peak = std::max(peak, worst);
    }
    // full-range fit (the probe set already spans the decade of interest)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    const double floor = std::max(1e-14, 1e-13 * peak);
    for (size_t i = 0; i < table.frequency.size(); ++i) {
        if (table.frequency[i] <= 0.0 || table.value[i] <= floor) continue;
        const double x = std::log(table.frequency[i]);
        const double y = std::log(table.value[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 3) {
        table.empty = true;
        table.slope = -std::numeric_limits<double>::infinity();
    } else {
        table.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return table;
}

}  // namespace lorindex
