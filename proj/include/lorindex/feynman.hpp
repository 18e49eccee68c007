#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <vector>

#include "lorindex/common.hpp"
#include "lorindex/fredholm.hpp"  // DecayTable

namespace lorindex {

// ---------------------------------------------------------------------------
// Per-mode Feynman kernels. Modes are labelled by the boundary eigenvalue of
// the section the propagator acts on; both chiralities share the labels.
// ---------------------------------------------------------------------------

// g(t): fundamental solution of d^2/dt^2 + lambda^2 picking positive
// frequencies forward. For lambda != 0 both branches collapse to
// -exp(-i|l||t|) / (2i|l|); at t = 0 the two-sided limit is returned. The
// zero mode is t on t > 0 and 0 otherwise.
inline cx feynman_g(double lambda, double t) {
    if (lambda == 0.0) return t > 0.0 ? cx(t, 0.0) : cx(0.0, 0.0);
    const double w = std::abs(lambda);
    const cx phase = std::exp(cx(0.0, -w * std::abs(t)));
    return -phase / (cx(0.0, 2.0 * w));
}

// h(t): propagator kernel. Positive modes move forward in time, negative
// modes backward, zero modes integrate forward.
inline cx feynman_h(double lambda, double t) {
    if (lambda > 0.0) return t > 0.0 ? std::exp(cx(0.0, -lambda * t)) : cx(0.0, 0.0);
    if (lambda < 0.0) return t < 0.0 ? -std::exp(cx(0.0, -lambda * t)) : cx(0.0, 0.0);
    return t > 0.0 ? cx(1.0, 0.0) : cx(0.0, 0.0);
}

struct ModeKernel {
    double lambda = 0.0;
    cx g(double t) const { return feynman_g(lambda, t); }
    cx h(double t) const { return feynman_h(lambda, t); }
};

inline std::vector<ModeKernel> make_mode_kernels(const rvec& lambdas,
                                                 double tol = kDefaultKernelTol) {
    std::vector<ModeKernel> ks(static_cast<size_t>(lambdas.size()));
    for (Eigen::Index j = 0; j < lambdas.size(); ++j)
        ks[static_cast<size_t>(j)].lambda =
            std::abs(lambdas(j)) <= tol ? 0.0 : lambdas(j);
    return ks;
}

// Time-sampled mode-coefficient field on a uniform grid over [t1, t2].
struct SpacetimeSection {
    enum class Chirality { plus, minus };
    double t1 = 0.0, t2 = 1.0;
    Chirality chirality = Chirality::minus;
    cxmat coeffs;  // (grid points) x (modes)

    int grid() const { return static_cast<int>(coeffs.rows()); }
    int modes() const { return static_cast<int>(coeffs.cols()); }
    double dt() const { return (t2 - t1) / (grid() - 1); }
    double time(int i) const { return t1 + dt() * i; }

    static SpacetimeSection zero(double t1, double t2, int grid, int modes,
                                 Chirality chi) {
        if (grid < 16) throw config_error("time grid must have at least 16 points");
        SpacetimeSection s;
        s.t1 = t1;
        s.t2 = t2;
        s.chirality = chi;
        s.coeffs = cxmat::Zero(grid, modes);
        return s;
    }
};

// ---------------------------------------------------------------------------
// Exact convolution engine. Integrands are per-cell polynomials in the local
// coordinate x in [0,1], optionally riding a carrier exp(i*mu*s). Kernel
// exponentials are integrated in closed form against every cell.
// ---------------------------------------------------------------------------

namespace fey {

using Poly = std::vector<cx>;  // coefficients, ascending degree

inline cx poly_eval(const Poly& p, cx x) {
    cx acc = 0.0;
    for (size_t i = p.size(); i-- > 0;) acc = acc * x + p[i];
    return acc;
}

inline Poly poly_mul(const Poly& a, const Poly& b) {
    if (a.empty() || b.empty()) return {};
    Poly c(a.size() + b.size() - 1, cx(0.0));
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    return c;
}

inline Poly poly_deriv(const Poly& p) {
    if (p.size() <= 1) return {cx(0.0)};
    Poly d(p.size() - 1);
    for (size_t i = 1; i < p.size(); ++i) d[i - 1] = double(i) * p[i];
    return d;
}

// compose p with the affine map x -> a + b x
inline Poly poly_affine(const Poly& p, cx a, cx b) {
    Poly out{cx(0.0)};
    Poly pw{cx(1.0)};  // (a + b x)^i
    Poly lin{a, b};
    for (size_t i = 0; i < p.size(); ++i) {
        if (i > 0) pw = poly_mul(pw, lin);
        if (out.size() < pw.size()) out.resize(pw.size(), cx(0.0));
        for (size_t k = 0; k < pw.size(); ++k) out[k] += p[i] * pw[k];
    }
    return out;
}

// moments M_d(beta) = int_0^1 x^d exp(i beta x) dx, |beta| <= ~2.5, by the
// absolutely convergent series sum_n (i beta)^n / (n! (n + d + 1))
inline void moments(double beta, int dmax, std::vector<cx>& out) {
    out.assign(static_cast<size_t>(dmax) + 1, cx(0.0));
    const cx ib(0.0, beta);
    for (int d = 0; d <= dmax; ++d) {
        cx term = 1.0;
        cx acc = 1.0 / double(d + 1);
        for (int n = 1; n <= 30; ++n) {
            term *= ib / double(n);
            acc += term / double(n + d + 1);
        }
        out[static_cast<size_t>(d)] = acc;
    }
}

// One mode's worth of integrand: cells[k] holds the polynomial in local x,
// the whole thing multiplied by exp(i * carrier * s).
struct CellIntegrand {
    double t0 = 0.0;
    double dt = 0.0;
    double carrier = 0.0;
    std::vector<Poly> cells;

    int nodes() const { return static_cast<int>(cells.size()) + 1; }

    cx value_at_node(int i) const {
        // continuous integrands assumed: use the right cell where available
        const auto n = static_cast<int>(cells.size());
        const double s = t0 + dt * i;
        const cx carrier_phase = std::exp(cx(0.0, carrier * s));
        if (i < n) return poly_eval(cells[static_cast<size_t>(i)], cx(0.0)) * carrier_phase;
        return poly_eval(cells[static_cast<size_t>(n - 1)], cx(1.0)) * carrier_phase;
    }

    cx deriv_at_node(int i) const {
        const auto n = static_cast<int>(cells.size());
        const double s = t0 + dt * i;
        const cx carrier_phase = std::exp(cx(0.0, carrier * s));
        const cx ic(0.0, carrier);
        if (i < n) {
            const Poly& p = cells[static_cast<size_t>(i)];
            return (poly_eval(poly_deriv(p), cx(0.0)) / dt + ic * poly_eval(p, cx(0.0))) *
                   carrier_phase;
        }
        const Poly& p = cells[static_cast<size_t>(n - 1)];
        return (poly_eval(poly_deriv(p), cx(1.0)) / dt + ic * poly_eval(p, cx(1.0))) *
               carrier_phase;
    }

    static CellIntegrand from_nodal_linear(double t0, double dt, const cxvec& values) {
        CellIntegrand c;
        c.t0 = t0;
        c.dt = dt;
        c.cells.resize(static_cast<size_t>(values.size()) - 1);
        for (Eigen::Index k = 0; k + 1 < values.size(); ++k)
            c.cells[static_cast<size_t>(k)] = {values(k), values(k + 1) - values(k)};
        return c;
    }

    // cubic Hermite cells from nodal values and derivatives
    static CellIntegrand from_nodal_hermite(double t0, double dt, const cxvec& v,
                                            const cxvec& d) {
        CellIntegrand c;
        c.t0 = t0;
        c.dt = dt;
        c.cells.resize(static_cast<size_t>(v.size()) - 1);
        for (Eigen::Index k = 0; k + 1 < v.size(); ++k) {
            const cx p0 = v(k), p1 = v(k + 1);
            const cx m0 = d(k) * dt, m1 = d(k + 1) * dt;
            c.cells[static_cast<size_t>(k)] = {
                p0, m0, -3.0 * p0 + 3.0 * p1 - 2.0 * m0 - m1,
                2.0 * p0 - 2.0 * p1 + m0 + m1};
        }
        return c;
    }
};

// Nodal output of a convolution with enough structure to recover time
// derivatives in closed form.
struct NodalField {
    cxvec value;
    cxvec deriv;
};

inline int max_cell_degree(const CellIntegrand& c) {
    size_t d = 1;
    for (const auto& p : c.cells) d = std::max(d, p.size());
    return static_cast<int>(d) - 1;
}

// forward part: F(t_i) = int_{t0}^{t_i} exp(-i w (t_i - s)) c(s) ds, w >= 0
inline cxvec conv_forward(const CellIntegrand& c, double w) {
    const int n = c.nodes();
    cxvec f = cxvec::Zero(n);
    const double beta = (w + c.carrier) * c.dt;
    const int dmax = max_cell_degree(c);
    std::vector<cx> mom;
    moments(beta, dmax, mom);
    const cx decay = std::exp(cx(0.0, -w * c.dt));
    for (int i = 0; i + 1 < n; ++i) {
        const Poly& p = c.cells[static_cast<size_t>(i)];
        cx cell = 0.0;
        for (size_t d = 0; d < p.size(); ++d) cell += p[d] * mom[d];
        cell *= c.dt * decay * std::exp(cx(0.0, c.carrier * (c.t0 + c.dt * i)));
        f(i + 1) = decay * f(i) + cell;
    }
    return f;
}

// backward part: B(t_i) = int_{t_i}^{t_end} exp(-i w (s - t_i)) c(s) ds, w >= 0
inline cxvec conv_backward(const CellIntegrand& c, double w) {
    const int n = c.nodes();
    cxvec b = cxvec::Zero(n);
    const double beta = (c.carrier - w) * c.dt;
    const int dmax = max_cell_degree(c);
    std::vector<cx> mom;
    moments(beta, dmax, mom);
    const cx decay = std::exp(cx(0.0, -w * c.dt));
    for (int i = n - 2; i >= 0; --i) {
        const Poly& p = c.cells[static_cast<size_t>(i)];
        cx cell = 0.0;
        for (size_t d = 0; d < p.size(); ++d) cell += p[d] * mom[d];
        cell *= c.dt * std::exp(cx(0.0, c.carrier * (c.t0 + c.dt * i)));
        b(i) = decay * b(i + 1) + cell;
    }
    return b;
}

// prefix integrals int_{t0}^{t_i} c ds and int_{t0}^{t_i} (s - t0) c ds
inline void conv_prefix(const CellIntegrand& c, cxvec& plain, cxvec& weighted) {
    const int n = c.nodes();
    plain = cxvec::Zero(n);
    weighted = cxvec::Zero(n);
    const double beta = c.carrier * c.dt;
    const int dmax = max_cell_degree(c) + 1;
    std::vector<cx> mom;
    moments(beta, dmax, mom);
    for (int i = 0; i + 1 < n; ++i) {
        const Poly& p = c.cells[static_cast<size_t>(i)];
        const cx phase = std::exp(cx(0.0, c.carrier * (c.t0 + c.dt * i)));
        cx cell0 = 0.0, cell1 = 0.0;
        for (size_t d = 0; d < p.size(); ++d) {
            cell0 += p[d] * mom[d];
            cell1 += p[d] * mom[d + 1];  // extra factor of x
        }
        const double s_off = c.dt * i;  // cell start relative to t0
        plain(i + 1) = plain(i) + c.dt * phase * cell0;
        weighted(i + 1) = weighted(i) + c.dt * phase * (s_off * cell0 + c.dt * cell1);
    }
}

// Convolution with the propagator kernel h of one mode.
inline NodalField conv_h(const CellIntegrand& c, double lambda) {
    const int n = c.nodes();
    NodalField out;
    out.value.resize(n);
    out.deriv.resize(n);
    if (lambda > 0.0) {
        out.value = conv_forward(c, lambda);
        for (int i = 0; i < n; ++i)
            out.deriv(i) = c.value_at_node(i) - cx(0.0, lambda) * out.value(i);
    } else if (lambda < 0.0) {
        const double w = -lambda;
        out.value = -conv_backward(c, w);
        for (int i = 0; i < n; ++i)
            out.deriv(i) = c.value_at_node(i) + cx(0.0, w) * out.value(i);
    } else {
        cxvec plain, weighted;
        conv_prefix(c, plain, weighted);
        out.value = plain;
        for (int i = 0; i < n; ++i) out.deriv(i) = c.value_at_node(i);
    }
    return out;
}

// Convolution with the parametrix kernel g of one mode. Satisfies
// v'' + lambda^2 v = c in closed form, which the derivative fields use.
inline NodalField conv_g(const CellIntegrand& c, double lambda) {
    const int n = c.nodes();
    NodalField out;
    out.value.resize(n);
    out.deriv.resize(n);
    if (lambda != 0.0) {
        const double w = std::abs(lambda);
        const cxvec f = conv_forward(c, w);
        const cxvec b = conv_backward(c, w);
        const cx pref = -1.0 / cx(0.0, 2.0 * w);
        out.value = pref * (f + b);
        out.deriv = 0.5 * (f - b);
    } else {
        cxvec plain, weighted;
        conv_prefix(c, plain, weighted);
        for (int i = 0; i < n; ++i) {
            const double t_off = c.dt * i;
            out.value(i) = t_off * plain(i) - weighted(i);
            out.deriv(i) = plain(i);
        }
    }
    return out;
}

}  // namespace fey

// ---------------------------------------------------------------------------
// Feynman propagator and remainder operators
// ---------------------------------------------------------------------------

namespace detail {

inline void check_feynman_grid(const rvec& lambdas, double t1, double t2, int grid) {
    if (grid < 16) throw config_error("time grid must have at least 16 points");
    const double dt = (t2 - t1) / (grid - 1);
    double lmax = 0.0;
    for (Eigen::Index j = 0; j < lambdas.size(); ++j)
        lmax = std::max(lmax, std::abs(lambdas(j)));
    if (lmax * dt > 2.0)
        throw numerical_error("refine grid: kernel phase advances more than 2 radians per cell");
}

}  // namespace detail

// (S u)(t) = beta int h(t - s) u(s) ds per mode; u has negative chirality,
// the output positive. The integral is taken against the piecewise-linear
// interpolant of u, in closed form per grid cell.
inline SpacetimeSection apply_S(const SpacetimeSection& u, const rvec& lambdas,
                                double kernel_tol = kDefaultKernelTol) {
    if (u.chirality != SpacetimeSection::Chirality::minus)
        throw config_error("apply_S expects a negative-chirality section");
    if (u.modes() != lambdas.size())
        throw config_error("mode count mismatch");
    detail::check_feynman_grid(lambdas, u.t1, u.t2, u.grid());

    SpacetimeSection out = SpacetimeSection::zero(u.t1, u.t2, u.grid(), u.modes(),
                                                  SpacetimeSection::Chirality::plus);
    const double dt = u.dt();
    for (int j = 0; j < u.modes(); ++j) {
        const double l = std::abs(lambdas(j)) <= kernel_tol ? 0.0 : lambdas(j);
        auto cells = fey::CellIntegrand::from_nodal_linear(u.t1, dt, u.coeffs.col(j));
        out.coeffs.col(j) = fey::conv_h(cells, l).value;
    }
    return out;
}

// Remainder R of the right identity S D = 1 + R, from the boundary traces:
//   (R u)(t) = -exp(-i|l|(t - t1)) [positive part of u(t1)]
//              -exp(+i|l|(t - t2)) [negative part of u(t2)]
//              -[zero part of u(t1)],
// which vanishes exactly on APS boundary data.
inline SpacetimeSection remainder_R(const cxvec& trace_t1, const cxvec& trace_t2,
                                    const rvec& lambdas, double t1, double t2, int grid,
                                    double kernel_tol = kDefaultKernelTol) {
    SpacetimeSection out = SpacetimeSection::zero(t1, t2, grid,
                                                  static_cast<int>(lambdas.size()),
                                                  SpacetimeSection::Chirality::plus);
    for (int j = 0; j < out.modes(); ++j) {
        const double l = lambdas(j);
        for (int i = 0; i < grid; ++i) {
            const double t = out.time(i);
            if (l > kernel_tol)
                out.coeffs(i, j) = -std::exp(cx(0.0, -l * (t - t1))) * trace_t1(j);
            else if (l < -kernel_tol)
                out.coeffs(i, j) = -std::exp(cx(0.0, -l * (t - t2))) * trace_t2(j);
            else
                out.coeffs(i, j) = -trace_t1(j);
        }
    }
    return out;
}

// Remainder of the commutator identity G (d/dt + iA) - (d/dt + iA) G:
//   (Q u)(t) = (1 / 2i|l|) (exp(-i|l|(t - t1)) u(t1) - exp(-i|l|(t2 - t)) u(t2))
// per nonzero mode and -(t - t1) u(t1) on the kernel of A.
inline SpacetimeSection remainder_Qop(const cxvec& trace_t1, const cxvec& trace_t2,
                                      const rvec& lambdas, double t1, double t2, int grid,
                                      double kernel_tol = kDefaultKernelTol) {
    SpacetimeSection out = SpacetimeSection::zero(t1, t2, grid,
                                                  static_cast<int>(lambdas.size()),
                                                  SpacetimeSection::Chirality::plus);
    for (int j = 0; j < out.modes(); ++j) {
        const double l = lambdas(j);
        const double w = std::abs(l);
        for (int i = 0; i < grid; ++i) {
            const double t = out.time(i);
            if (w > kernel_tol) {
                const cx a = std::exp(cx(0.0, -w * (t - t1))) * trace_t1(j);
                const cx b = std::exp(cx(0.0, -w * (t2 - t))) * trace_t2(j);
                out.coeffs(i, j) = (a - b) / cx(0.0, 2.0 * w);
            } else {
                out.coeffs(i, j) = -(t - t1) * trace_t1(j);
            }
        }
    }
    return out;
}

// Residual table of the propagator identities on the product model, measured
// over seeded random piecewise-linear trial sections.
struct FeynmanIdentityReport {
    double ds_minus_id = 0.0;       // D S - 1 on negative-chirality sections
    double sd_minus_id_r = 0.0;     // S D - 1 - R on positive-chirality sections
    double aps_trace = 0.0;         // nonnegative part of (S u)(t1)
    double sd_on_aps = 0.0;         // S D - 1 on APS sections
    int trials = 0;
};

namespace detail {

// cell description of D u = (d/dt + i lambda) u for the piecewise-linear
// interpolant of u, one mode at a time
inline fey::CellIntegrand dirac_of_linear(const cxvec& values, double t1, double dt,
                                          double lambda) {
    fey::CellIntegrand c;
    c.t0 = t1;
    c.dt = dt;
    c.cells.resize(static_cast<size_t>(values.size()) - 1);
    const cx il(0.0, lambda);
    for (Eigen::Index k = 0; k + 1 < values.size(); ++k) {
        const cx slope = (values(k + 1) - values(k)) / dt;
        c.cells[static_cast<size_t>(k)] = {slope + il * values(k),
                                           il * (values(k + 1) - values(k))};
    }
    return c;
}

}  // namespace detail

inline FeynmanIdentityReport check_feynman_identities(const rvec& lambdas, double t1,
                                                      double t2, int grid, int trials,
                                                      unsigned seed,
                                                      double kernel_tol = kDefaultKernelTol) {
    detail::check_feynman_grid(lambdas, t1, t2, grid);
    FeynmanIdentityReport rep;
    rep.trials = trials;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    const int modes = static_cast<int>(lambdas.size());
    const double dt = (t2 - t1) / (grid - 1);

    auto random_section = [&](SpacetimeSection::Chirality chi) {
        SpacetimeSection s = SpacetimeSection::zero(t1, t2, grid, modes, chi);
        for (int j = 0; j < modes; ++j) {
            const double scale = std::pow(1.0 + std::abs(lambdas(j)), -2.0);
            // smooth-ish random profile: random low-order trig series sampled
            // on the grid; the section itself is its PL interpolant
            cx a(gauss(rng), gauss(rng)), b(gauss(rng), gauss(rng)),
                c(gauss(rng), gauss(rng));
            for (int i = 0; i < grid; ++i) {
                const double u = double(i) / (grid - 1);
                s.coeffs(i, j) = scale * (a + b * std::sin(2.0 * M_PI * u + 0.3) +
                                          c * std::cos(M_PI * u));
            }
        }
        return s;
    };

    auto snapped = [&](int j) {
        return std::abs(lambdas(j)) <= kernel_tol ? 0.0 : lambdas(j);
    };

    for (int trial = 0; trial < trials; ++trial) {
        // (i) D(S z) = z and (iii) the APS trace of S z
        auto z = random_section(SpacetimeSection::Chirality::minus);
        for (int j = 0; j < modes; ++j) {
            const double l = snapped(j);
            auto cells = fey::CellIntegrand::from_nodal_linear(t1, dt, z.coeffs.col(j));
            auto sz = fey::conv_h(cells, l);
            for (int i = 0; i < grid; ++i) {
                const cx resid = sz.deriv(i) + cx(0.0, l) * sz.value(i) - z.coeffs(i, j);
                rep.ds_minus_id = std::max(rep.ds_minus_id, std::abs(resid));
            }
            if (l >= 0.0) rep.aps_trace = std::max(rep.aps_trace, std::abs(sz.value(0)));
        }

        // (ii) S(D u) = u + R u
        auto u = random_section(SpacetimeSection::Chirality::plus);
        auto run_right_identity = [&](const SpacetimeSection& v) {
            cxvec tr1 = v.coeffs.row(0).transpose();
            cxvec tr2 = v.coeffs.row(grid - 1).transpose();
            auto r = remainder_R(tr1, tr2, lambdas, t1, t2, grid, kernel_tol);
            double worst = 0.0;
            for (int j = 0; j < modes; ++j) {
                const double l = snapped(j);
                auto du = detail::dirac_of_linear(v.coeffs.col(j), t1, dt, l);
                auto sdu = fey::conv_h(du, l);
                for (int i = 0; i < grid; ++i) {
                    const cx resid = sdu.value(i) - v.coeffs(i, j) - r.coeffs(i, j);
                    worst = std::max(worst, std::abs(resid));
                }
            }
            return worst;
        };
        rep.sd_minus_id_r = std::max(rep.sd_minus_id_r, run_right_identity(u));

        // (iv) S D = 1 on APS sections (traces projected away)
        auto aps = u;
        for (int j = 0; j < modes; ++j) {
            const double l = snapped(j);
            if (l >= 0.0) aps.coeffs(0, j) = 0.0;
            if (l <= 0.0) aps.coeffs(grid - 1, j) = 0.0;
        }
        rep.sd_on_aps = std::max(rep.sd_on_aps, run_right_identity(aps));
    }
    return rep;
}

}  // namespace lorindex
