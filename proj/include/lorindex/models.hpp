#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "lorindex/common.hpp"
#include "lorindex/path.hpp"
#include "lorindex/spectral.hpp"

namespace lorindex {

// Circle with a time-dependent flux twist. Boundary operator is the
// shifted lattice diag(m + spin_offset + flux(t)).
struct FluxCircle {
    double spin_offset = 0.0;  // 0 (periodic) or 1/2 (antiperiodic)
    Path flux;
    double t1 = 0.0, t2 = 1.0;
};

// Circle with constant flux plus a Hermitian multiplication operator with
// finitely many Fourier coefficients V_m(t) = amplitude_m * envelope_m(t);
// V_{-m} is the conjugate. A genuinely non-commuting family.
struct PerturbedCircle {
    struct Coefficient {
        int m = 0;
        cx amplitude;
        Path envelope;
    };
    double spin_offset = 0.0;
    double base_flux = 0.0;
    std::vector<Coefficient> potential;  // entries with m >= 0
    double t1 = 0.0, t2 = 1.0;
};

// Closed-form crossing eigenvalue family on the Berger spheres. No matrix
// realization; spectral flow only.
struct BergerFamily {
    int k = 1;
    double t1 = 0.0, t2 = 0.0;
};

using ModelSpec = std::variant<FluxCircle, PerturbedCircle, BergerFamily>;

inline void validate(const ModelSpec& spec) {
    std::visit(
        [](const auto& m) {
            if (!(m.t1 < m.t2)) throw config_error("t1 < t2 required");
        },
        spec);
    if (const auto* f = std::get_if<FluxCircle>(&spec)) {
        if (f->spin_offset != 0.0 && f->spin_offset != 0.5)
            throw config_error("spin_offset must be 0 or 1/2");
    } else if (const auto* p = std::get_if<PerturbedCircle>(&spec)) {
        if (p->spin_offset != 0.0 && p->spin_offset != 0.5)
            throw config_error("spin_offset must be 0 or 1/2");
        for (const auto& c : p->potential) {
            if (c.m < 0) throw config_error("potential coefficients are indexed by m >= 0");
            if (c.m == 0 && std::abs(c.amplitude.imag()) > 0.0)
                throw config_error("potential not Hermitian: V_0 must be real");
        }
    } else if (const auto* b = std::get_if<BergerFamily>(&spec)) {
        if (b->k < 1 || b->k > 31) throw config_error("Berger family needs 1 <= k <= 31");
        if (!(b->t1 > 0.0)) throw config_error("Berger family needs t1 > 0");
    }
}

inline double model_t1(const ModelSpec& s) {
    return std::visit([](const auto& m) { return m.t1; }, s);
}
inline double model_t2(const ModelSpec& s) {
    return std::visit([](const auto& m) { return m.t2; }, s);
}

// Time-dependent Hermitian family in the truncated mode window m = -K..K.
struct OperatorFamily {
    int K = 0;
    double t1 = 0.0, t2 = 0.0;
    bool diagonal = false;
    std::function<rvec(double)> diag_fn;   // set when diagonal
    std::function<cxmat(double)> dense_fn;
    double smoothness_budget = 0.0;  // bound on ||dA/dt||
    std::string tag;

    int dim() const { return 2 * K + 1; }

    HermitianMatrix evaluate(double t) const {
        return HermitianMatrix::checked(dense_fn(t), tag);
    }

    // eigenvalues only, ascending; cheap for the diagonal families
    rvec eigenvalues_at(double t) const {
        if (diagonal) {
            rvec d = diag_fn(t);
            std::sort(d.data(), d.data() + d.size());
            return d;
        }
        Eigen::SelfAdjointEigenSolver<cxmat> es(dense_fn(t), Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }
};

inline OperatorFamily build_family(const ModelSpec& spec, int K) {
    validate(spec);
    if (K < 1) throw config_error("truncation half-width K must be >= 1");
    OperatorFamily fam;
    fam.K = K;
    const int n = 2 * K + 1;

    if (const auto* f = std::get_if<FluxCircle>(&spec)) {
        fam.t1 = f->t1;
        fam.t2 = f->t2;
        fam.diagonal = true;
        fam.smoothness_budget = f->flux.deriv_bound;
        fam.tag = "flux_circle";
        const double s = f->spin_offset;
        const Path flux = f->flux;
        fam.diag_fn = [K, s, flux](double t) {
            rvec d(2 * K + 1);
            const double a = flux(t);
            for (int m = -K; m <= K; ++m) d(m + K) = m + s + a;
            return d;
        };
        fam.dense_fn = [fn = fam.diag_fn, n](double t) {
            return cxmat(fn(t).asDiagonal());
        };
        return fam;
    }

    if (const auto* p = std::get_if<PerturbedCircle>(&spec)) {
        int bandwidth = 0;
        for (const auto& c : p->potential) bandwidth = std::max(bandwidth, c.m);
        if (bandwidth > 2 * K) {
            std::ostringstream os;
            os << "truncation too small: potential bandwidth " << bandwidth
               << " exceeds 2K = " << 2 * K;
            throw config_error(os.str());
        }
        fam.t1 = p->t1;
        fam.t2 = p->t2;
        fam.diagonal = false;
        fam.tag = "perturbed_circle";
        double budget = 0.0;
        for (const auto& c : p->potential)
            budget += (c.m == 0 ? 1.0 : 2.0) * std::abs(c.amplitude) * c.envelope.deriv_bound;
        fam.smoothness_budget = budget;
        const auto model = *p;
        fam.dense_fn = [model, K, n](double t) {
            cxmat a = cxmat::Zero(n, n);
            for (int m = -K; m <= K; ++m) a(m + K, m + K) = m + model.spin_offset + model.base_flux;
            for (const auto& c : model.potential) {
                const cx v = c.amplitude * c.envelope(t);
                if (c.m == 0) {
                    for (int i = 0; i < n; ++i) a(i, i) += v.real();
                    continue;
                }
                for (int j = 0; j < n; ++j) {  // row i couples to column i - m
                    const int i = j + c.m;
                    if (i < n) {
                        a(i, j) += v;
                        a(j, i) += std::conj(v);
                    }
                }
            }
            return a;
        };
        return fam;
    }

    throw config_error("closed-form-only model: no matrix realization");
}

// One closed-form eigenvalue curve with multiplicity.
struct EigCurve {
    std::function<double(double)> lambda;
    std::function<double(double)> dlambda;
    long long multiplicity = 1;
};

struct EigCurveFamily {
    std::vector<EigCurve> curves;
    double t1 = 0.0, t2 = 0.0;
    std::vector<std::string> warnings;
};

inline long long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// lambda(t) = (-1)^(k-1) (t/2 - 2k), multiplicity C(2k, k); crosses zero at t = 4k.
inline EigCurveFamily berger_crossing_curve(int k, double t1, double t2) {
    validate(ModelSpec{BergerFamily{k, t1, t2}});
    EigCurveFamily fam;
    fam.t1 = t1;
    fam.t2 = t2;
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;
    EigCurve c;
    c.lambda = [sign, k](double t) { return sign * (0.5 * t - 2.0 * k); };
    c.dlambda = [sign](double) { return 0.5 * sign; };
    c.multiplicity = binomial(2 * k, k);
    fam.curves.push_back(std::move(c));
    if (!(t1 < 4.0 * k && 4.0 * k < t2)) {
        std::ostringstream os;
        os << "window [" << t1 << ", " << t2 << "] does not straddle the crossing at t = "
           << 4 * k << "; flow will be 0";
        fam.warnings.push_back(os.str());
    }
    return fam;
}

// Lattice eigenvalue curves of the flux circle; used to cross-check the
// partition algorithm against curve tracking.
inline EigCurveFamily flux_eig_curves(const FluxCircle& f, int K) {
    EigCurveFamily fam;
    fam.t1 = f.t1;
    fam.t2 = f.t2;
    for (int m = -K; m <= K; ++m) {
        EigCurve c;
        c.lambda = [m, f](double t) { return m + f.spin_offset + f.flux(t); };
        c.dlambda = [f](double t) { return f.flux.deriv(t); };
        c.multiplicity = 1;
        fam.curves.push_back(std::move(c));
    }
    return fam;
}

// Twisted bulk term of the geometric index formula. In total dimension 2 the
// A-hat contribution vanishes identically and only the first Chern number of
// the flux survives: the endpoint difference of the flux path.
inline double chern_integral(const ModelSpec& spec) {
    const auto* f = std::get_if<FluxCircle>(&spec);
    if (!f) throw config_error("geometric RHS unavailable");
    return f->flux(f->t2) - f->flux(f->t1);
}

struct TransgressionTerm {
    double value = 0.0;
    std::string note;
};

// All catalog models are products near the boundary, so the boundary
// correction form vanishes.
inline TransgressionTerm transgression_term(const ModelSpec& spec) {
    if (std::holds_alternative<BergerFamily>(spec))
        return {0.0, "unused: Berger RHS out of scope"};
    return {0.0, "totally geodesic boundary"};
}

}  // namespace lorindex
