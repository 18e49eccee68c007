#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lorindex/common.hpp"

namespace lorindex {

namespace detail {

// Natural cubic spline on a uniform grid.
struct CubicSpline {
    double t1 = 0.0, t2 = 1.0;
    std::vector<double> y;
    std::vector<double> m;  // second derivatives at knots

    static CubicSpline build(double t1, double t2, std::vector<double> values) {
        CubicSpline s;
        s.t1 = t1;
        s.t2 = t2;
        s.y = std::move(values);
        const size_t n = s.y.size();
        s.m.assign(n, 0.0);
        if (n < 3) return s;
        const double h = (t2 - t1) / double(n - 1);
        std::vector<double> diag(n - 2, 4.0), rhs(n - 2);
        for (size_t i = 0; i + 2 < n; ++i)
            rhs[i] = 6.0 * (s.y[i] - 2.0 * s.y[i + 1] + s.y[i + 2]) / (h * h);
        for (size_t i = 1; i < rhs.size(); ++i) {  // Thomas sweep
            const double w = 1.0 / diag[i - 1];
            diag[i] -= w;
            rhs[i] -= w * rhs[i - 1];
        }
        for (size_t i = rhs.size(); i-- > 0;)
            s.m[i + 1] = (rhs[i] - (i + 2 < n ? s.m[i + 2] : 0.0)) / diag[i];
        return s;
    }

    std::pair<size_t, double> locate(double t) const {
        const size_t n = y.size();
        const double h = (t2 - t1) / double(n - 1);
        double u = (t - t1) / h;
        auto k = static_cast<long>(std::floor(u));
        if (k < 0) k = 0;
        if (k > long(n) - 2) k = long(n) - 2;
        return {static_cast<size_t>(k), u - double(k)};
    }

    double eval(double t) const {
        const auto [k, x] = locate(t);
        const size_t n = y.size();
        const double h = (t2 - t1) / double(n - 1);
        const double a = 1.0 - x;
        return a * y[k] + x * y[k + 1] +
               h * h / 6.0 * ((a * a * a - a) * m[k] + (x * x * x - x) * m[k + 1]);
    }

    double deriv(double t) const {
        const auto [k, x] = locate(t);
        const size_t n = y.size();
        const double h = (t2 - t1) / double(n - 1);
        const double a = 1.0 - x;
        return (y[k + 1] - y[k]) / h +
               h / 6.0 * ((3.0 * x * x - 1.0) * m[k + 1] - (3.0 * a * a - 1.0) * m[k]);
    }
};

}  // namespace detail

// A C^1 real function of time on [t1, t2], given in closed form or as
// uniformly sampled values with cubic interpolation. Carries a derivative
// bound consumed by integrators and the partition planner.
struct Path {
    std::function<double(double)> value;
    std::function<double(double)> deriv;
    double t1 = 0.0, t2 = 1.0;
    double deriv_bound = 0.0;
    std::string kind = "constant";

    double operator()(double t) const { return value(t); }

    static Path constant(double t1, double t2, double v) {
        Path p;
        p.t1 = t1;
        p.t2 = t2;
        p.value = [v](double) { return v; };
        p.deriv = [](double) { return 0.0; };
        p.deriv_bound = 0.0;
        p.kind = "constant";
        return p;
    }

    static Path linear(double t1, double t2, double a, double b) {
        Path p;
        p.t1 = t1;
        p.t2 = t2;
        const double slope = (b - a) / (t2 - t1);
        p.value = [=](double t) { return a + slope * (t - t1); };
        p.deriv = [=](double) { return slope; };
        p.deriv_bound = std::abs(slope);
        p.kind = "linear";
        return p;
    }

    // quintic smoothstep ramp a -> b, C^2 at the endpoints
    static Path smoothstep(double t1, double t2, double a, double b) {
        Path p;
        p.t1 = t1;
        p.t2 = t2;
        const double len = t2 - t1;
        p.value = [=](double t) {
            const double u = std::clamp((t - t1) / len, 0.0, 1.0);
            const double s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
            return a + (b - a) * s;
        };
        p.deriv = [=](double t) {
            const double u = std::clamp((t - t1) / len, 0.0, 1.0);
            const double ds = 30.0 * u * u * (1.0 - u) * (1.0 - u);
            return (b - a) * ds / len;
        };
        p.deriv_bound = 1.875 * std::abs(b - a) / len;  // max of 30 u^2 (1-u)^2
        p.kind = "smoothstep";
        return p;
    }

    // smooth bump height * sin^2(pi u), vanishing with its derivative at
    // both endpoints; keeps boundary operators untouched by a perturbation
    static Path bump(double t1, double t2, double height) {
        Path p;
        p.t1 = t1;
        p.t2 = t2;
        const double len = t2 - t1;
        p.value = [=](double t) {
            const double s = std::sin(M_PI * (t - t1) / len);
            return height * s * s;
        };
        p.deriv = [=](double t) {
            return height * M_PI / len * std::sin(2.0 * M_PI * (t - t1) / len);
        };
        p.deriv_bound = std::abs(height) * M_PI / len;
        p.kind = "bump";
        return p;
    }

    static Path sampled(double t1, double t2, std::vector<double> values) {
        if (values.size() < 16)
            throw config_error("sampled path needs at least 16 samples for cubic interpolation");
        Path p;
        p.t1 = t1;
        p.t2 = t2;
        auto sp = std::make_shared<detail::CubicSpline>(
            detail::CubicSpline::build(t1, t2, std::move(values)));
        p.value = [sp](double t) { return sp->eval(t); };
        p.deriv = [sp](double t) { return sp->deriv(t); };
        double b = 0.0;
        const int n = 8 * static_cast<int>(sp->y.size());
        for (int i = 0; i <= n; ++i)
            b = std::max(b, std::abs(sp->deriv(t1 + (t2 - t1) * i / n)));
        p.deriv_bound = 1.25 * b;
        p.kind = "samples";
        return p;
    }

    // smoothstep ramp between random endpoints plus a sine series vanishing
    // at both ends: stays C^1 and keeps the endpoint values exact.
    static Path random_smooth(std::mt19937_64& rng, double t1, double t2, double lo,
                              double hi, double wiggle) {
        std::uniform_real_distribution<double> ends(lo, hi);
        const double a = ends(rng), b = ends(rng);
        std::uniform_real_distribution<double> w(-wiggle, wiggle);
        std::vector<double> c(4);
        for (auto& ck : c) ck = w(rng);
        Path base = smoothstep(t1, t2, a, b);
        Path p;
        p.t1 = t1;
        p.t2 = t2;
        const double len = t2 - t1;
        p.value = [=](double t) {
            const double u = (t - t1) / len;
            double v = base.value(t);
            for (size_t k = 0; k < c.size(); ++k)
                v += c[k] / double((k + 1) * (k + 1)) * std::sin(M_PI * double(k + 1) * u);
            return v;
        };
        p.deriv = [=](double t) {
            const double u = (t - t1) / len;
            double v = base.deriv(t);
            for (size_t k = 0; k < c.size(); ++k)
                v += c[k] * M_PI / double(k + 1) * std::cos(M_PI * double(k + 1) * u) / len;
            return v;
        };
        double db = base.deriv_bound;
        for (size_t k = 0; k < c.size(); ++k) db += std::abs(c[k]) * M_PI / double(k + 1) / len;
        p.deriv_bound = db;
        p.kind = "random_smooth";
        return p;
    }

    // precompose with a smooth increasing bijection of [t1, t2]; used by the
    // reparametrization-invariance tests
    Path reparametrized() const {
        Path p = *this;
        const double a = t1, len = t2 - t1;
        auto phi = [=](double t) {
            const double u = (t - a) / len;
            return a + len * (u + 0.15 * std::sin(M_PI * u) * u * (1.0 - u) * 4.0);
        };
        auto dphi = [=](double t) {
            const double u = (t - a) / len;
            return 1.0 + 0.6 * (std::sin(M_PI * u) * (1.0 - 2.0 * u) +
                                M_PI * std::cos(M_PI * u) * u * (1.0 - u));
        };
        auto self = *this;
        p.value = [=](double t) { return self.value(phi(t)); };
        p.deriv = [=](double t) { return self.deriv(phi(t)) * dphi(t); };
        p.deriv_bound = deriv_bound * 2.2;
        p.kind = kind + "+reparam";
        return p;
    }
};

}  // namespace lorindex
