#pragma once

#include <cmath>
#include <limits>
#include <sstream>

#include "lorindex/common.hpp"

namespace lorindex {

// Real interval with explicit endpoint closedness. Membership near an
// endpoint is decided by a tolerance rule: |x - endpoint| <= tol counts as
// "at the endpoint" (closed includes, open excludes); distances inside
// (tol, 10*tol) are ambiguous and rejected.
struct IntervalSpec {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool lower_closed = false;
    bool upper_closed = false;

    IntervalSpec() = default;
    IntervalSpec(double lo, double hi, bool lo_closed, bool hi_closed)
        : lower(lo), upper(hi), lower_closed(lo_closed), upper_closed(hi_closed) {
        if (!(lower <= upper)) throw config_error("interval: lower <= upper required");
        if (std::isinf(lower)) lower_closed = false;  // infinite endpoints are open
        if (std::isinf(upper)) upper_closed = false;
    }

    static IntervalSpec nonnegative() { return {0.0, inf(), true, false}; }    // [0, inf)
    static IntervalSpec positive() { return {0.0, inf(), false, false}; }      // (0, inf)
    static IntervalSpec negative() { return {-inf(), 0.0, false, false}; }     // (-inf, 0)
    static IntervalSpec nonpositive() { return {-inf(), 0.0, false, true}; }   // (-inf, 0]

    // Complement with matching endpoint conventions, as the "other half" of a
    // single finite cut. Only meaningful for half-lines.
    IntervalSpec complement_half_line() const {
        if (std::isinf(lower) && !std::isinf(upper))
            return {upper, inf(), !upper_closed, false};
        if (std::isinf(upper) && !std::isinf(lower))
            return {-inf(), lower, false, !lower_closed};
        throw config_error("complement_half_line: not a half-line");
    }

    bool contains(double x, double tol) const {
        if (!std::isinf(lower)) {
            const double d = std::abs(x - lower);
            if (d <= tol) return lower_closed;
            if (d < 10.0 * tol) throw_ambiguous(x, lower, tol);
        }
        if (!std::isinf(upper)) {
            const double d = std::abs(x - upper);
            if (d <= tol) return upper_closed;
            if (d < 10.0 * tol) throw_ambiguous(x, upper, tol);
        }
        return x > lower && x < upper;
    }

  private:
    static double inf() { return std::numeric_limits<double>::infinity(); }

    [[noreturn]] static void throw_ambiguous(double x, double endpoint, double tol) {
        std::ostringstream os;
        os << "endpoint ambiguity: eigenvalue " << x << " lies within (tol, 10*tol) of "
           << endpoint << " (tol = " << tol << ")";
        throw numerical_error(os.str());
    }
};

}  // namespace lorindex
