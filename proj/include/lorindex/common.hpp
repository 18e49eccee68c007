#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lorindex {

using cx = std::complex<double>;
using cxmat = Eigen::MatrixXcd;
using cxvec = Eigen::VectorXcd;
using rmat = Eigen::MatrixXd;
using rvec = Eigen::VectorXd;

inline constexpr double kDefaultKernelTol = 1e-8;

// Bad or inconsistent input data / configuration. Maps to exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical ill-conditioning: gap-rule violations, endpoint ambiguity,
// unitarity loss, step-size underflow. Maps to exit code 3.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A theorem-level agreement check failed while all gap rules passed.
// Maps to exit code 4.
struct theorem_violation : std::runtime_error {
    explicit theorem_violation(const std::string& msg) : std::runtime_error(msg) {}
};

// Operator norm of a Hermitian matrix (largest |eigenvalue|).
inline double hermitian_op_norm(const cxmat& h) {
    if (h.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<cxmat> es(h, Eigen::EigenvaluesOnly);
    const rvec& ev = es.eigenvalues();
    return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

// Operator norm of a general matrix via ||M||^2 = ||M* M||.
inline double op_norm(const cxmat& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    if (m.rows() >= m.cols())
        return std::sqrt(std::max(0.0, hermitian_op_norm(m.adjoint() * m)));
    return std::sqrt(std::max(0.0, hermitian_op_norm(m * m.adjoint())));
}

// FNV-1a over bytes; used for config hashes and the binary cache key.
inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace lorindex
