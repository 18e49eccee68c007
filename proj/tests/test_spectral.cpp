#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "lorindex/spectral.hpp"
#include "oracles.hpp"

using namespace lorindex;

namespace {

cxmat random_hermitian(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    cxmat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = cx(g(rng), g(rng));
    return 0.5 * (a + a.adjoint().eval());
}

cxmat random_unitary(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    cxmat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = cx(g(rng), g(rng));
    Eigen::HouseholderQR<cxmat> qr(a);
    cxmat q = qr.householderQ();
    return q;
}

}  // namespace

TEST_CASE("eigendecompose_scalar_and_diagonal") {
    cxmat m(1, 1);
    m(0, 0) = 0.25;
    auto spec = eigendecompose(HermitianMatrix::checked(m));
    REQUIRE(spec.eigenvalues.size() == 1);
    CHECK(spec.eigenvalues(0) == Catch::Approx(0.25));

    cxmat d = cxmat::Zero(3, 3);
    d(0, 0) = -1.0;
    d(1, 1) = 0.0;
    d(2, 2) = 1.0;
    auto s3 = eigendecompose(HermitianMatrix::checked(d));
    CHECK(s3.eigenvalues(0) == -1.0);
    CHECK(s3.eigenvalues(1) == 0.0);
    CHECK(s3.eigenvalues(2) == 1.0);
    CHECK((s3.eigenvectors - cxmat::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("eigendecompose_reconstruction_residual") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 5; ++rep) {
        cxmat h = random_hermitian(8, rng);
        auto spec = eigendecompose(HermitianMatrix::checked(h));
        cxmat rec = spec.eigenvectors * spec.eigenvalues.asDiagonal() *
                    spec.eigenvectors.adjoint();
        CHECK((rec - h).cwiseAbs().maxCoeff() <= 1e-10 * h.cwiseAbs().maxCoeff());
        for (int j = 0; j + 1 < 8; ++j)
            CHECK(spec.eigenvalues(j) <= spec.eigenvalues(j + 1));
    }
}

TEST_CASE("eigendecompose_rejects_non_hermitian") {
    cxmat m(2, 2);
    m << cx(0, 0), cx(1, 0), cx(0, 0), cx(0, 0);
    CHECK_THROWS_AS(HermitianMatrix::checked(m), numerical_error);
}

TEST_CASE("eigendecompose_deterministic_phase") {
    std::mt19937_64 rng(11);
    cxmat h = random_hermitian(6, rng);
    auto s1 = eigendecompose(HermitianMatrix::checked(h));
    auto s2 = eigendecompose(HermitianMatrix::checked(h));
    CHECK((s1.eigenvectors - s2.eigenvectors).cwiseAbs().maxCoeff() == 0.0);
    // first non-negligible component of every column is real positive
    for (int j = 0; j < 6; ++j) {
        for (int i = 0; i < 6; ++i) {
            if (std::abs(s1.eigenvectors(i, j)) > 1e-9) {
                CHECK(s1.eigenvectors(i, j).imag() == Catch::Approx(0.0).margin(1e-14));
                CHECK(s1.eigenvectors(i, j).real() > 0.0);
                break;
            }
        }
    }
}

TEST_CASE("spectral_projector_ranks_and_endpoint_semantics") {
    cxmat d = cxmat::Zero(3, 3);
    d(0, 0) = -1.0;
    d(1, 1) = 0.0;
    d(2, 2) = 1.0;
    auto spec = eigendecompose(HermitianMatrix::checked(d));
    const double tol = 1e-8;

    auto rank = [](const HermitianMatrix& p) {
        return static_cast<int>(std::lround(p.entries.real().trace()));
    };
    CHECK(rank(spectral_projector(spec, IntervalSpec::nonnegative(), tol)) == 2);
    CHECK(rank(spectral_projector(spec, IntervalSpec::negative(), tol)) == 1);
    CHECK(rank(spectral_projector(spec, IntervalSpec::nonpositive(), tol)) == 2);
    CHECK(rank(spectral_projector(spec, IntervalSpec::positive(), tol)) == 1);
}

TEST_CASE("spectral_projector_by_inspection") {
    cxmat d = cxmat::Zero(2, 2);
    d(0, 0) = -0.75;
    d(1, 1) = 0.25;
    auto spec = eigendecompose(HermitianMatrix::checked(d));
    auto p = spectral_projector(spec, IntervalSpec::negative(), 1e-8);
    cxmat expect = cxmat::Zero(2, 2);
    expect(0, 0) = 1.0;
    CHECK((p.entries - expect).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("spectral_projector_endpoint_ambiguity_is_an_error") {
    cxmat d = cxmat::Zero(2, 2);
    d(0, 0) = 3e-8;  // inside (tol, 10*tol) of the endpoint 0
    d(1, 1) = 1.0;
    auto spec = eigendecompose(HermitianMatrix::checked(d));
    CHECK_THROWS_AS(spectral_projector(spec, IntervalSpec::nonnegative(), 1e-8),
                    numerical_error);
}

TEST_CASE("spectral_projector_complement_sums_to_identity") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 6; ++rep) {
        cxmat h = random_hermitian(7, rng);
        auto spec = eigendecompose(HermitianMatrix::checked(h));
        std::uniform_real_distribution<double> cut(-1.5, 1.5);
        IntervalSpec half(-std::numeric_limits<double>::infinity(), cut(rng), false,
                          rep % 2 == 0);
        auto p = spectral_projector(spec, half, 1e-8);
        auto q = spectral_projector(spec, half.complement_half_line(), 1e-8);
        CHECK((p.entries + q.entries - cxmat::Identity(7, 7)).cwiseAbs().maxCoeff() <= 1e-10);
        // idempotence and self-adjointness
        CHECK((p.entries * p.entries - p.entries).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((p.entries - p.entries.adjoint().eval()).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("kernel_dim_examples_and_gap_rule") {
    cxmat d = cxmat::Zero(3, 3);
    d(0, 0) = -1.0;
    d(2, 2) = 1.0;
    auto spec = eigendecompose(HermitianMatrix::checked(d));
    CHECK(kernel_dim(spec, 1e-8) == 1);

    CHECK(kernel_dim(LatticeSpectrum{0.25}, 1e-8) == 0);
    CHECK(kernel_dim(LatticeSpectrum{0.0}, 1e-8) == 1);

    cxmat bad = cxmat::Zero(2, 2);
    bad(0, 0) = 5e-7;  // inside (1e-8, 1e-6)
    bad(1, 1) = 1.0;
    auto bs = eigendecompose(HermitianMatrix::checked(bad));
    CHECK_THROWS_AS(kernel_dim(bs, 1e-8), numerical_error);
}

TEST_CASE("kernel_dim_invariant_under_unitary_conjugation") {
    std::mt19937_64 rng(41);
    cxmat d = cxmat::Zero(5, 5);
    d(0, 0) = -2.0;
    d(1, 1) = 0.0;
    d(2, 2) = 0.0;
    d(3, 3) = 1.0;
    d(4, 4) = 3.0;
    for (int rep = 0; rep < 4; ++rep) {
        cxmat u = random_unitary(5, rng);
        cxmat h = u * d * u.adjoint();
        auto spec = eigendecompose(HermitianMatrix::checked(h));
        CHECK(kernel_dim(spec, 1e-8) == 2);
    }
}

TEST_CASE("eta_lattice_validated_against_series_oracle") {
    // the oracle itself on known symmetric points first
    CHECK(oracles::eta_lattice_series_oracle(0.5) == Catch::Approx(0.0).margin(1e-9));
    CHECK(oracles::eta_lattice_series_oracle(0.0) == Catch::Approx(0.0).margin(1e-9));
    CHECK(oracles::eta_lattice_series_oracle(0.25) == Catch::Approx(0.5).margin(1e-9));

    for (double c : {0.1, 0.2, 0.25, 0.3, 0.4, 0.6, 0.75, 0.9, 1.3, -0.7, 2.05}) {
        CHECK(eta_lattice(c) ==
              Catch::Approx(oracles::eta_lattice_series_oracle(c)).margin(1e-8));
    }
    CHECK(eta_lattice(0.5) == 0.0);
    CHECK(eta_lattice(0.0) == 0.0);
    CHECK(eta_lattice(0.25) == 0.5);
}

TEST_CASE("eta_lattice_reflection_and_shift_symmetries") {
    // dyadic offsets keep the identities exact in floating point
    for (int k = 1; k < 64; ++k) {
        const double c = k / 64.0;
        CHECK(eta_lattice(c) == -eta_lattice(1.0 - c));
        CHECK(eta_lattice(c + 1.0) == eta_lattice(c));
        CHECK(eta_lattice(c - 3.0) == eta_lattice(c));
    }
}

TEST_CASE("xi_examples") {
    CHECK(xi(0, 0.5) == 0.25);
    CHECK(xi(1, 0.0) == 0.5);
    CHECK(xi(0, -0.5) == -0.25);
    CHECK_THROWS_AS(xi(-1, 0.0), config_error);
}
