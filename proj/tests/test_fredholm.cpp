#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "lorindex/fredholm.hpp"
#include "oracles.hpp"

using namespace lorindex;

namespace {

FluxCircle flux_model(double a_from, double a_to) {
    FluxCircle f;
    f.spin_offset = 0.0;
    f.t1 = 0.0;
    f.t2 = 1.0;
    f.flux = Path::smoothstep(0.0, 1.0, a_from, a_to);
    return f;
}

// constant-flux circle perturbed by a banded potential whose m = 0 component
// carries the flux ramp; a non-commuting family with engineered index
PerturbedCircle engineered_perturbed(double ramp_to, unsigned seed, double amp = 0.15) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amp, amp);
    PerturbedCircle p;
    p.spin_offset = 0.0;
    p.base_flux = 0.25;
    p.t1 = 0.0;
    p.t2 = 1.0;
    {
        PerturbedCircle::Coefficient ramp;
        ramp.m = 0;
        ramp.amplitude = 1.0;
        ramp.envelope = Path::smoothstep(0.0, 1.0, 0.0, ramp_to);
        p.potential.push_back(ramp);
    }
    for (int m = 1; m <= 2; ++m) {
        PerturbedCircle::Coefficient c;
        c.m = m;
        c.amplitude = cx(u(rng), u(rng));
        c.envelope = Path::bump(0.0, 1.0, 1.0);  // boundary spectra stay lattices
        p.potential.push_back(c);
    }
    return p;
}

BlockDecomposition blocks_for(const ModelSpec& spec, int K, double tol = 1e-8,
                              EvolutionConfig cfg = {}) {
    auto fam = build_family(spec, K);
    auto q = assemble_Q(fam, fam.t1, fam.t2, cfg);
    return block_decompose(q, eigendecompose(fam.evaluate(fam.t1)),
                           eigendecompose(fam.evaluate(fam.t2)), tol);
}

}  // namespace

TEST_CASE("numeric_kernel_edge_cases") {
    auto zero = numeric_kernel(cxmat::Zero(3, 3), 1e-8);
    CHECK(zero.dim() == 3);
    CHECK(zero.accepted_rank == 0);

    auto id = numeric_kernel(cxmat::Identity(4, 4), 1e-8);
    CHECK(id.dim() == 0);
    CHECK(id.accepted_rank == 4);

    cxmat d = cxmat::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = 1e-12;
    auto k = numeric_kernel(d, 1e-8);
    CHECK(k.dim() == 1);
    CHECK(k.gap_ratio == Catch::Approx(1e12).epsilon(1e-6));
    // kernel vector is annihilated to tol * sigma_max
    CHECK((d * k.kernel_basis.col(0)).norm() <= 1e-8);

    cxmat bad2 = cxmat::Zero(3, 3);
    bad2(0, 0) = 1.0;
    bad2(1, 1) = 3e-8;
    bad2(2, 2) = 1e-9;
    CHECK_THROWS_MATCHES(numeric_kernel(bad2, 1e-8), numerical_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("ill-conditioned rank")));
}

TEST_CASE("index_of_block_flux_cases_against_mode_counting_oracle") {
    struct Case {
        double a_to;
        int expect_index, expect_ker, expect_coker;
    };
    // expected values frozen from the mode-counting oracle, checked below
    for (const Case c : {Case{1.25, 1, 1, 0}, Case{0.75, 0, 0, 0}, Case{1.0, 0, 0, 0}}) {
        const auto oracle = oracles::flux_index_oracle(0.0, 0.25, c.a_to, 8);
        REQUIRE(oracle.index == c.expect_index);
        REQUIRE(oracle.dim_ker == c.expect_ker);
        REQUIRE(oracle.dim_coker == c.expect_coker);

        auto b = blocks_for(flux_model(0.25, c.a_to), 8);
        auto r = index_of_block(b, 1e-8);
        CHECK(r.index == oracle.index);
        CHECK(r.dim_ker == oracle.dim_ker);
        CHECK(r.dim_coker == oracle.dim_coker);
        CHECK(r.index == r.dim_ker - r.dim_coker);
    }
}

TEST_CASE("index_stable_under_doubling_and_reparametrization") {
    for (double a_to : {1.25, 0.75, 1.0}) {
        auto r1 = index_of_block(blocks_for(flux_model(0.25, a_to), 8), 1e-8);
        auto r2 = index_of_block(blocks_for(flux_model(0.25, a_to), 16), 1e-8);
        CHECK(r1.index == r2.index);
        CHECK(r1.dim_ker == r2.dim_ker);
    }

    FluxCircle f = flux_model(0.25, 1.25);
    FluxCircle g = f;
    g.flux = f.flux.reparametrized();
    auto r1 = index_of_block(blocks_for(ModelSpec{f}, 8), 1e-8);
    auto r2 = index_of_block(blocks_for(ModelSpec{g}, 8), 1e-8);
    CHECK(r1.index == r2.index);
    CHECK(r1.dim_ker == r2.dim_ker);
    CHECK(r1.dim_coker == r2.dim_coker);
}

TEST_CASE("kernel_isomorphism_flux_and_vacuous_cases") {
    // no kernel: vacuously zero residual
    auto b0 = blocks_for(flux_model(0.25, 0.75), 8);
    auto rep0 = kernel_isomorphism_check(b0, 1e-8);
    CHECK(rep0.residual == 0.0);
    CHECK(rep0.dim_mismatch() == 0);

    // engineered one-dimensional kernel
    auto b1 = blocks_for(flux_model(0.25, 1.25), 8);
    auto rep1 = kernel_isomorphism_check(b1, 1e-8);
    CHECK(rep1.dim_ker_qmm == 1);
    CHECK(rep1.dim_mismatch() == 0);
    CHECK(rep1.residual <= 1e-8);

    // random unitary with generic projectors: kernels empty, check vacuous
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gsn;
    cxmat a(9, 9);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) a(i, j) = cx(gsn(rng), gsn(rng));
    Eigen::HouseholderQR<cxmat> qr(a);
    PropagatorMatrix prop;
    prop.Q = qr.householderQ();
    prop.K = 4;
    auto fam = build_family(flux_model(0.25, 0.75), 4);
    auto spec = eigendecompose(fam.evaluate(0.0));
    auto b2 = block_decompose(prop, spec, spec, 1e-8);
    auto rep2 = kernel_isomorphism_check(b2, 1e-8);
    CHECK(rep2.dim_ker_qmm == 0);
    CHECK(rep2.residual == 0.0);
}

TEST_CASE("lemma_level_kernel_dualities_on_perturbed_models") {
    for (unsigned seed : {11u, 12u, 13u}) {
        auto spec = ModelSpec{engineered_perturbed(1.0, seed)};
        auto b = blocks_for(spec, 24);
        const double tol = 1e-7;
        auto ker_mm = numeric_kernel(b.Qmm, tol);
        auto ker_pp_adj = numeric_kernel(b.Qpp.adjoint(), tol);
        auto ker_pp = numeric_kernel(b.Qpp, tol);
        auto ker_mm_adj = numeric_kernel(b.Qmm.adjoint(), tol);
        CHECK(ker_mm.dim() == ker_pp_adj.dim());
        CHECK(ker_pp.dim() == ker_mm_adj.dim());

        // index of the two diagonal blocks computed independently
        auto imm = index_of_block(b, tol);
        const int ipp = ker_pp.dim() - ker_pp_adj.dim();
        CHECK(imm.index == -ipp);
    }
}

TEST_CASE("smoothing_profile_flux_and_perturbed") {
    // diagonal family: the only nonzero Qpm column is the crossing mode
    auto b = blocks_for(flux_model(0.25, 1.25), 8);
    int above = 0;
    for (Eigen::Index j = 0; j < b.Qpm.cols(); ++j)
        if (b.Qpm.col(j).norm() > 1e-10) ++above;
    CHECK(above == 1);

    // 0.25 -> 0.75 has no crossings at all: profile reports empty
    auto b0 = blocks_for(flux_model(0.25, 0.75), 8);
    auto t0 = smoothing_profile(b0);
    CHECK(t0.empty);

    // non-commuting family: column norms decay with the source frequency
    auto spec = ModelSpec{engineered_perturbed(1.0, 21, 0.3)};
    auto bp = blocks_for(spec, 24);
    auto tp = smoothing_profile(bp);
    CHECK_FALSE(tp.frequency.empty());
    CHECK(tp.slope <= -0.9);
}

TEST_CASE("kernel_smoothness_check_calibration_and_models") {
    // synthetic coefficients ~ f^{-2} must be flagged below the default bar
    const int n = 64;
    rvec freqs(n);
    cxmat vec(n, 1);
    for (int i = 0; i < n; ++i) {
        freqs(i) = i + 1.0;
        vec(i, 0) = std::pow(i + 1.0, -2.0);
    }
    auto cal = kernel_smoothness_check(vec, freqs);
    CHECK(cal.exponent == Catch::Approx(2.0).margin(0.05));
    CHECK_FALSE(cal.smooth);

    // flux kernel vector: exactly one lattice mode, zero at high frequency
    auto b = blocks_for(flux_model(0.25, 1.25), 8);
    auto ker = numeric_kernel(b.Qmm, 1e-8);
    REQUIRE(ker.dim() == 1);
    auto repf = kernel_smoothness_check(ker.kernel_basis, b.f1m);
    CHECK(std::isinf(repf.exponent));
    CHECK(repf.smooth);

    // engineered non-commuting kernel: decay exponent at or above the bar
    auto bp = blocks_for(ModelSpec{engineered_perturbed(1.0, 33)}, 24);
    auto kerp = numeric_kernel(bp.Qmm, 1e-7);
    REQUIRE(kerp.dim() == 1);
    auto repp = kernel_smoothness_check(kerp.kernel_basis, bp.f1m);
    CHECK(repp.exponent >= 4.0);
    CHECK(repp.smooth);

    CHECK_THROWS_MATCHES(kernel_smoothness_check(cxmat(n, 0), freqs), numerical_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("vacuous")));
}

TEST_CASE("perturbed_index_matches_mode_count_when_potential_vanishes_at_ends") {
    // ramp envelope is 0 at t1 and 1 at t2, wiggles vanish at both ends, so
    // the boundary spectra are lattices and the mode-counting oracle applies
    for (double ramp_to : {1.0, 0.5}) {
        auto spec = ModelSpec{engineered_perturbed(ramp_to, 77)};
        auto b = blocks_for(spec, 24);
        auto r = index_of_block(b, 1e-7);
        auto oracle = oracles::flux_index_oracle(0.0, 0.25, 0.25 + ramp_to, 24);
        CHECK(r.index == oracle.index);
    }
}
