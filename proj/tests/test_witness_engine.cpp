#include <catch2/catch_amalgamated.hpp>

#include "stellarcert/witness_engine.hpp"

using namespace stellarcert;
using Catch::Matchers::WithinAbs;

TEST_CASE("witness builders") {
    DetectorParams p{0.5, 0.5};
    WitnessSpec w0 = witness_single_click(p);
    CHECK(w0.lambda == 0.0);
    CHECK(w0.combo.identity_coeff == 0.0);

    WitnessSpec wl = witness_click_minus_double(p, 0.7);
    CHECK(wl.lambda == 0.7);
    CHECK(wl.combo.identity_coeff == -0.7);
    for (long n : {0L, 1L, 3L, 8L}) {
        double expect = prob_single_click(p, n, Outcome::CLICK_D1_ONLY) -
                        0.7 * prob_double_click(p, n);
        CHECK_THAT(combo_coefficient(wl.combo, n), WithinAbs(expect, 1e-13));
    }

    // lambda = 0 must reduce to the plain single-click witness.
    WitnessSpec wz = witness_click_minus_double(p, 0.0);
    for (long n : {0L, 1L, 2L, 5L})
        CHECK_THAT(combo_coefficient(wz.combo, n),
                   WithinAbs(combo_coefficient(w0.combo, n), 1e-15));
}

TEST_CASE("projected witness matches a brute-force rotation of the POVM") {
    DetectorParams p{0.5, 0.5};
    WitnessSpec spec = witness_single_click(p);
    GaussianParams g{0.3, complex(1.0, 0.0)};

    const int n_dim = 256;
    Eigen::MatrixXcd a = ladder_matrix(n_dim);
    Eigen::MatrixXcd gen_d = g.alpha * a.adjoint() - std::conj(g.alpha) * a;
    Eigen::MatrixXcd gen_s = 0.5 * g.r * (a.adjoint() * a.adjoint() - a * a);
    Eigen::MatrixXcd u = matrix_exp(gen_d) * matrix_exp(gen_s);

    Eigen::MatrixXcd direct = Eigen::MatrixXcd::Zero(2, 2);
    for (int n = 0; n < n_dim; ++n) {
        double r1 = prob_single_click(p, n, Outcome::CLICK_D1_ONLY);
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                direct(j, k) += r1 * u(j, n) * std::conj(u(k, n));
    }

    Eigen::MatrixXcd w = projected_witness(spec, 2, g);
    CHECK((w - direct).cwiseAbs().maxCoeff() < 1e-8);
    CHECK_THAT(objective(spec, 2, g), WithinAbs(hermitian_max_eig(direct), 1e-8));
}

TEST_CASE("identity point evaluates to exact Fock coefficients") {
    WitnessSpec spec = witness_single_click({1.0, 0.5});
    // At U = 1 the projected witness is diag(R1(0), ..., R1(m-1)).
    CHECK(objective(spec, 2, GaussianParams{}) == 0.5);
    CHECK(objective(spec, 1, GaussianParams{}) == 0.0);
}

TEST_CASE("threshold optimization reproduces known values") {
    SearchConfig cfg;
    ThresholdResult t1 = optimize_threshold(witness_single_click({1.0, 0.5}), 1, cfg);
    CHECK_THAT(t1.value, WithinAbs(0.2979, 5e-4));
    CHECK(t1.converged);
    CHECK_FALSE(t1.boundary_hugging);
    // The reported argmax reproduces the reported value.
    CHECK_THAT(objective(witness_single_click({1.0, 0.5}), 1, t1.argmax),
               WithinAbs(t1.value, 1e-12));
    CHECK(t1.grid_value <= t1.value);
    CHECK(t1.evaluations > cfg.alpha_points * cfg.r_points);

    ThresholdResult t2 = optimize_threshold(witness_single_click({0.6, 0.5}), 2, cfg);
    CHECK_THAT(t2.value, WithinAbs(0.3119, 5e-4));

    // Halving the grid must not move the answer at the contract tolerance.
    SearchConfig coarse;
    coarse.alpha_points = 41;
    coarse.r_points = 41;
    ThresholdResult t1c = optimize_threshold(witness_single_click({1.0, 0.5}), 1, coarse);
    CHECK_THAT(t1c.value, WithinAbs(t1.value, 5e-4));
}

TEST_CASE("thresholds grow strictly with the target rank") {
    DetectorParams p{0.4, 0.5};
    WitnessSpec spec = witness_single_click(p);
    SearchConfig cfg;
    cfg.alpha_points = 61;
    cfg.r_points = 61;
    cfg.multistarts = 10;
    double w1 = optimize_threshold(spec, 1, cfg).value;
    double w2 = optimize_threshold(spec, 2, cfg).value;
    double w3 = optimize_threshold(spec, 3, cfg).value;
    CHECK(w1 < w2);
    CHECK(w2 < w3);
    double wmax = wmax_single_click(p).value;
    CHECK(w3 < wmax);
    CHECK_THAT(w1, WithinAbs(0.2696, 5e-4));
    CHECK_THAT(w2, WithinAbs(0.2810, 5e-4));
    CHECK_THAT(w3, WithinAbs(0.2881, 5e-4));
}

TEST_CASE("boundary hugging is flagged when the box is too small") {
    SearchConfig tiny;
    tiny.alpha_max = 0.1;
    tiny.r_max = 0.05;
    tiny.alpha_points = 21;
    tiny.r_points = 21;
    tiny.multistarts = 4;
    ThresholdResult t = optimize_threshold(witness_single_click({1.0, 0.5}), 1, tiny);
    CHECK(t.boundary_hugging);
}

TEST_CASE("gap_delta closed cases") {
    // eta = 0.4: R1(2) = R1(4) = 0.28 tie just below R1(3) = 0.296.
    CHECK_THAT(gap_delta({0.4, 0.5}, 3), WithinAbs(0.016, 1e-12));
    CHECK(gap_delta({0.4, 0.5}, 2) < 0.0);
    CHECK_THAT(gap_delta({0.5, 0.5}, 2), WithinAbs(0.015625, 1e-12));
    CHECK_THROWS_AS(gap_delta({0.5, 0.5}, 0), std::invalid_argument);
}

TEST_CASE("fidelity bound is tight against the strongest competitor") {
    DetectorParams p{0.4, 0.5};
    double eps = 0.3;
    double r1_3 = prob_single_click(p, 3, Outcome::CLICK_D1_ONLY);
    double r1_2 = prob_single_click(p, 2, Outcome::CLICK_D1_ONLY);
    double r1_1 = prob_single_click(p, 1, Outcome::CLICK_D1_ONLY);

    // Mixing |3> with the runner-up |2> saturates the bound: F = 1 - eps.
    double p_meas = (1.0 - eps) * r1_3 + eps * r1_2;
    CHECK_THAT(fidelity_lower_bound(p_meas, p, 3), WithinAbs(1.0 - eps, 1e-12));

    // Mixing with |1> keeps the bound valid but loose.
    p_meas = (1.0 - eps) * r1_3 + eps * r1_1;
    CHECK(fidelity_lower_bound(p_meas, p, 3) < 1.0 - eps);

    // m = 2 is not the R1 maximizer at eta = 0.4, so no bound exists.
    CHECK_THROWS_AS(fidelity_lower_bound(0.2, p, 2), std::domain_error);
    CHECK_THROWS_AS(fidelity_lower_bound(1.5, p, 3), std::invalid_argument);
}

TEST_CASE("lambda sweep: samples and consistency with single optimization") {
    DetectorParams p{0.5, 0.5};
    SearchConfig cfg;
    cfg.alpha_points = 41;
    cfg.r_points = 41;
    cfg.multistarts = 6;
    std::vector<double> lambdas{-0.5, 0.0, 1.0, 5.0};
    RegionBoundary b = lambda_sweep(p, 1, lambdas, cfg);
    REQUIRE(b.samples.size() == 4);
    CHECK(b.m == 1);

    for (const auto& s : b.samples) CHECK(s.converged);

    // The lambda = 0 sample is the plain single-click threshold.
    double w0 = optimize_threshold(witness_single_click(p), 1, cfg).value;
    auto it = std::find_if(b.samples.begin(), b.samples.end(),
                           [](const BoundarySample& s) { return s.lambda == 0.0; });
    REQUIRE(it != b.samples.end());
    CHECK_THAT(it->threshold, WithinAbs(w0, 1e-10));

    // W_lambda is non-increasing in lambda (a larger coincidence penalty can
    // only lower the supremum).
    for (size_t i = 1; i < b.samples.size(); ++i)
        CHECK(b.samples[i].threshold <= b.samples[i - 1].threshold + 1e-12);

    CHECK(b.polyline.size() >= 2);
    CHECK(b.polyline.front().first == 0.0);
}

TEST_CASE("rank thresholds are nested for fixed lambda") {
    DetectorParams p{0.5, 0.5};
    SearchConfig cfg;
    cfg.alpha_points = 41;
    cfg.r_points = 41;
    cfg.multistarts = 6;
    WitnessSpec spec = witness_click_minus_double(p, 0.5);
    double w1 = optimize_threshold(spec, 1, cfg).value;
    double w2 = optimize_threshold(spec, 2, cfg).value;
    CHECK(w1 <= w2 + 1e-12);
}

TEST_CASE("envelope polyline") {
    auto mk = [](double lambda, double w) {
        return BoundarySample{lambda, w, true, {}, false};
    };

    SECTION("flat line dominates a steeper, higher one") {
        auto poly = detail::envelope_polyline({mk(0.0, 0.3), mk(1.0, 0.32)});
        REQUIRE(poly.size() == 2);
        CHECK(poly.front() == std::make_pair(0.0, 0.3));
        CHECK(poly.back() == std::make_pair(1.0, 0.3));
    }

    SECTION("breakpoint between two active lines") {
        // y = 0.3 and y = 0.1 + x cross at x = 0.2.
        auto poly = detail::envelope_polyline({mk(0.0, 0.3), mk(1.0, 0.1)});
        REQUIRE(poly.size() == 3);
        CHECK_THAT(poly[1].first, WithinAbs(0.2, 1e-14));
        CHECK_THAT(poly[1].second, WithinAbs(0.3, 1e-14));
        // Slopes along the polyline never increase.
        double s01 = (poly[1].second - poly[0].second) / (poly[1].first - poly[0].first);
        double s12 = (poly[2].second - poly[1].second) / (poly[2].first - poly[1].first);
        CHECK(s01 >= s12);
    }

    SECTION("clips at the top of the unit square") {
        auto poly = detail::envelope_polyline({mk(5.0, 0.01)});
        REQUIRE(poly.size() == 3);
        CHECK_THAT(poly[1].first, WithinAbs(0.198, 1e-12));
        CHECK(poly[1].second == 1.0);
        CHECK(poly[2] == std::make_pair(1.0, 1.0));
    }

    SECTION("truncates where the envelope descends through zero") {
        auto poly = detail::envelope_polyline({mk(-1.0, 0.5)});
        REQUIRE(poly.size() == 2);
        CHECK(poly.front() == std::make_pair(0.0, 0.5));
        CHECK_THAT(poly.back().first, WithinAbs(0.5, 1e-14));
        CHECK(poly.back().second == 0.0);
    }
}

TEST_CASE("certification verdicts") {
    RegionBoundary level1;
    level1.m = 1;
    level1.samples = {{0.0, 0.3, true, {}, false}, {1.0, 0.35, true, {}, false}};
    RegionBoundary level2;
    level2.m = 2;
    level2.samples = {{0.0, 0.45, true, {}, false}, {1.0, 0.5, true, {}, false}};
    // Generous physical region (eta = 1, T = 0.75 line) so the synthetic
    // points below stay inside it.
    PhysicalBoundary phys = physical_boundary({1.0, 0.75});
    std::vector<RegionBoundary> levels{level1, level2};

    CertificationVerdict v = certify(0.36, 0.1, levels, phys);
    CHECK(v.certified_rank == 1);
    CHECK(v.witness_lambda == 0.0);
    CHECK_THAT(v.margin, WithinAbs(0.06, 1e-14));
    CHECK_FALSE(v.outside_physical);

    v = certify(0.25, 0.1, levels, phys);
    CHECK(v.certified_rank == 0);
    CHECK(v.margin < 0.0);

    // Slack can veto a small violation.
    v = certify(0.36, 0.1, levels, phys, 0.07);
    CHECK(v.certified_rank == 0);

    // A strong point certifies the higher level.
    v = certify(0.5, 0.02, levels, phys);
    CHECK(v.certified_rank == 2);

    // Above the eta = 1 physical line -> flagged.
    PhysicalBoundary tri = physical_boundary({1.0, 0.5});
    v = certify(0.45, 0.5, levels, tri);
    CHECK(v.outside_physical);

    CHECK_THROWS_AS(certify(1.2, 0.0, levels, phys), std::invalid_argument);
    CHECK_THROWS_AS(certify(0.5, 0.5, levels, phys, -0.1), std::invalid_argument);
}

TEST_CASE("search configuration is validated") {
    SearchConfig bad;
    bad.alpha_points = 1;
    CHECK_THROWS_AS(optimize_threshold(witness_single_click({0.5, 0.5}), 1, bad),
                    std::invalid_argument);
    SearchConfig neg;
    neg.r_max = -1.0;
    CHECK_THROWS_AS(optimize_threshold(witness_single_click({0.5, 0.5}), 1, neg),
                    std::invalid_argument);
    CHECK_THROWS_AS(lambda_sweep({0.5, 0.5}, 1, {}, SearchConfig{}),
                    std::invalid_argument);

    std::vector<double> grid = default_lambda_grid();
    CHECK(grid.size() == 251);
    CHECK(std::find(grid.begin(), grid.end(), 0.0) != grid.end());
    CHECK(grid.front() == -1.0);
    CHECK_THAT(grid.back(), WithinAbs(100.0, 1e-12));
}

TEST_CASE("combo expectation matches the truncated trace") {
    DetectorParams p{0.5, 0.75};
    GaussianParams g{0.6, complex(-0.9, 1.2)};
    double nbar = 0.35;
    int n_trunc = 200;
    Eigen::MatrixXcd rho = dst_block(n_trunc + 1, g, nbar);
    for (Outcome oc : {Outcome::NO_CLICK, Outcome::CLICK_D1_ONLY,
                       Outcome::CLICK_D2_ONLY, Outcome::DOUBLE_CLICK,
                       Outcome::CLICK_SINGLE_DETECTOR}) {
        ThermalCombo c = povm_thermal_decomposition(p, oc);
        double direct = 0.0;
        for (int n = 0; n <= n_trunc; ++n)
            direct += combo_coefficient(c, n) * rho(n, n).real();
        CHECK_THAT(combo_expectation(c, g, nbar), WithinAbs(direct, 1e-9));
    }
}
