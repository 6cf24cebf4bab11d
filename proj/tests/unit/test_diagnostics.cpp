#include <cmath>
#include <random>

#include <doctest.h>

#include "fedsysid/diagnostics.hpp"
#include "fedsysid/estimation.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/systems.hpp"

using namespace fedsysid;

TEST_CASE("unit directions") {
    const Matrix d = sample_unit_directions(4, 32, 3);
    CHECK(d.rows() == 4);
    CHECK(d.cols() == 32);
    for (Index k = 0; k < d.cols(); ++k) CHECK(d.col(k).norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(d == sample_unit_directions(4, 32, 3));
    // Prefix property: more directions extend, never reshuffle.
    CHECK(d.leftCols(8) == sample_unit_directions(4, 8, 3));
}

TEST_CASE("empirical quantile") {
    CHECK(empirical_quantile({3, 1, 2}, 0.5) == 2.0);
    CHECK(empirical_quantile({0, 10}, 0.25) == doctest::Approx(2.5));
    CHECK(empirical_quantile({4, 1, 3, 2}, 0.0) == 1.0);
    CHECK_THROWS_AS(empirical_quantile({}, 0.5), InsufficientDataError);
}

TEST_CASE("estimate_bmsb") {
    SUBCASE("unexcited direction") {
        Matrix phi = Matrix::Zero(2, 10);
        phi.row(0).setOnes();
        CHECK_THROWS_AS(estimate_bmsb_along(phi, Matrix::Identity(2, 2), 0.5), DegenerateExcitationError);
        // Along e1 alone the sample is perfectly excited.
        const BmsbEstimate e = estimate_bmsb_along(phi, Matrix::Identity(2, 1), 0.5);
        CHECK(e.s_phi == 1.0);
        CHECK(e.p_phi == 1.0);
    }

    SUBCASE("all-zero features") {
        CHECK_THROWS_AS(estimate_bmsb(Matrix::Zero(3, 20), 16, 0.25, 0), DegenerateExcitationError);
    }

    SUBCASE("uniform features, median") {
        // |U(-1,1)| is U(0,1): median 0.5, exceedance 0.5.
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        const Index n = 20000;
        Matrix phi(1, n);
        for (Index j = 0; j < n; ++j) phi(0, j) = unit(rng);
        const BmsbEstimate e = estimate_bmsb(phi, 8, 0.5, 1);
        // Sample median of U(0,1) has std 1/(2 sqrt(n)) ~ 0.0035.
        CHECK(std::abs(e.s_phi - 0.5) < 0.02);
        CHECK(std::abs(e.p_phi - 0.5) < 0.02);
        CHECK(e.n_samples == n);
        CHECK(e.n_directions == 8);
    }

    SUBCASE("pendulum batch is excited") {
        const TrajectoryBatch b = simulate_batch(make_pendulum_system(), 10, 5, 0);
        const BmsbEstimate e = estimate_bmsb(b, kDefaultBmsbDirections, kDefaultBmsbQuantile, 0);
        CHECK(e.s_phi > 0.0);
        CHECK(e.p_phi > 0.0);
        CHECK(e.p_phi <= 1.0);
    }

    SUBCASE("determinism") {
        const TrajectoryBatch b = simulate_batch(make_synthetic_system(), 10, 5, 1);
        const BmsbEstimate a = estimate_bmsb(b, 64, 0.25, 5);
        const BmsbEstimate c = estimate_bmsb(b, 64, 0.25, 5);
        CHECK(a.s_phi == c.s_phi);
        CHECK(a.p_phi == c.p_phi);
    }

    SUBCASE("exceedance is monotone in the radius") {
        const TrajectoryBatch b = simulate_batch(make_synthetic_system(), 10, 5, 2);
        const Matrix dirs = sample_unit_directions(5, 64, 2);
        double prev = 1.0;
        for (double s = 0.0; s < 3.0; s += 0.05) {
            const double p = small_ball_probability(b.features, dirs, s);
            CHECK(p <= prev);
            prev = p;
        }
        // Larger quantile, larger radius, smaller probability.
        const BmsbEstimate lo = estimate_bmsb_along(b.features, dirs, 0.1);
        const BmsbEstimate hi = estimate_bmsb_along(b.features, dirs, 0.4);
        CHECK(hi.s_phi >= lo.s_phi);
        CHECK(hi.p_phi <= lo.p_phi);
    }

    SUBCASE("bad inputs") {
        CHECK_THROWS_AS(estimate_bmsb(Matrix::Ones(2, 1), 4, 0.25, 0), InsufficientDataError);
        CHECK_THROWS_AS(estimate_bmsb(Matrix::Ones(2, 5), 4, 1.0, 0), ConfigError);
        CHECK_THROWS_AS(estimate_bmsb(Matrix::Ones(2, 5), 0, 0.25, 0), ConfigError);
    }
}

TEST_CASE("gram_check") {
    SUBCASE("identity columns repeated") {
        for (Index k = 1; k <= 5; ++k) {
            Matrix phi(3, 3 * k);
            for (Index r = 0; r < k; ++r) phi.middleCols(3 * r, 3) = Matrix::Identity(3, 3);
            const TrajectoryBatch b = TrajectoryBatch::from_columns(phi, Matrix::Zero(1, 3 * k));
            const GramReport g = gram_check({b}, 1.0, 1.0 / 3.0, 0.05);
            REQUIRE(g.clients.size() == 1);
            CHECK(g.clients[0].lambda_min == doctest::Approx(double(k)).epsilon(1e-14));
            CHECK(g.clients[0].samples == 3 * k);
            CHECK(g.clients[0].threshold == doctest::Approx(0.5 * 3 * k));
            CHECK(g.clients[0].passes == (double(k) >= 1.5 * double(k)));
        }
    }

    SUBCASE("pooling dominates every client") {
        const SystemModel base = make_synthetic_system(3, 2, 4);
        const auto fleet = make_client_fleet(base, make_heterogeneity(base, 0.5, 4), 5, 4);
        std::vector<TrajectoryBatch> batches;
        for (std::size_t i = 0; i < fleet.size(); ++i)
            batches.push_back(simulate_batch(fleet[i], 4 + Index(i), 5, 50 + i));
        const GramReport g = gram_check(batches, 0.2, 0.5, 0.05);
        for (const auto& c : g.clients) CHECK(g.pooled_lambda_min >= c.lambda_min);
        Matrix sum = Matrix::Zero(5, 5);
        for (const auto& b : batches) sum += b.features * b.features.transpose();
        CHECK(g.pooled_lambda_min == doctest::Approx(lambda_min(sum)).epsilon(1e-10));
        CHECK(g.pooled_threshold == doctest::Approx(0.5 * 0.04 * double(4 + 5 + 6 + 7 + 8) * 5));
    }

    SUBCASE("sample-size threshold") {
        const TrajectoryBatch b = TrajectoryBatch::from_columns(Matrix::Identity(2, 2), Matrix::Zero(1, 2));
        const GramReport g = gram_check({b, b}, 1.0, 0.5, 0.1);
        const double expect = (4.0 / 0.5) * (2.0 * std::log(9.0) + std::log(2.0 / 0.1));
        CHECK(g.sample_size_threshold == doctest::Approx(expect).epsilon(1e-14));
        CHECK_FALSE(g.sample_size_ok);
        CHECK_FALSE(g.clients[0].sample_size_ok);
    }

    SUBCASE("bad inputs") {
        const TrajectoryBatch b = TrajectoryBatch::from_columns(Matrix::Identity(2, 2), Matrix::Zero(1, 2));
        CHECK_THROWS_AS(gram_check({b}, 0.0, 0.5, 0.1), ConfigError);
        CHECK_THROWS_AS(gram_check({b}, 1.0, 0.5, 1.0), ConfigError);
    }
}

TEST_CASE("noise_crossterm_check") {
    Rng rng = make_rng(8);
    const Matrix phi = standard_normal(4, 50, rng);

    SUBCASE("zero noise") {
        const CrossTermReport r = noise_crossterm_check(Matrix::Zero(3, 50), phi, 1.0, 0.05, 1);
        CHECK(r.observed == 0.0);
        CHECK(r.passes);
        CHECK(r.bound == doctest::Approx(4.0 * std::sqrt(50.0 * (3 + 4 + std::log(2.0 / 0.05)))));
    }

    SUBCASE("rank one") {
        Matrix w(1, 1), f(1, 1);
        w << -1.5;
        f << 2.0;
        CHECK(noise_crossterm_check(w, f, 1.0, 0.05, 1).observed == doctest::Approx(3.0));
    }

    SUBCASE("b_phi variant") {
        const CrossTermReport r = noise_crossterm_check(standard_normal(3, 50, rng), phi, 1.0, 0.05, 4);
        CHECK(r.b_phi == doctest::Approx(phi.colwise().squaredNorm().maxCoeff()));
        CHECK(r.scaled_bound == doctest::Approx(r.bound * std::sqrt(std::max(r.b_phi, 1.0))));
    }

    SUBCASE("Monte Carlo frequency") {
        int violations = 0;
        const int runs = 200;
        for (int s = 0; s < runs; ++s) {
            Rng noise_rng = make_rng(derive_seed(s, Stream::data));
            const Matrix w = standard_normal(3, 50, noise_rng);
            Matrix unit_phi = phi;
            // Columns normalized to the paper's implicit scale ||phi||^2 <= n_x + n_phi.
            for (Index c = 0; c < unit_phi.cols(); ++c) unit_phi.col(c).normalize();
            violations += noise_crossterm_check(w, unit_phi, 1.0, 0.05, 1).passes ? 0 : 1;
        }
        CHECK(double(violations) / runs <= 0.05);
    }

    SUBCASE("errors") {
        CHECK_THROWS_AS(noise_crossterm_check(Matrix::Zero(3, 49), phi, 1.0, 0.05, 1), ShapeError);
        CHECK_THROWS_AS(noise_crossterm_check(Matrix::Zero(3, 50), phi, 0.0, 0.05, 1), ConfigError);
    }
}

TEST_CASE("theorem bound") {
    BoundInputs in;
    in.sigma_w = 0.3;
    in.s_phi = 0.4;
    in.b_phi = 2.0;
    in.delta = 0.05;
    in.epsilon = 0.1;
    in.n_x = 3;
    in.n_phi = 5;
    in.num_clients = 4;
    in.total_samples = 200;

    const BoundReport r = theorem_bound(in);
    CHECK(r.C1 == doctest::Approx(8.0 * 0.3 / 0.16));
    CHECK(r.C2 == doctest::Approx(2.0 / 0.16 + 0.5));
    CHECK(r.noise_term == doctest::Approx(15.0 * std::sqrt((8.0 + std::log(160.0)) / 200.0)));
    CHECK(r.heterogeneity_term == doctest::Approx(13.0 * 0.1));
    CHECK(r.bound_value == doctest::Approx(r.noise_term + r.heterogeneity_term));

    SUBCASE("vanishes without noise or heterogeneity") {
        BoundInputs z = in;
        z.sigma_w = 0.0;
        z.epsilon = 0.0;
        CHECK(theorem_bound(z).bound_value == 0.0);
    }

    SUBCASE("halving delta raises the bound") {
        BoundInputs h = in;
        h.delta = in.delta / 2;
        CHECK(theorem_bound(h).bound_value > r.bound_value);
    }

    SUBCASE("four times the samples halves the noise term") {
        BoundInputs q = in;
        q.total_samples = 4 * in.total_samples;
        CHECK(theorem_bound(q).noise_term == doctest::Approx(r.noise_term / 2).epsilon(1e-14));
    }

    SUBCASE("monotonicity") {
        for (double scale : {1.5, 2.0, 10.0}) {
            BoundInputs e = in, s = in, m = in, n = in;
            e.epsilon *= scale;
            s.sigma_w *= scale;
            m.num_clients = Index(double(in.num_clients) * scale);
            n.total_samples = Index(double(in.total_samples) * scale);
            CHECK(theorem_bound(e).bound_value >= r.bound_value);
            CHECK(theorem_bound(s).bound_value >= r.bound_value);
            CHECK(theorem_bound(m).bound_value >= r.bound_value);
            CHECK(theorem_bound(n).bound_value <= r.bound_value);
        }
    }

    SUBCASE("errors") {
        BoundInputs bad = in;
        bad.s_phi = 0.0;
        CHECK_THROWS_AS(theorem_bound(bad), DegenerateExcitationError);
        bad = in;
        bad.delta = 0.0;
        CHECK_THROWS_AS(theorem_bound(bad), ConfigError);
    }
}

TEST_CASE("evaluate_bound") {
    SUBCASE("noise-free homogeneous data") {
        SystemModel sys = make_synthetic_system(3, 2, 2, 0.0);
        std::vector<TrajectoryBatch> batches{simulate_batch(sys, 5, 5, 1), simulate_batch(sys, 5, 5, 2)};
        BmsbEstimate bmsb;
        bmsb.s_phi = 0.3;
        bmsb.p_phi = 0.5;
        const BoundReport r = evaluate_bound(batches, {sys.true_theta, sys.true_theta}, bmsb, 0.0, 0.05, 0.0);
        CHECK(r.bound_value == 0.0);
        CHECK(r.observed_error < 1e-10);
        CHECK(r.b_phi == doctest::Approx(feature_bound(batches)));
    }

    SUBCASE("observed error is the worst client") {
        const TrajectoryBatch b = TrajectoryBatch::from_columns(Matrix::Identity(2, 2), Matrix::Zero(1, 2));
        Matrix t1(1, 2), t2(1, 2);
        t1 << 1.0, 0.0;
        t2 << 0.0, 3.0;
        BmsbEstimate bmsb;
        bmsb.s_phi = 1.0;
        const BoundReport r = evaluate_bound({b, b}, {t1, t2}, Matrix::Zero(1, 2), bmsb, 1.0, 0.05, 0.0);
        CHECK(r.observed_error == doctest::Approx(3.0));
    }

    SUBCASE("degenerate excitation") {
        const TrajectoryBatch b = TrajectoryBatch::from_columns(Matrix::Identity(2, 2), Matrix::Zero(1, 2));
        CHECK_THROWS_AS(evaluate_bound({b}, {Matrix::Ones(1, 2)}, BmsbEstimate{}, 1.0, 0.05, 0.0),
                        DegenerateExcitationError);
    }
}
