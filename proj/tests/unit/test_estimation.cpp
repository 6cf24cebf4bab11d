#include <cmath>
#include <vector>

#include <doctest.h>

#include "fedsysid/estimation.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/systems.hpp"

using namespace fedsysid;

namespace {

// Normal equations assembled entry by entry, solved by Gaussian elimination
// with partial pivoting. Returns theta (n_y x n_phi).
std::vector<std::vector<double>> elimination_lse(const Matrix& phi, const Matrix& y) {
    const auto n = static_cast<std::size_t>(phi.rows());
    const auto m = static_cast<std::size_t>(y.rows());
    const Index cols = phi.cols();
    // Augmented [G | Phi Y^T].
    std::vector<std::vector<double>> a(n, std::vector<double>(n + m, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            for (Index c = 0; c < cols; ++c) a[i][j] += phi(Index(i), c) * phi(Index(j), c);
        for (std::size_t k = 0; k < m; ++k)
            for (Index c = 0; c < cols; ++c) a[i][n + k] += phi(Index(i), c) * y(Index(k), c);
    }
    for (std::size_t p = 0; p < n; ++p) {
        std::size_t best = p;
        for (std::size_t r = p + 1; r < n; ++r)
            if (std::abs(a[r][p]) > std::abs(a[best][p])) best = r;
        std::swap(a[p], a[best]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == p) continue;
            const double f = a[r][p] / a[p][p];
            for (std::size_t c = p; c < n + m; ++c) a[r][c] -= f * a[p][c];
        }
    }
    std::vector<std::vector<double>> theta(m, std::vector<double>(n));
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < n; ++i) theta[k][i] = a[i][n + k] / a[i][i];
    return theta;
}

double power_iteration_norm(const Matrix& d) {
    const Matrix g = d.transpose() * d;
    Vector v = Vector::Ones(g.cols()) / std::sqrt(double(g.cols()));
    double lambda = 0.0;
    for (int it = 0; it < 5000; ++it) {
        Vector next = g * v;
        const double nl = next.norm();
        if (nl == 0.0) return 0.0;
        next /= nl;
        const double change = (next - v).norm();
        v = next;
        lambda = nl;
        if (change < 1e-14) break;
    }
    return std::sqrt(lambda);
}

double sq_residual(const TrajectoryBatch& b, const Matrix& theta) {
    return (b.targets - theta * b.features).squaredNorm();
}

TrajectoryBatch random_batch(Index n_y, Index n_phi, Index cols, Seed seed) {
    Rng rng = make_rng(seed);
    Matrix phi = standard_normal(n_phi, cols, rng);
    Matrix y = standard_normal(n_y, cols, rng);
    return TrajectoryBatch::from_columns(phi, y);
}

}  // namespace

TEST_CASE("lse_client") {
    SUBCASE("two scalar points") {
        Matrix phi(1, 2), y(1, 2);
        phi << 1.0, 1.0;
        y << 1.0, 3.0;
        const Matrix theta = lse_client(TrajectoryBatch::from_columns(phi, y));
        CHECK(theta(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    }

    SUBCASE("exact recovery without noise") {
        for (SystemModel sys : {make_synthetic_system(3, 2, 4, 0.0), make_pendulum_system(),
                                make_quadrotor_system()}) {
            sys.noise_std = 0.0;
            const TrajectoryBatch b = simulate_batch(sys, 20, sys.default_traj_len, 1);
            const Matrix theta = lse_client(b);
            CHECK((theta - sys.true_theta).cwiseAbs().maxCoeff() < 1e-9);
        }
    }

    SUBCASE("elimination oracle") {
        for (Seed s = 0; s < 5; ++s) {
            const TrajectoryBatch b = random_batch(2, 3, 20, 100 + s);
            const Matrix theta = lse_client(b);
            const auto oracle = elimination_lse(b.features, b.targets);
            for (Index k = 0; k < 2; ++k)
                for (Index i = 0; i < 3; ++i)
                    CHECK(std::abs(theta(k, i) - oracle[std::size_t(k)][std::size_t(i)]) < 1e-10);
        }
    }

    SUBCASE("unique minimizer") {
        const SystemModel sys = make_synthetic_system(3, 2, 2);
        const TrajectoryBatch b = simulate_batch(sys, 10, 5, 2);
        const Matrix theta = lse_client(b);
        const double best = sq_residual(b, theta);
        Rng rng = make_rng(77);
        for (int k = 0; k < 50; ++k) {
            const Matrix delta = 1e-3 * standard_normal(theta.rows(), theta.cols(), rng);
            CHECK(sq_residual(b, theta + delta) > best);
        }
    }

    SUBCASE("rank deficiency") {
        Matrix phi(2, 4);
        phi << 1, 2, 3, 4,
               2, 4, 6, 8;
        const TrajectoryBatch b = TrajectoryBatch::from_columns(phi, Matrix::Ones(1, 4));
        try {
            lse_client(b);
            FAIL("expected rank deficiency");
        } catch (const RankDeficiencyError& e) {
            CHECK(e.lambda_min() < 1e-9);
            CHECK(e.client() == -1);
        }
        // Fewer columns than features is always singular.
        CHECK_THROWS_AS(lse_client(random_batch(1, 3, 2, 0)), RankDeficiencyError);
        // The ridge escape hatch gives the regularized normal-equation solution.
        const Matrix theta = lse_client(b, 0.5);
        const Matrix expect =
            (b.targets * phi.transpose()) * (phi * phi.transpose() + 0.5 * Matrix::Identity(2, 2)).inverse();
        CHECK((theta - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("lse_pooled_average") {
    SystemModel sys = make_synthetic_system(3, 2, 8, 0.0);

    SUBCASE("identical noise-free batches") {
        const TrajectoryBatch b = simulate_batch(sys, 5, 5, 0);
        const Matrix avg = lse_pooled_average({b, b, b});
        CHECK((avg - sys.true_theta).cwiseAbs().maxCoeff() < 1e-10);
    }

    SUBCASE("two clients, two truths") {
        SystemModel other = sys;
        other.true_theta = sys.true_theta + Matrix::Constant(3, 5, 0.25);
        const Matrix avg = lse_pooled_average({simulate_batch(sys, 5, 5, 1), simulate_batch(other, 5, 5, 2)});
        CHECK((avg - 0.5 * (sys.true_theta + other.true_theta)).cwiseAbs().maxCoeff() < 1e-10);
    }

    SUBCASE("brute force") {
        std::vector<TrajectoryBatch> batches;
        for (Seed s = 0; s < 3; ++s) batches.push_back(random_batch(2, 3, 15, 40 + s));
        Matrix oracle = Matrix::Zero(2, 3);
        for (const auto& b : batches) {
            const auto t = elimination_lse(b.features, b.targets);
            for (Index k = 0; k < 2; ++k)
                for (Index i = 0; i < 3; ++i) oracle(k, i) += t[std::size_t(k)][std::size_t(i)] / 3.0;
        }
        CHECK((lse_pooled_average(batches) - oracle).cwiseAbs().maxCoeff() < 1e-10);
    }

    SUBCASE("rank deficiency names the client") {
        std::vector<TrajectoryBatch> batches{random_batch(1, 3, 10, 0), random_batch(1, 3, 2, 1)};
        try {
            lse_pooled_average(batches);
            FAIL("expected rank deficiency");
        } catch (const RankDeficiencyError& e) {
            CHECK(e.client() == 1);
        }
    }

    SUBCASE("shape mismatch and empty input") {
        CHECK_THROWS_AS(lse_pooled_average({random_batch(1, 3, 10, 0), random_batch(2, 3, 10, 1)}), ShapeError);
        CHECK_THROWS(lse_pooled_average({}));
    }
}

TEST_CASE("estimation_error") {
    Rng rng = make_rng(3);
    const Matrix truth = standard_normal(3, 5, rng);

    CHECK(estimation_error(truth, truth) == 0.0);
    CHECK(estimation_error(2.0 * truth, truth) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(estimation_error(Matrix::Zero(3, 5), truth) == doctest::Approx(1.0).epsilon(1e-12));

    SUBCASE("power iteration oracle") {
        for (int k = 0; k < 5; ++k) {
            const Matrix hat = standard_normal(3, 5, rng);
            const Matrix t = standard_normal(3, 5, rng);
            const double oracle = power_iteration_norm(hat - t) / power_iteration_norm(t);
            CHECK(std::abs(estimation_error(hat, t) - oracle) < 1e-8);
        }
    }

    SUBCASE("orthogonal invariance") {
        const Matrix hat = standard_normal(3, 5, rng);
        const Matrix q = Eigen::HouseholderQR<Matrix>(standard_normal(3, 3, rng)).householderQ();
        CHECK(estimation_error(q * hat, q * truth) == doctest::Approx(estimation_error(hat, truth)).epsilon(1e-12));
    }

    SUBCASE("frobenius variant") {
        const Matrix hat = standard_normal(3, 5, rng);
        CHECK(estimation_error(hat, truth, NormKind::frobenius) ==
              doctest::Approx((hat - truth).norm() / truth.norm()).epsilon(1e-14));
    }

    SUBCASE("errors") {
        CHECK_THROWS_AS(estimation_error(truth, Matrix::Zero(3, 5)), UndefinedMetricError);
        CHECK_THROWS_AS(estimation_error(Matrix::Zero(3, 4), truth), ShapeError);
    }
}

TEST_CASE("error_record") {
    Matrix a(1, 2), b(1, 2), est(1, 2);
    a << 1.0, 0.0;
    b << 2.0, 0.0;
    est << 1.5, 0.0;
    const ErrorRecord r = error_record(4, est, {a, b});
    CHECK(r.round == 4);
    REQUIRE(r.per_client.size() == 2);
    CHECK(r.per_client[0] == doctest::Approx(0.5));
    CHECK(r.per_client[1] == doctest::Approx(0.25));
    CHECK(r.max_error == doctest::Approx(0.5));
    CHECK(r.mean_error == doctest::Approx(0.375));
    for (double e : r.per_client) CHECK(e >= 0.0);
}

TEST_CASE("linear algebra helpers") {
    Matrix s(2, 2);
    s << 2.0, 1.0,
         1.0, 2.0;
    CHECK(lambda_min(s) == doctest::Approx(1.0));
    CHECK(lambda_max(s) == doctest::Approx(3.0));
    CHECK(spectral_norm(s) == doctest::Approx(3.0));

    Matrix phi(2, 3);
    phi << 1, 2, 3,
           0, 1, 0;
    CHECK((gram(phi) - phi * phi.transpose()).cwiseAbs().maxCoeff() < 1e-15);

    const LinearFit f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.r_squared == doctest::Approx(1.0));

    CHECK(parse_norm_kind("spectral") == NormKind::spectral);
    CHECK(parse_norm_kind("frobenius") == NormKind::frobenius);
    CHECK_THROWS_AS(parse_norm_kind("nuclear"), ConfigError);
}
