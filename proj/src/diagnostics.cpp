#include "fedsysid/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedsysid/estimation.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/rng.hpp"

namespace fedsysid {

namespace {

void check_delta(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta", "delta must lie in (0, 1)");
}

}  // namespace

Matrix sample_unit_directions(Index dim, Index count, Seed seed) {
    if (dim < 1 || count < 1) throw ConfigError("n_directions", "need dim >= 1 and count >= 1");
    Matrix dirs(dim, count);
    for (Index k = 0; k < count; ++k) {
        Rng rng = make_rng(derive_seed(seed, Stream::directions, {static_cast<std::uint64_t>(k)}));
        Vector v;
        do {
            v = standard_normal(dim, 1, rng);
        } while (v.norm() == 0.0);
        dirs.col(k) = v / v.norm();
    }
    return dirs;
}

double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InsufficientDataError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double small_ball_probability(const Matrix& features, const Matrix& directions, double s) {
    if (features.cols() == 0) throw InsufficientDataError("no regressor columns");
    const Matrix proj = (directions.transpose() * features).cwiseAbs();
    double worst = 1.0;
    for (Index d = 0; d < proj.rows(); ++d) {
        const auto hits = (proj.row(d).array() >= s).count();
        worst = std::min(worst, static_cast<double>(hits) / static_cast<double>(features.cols()));
    }
    return worst;
}

BmsbEstimate estimate_bmsb_along(const Matrix& features, const Matrix& directions, double quantile) {
    if (features.cols() < 2) throw InsufficientDataError("estimate_bmsb needs at least 2 columns");
    if (directions.cols() < 1) throw ConfigError("n_directions", "need at least one direction");
    if (directions.rows() != features.rows())
        throw ShapeError("direction dimension does not match feature dimension");
    if (!(quantile > 0.0 && quantile < 1.0))
        throw ConfigError("bmsb_quantile", "quantile must lie in (0, 1)");
    if (features.cwiseAbs().maxCoeff() == 0.0)
        throw DegenerateExcitationError("all feature columns are zero");

    const Matrix proj = (directions.transpose() * features).cwiseAbs();
    double s_phi = std::numeric_limits<double>::infinity();
    std::vector<double> row(static_cast<std::size_t>(proj.cols()));
    for (Index d = 0; d < proj.rows(); ++d) {
        for (Index j = 0; j < proj.cols(); ++j) row[static_cast<std::size_t>(j)] = proj(d, j);
        s_phi = std::min(s_phi, empirical_quantile(row, quantile));
    }
    if (!(s_phi > 0.0))
        throw DegenerateExcitationError("some probed direction is unexcited (s_phi = 0)");

    BmsbEstimate est;
    est.s_phi = s_phi;
    est.p_phi = small_ball_probability(features, directions, s_phi);
    est.n_directions = directions.cols();
    est.n_samples = features.cols();
    return est;
}

BmsbEstimate estimate_bmsb(const Matrix& features, Index n_directions, double quantile, Seed seed) {
    if (n_directions < 1) throw ConfigError("n_directions", "need at least one direction");
    return estimate_bmsb_along(features, sample_unit_directions(features.rows(), n_directions, seed),
                               quantile);
}

BmsbEstimate estimate_bmsb(const TrajectoryBatch& batch, Index n_directions, double quantile,
                           Seed seed) {
    return estimate_bmsb(batch.features, n_directions, quantile, seed);
}

GramReport gram_check(const std::vector<TrajectoryBatch>& batches, double s_phi, double p_phi,
                      double delta) {
    if (!(s_phi > 0.0)) throw ConfigError("s_phi", "s_phi must be > 0");
    if (!(p_phi > 0.0 && p_phi <= 1.0)) throw ConfigError("p_phi", "p_phi must lie in (0, 1]");
    check_delta(delta);
    if (batches.empty()) throw InsufficientDataError("gram_check needs at least one batch");

    const Index n_phi = batches.front().features.rows();
    const auto m = static_cast<double>(batches.size());
    GramReport report;
    report.sample_size_threshold =
        (4.0 / p_phi) * (static_cast<double>(n_phi) * std::log(9.0) + std::log(m / delta));
    report.sample_size_ok = true;

    Matrix pooled = Matrix::Zero(n_phi, n_phi);
    Index total = 0;
    for (const TrajectoryBatch& b : batches) {
        if (b.features.rows() != n_phi) throw ShapeError("gram_check: feature dimension mismatch");
        const Matrix g = gram(b.features);
        pooled += g;
        ClientGramReport c;
        c.samples = b.columns();
        c.lambda_min = lambda_min(g);
        c.threshold = 0.5 * s_phi * s_phi * static_cast<double>(c.samples);
        c.passes = c.lambda_min >= c.threshold;
        c.sample_size_ok = static_cast<double>(c.samples) >= report.sample_size_threshold;
        report.sample_size_ok = report.sample_size_ok && c.sample_size_ok;
        total += c.samples;
        report.clients.push_back(c);
    }
    report.pooled_lambda_min = lambda_min(pooled);
    report.pooled_threshold = 0.5 * s_phi * s_phi * static_cast<double>(total);
    report.pooled_passes = report.pooled_lambda_min >= report.pooled_threshold;
    return report;
}

CrossTermReport noise_crossterm_check(const Matrix& noise, const Matrix& features, double sigma_w,
                                      double delta, Index num_clients) {
    if (noise.cols() != features.cols())
        throw ShapeError("noise and features must have equal column counts");
    if (!(sigma_w > 0.0)) throw ConfigError("sigma_w", "sigma_w must be > 0");
    check_delta(delta);
    if (num_clients < 1) throw ConfigError("M", "M must be >= 1");

    CrossTermReport r;
    const auto samples = static_cast<double>(features.cols());
    const double dims = static_cast<double>(noise.rows() + features.rows()) +
                        std::log(2.0 * static_cast<double>(num_clients) / delta);
    r.observed = spectral_norm(noise * features.transpose());
    r.bound = 4.0 * sigma_w * std::sqrt(samples * dims);
    r.b_phi = features.cols() == 0 ? 0.0 : features.colwise().squaredNorm().maxCoeff();
    r.scaled_bound = 4.0 * sigma_w * std::sqrt(samples * std::max(r.b_phi, 1.0) * dims);
    r.passes = r.observed <= r.bound;
    r.passes_scaled = r.observed <= r.scaled_bound;
    return r;
}

BoundReport theorem_bound(const BoundInputs& in) {
    if (!(in.s_phi > 0.0)) throw DegenerateExcitationError("bound needs s_phi > 0");
    check_delta(in.delta);
    if (in.total_samples < 1) throw InsufficientDataError("bound needs at least one sample");
    BoundReport r;
    r.delta = in.delta;
    r.b_phi = in.b_phi;
    r.C1 = 8.0 * in.sigma_w / (in.s_phi * in.s_phi);
    r.C2 = in.b_phi / (in.s_phi * in.s_phi) + 0.5;
    const double dims = static_cast<double>(in.n_x + in.n_phi) +
                        std::log(2.0 * static_cast<double>(in.num_clients) / in.delta);
    r.noise_term = r.C1 * std::sqrt(dims / static_cast<double>(in.total_samples));
    r.heterogeneity_term = r.C2 * in.epsilon;
    r.bound_value = r.noise_term + r.heterogeneity_term;
    return r;
}

double feature_bound(const std::vector<TrajectoryBatch>& batches) {
    double b = 0.0;
    for (const TrajectoryBatch& batch : batches)
        if (batch.columns() > 0) b = std::max(b, batch.features.colwise().squaredNorm().maxCoeff());
    return b;
}

BoundReport evaluate_bound(const std::vector<TrajectoryBatch>& batches,
                           const std::vector<Matrix>& true_thetas, const Matrix& theta_hat,
                           const BmsbEstimate& bmsb, double sigma_w, double delta, double epsilon) {
    if (batches.empty() || batches.size() != true_thetas.size())
        throw ShapeError("evaluate_bound: need one true theta per batch");
    BoundInputs in;
    in.sigma_w = sigma_w;
    in.s_phi = bmsb.s_phi;
    in.b_phi = feature_bound(batches);
    in.delta = delta;
    in.epsilon = epsilon;
    in.n_x = theta_hat.rows();
    in.n_phi = theta_hat.cols();
    in.num_clients = static_cast<Index>(batches.size());
    for (const TrajectoryBatch& b : batches) in.total_samples += b.columns();
    BoundReport r = theorem_bound(in);
    for (const Matrix& truth : true_thetas)
        r.observed_error = std::max(r.observed_error, spectral_norm(theta_hat - truth));
    r.within_bound = r.observed_error <= r.bound_value;
    return r;
}

BoundReport evaluate_bound(const std::vector<TrajectoryBatch>& batches,
                           const std::vector<Matrix>& true_thetas, const BmsbEstimate& bmsb,
                           double sigma_w, double delta, double epsilon) {
    return evaluate_bound(batches, true_thetas, lse_pooled_average(batches), bmsb, sigma_w, delta,
                          epsilon);
}

}  // namespace fedsysid
