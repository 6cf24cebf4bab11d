#pragma once

#include <vector>

#include "fedsysid/core.hpp"
#include "fedsysid/systems.hpp"

namespace fedsysid {

/// Empirical small-ball excitation estimate of a regressor sample.
///
/// This is an unconditional proxy for the block-martingale small-ball
/// condition: it probes unit directions v and looks at the empirical law of
/// |v^T phi| over the sample, not at its law conditioned on the past.
struct BmsbEstimate {
    double s_phi = 0.0;
    double p_phi = 0.0;
    Index n_directions = 0;
    Index n_samples = 0;
};

inline constexpr Index kDefaultBmsbDirections = 256;
inline constexpr double kDefaultBmsbQuantile = 0.25;

/// `count` directions drawn uniformly from the unit sphere in R^dim, as columns.
Matrix sample_unit_directions(Index dim, Index count, Seed seed);

/// Linear-interpolation (type 7) empirical quantile.
double empirical_quantile(std::vector<double> values, double q);

/// min over directions of the fraction of columns with |v^T phi| >= s.
double small_ball_probability(const Matrix& features, const Matrix& directions, double s);

/// s_phi = min over directions of the `quantile` of |v^T phi|; p_phi is the
/// worst-direction exceedance frequency at that s_phi.
BmsbEstimate estimate_bmsb_along(const Matrix& features, const Matrix& directions, double quantile);

BmsbEstimate estimate_bmsb(const Matrix& features, Index n_directions, double quantile, Seed seed);
BmsbEstimate estimate_bmsb(const TrajectoryBatch& batch, Index n_directions, double quantile,
                           Seed seed);

struct ClientGramReport {
    Index samples = 0;        // N_i * T
    double lambda_min = 0.0;  // of Phi Phi^T
    double threshold = 0.0;   // s_phi^2 N_i T / 2
    bool passes = false;
    bool sample_size_ok = false;
};

struct GramReport {
    std::vector<ClientGramReport> clients;
    double pooled_lambda_min = 0.0;
    double pooled_threshold = 0.0;  // s_phi^2 N_tot / 2
    bool pooled_passes = false;
    /// (4 / p_phi) [n_phi log 9 + log(M / delta)]
    double sample_size_threshold = 0.0;
    bool sample_size_ok = false;
};

/// Checks per-client and pooled Gram lower bounds against the small-ball scale.
/// Failures are reported, never thrown.
GramReport gram_check(const std::vector<TrajectoryBatch>& batches, double s_phi, double p_phi,
                      double delta);

struct CrossTermReport {
    double observed = 0.0;       // ||W Phi^T||_2
    double bound = 0.0;          // 4 sigma sqrt(N T (n_x + n_phi + log(2M/delta)))
    double b_phi = 0.0;          // max column ||phi||^2
    double scaled_bound = 0.0;   // same with N T replaced by N T max(b_phi, 1)
    bool passes = false;
    bool passes_scaled = false;
};

CrossTermReport noise_crossterm_check(const Matrix& noise, const Matrix& features, double sigma_w,
                                      double delta, Index num_clients);

/// Inputs of the finite-sample error bound, kept separate so the formula can
/// be evaluated and probed on its own.
struct BoundInputs {
    double sigma_w = 0.0;
    double s_phi = 0.0;
    double b_phi = 0.0;
    double delta = 0.05;
    double epsilon = 0.0;
    Index n_x = 0;
    Index n_phi = 0;
    Index num_clients = 1;
    /// T * sum_i N_i
    Index total_samples = 0;
};

struct BoundReport {
    double C1 = 0.0;
    double C2 = 0.0;
    double b_phi = 0.0;
    double delta = 0.0;
    double noise_term = 0.0;
    double heterogeneity_term = 0.0;
    double bound_value = 0.0;
    double observed_error = 0.0;
    bool within_bound = false;
};

/// C1 sqrt((n_x + n_phi + log(2M/delta)) / (T sum N_i)) + C2 epsilon with
/// C1 = 8 sigma_w / s_phi^2 and C2 = b_phi / s_phi^2 + 1/2.
BoundReport theorem_bound(const BoundInputs& in);

/// max over columns of ||phi||_2^2 across all batches.
double feature_bound(const std::vector<TrajectoryBatch>& batches);

/// Fills a BoundReport for an estimate theta_hat; observed_error is
/// max_i ||theta_hat - theta_i*||_2 (absolute).
BoundReport evaluate_bound(const std::vector<TrajectoryBatch>& batches,
                           const std::vector<Matrix>& true_thetas, const Matrix& theta_hat,
                           const BmsbEstimate& bmsb, double sigma_w, double delta, double epsilon);

/// Same, with theta_hat = lse_pooled_average(batches).
BoundReport evaluate_bound(const std::vector<TrajectoryBatch>& batches,
                           const std::vector<Matrix>& true_thetas, const BmsbEstimate& bmsb,
                           double sigma_w, double delta, double epsilon);

}  // namespace fedsysid
