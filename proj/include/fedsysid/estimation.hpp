#pragma once

#include <vector>

#include "fedsysid/core.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/systems.hpp"

namespace fedsysid {

/// Per-round normalized estimation errors.
struct ErrorRecord {
    Index round = 0;
    std::vector<double> per_client;
    double max_error = 0.0;
    double mean_error = 0.0;
};

/// Relative eigenvalue floor below which the Gram matrix counts as singular.
inline constexpr double kRankTolerance = 1e-12;

/// Closed-form least squares argmin ||X+ - theta Phi||_F^2 (+ ridge ||theta||_F^2),
/// solved by column-pivoted QR on the (ridge-augmented) transposed regressors.
/// Throws RankDeficiencyError when Phi Phi^T is singular and ridge == 0.
Matrix lse_client(const TrajectoryBatch& batch, double ridge = 0.0);

/// Mean of per-client least-squares estimates.
Matrix lse_pooled_average(const std::vector<TrajectoryBatch>& batches, double ridge = 0.0);

/// ||theta_hat - theta_true|| / ||theta_true||.
double estimation_error(const Matrix& theta_hat, const Matrix& theta_true,
                        NormKind norm = NormKind::spectral);

/// Builds the error record of one global model against every client's truth.
ErrorRecord error_record(Index round, const Matrix& theta, const std::vector<Matrix>& true_thetas,
                         NormKind norm = NormKind::spectral);

}  // namespace fedsysid
