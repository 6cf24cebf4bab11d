#include "fedsysid/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fedsysid {

Matrix lse_client(const TrajectoryBatch& batch, double ridge) {
    if (batch.columns() == 0) throw ShapeError("lse_client: empty batch");
    if (batch.targets.cols() != batch.features.cols())
        throw ShapeError("lse_client: features and targets column mismatch");
    if (ridge < 0.0) throw ConfigError("ridge", "ridge must be >= 0");

    const Index n_phi = batch.features.rows();
    if (ridge == 0.0) {
        const Matrix g = gram(batch.features);
        const double lmin = lambda_min(g);
        const double lmax = std::max(lambda_max(g), 0.0);
        if (!(lmin > kRankTolerance * std::max(lmax, 1.0)))
            throw RankDeficiencyError(lmin, -1,
                                      "Gram matrix is rank deficient (lambda_min = " +
                                          std::to_string(lmin) + ")");
    }

    // Solve Phi^T theta^T = X+^T in the least-squares sense.
    Matrix design = batch.features.transpose();
    Matrix rhs = batch.targets.transpose();
    if (ridge > 0.0) {
        design.conservativeResize(design.rows() + n_phi, Eigen::NoChange);
        design.bottomRows(n_phi) = std::sqrt(ridge) * Matrix::Identity(n_phi, n_phi);
        rhs.conservativeResize(rhs.rows() + n_phi, Eigen::NoChange);
        rhs.bottomRows(n_phi).setZero();
    }
    const Eigen::ColPivHouseholderQR<Matrix> qr(design);
    return qr.solve(rhs).transpose();
}

Matrix lse_pooled_average(const std::vector<TrajectoryBatch>& batches, double ridge) {
    if (batches.empty()) throw ShapeError("lse_pooled_average: no batches");
    Matrix sum;
    for (std::size_t i = 0; i < batches.size(); ++i) {
        Matrix theta;
        try {
            theta = lse_client(batches[i], ridge);
        } catch (const RankDeficiencyError& e) {
            throw RankDeficiencyError(e.lambda_min(), static_cast<Index>(i),
                                      "client " + std::to_string(i) + ": " + e.what());
        }
        if (i == 0) {
            sum = theta;
        } else {
            if (theta.rows() != sum.rows() || theta.cols() != sum.cols())
                throw ShapeError("lse_pooled_average: clients disagree on (n_x, n_phi)");
            sum += theta;
        }
    }
    return sum / static_cast<double>(batches.size());
}

double estimation_error(const Matrix& theta_hat, const Matrix& theta_true, NormKind norm) {
    if (theta_hat.rows() != theta_true.rows() || theta_hat.cols() != theta_true.cols())
        throw ShapeError("estimation_error: shape mismatch");
    const double denom = matrix_norm(theta_true, norm);
    if (!(denom > 0.0)) throw UndefinedMetricError("estimation_error: true parameter has zero norm");
    return matrix_norm(theta_hat - theta_true, norm) / denom;
}

ErrorRecord error_record(Index round, const Matrix& theta, const std::vector<Matrix>& true_thetas,
                         NormKind norm) {
    ErrorRecord rec;
    rec.round = round;
    rec.per_client.reserve(true_thetas.size());
    for (const Matrix& truth : true_thetas) rec.per_client.push_back(estimation_error(theta, truth, norm));
    if (!rec.per_client.empty()) {
        rec.max_error = *std::max_element(rec.per_client.begin(), rec.per_client.end());
        rec.mean_error = std::accumulate(rec.per_client.begin(), rec.per_client.end(), 0.0) /
                         static_cast<double>(rec.per_client.size());
    }
    return rec;
}

}  // namespace fedsysid
