#pragma once

#include <string>
#include <vector>

#include "fedsysid/harness.hpp"
#include "fedsysid/linalg.hpp"

namespace fedsysid {

/// Seed-averaged error at the final round of one sweep value.
struct FinalErrorPoint {
    double value = 0.0;
    double mean = 0.0;
    double std_error = 0.0;
    Index seeds = 0;
};

/// Groups records by `column` (M, N_i, epsilon or K_i) and averages max_error
/// at each seed's final round. Points are sorted by value.
std::vector<FinalErrorPoint> final_errors(const std::vector<ExperimentRecord>& records,
                                          const std::string& column);

struct ScalingRow {
    Index M = 0;
    double inv_sqrt_M = 0.0;
    double mean_error = 0.0;
};

struct ScalingReport {
    LinearFit fit;  // log(error) = slope * log(M) + intercept
    std::vector<ScalingRow> rows;
};

/// Fits the log-log slope of final seed-averaged error against M. Needs at
/// least three distinct M values.
ScalingReport sqrtM_scaling(const std::vector<ExperimentRecord>& records);

}  // namespace fedsysid
