#pragma once

#include <string_view>
#include <vector>

#include "fedsysid/core.hpp"

namespace fedsysid {

enum class NormKind { spectral, frobenius };

NormKind parse_norm_kind(std::string_view name);
std::string_view to_string(NormKind kind);

/// Largest singular value.
double spectral_norm(const Matrix& m);

double matrix_norm(const Matrix& m, NormKind kind);

/// Gram matrix Phi * Phi^T of a column-stacked regressor matrix.
Matrix gram(const Matrix& features);

/// Extreme eigenvalues of a symmetric matrix.
double lambda_min(const Matrix& symmetric);
double lambda_max(const Matrix& symmetric);

}  // namespace fedsysid

namespace fedsysid {

/// Ordinary least-squares line y = slope * x + intercept.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

LinearFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace fedsysid
