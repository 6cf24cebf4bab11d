#include "fedsysid/linalg.hpp"

#include <string>

namespace fedsysid {

NormKind parse_norm_kind(std::string_view name) {
    if (name == "spectral") return NormKind::spectral;
    if (name == "frobenius") return NormKind::frobenius;
    throw ConfigError("norm", "unknown norm '" + std::string(name) + "' (expected spectral|frobenius)");
}

std::string_view to_string(NormKind kind) {
    return kind == NormKind::spectral ? "spectral" : "frobenius";
}

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

double matrix_norm(const Matrix& m, NormKind kind) {
    return kind == NormKind::spectral ? spectral_norm(m) : m.norm();
}

Matrix gram(const Matrix& features) {
    Matrix g = Matrix::Zero(features.rows(), features.rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(features);
    return g.selfadjointView<Eigen::Lower>();
}

double lambda_min(const Matrix& symmetric) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(0);
}

double lambda_max(const Matrix& symmetric) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(eig.eigenvalues().size() - 1);
}

}  // namespace fedsysid

namespace fedsysid {

LinearFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw InsufficientDataError("fit_line needs at least two paired points");
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) throw InsufficientDataError("fit_line: all x values are equal");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

}  // namespace fedsysid
