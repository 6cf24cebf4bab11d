#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fedsysid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Seed = std::uint64_t;

/// Base class for every error raised by the library. `kind()` is a short
/// machine-readable tag used by the CLI when it reports failures.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error("config", what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class SimulationDiverged : public Error {
public:
    SimulationDiverged(Index trajectory, Index step, const std::string& what)
        : Error("simulation_diverged", what), trajectory_(trajectory), step_(step) {}
    Index trajectory() const noexcept { return trajectory_; }
    Index step() const noexcept { return step_; }

private:
    Index trajectory_;
    Index step_;
};

class FederationDiverged : public Error {
public:
    FederationDiverged(Index client, Index step, Index round, const std::string& what)
        : Error("federation_diverged", what), client_(client), step_(step), round_(round) {}
    Index client() const noexcept { return client_; }
    Index step() const noexcept { return step_; }
    /// Global round, or -1 when raised from a standalone client update.
    Index round() const noexcept { return round_; }

private:
    Index client_;
    Index step_;
    Index round_;
};

class AggregationError : public Error {
public:
    explicit AggregationError(const std::string& what) : Error("aggregation", what) {}
};

class RankDeficiencyError : public Error {
public:
    RankDeficiencyError(double lambda_min, Index client, const std::string& what)
        : Error("rank_deficient", what), lambda_min_(lambda_min), client_(client) {}
    double lambda_min() const noexcept { return lambda_min_; }
    /// Client index, or -1 for a single-batch solve.
    Index client() const noexcept { return client_; }

private:
    double lambda_min_;
    Index client_;
};

class UndefinedMetricError : public Error {
public:
    explicit UndefinedMetricError(const std::string& what) : Error("undefined_metric", what) {}
};

class DegenerateExcitationError : public Error {
public:
    explicit DegenerateExcitationError(const std::string& what)
        : Error("degenerate_excitation", what) {}
};

class InsufficientDataError : public Error {
public:
    explicit InsufficientDataError(const std::string& what) : Error("insufficient_data", what) {}
};

}  // namespace fedsysid
