#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsysid/config.hpp"
#include "fedsysid/core.hpp"

namespace fedsysid {

/// One CSV row: a (sweep point, seed, round) triple.
struct ExperimentRecord {
    std::string config_id;
    SystemKind system = SystemKind::synthetic;
    Index M = 0;
    Index N_i = 0;
    Index T = 0;
    double epsilon = 0.0;
    Index K_i = 0;
    double alpha = 0.0;
    std::optional<Index> batch_size;
    Index round = 0;
    Seed seed = 0;
    double max_error = 0.0;
    double mean_error = 0.0;
    double lambda_min_pooled = 0.0;
    double bound_value = 0.0;
    double observed_error = 0.0;
    /// Value of the swept column (0 when nothing is swept); sort key only.
    double swept_value = 0.0;
};

inline constexpr const char* kCsvHeader =
    "config_id,system,M,N_i,T,epsilon,K_i,alpha,batch_size,round,seed,max_error,mean_error,"
    "lambda_min_pooled,bound_value,observed_error";

struct RunOptions {
    /// Worker threads over (sweep point, seed) units; never changes results.
    unsigned threads = 1;
};

/// The hyperparameters of one sweep point.
struct SweepPoint {
    Index M = 1;
    Index N_i = 1;
    double epsilon = 0.0;
    Index K_i = 1;
    double swept_value = 0.0;
};

std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg);

/// Runs every sweep point for every seed and returns rows in canonical order
/// (config_id, swept value, seed, round). Writes cfg.output_path when set. If a
/// unit fails, rows of the units that finished are still written before the
/// error propagates.
std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// Rows for a single (point, seed) unit.
std::vector<ExperimentRecord> run_unit(const ExperimentConfig& cfg, const SweepPoint& point, Seed seed);

void sort_records(std::vector<ExperimentRecord>& records);
void write_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);
void write_csv(const std::string& path, const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_csv(std::istream& in);
std::vector<ExperimentRecord> read_csv(const std::string& path);

/// Diagnostics only (no federation): small-ball estimate, Gram check,
/// noise cross-term check and the error bound, one JSON object per unit.
std::vector<nlohmann::json> run_diagnostics(const ExperimentConfig& cfg, const RunOptions& options = {});

}  // namespace fedsysid
