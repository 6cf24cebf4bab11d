#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fedsysid/core.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/systems.hpp"

namespace fedsysid {

/// One experiment: a system, federation hyperparameters, and at most one
/// swept variable among M, N_i, epsilon and K_i.
///
/// Config files are flat JSON objects. Unknown keys are rejected. Keys:
///   config_id        string, label written to every CSV row
///   system           "synthetic" | "pendulum" | "quadrotor"
///   M                clients, count or list
///   N_i              trajectories per client, count or list
///   T                trajectory length (default: system default, 5 or 10)
///   epsilon          heterogeneity bound, real >= 0 or list
///   K_i              local updates per round, count or list
///   alpha            learning rate, > 0 (required)
///   batch_size       mini-batch size; omit or null for full batch
///   rounds           global rounds R (default 500 pendulum GD, 1000 SGD,
///                    2000 synthetic, 500 quadrotor)
///   seeds            list of master seeds (default 0..9)
///   norm             "spectral" | "frobenius" error norm
///   delta            confidence parameter in (0, 1) (default 0.05)
///   output_path      CSV destination
///   noise_std        disturbance std override, system units (pendulum and
///                    quadrotor: acceleration level; synthetic: per step)
///   ridge            least-squares ridge used by diagnostics (default 0)
///   diagnostics      bool, compute lambda_min / bound columns (default true)
///   bmsb_directions  probed directions (default 256)
///   bmsb_quantile    small-ball quantile in (0, 1) (default 0.25)
///   n_x, n_u         synthetic system dimensions (default 3, 2)
struct ExperimentConfig {
    std::string config_id = "experiment";
    SystemKind system = SystemKind::synthetic;
    std::vector<Index> M{1};
    std::vector<Index> N_i{10};
    std::optional<Index> T;
    std::vector<double> epsilon{0.0};
    std::vector<Index> K_i{1};
    double alpha = 0.0;
    std::optional<Index> batch_size;
    std::optional<Index> rounds;
    std::vector<Seed> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    NormKind norm = NormKind::spectral;
    double delta = 0.05;
    std::string output_path;
    std::optional<double> noise_std;
    double ridge = 0.0;
    bool diagnostics = true;
    Index bmsb_directions = 256;
    double bmsb_quantile = 0.25;
    Index n_x = 3;
    Index n_u = 2;

    /// Name of the swept key, or empty when every key is a single value.
    std::string swept_key() const;
    Index trajectory_length() const;
    Index round_count() const;
    /// Number of sweep points.
    std::size_t sweep_size() const;
};

/// Parses and validates; throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& cfg);

std::vector<Seed> parse_seed_list(std::string_view text);

/// Builds the nominal system for one master seed.
SystemModel make_base_system(const ExperimentConfig& cfg, Seed seed);

}  // namespace fedsysid
