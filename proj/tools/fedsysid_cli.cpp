// fedsysid: run federated identification experiments from a config file.
//
//   fedsysid run <config> [--out PATH] [--seeds 0,1,2] [--threads N]
//   fedsysid diagnose <config> [--out PATH] [--seeds LIST] [--threads N]
//   fedsysid scaling <csv>
//   fedsysid validate <config>
//
// Failures print one JSON line on stderr: {"error": kind, "field": ..., "message": ...}.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fedsysid/config.hpp"
#include "fedsysid/harness.hpp"
#include "fedsysid/scaling.hpp"

namespace {

using namespace fedsysid;

int report_error(const std::string& kind, const std::string& field, const std::string& message) {
    nlohmann::json j = {{"error", kind}, {"message", message}};
    if (!field.empty()) j["field"] = field;
    std::cerr << j.dump() << '\n';
    return kind == "usage" ? 2 : 1;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("fedsysid");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("FEDSYSID_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

struct Common {
    std::string config;
    std::string config_flag;
    std::string out;
    std::string seeds;
    unsigned threads = 1;
};

ExperimentConfig load_with_overrides(const Common& c) {
    const std::string path = !c.config_flag.empty() ? c.config_flag : c.config;
    if (path.empty()) throw ConfigError("config", "no config file given");
    ExperimentConfig cfg = load_config(path);
    if (!c.out.empty()) cfg.output_path = c.out;
    if (!c.seeds.empty()) cfg.seeds = parse_seed_list(c.seeds);
    validate(cfg);
    return cfg;
}

void add_common(CLI::App* cmd, Common& c, bool with_run_flags) {
    cmd->add_option("config-file", c.config, "Experiment config (JSON)");
    cmd->add_option("--config", c.config_flag, "Experiment config (JSON)");
    if (with_run_flags) {
        cmd->add_option("--out", c.out, "Output path (overrides output_path)");
        cmd->add_option("--seeds", c.seeds, "Comma-separated master seeds");
        cmd->add_option("--threads", c.threads, "Worker threads (speed only)")->check(CLI::PositiveNumber);
    }
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Federated nonlinear system identification experiments"};
    app.require_subcommand(1);

    Common run_opts, diag_opts, validate_opts;
    std::string csv_path;
    auto* run = app.add_subcommand("run", "Execute an experiment and write its CSV");
    add_common(run, run_opts, true);
    auto* diagnose = app.add_subcommand("diagnose", "Excitation, Gram and bound diagnostics only");
    add_common(diagnose, diag_opts, true);
    auto* scaling = app.add_subcommand("scaling", "Fit error vs M on an experiment CSV");
    scaling->add_option("csv", csv_path, "Experiment CSV")->required();
    auto* check = app.add_subcommand("validate", "Check a config without running it");
    add_common(check, validate_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("usage", "", e.what());
    }

    try {
        if (*run) {
            const ExperimentConfig cfg = load_with_overrides(run_opts);
            spdlog::info("running '{}' with {} sweep point(s) x {} seed(s)", cfg.config_id,
                         cfg.sweep_size(), cfg.seeds.size());
            const auto records = run_experiment(cfg, {run_opts.threads});
            if (cfg.output_path.empty()) write_csv(std::cout, records);
            spdlog::info("wrote {} rows", records.size());
        } else if (*diagnose) {
            const ExperimentConfig cfg = load_with_overrides(diag_opts);
            const auto reports = run_diagnostics(cfg, {diag_opts.threads});
            std::ofstream file;
            if (!diag_opts.out.empty()) {
                file.open(diag_opts.out, std::ios::binary | std::ios::trunc);
                if (!file) throw Error("io", "cannot write '" + diag_opts.out + "'");
            }
            std::ostream& out = diag_opts.out.empty() ? std::cout : file;
            for (const auto& r : reports) out << r.dump() << '\n';
        } else if (*scaling) {
            const ScalingReport report = sqrtM_scaling(read_csv(csv_path));
            nlohmann::json j = {{"slope", report.fit.slope},
                                {"intercept", report.fit.intercept},
                                {"r_squared", report.fit.r_squared}};
            for (const auto& row : report.rows)
                j["table"].push_back({{"M", row.M}, {"inv_sqrt_M", row.inv_sqrt_M},
                                      {"mean_error", row.mean_error}});
            std::cout << j.dump(2) << '\n';
        } else if (*check) {
            const ExperimentConfig cfg = load_with_overrides(validate_opts);
            std::cout << "{\"valid\": true, \"config_id\": \"" << cfg.config_id << "\"}\n";
        }
    } catch (const ConfigError& e) {
        return report_error(e.kind(), e.field(), e.what());
    } catch (const Error& e) {
        return report_error(e.kind(), "", e.what());
    } catch (const std::exception& e) {
        return report_error("internal", "", e.what());
    }
    return 0;
}
