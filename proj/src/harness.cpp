#include "fedsysid/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <tuple>

#include "fedsysid/diagnostics.hpp"
#include "fedsysid/estimation.hpp"
#include "fedsysid/federation.hpp"
#include "fedsysid/parallel.hpp"
#include "fedsysid/rng.hpp"

namespace fedsysid {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Everything a unit needs before federation starts.
struct UnitData {
    SystemModel base;
    std::vector<SystemModel> fleet;
    std::vector<TrajectoryBatch> batches;
    std::vector<Matrix> true_thetas;
};

UnitData build_unit(const ExperimentConfig& cfg, const SweepPoint& point, Seed seed) {
    UnitData d;
    d.base = make_base_system(cfg, seed);
    const HeterogeneitySpec het = make_heterogeneity(d.base, point.epsilon, seed);
    d.fleet = make_client_fleet(d.base, het, point.M, seed);
    const Index T = cfg.trajectory_length();
    for (Index i = 0; i < point.M; ++i) {
        const auto& sys = d.fleet[static_cast<std::size_t>(i)];
        try {
            d.batches.push_back(simulate_batch(
                sys, point.N_i, T, derive_seed(seed, Stream::data, {static_cast<std::uint64_t>(i)})));
        } catch (const SimulationDiverged& e) {
            throw SimulationDiverged(e.trajectory(), e.step(),
                                     "client " + std::to_string(i) + ": " + e.what());
        }
        d.true_thetas.push_back(sys.true_theta);
    }
    return d;
}

double max_pairwise_distance(const std::vector<Matrix>& thetas) {
    double worst = 0.0;
    for (std::size_t i = 0; i < thetas.size(); ++i)
        for (std::size_t j = i + 1; j < thetas.size(); ++j)
            worst = std::max(worst, spectral_norm(thetas[i] - thetas[j]));
    return worst;
}

Matrix concat_features(const std::vector<TrajectoryBatch>& batches) {
    Index cols = 0;
    for (const auto& b : batches) cols += b.columns();
    Matrix all(batches.front().features.rows(), cols);
    Index at = 0;
    for (const auto& b : batches) {
        all.middleCols(at, b.columns()) = b.features;
        at += b.columns();
    }
    return all;
}

struct UnitDiagnostics {
    double lambda_min_pooled = kNaN;
    std::optional<BmsbEstimate> bmsb;
    std::optional<BoundReport> bound;
    std::string note;
};

UnitDiagnostics diagnose_unit(const ExperimentConfig& cfg, const UnitData& d, Seed seed) {
    UnitDiagnostics out;
    Matrix pooled = Matrix::Zero(d.batches.front().features.rows(), d.batches.front().features.rows());
    for (const auto& b : d.batches) pooled += gram(b.features);
    out.lambda_min_pooled = lambda_min(pooled);
    try {
        out.bmsb = estimate_bmsb(concat_features(d.batches), cfg.bmsb_directions, cfg.bmsb_quantile,
                                 derive_seed(seed, Stream::directions));
        const Matrix theta_hat = lse_pooled_average(d.batches, cfg.ridge);
        out.bound = evaluate_bound(d.batches, d.true_thetas, theta_hat, *out.bmsb, d.base.noise_std,
                                   cfg.delta, max_pairwise_distance(d.true_thetas));
    } catch (const DegenerateExcitationError& e) {
        out.note = e.what();
    } catch (const RankDeficiencyError& e) {
        out.note = e.what();
    } catch (const InsufficientDataError& e) {
        out.note = e.what();
    }
    return out;
}

std::string context(const ExperimentConfig& cfg, const SweepPoint& p, Seed seed) {
    std::ostringstream os;
    os << "config " << cfg.config_id << " (M=" << p.M << ", N_i=" << p.N_i
       << ", epsilon=" << p.epsilon << ", K_i=" << p.K_i << ", seed=" << seed << "): ";
    return os.str();
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::string key = cfg.swept_key();
    std::vector<SweepPoint> points;
    for (std::size_t k = 0; k < cfg.sweep_size(); ++k) {
        SweepPoint p;
        p.M = cfg.M[cfg.M.size() > 1 ? k : 0];
        p.N_i = cfg.N_i[cfg.N_i.size() > 1 ? k : 0];
        p.epsilon = cfg.epsilon[cfg.epsilon.size() > 1 ? k : 0];
        p.K_i = cfg.K_i[cfg.K_i.size() > 1 ? k : 0];
        if (key == "M") p.swept_value = static_cast<double>(p.M);
        else if (key == "N_i") p.swept_value = static_cast<double>(p.N_i);
        else if (key == "epsilon") p.swept_value = p.epsilon;
        else if (key == "K_i") p.swept_value = static_cast<double>(p.K_i);
        points.push_back(p);
    }
    return points;
}

std::vector<ExperimentRecord> run_unit(const ExperimentConfig& cfg, const SweepPoint& point, Seed seed) {
    try {
        const UnitData d = build_unit(cfg, point, seed);
        std::vector<ClientState> clients;
        const Matrix theta0 = Matrix::Zero(d.base.target_dim(), d.base.feature_dim());
        for (Index i = 0; i < point.M; ++i) {
            ClientState c;
            c.client_id = i;
            c.data = d.batches[static_cast<std::size_t>(i)];
            c.local_theta = theta0;
            c.local_updates = point.K_i;
            c.learning_rate = cfg.alpha;
            c.batch_size = cfg.batch_size;
            clients.push_back(std::move(c));
        }
        FederationOptions fed;
        fed.norm = cfg.norm;
        const FederationState state =
            run_federation(std::move(clients), theta0, cfg.round_count(), d.true_thetas,
                           derive_seed(seed, Stream::federation), fed);

        UnitDiagnostics diag;
        if (cfg.diagnostics) diag = diagnose_unit(cfg, d, seed);

        std::vector<ExperimentRecord> rows;
        rows.reserve(state.history.size());
        for (const ErrorRecord& e : state.history) {
            ExperimentRecord r;
            r.config_id = cfg.config_id;
            r.system = cfg.system;
            r.M = point.M;
            r.N_i = point.N_i;
            r.T = cfg.trajectory_length();
            r.epsilon = point.epsilon;
            r.K_i = point.K_i;
            r.alpha = cfg.alpha;
            r.batch_size = cfg.batch_size;
            r.round = e.round;
            r.seed = seed;
            r.max_error = e.max_error;
            r.mean_error = e.mean_error;
            r.lambda_min_pooled = cfg.diagnostics ? diag.lambda_min_pooled : kNaN;
            r.bound_value = diag.bound ? diag.bound->bound_value : kNaN;
            r.observed_error = diag.bound ? diag.bound->observed_error : kNaN;
            r.swept_value = point.swept_value;
            rows.push_back(std::move(r));
        }
        return rows;
    } catch (const Error& e) {
        throw Error(e.kind(), context(cfg, point, seed) + e.what());
    }
}

void sort_records(std::vector<ExperimentRecord>& records) {
    std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.config_id, a.swept_value, a.seed, a.round) <
               std::tie(b.config_id, b.swept_value, b.seed, b.round);
    });
}

std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    const std::vector<SweepPoint> points = sweep_points(cfg);
    const std::size_t units = points.size() * cfg.seeds.size();
    std::vector<std::optional<std::vector<ExperimentRecord>>> results(units);

    auto collect = [&] {
        std::vector<ExperimentRecord> all;
        for (auto& r : results)
            if (r) all.insert(all.end(), r->begin(), r->end());
        sort_records(all);
        return all;
    };

    try {
        parallel_for(units, options.threads, [&](std::size_t u) {
            const SweepPoint& p = points[u / cfg.seeds.size()];
            const Seed s = cfg.seeds[u % cfg.seeds.size()];
            results[u] = run_unit(cfg, p, s);
        });
    } catch (...) {
        if (!cfg.output_path.empty()) write_csv(cfg.output_path, collect());
        throw;
    }
    std::vector<ExperimentRecord> all = collect();
    if (!cfg.output_path.empty()) write_csv(cfg.output_path, all);
    return all;
}

void write_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
    out << kCsvHeader << '\n';
    for (const ExperimentRecord& r : records) {
        out << r.config_id << ',' << to_string(r.system) << ',' << r.M << ',' << r.N_i << ',' << r.T
            << ',' << format_double(r.epsilon) << ',' << r.K_i << ',' << format_double(r.alpha) << ',';
        if (r.batch_size) out << *r.batch_size;
        out << ',' << r.round << ',' << r.seed << ',' << format_double(r.max_error) << ','
            << format_double(r.mean_error) << ',' << format_double(r.lambda_min_pooled) << ','
            << format_double(r.bound_value) << ',' << format_double(r.observed_error) << '\n';
    }
}

void write_csv(const std::string& path, const std::vector<ExperimentRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write CSV '" + path + "'");
    write_csv(out, records);
    if (!out) throw Error("io", "failed writing CSV '" + path + "'");
}

std::vector<ExperimentRecord> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw Error("schema", "CSV header does not match the experiment schema");
    std::vector<ExperimentRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 16)
            throw Error("schema", "CSV line " + std::to_string(line_no) + " has " +
                                      std::to_string(f.size()) + " fields, expected 16");
        try {
            ExperimentRecord r;
            r.config_id = f[0];
            r.system = parse_system_kind(f[1]);
            r.M = std::stoll(f[2]);
            r.N_i = std::stoll(f[3]);
            r.T = std::stoll(f[4]);
            r.epsilon = std::strtod(f[5].c_str(), nullptr);
            r.K_i = std::stoll(f[6]);
            r.alpha = std::strtod(f[7].c_str(), nullptr);
            if (!f[8].empty()) r.batch_size = std::stoll(f[8]);
            r.round = std::stoll(f[9]);
            r.seed = std::stoull(f[10]);
            r.max_error = std::strtod(f[11].c_str(), nullptr);
            r.mean_error = std::strtod(f[12].c_str(), nullptr);
            r.lambda_min_pooled = std::strtod(f[13].c_str(), nullptr);
            r.bound_value = std::strtod(f[14].c_str(), nullptr);
            r.observed_error = std::strtod(f[15].c_str(), nullptr);
            records.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw Error("schema", "CSV line " + std::to_string(line_no) + " is malformed");
        }
    }
    return records;
}

std::vector<ExperimentRecord> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot read CSV '" + path + "'");
    return read_csv(in);
}

std::vector<nlohmann::json> run_diagnostics(const ExperimentConfig& cfg, const RunOptions& options) {
    const std::vector<SweepPoint> points = sweep_points(cfg);
    const std::size_t units = points.size() * cfg.seeds.size();
    std::vector<nlohmann::json> out(units);
    parallel_for(units, options.threads, [&](std::size_t u) {
        const SweepPoint& p = points[u / cfg.seeds.size()];
        const Seed seed = cfg.seeds[u % cfg.seeds.size()];
        try {
            const UnitData d = build_unit(cfg, p, seed);
            const UnitDiagnostics diag = diagnose_unit(cfg, d, seed);
            nlohmann::json j = {{"config_id", cfg.config_id}, {"system", to_string(cfg.system)},
                                {"M", p.M},  {"N_i", p.N_i},  {"T", cfg.trajectory_length()},
                                {"epsilon", p.epsilon},  {"K_i", p.K_i}, {"seed", seed},
                                {"lambda_min_pooled", diag.lambda_min_pooled}};
            if (!diag.note.empty()) j["note"] = diag.note;
            if (diag.bmsb) {
                j["bmsb"] = {{"s_phi", diag.bmsb->s_phi},
                             {"p_phi", diag.bmsb->p_phi},
                             {"n_directions", diag.bmsb->n_directions},
                             {"n_samples", diag.bmsb->n_samples}};
                const GramReport g = gram_check(d.batches, diag.bmsb->s_phi, diag.bmsb->p_phi, cfg.delta);
                Index passing = 0;
                double min_client = std::numeric_limits<double>::infinity();
                for (const auto& c : g.clients) {
                    passing += c.passes ? 1 : 0;
                    min_client = std::min(min_client, c.lambda_min);
                }
                j["gram"] = {{"pooled_lambda_min", g.pooled_lambda_min},
                             {"pooled_threshold", g.pooled_threshold},
                             {"pooled_passes", g.pooled_passes},
                             {"clients_passing", passing},
                             {"min_client_lambda_min", min_client},
                             {"sample_size_threshold", g.sample_size_threshold},
                             {"sample_size_ok", g.sample_size_ok}};
            }
            if (d.base.noise_std > 0.0) {
                Index violations = 0, scaled_violations = 0;
                double worst_ratio = 0.0;
                for (const auto& b : d.batches) {
                    const CrossTermReport c = noise_crossterm_check(b.noise, b.features, d.base.noise_std,
                                                                    cfg.delta, p.M);
                    violations += c.passes ? 0 : 1;
                    scaled_violations += c.passes_scaled ? 0 : 1;
                    worst_ratio = std::max(worst_ratio, c.observed / c.bound);
                }
                j["crossterm"] = {{"violations", violations},
                                  {"scaled_violations", scaled_violations},
                                  {"max_observed_over_bound", worst_ratio}};
            }
            if (diag.bound) {
                j["bound"] = {{"C1", diag.bound->C1},
                              {"C2", diag.bound->C2},
                              {"b_phi", diag.bound->b_phi},
                              {"delta", diag.bound->delta},
                              {"noise_term", diag.bound->noise_term},
                              {"heterogeneity_term", diag.bound->heterogeneity_term},
                              {"bound_value", diag.bound->bound_value},
                              {"observed_error", diag.bound->observed_error},
                              {"within_bound", diag.bound->within_bound}};
            }
            if (cfg.ridge > 0.0) j["ridge"] = cfg.ridge;
            out[u] = std::move(j);
        } catch (const Error& e) {
            throw Error(e.kind(), context(cfg, p, seed) + e.what());
        }
    });
    return out;
}

}  // namespace fedsysid
