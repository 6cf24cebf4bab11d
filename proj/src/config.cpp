#include "fedsysid/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fedsysid {

namespace {

using nlohmann::json;

const std::set<std::string, std::less<>> kKnownKeys = {
    "config_id", "system",      "M",           "N_i",   "T",           "epsilon",
    "K_i",       "alpha",       "batch_size",  "rounds", "seeds",      "norm",
    "delta",     "output_path", "noise_std",   "ridge", "diagnostics", "bmsb_directions",
    "bmsb_quantile", "n_x",     "n_u"};

Index as_count(const json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ConfigError(key, "'" + key + "' must be an integer");
    const auto n = v.get<std::int64_t>();
    if (n < 1) throw ConfigError(key, "'" + key + "' must be >= 1");
    return static_cast<Index>(n);
}

double as_real(const json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError(key, "'" + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(key, "'" + key + "' must be finite");
    return x;
}

std::vector<Index> as_count_list(const json& v, const std::string& key) {
    if (!v.is_array()) return {as_count(v, key)};
    if (v.empty()) throw ConfigError(key, "'" + key + "' sweep list is empty");
    std::vector<Index> out;
    for (const json& e : v) out.push_back(as_count(e, key));
    return out;
}

std::vector<double> as_real_list(const json& v, const std::string& key) {
    if (!v.is_array()) return {as_real(v, key)};
    if (v.empty()) throw ConfigError(key, "'" + key + "' sweep list is empty");
    std::vector<double> out;
    for (const json& e : v) out.push_back(as_real(e, key));
    return out;
}

std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError(key, "'" + key + "' must be a string");
    return v.get<std::string>();
}

}  // namespace

std::string ExperimentConfig::swept_key() const {
    if (M.size() > 1) return "M";
    if (N_i.size() > 1) return "N_i";
    if (epsilon.size() > 1) return "epsilon";
    if (K_i.size() > 1) return "K_i";
    return {};
}

Index ExperimentConfig::trajectory_length() const {
    if (T) return *T;
    return system == SystemKind::quadrotor ? 10 : 5;
}

Index ExperimentConfig::round_count() const {
    if (rounds) return *rounds;
    switch (system) {
        case SystemKind::synthetic: return 2000;
        case SystemKind::pendulum: return batch_size ? 1000 : 500;
        case SystemKind::quadrotor: return 500;
    }
    return 500;
}

std::size_t ExperimentConfig::sweep_size() const {
    return std::max({M.size(), N_i.size(), epsilon.size(), K_i.size()});
}

void validate(const ExperimentConfig& cfg) {
    int sweeps = 0;
    for (std::size_t n : {cfg.M.size(), cfg.N_i.size(), cfg.epsilon.size(), cfg.K_i.size()})
        sweeps += n > 1 ? 1 : 0;
    if (sweeps > 1)
        throw ConfigError("sweep", "at most one of M, N_i, epsilon, K_i may be a sweep list");
    auto positive = [](const std::vector<Index>& v) {
        return std::all_of(v.begin(), v.end(), [](Index x) { return x >= 1; });
    };
    if (cfg.M.empty() || !positive(cfg.M)) throw ConfigError("M", "'M' must be >= 1");
    if (cfg.N_i.empty() || !positive(cfg.N_i)) throw ConfigError("N_i", "'N_i' must be >= 1");
    if (cfg.K_i.empty() || !positive(cfg.K_i)) throw ConfigError("K_i", "'K_i' must be >= 1");
    if (cfg.epsilon.empty() ||
        std::any_of(cfg.epsilon.begin(), cfg.epsilon.end(), [](double e) { return !(e >= 0.0); }))
        throw ConfigError("epsilon", "'epsilon' must be >= 0");
    if (cfg.T && *cfg.T < 1) throw ConfigError("T", "'T' must be >= 1");
    if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha))
        throw ConfigError("alpha", "'alpha' must be > 0");
    if (cfg.batch_size && *cfg.batch_size < 1)
        throw ConfigError("batch_size", "'batch_size' must be >= 1");
    if (cfg.batch_size) {
        const Index min_cols =
            *std::min_element(cfg.N_i.begin(), cfg.N_i.end()) * cfg.trajectory_length();
        if (*cfg.batch_size > min_cols)
            throw ConfigError("batch_size", "'batch_size' exceeds N_i * T");
    }
    if (cfg.rounds && *cfg.rounds < 1) throw ConfigError("rounds", "'rounds' must be >= 1");
    if (cfg.seeds.empty()) throw ConfigError("seeds", "'seeds' must not be empty");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("delta", "'delta' must lie in (0, 1)");
    if (cfg.noise_std && !(*cfg.noise_std >= 0.0))
        throw ConfigError("noise_std", "'noise_std' must be >= 0");
    if (!(cfg.ridge >= 0.0)) throw ConfigError("ridge", "'ridge' must be >= 0");
    if (cfg.bmsb_directions < 1)
        throw ConfigError("bmsb_directions", "'bmsb_directions' must be >= 1");
    if (!(cfg.bmsb_quantile > 0.0 && cfg.bmsb_quantile < 1.0))
        throw ConfigError("bmsb_quantile", "'bmsb_quantile' must lie in (0, 1)");
    if (cfg.n_x < 1) throw ConfigError("n_x", "'n_x' must be >= 1");
    if (cfg.n_u < 1) throw ConfigError("n_u", "'n_u' must be >= 1");
    if (cfg.config_id.empty() || cfg.config_id.find_first_of(",\n\r\"") != std::string::npos)
        throw ConfigError("config_id", "'config_id' must be non-empty without commas or quotes");
}

ExperimentConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
    for (const auto& [key, _] : doc.items())
        if (!kKnownKeys.contains(key)) throw ConfigError(key, "unknown config key '" + key + "'");

    ExperimentConfig cfg;
    if (!doc.contains("system")) throw ConfigError("system", "missing required key 'system'");
    if (!doc.contains("alpha")) throw ConfigError("alpha", "missing required key 'alpha'");

    for (const auto& [key, v] : doc.items()) {
        if (key == "config_id") cfg.config_id = as_string(v, key);
        else if (key == "system") cfg.system = parse_system_kind(as_string(v, key));
        else if (key == "M") cfg.M = as_count_list(v, key);
        else if (key == "N_i") cfg.N_i = as_count_list(v, key);
        else if (key == "T") cfg.T = as_count(v, key);
        else if (key == "epsilon") cfg.epsilon = as_real_list(v, key);
        else if (key == "K_i") cfg.K_i = as_count_list(v, key);
        else if (key == "alpha") cfg.alpha = as_real(v, key);
        else if (key == "batch_size") {
            if (!v.is_null()) cfg.batch_size = as_count(v, key);
        } else if (key == "rounds") cfg.rounds = as_count(v, key);
        else if (key == "seeds") {
            if (!v.is_array()) throw ConfigError(key, "'seeds' must be a list of integers");
            cfg.seeds.clear();
            for (const json& s : v) {
                if (!s.is_number_integer() || s.get<std::int64_t>() < 0)
                    throw ConfigError(key, "'seeds' entries must be non-negative integers");
                cfg.seeds.push_back(s.get<Seed>());
            }
        } else if (key == "norm") {
            try {
                cfg.norm = parse_norm_kind(as_string(v, key));
            } catch (const ConfigError& e) {
                throw ConfigError(key, e.what());
            }
        } else if (key == "delta") cfg.delta = as_real(v, key);
        else if (key == "output_path") cfg.output_path = as_string(v, key);
        else if (key == "noise_std") cfg.noise_std = as_real(v, key);
        else if (key == "ridge") cfg.ridge = as_real(v, key);
        else if (key == "diagnostics") {
            if (!v.is_boolean()) throw ConfigError(key, "'diagnostics' must be a boolean");
            cfg.diagnostics = v.get<bool>();
        } else if (key == "bmsb_directions") cfg.bmsb_directions = as_count(v, key);
        else if (key == "bmsb_quantile") cfg.bmsb_quantile = as_real(v, key);
        else if (key == "n_x") cfg.n_x = as_count(v, key);
        else if (key == "n_u") cfg.n_u = as_count(v, key);
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot read config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", "config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

std::vector<Seed> parse_seed_list(std::string_view text) {
    std::vector<Seed> seeds;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find(',', pos), text.size());
        const std::string_view token = text.substr(pos, end - pos);
        Seed s = 0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), s);
        if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size())
            throw ConfigError("seeds", "invalid seed list '" + std::string(text) + "'");
        seeds.push_back(s);
        pos = end + 1;
    }
    return seeds;
}

SystemModel make_base_system(const ExperimentConfig& cfg, Seed seed) {
    switch (cfg.system) {
        case SystemKind::synthetic:
            return make_synthetic_system(cfg.n_x, cfg.n_u, seed, cfg.noise_std.value_or(1.0));
        case SystemKind::pendulum: {
            PendulumParams p;
            if (cfg.noise_std) p.noise_std = *cfg.noise_std;
            return make_pendulum_system(p);
        }
        case SystemKind::quadrotor: {
            QuadrotorParams p;
            if (cfg.noise_std) p.noise_std = *cfg.noise_std;
            return make_quadrotor_system(p);
        }
    }
    throw ConfigError("system", "unknown system");
}

}  // namespace fedsysid
