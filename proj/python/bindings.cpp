#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedsysid/config.hpp"
#include "fedsysid/diagnostics.hpp"
#include "fedsysid/estimation.hpp"
#include "fedsysid/federation.hpp"
#include "fedsysid/harness.hpp"
#include "fedsysid/scaling.hpp"
#include "fedsysid/systems.hpp"

namespace py = pybind11;
using namespace fedsysid;

namespace {

std::vector<ClientState> make_clients(const std::vector<TrajectoryBatch>& batches, const Matrix& theta0,
                                      Index local_updates, double alpha,
                                      std::optional<Index> batch_size) {
    std::vector<ClientState> clients;
    for (std::size_t i = 0; i < batches.size(); ++i) {
        ClientState c;
        c.client_id = static_cast<Index>(i);
        c.data = batches[i];
        c.local_theta = theta0;
        c.local_updates = local_updates;
        c.learning_rate = alpha;
        c.batch_size = batch_size;
        clients.push_back(std::move(c));
    }
    return clients;
}

py::dict record_to_dict(const ExperimentRecord& r) {
    py::dict d;
    d["config_id"] = r.config_id;
    d["system"] = std::string(to_string(r.system));
    d["M"] = r.M;
    d["N_i"] = r.N_i;
    d["T"] = r.T;
    d["epsilon"] = r.epsilon;
    d["K_i"] = r.K_i;
    d["alpha"] = r.alpha;
    d["batch_size"] = r.batch_size ? py::cast(*r.batch_size) : py::none();
    d["round"] = r.round;
    d["seed"] = r.seed;
    d["max_error"] = r.max_error;
    d["mean_error"] = r.mean_error;
    d["lambda_min_pooled"] = r.lambda_min_pooled;
    d["bound_value"] = r.bound_value;
    d["observed_error"] = r.observed_error;
    return d;
}

}  // namespace

PYBIND11_MODULE(_fedsysid, m) {
    m.doc() = "Federated identification of linearly-parameterized nonlinear systems";

    static py::exception<Error> base_error(m, "FedSysIdError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(base_error.ptr(), (e.kind() + ": " + e.what()).c_str());
        }
    });

    py::enum_<SystemKind>(m, "SystemKind")
        .value("synthetic", SystemKind::synthetic)
        .value("pendulum", SystemKind::pendulum)
        .value("quadrotor", SystemKind::quadrotor);

    py::class_<SystemModel>(m, "SystemModel")
        .def_readonly("kind", &SystemModel::kind)
        .def_readonly("true_theta", &SystemModel::true_theta)
        .def_readonly("noise_std", &SystemModel::noise_std)
        .def_readonly("dt", &SystemModel::dt)
        .def_readonly("default_traj_len", &SystemModel::default_traj_len)
        .def_property_readonly("state_dim", &SystemModel::state_dim)
        .def_property_readonly("input_dim", &SystemModel::input_dim)
        .def_property_readonly("feature_dim", &SystemModel::feature_dim)
        .def_property_readonly("target_dim", &SystemModel::target_dim)
        .def("features", [](const SystemModel& s, const Vector& x, const Vector& u) { return s.features(x, u); })
        .def("step", [](const SystemModel& s, const Vector& x, const Vector& u, const Vector& w) {
            return step(s, x, u, w);
        });

    py::class_<HeterogeneitySpec>(m, "HeterogeneitySpec")
        .def_readonly("epsilon", &HeterogeneitySpec::epsilon)
        .def_readonly("V", &HeterogeneitySpec::V)
        .def_readonly("U", &HeterogeneitySpec::U);

    py::class_<TrajectoryBatch>(m, "TrajectoryBatch")
        .def(py::init([](const Matrix& features, const Matrix& targets, Index n_traj, Index traj_len) {
                 return TrajectoryBatch::from_columns(features, targets, n_traj, traj_len);
             }),
             py::arg("features"), py::arg("targets"), py::arg("n_traj") = -1, py::arg("traj_len") = 1)
        .def_readonly("features", &TrajectoryBatch::features)
        .def_readonly("targets", &TrajectoryBatch::targets)
        .def_readonly("noise", &TrajectoryBatch::noise)
        .def_readonly("states", &TrajectoryBatch::states)
        .def_readonly("n_traj", &TrajectoryBatch::n_traj)
        .def_readonly("traj_len", &TrajectoryBatch::traj_len)
        .def_property_readonly("columns", &TrajectoryBatch::columns);

    m.def("make_synthetic_system", &make_synthetic_system, py::arg("n_x") = 3, py::arg("n_u") = 2,
          py::arg("seed") = 0, py::arg("noise_std") = 1.0);
    m.def(
        "make_pendulum_system",
        [](double mass, double length, double dt, double k_p, double k_d, double noise_std,
           double input_noise_max) {
            PendulumParams p;
            p.mass = mass;
            p.length = length;
            p.dt = dt;
            p.k_p = k_p;
            p.k_d = k_d;
            p.noise_std = noise_std;
            p.input_noise_max = input_noise_max;
            return make_pendulum_system(p);
        },
        py::arg("mass") = 1.0, py::arg("length") = 1.0, py::arg("dt") = 0.1, py::arg("k_p") = 2.0,
        py::arg("k_d") = 1.0, py::arg("noise_std") = PendulumParams{}.noise_std,
        py::arg("input_noise_max") = 1.0);
    m.def(
        "make_quadrotor_system",
        [](double mass, std::array<double, 3> inertia, double dt, double noise_std) {
            QuadrotorParams p;
            p.mass = mass;
            p.inertia = inertia;
            p.dt = dt;
            p.noise_std = noise_std;
            return make_quadrotor_system(p);
        },
        py::arg("mass") = 1.0, py::arg("inertia") = QuadrotorParams{}.inertia, py::arg("dt") = 0.01,
        py::arg("noise_std") = QuadrotorParams{}.noise_std);
    m.def("make_heterogeneity", &make_heterogeneity, py::arg("base"), py::arg("epsilon"), py::arg("seed"));
    m.def("make_client_fleet", &make_client_fleet, py::arg("base"), py::arg("het"), py::arg("num_clients"),
          py::arg("seed"));
    m.def("simulate_batch", &simulate_batch, py::arg("system"), py::arg("n_traj"), py::arg("traj_len"),
          py::arg("seed"), py::arg("blow_up_threshold") = kDefaultBlowUpThreshold);

    m.def("lse_client", &lse_client, py::arg("batch"), py::arg("ridge") = 0.0);
    m.def("lse_pooled_average", &lse_pooled_average, py::arg("batches"), py::arg("ridge") = 0.0);
    m.def(
        "estimation_error",
        [](const Matrix& hat, const Matrix& truth, const std::string& norm) {
            return estimation_error(hat, truth, parse_norm_kind(norm));
        },
        py::arg("theta_hat"), py::arg("theta_true"), py::arg("norm") = "spectral");

    m.def("aggregate", &aggregate, py::arg("locals"));
    m.def(
        "client_update",
        [](const TrajectoryBatch& batch, const Matrix& global_theta, Index local_updates, double alpha,
           std::optional<Index> batch_size, Seed seed) {
            const auto clients = make_clients({batch}, global_theta, local_updates, alpha, batch_size);
            return client_update(clients.front(), global_theta, seed);
        },
        py::arg("batch"), py::arg("global_theta"), py::arg("local_updates") = 1, py::arg("alpha") = 1e-2,
        py::arg("batch_size") = py::none(), py::arg("seed") = 0);
    m.def(
        "run_federation",
        [](const std::vector<TrajectoryBatch>& batches, const Matrix& theta0, Index rounds,
           const std::vector<Matrix>& true_thetas, Index local_updates, double alpha,
           std::optional<Index> batch_size, Seed seed, unsigned threads) {
            FederationOptions opts;
            opts.threads = threads;
            const FederationState state =
                run_federation(make_clients(batches, theta0, local_updates, alpha, batch_size), theta0,
                               rounds, true_thetas, seed, opts);
            py::dict out;
            out["global_theta"] = state.global_theta;
            out["round"] = state.round;
            std::vector<double> max_errors, mean_errors;
            for (const auto& e : state.history) {
                max_errors.push_back(e.max_error);
                mean_errors.push_back(e.mean_error);
            }
            out["max_error"] = max_errors;
            out["mean_error"] = mean_errors;
            return out;
        },
        py::arg("batches"), py::arg("theta0"), py::arg("rounds"), py::arg("true_thetas"),
        py::arg("local_updates") = 1, py::arg("alpha") = 1e-2, py::arg("batch_size") = py::none(),
        py::arg("seed") = 0, py::arg("threads") = 1);

    m.def(
        "estimate_bmsb",
        [](const Matrix& features, Index n_directions, double quantile, Seed seed) {
            const BmsbEstimate e = estimate_bmsb(features, n_directions, quantile, seed);
            py::dict d;
            d["s_phi"] = e.s_phi;
            d["p_phi"] = e.p_phi;
            d["n_directions"] = e.n_directions;
            d["n_samples"] = e.n_samples;
            return d;
        },
        py::arg("features"), py::arg("n_directions") = kDefaultBmsbDirections,
        py::arg("quantile") = kDefaultBmsbQuantile, py::arg("seed") = 0);
    m.def(
        "gram_check",
        [](const std::vector<TrajectoryBatch>& batches, double s_phi, double p_phi, double delta) {
            const GramReport g = gram_check(batches, s_phi, p_phi, delta);
            py::dict d;
            std::vector<double> lmins;
            std::vector<bool> passes;
            for (const auto& c : g.clients) {
                lmins.push_back(c.lambda_min);
                passes.push_back(c.passes);
            }
            d["client_lambda_min"] = lmins;
            d["client_passes"] = passes;
            d["pooled_lambda_min"] = g.pooled_lambda_min;
            d["pooled_threshold"] = g.pooled_threshold;
            d["pooled_passes"] = g.pooled_passes;
            d["sample_size_threshold"] = g.sample_size_threshold;
            d["sample_size_ok"] = g.sample_size_ok;
            return d;
        },
        py::arg("batches"), py::arg("s_phi"), py::arg("p_phi"), py::arg("delta"));
    m.def(
        "noise_crossterm_check",
        [](const Matrix& noise, const Matrix& features, double sigma_w, double delta, Index num_clients) {
            const CrossTermReport r = noise_crossterm_check(noise, features, sigma_w, delta, num_clients);
            py::dict d;
            d["observed"] = r.observed;
            d["bound"] = r.bound;
            d["scaled_bound"] = r.scaled_bound;
            d["b_phi"] = r.b_phi;
            d["passes"] = r.passes;
            return d;
        },
        py::arg("noise"), py::arg("features"), py::arg("sigma_w"), py::arg("delta"), py::arg("num_clients"));

    m.def(
        "run_experiment_json",
        [](const std::string& config_json, unsigned threads) {
            const ExperimentConfig cfg = parse_config(nlohmann::json::parse(config_json));
            std::vector<ExperimentRecord> records;
            {
                py::gil_scoped_release release;
                records = run_experiment(cfg, {threads});
            }
            py::list out;
            for (const auto& r : records) out.append(record_to_dict(r));
            return out;
        },
        py::arg("config_json"), py::arg("threads") = 1);
    m.def(
        "sqrtm_scaling_csv",
        [](const std::string& path) {
            const ScalingReport r = sqrtM_scaling(read_csv(path));
            py::dict d;
            d["slope"] = r.fit.slope;
            d["intercept"] = r.fit.intercept;
            d["r_squared"] = r.fit.r_squared;
            std::vector<Index> ms;
            std::vector<double> errs;
            for (const auto& row : r.rows) {
                ms.push_back(row.M);
                errs.push_back(row.mean_error);
            }
            d["M"] = ms;
            d["mean_error"] = errs;
            return d;
        },
        py::arg("path"));
}
