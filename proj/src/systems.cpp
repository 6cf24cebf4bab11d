#include "fedsysid/systems.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedsysid/linalg.hpp"

namespace fedsysid {

namespace {

void require(bool ok, const char* field, const std::string& what) {
    if (!ok) throw ConfigError(field, what);
}

FeatureMap synthetic_features(Index n_x, Index n_u) {
    FeatureMap f;
    f.name = "synthetic_sine";
    f.n_x = n_x;
    f.n_u = n_u;
    f.n_phi = n_x + n_u;
    f.terms.assign(static_cast<std::size_t>(n_x), FeatureTerm::sine);
    f.terms.insert(f.terms.end(), static_cast<std::size_t>(n_u), FeatureTerm::polynomial);
    f.fn = [n_x, n_u](const Vector& x, const Vector& u) {
        Vector phi(n_x + n_u);
        phi.head(n_x) = x.array().sin().matrix();
        phi.tail(n_u) = u;
        return phi;
    };
    return f;
}

FeatureMap pendulum_features() {
    FeatureMap f;
    f.name = "pendulum";
    f.n_x = 2;
    f.n_u = 1;
    f.n_phi = 2;
    f.terms = {FeatureTerm::sine, FeatureTerm::polynomial};
    f.fn = [](const Vector& x, const Vector& u) {
        Vector phi(2);
        phi << std::sin(x(0)), u(0);
        return phi;
    };
    return f;
}

// State layout offsets.
constexpr Index kPos = 0;
constexpr Index kVel = 3;
constexpr Index kQuat = 6;
constexpr Index kOmega = 10;

Eigen::Vector3d thrust_axis(const Vector& x) {
    const double w = x(kQuat), qx = x(kQuat + 1), qy = x(kQuat + 2), qz = x(kQuat + 3);
    return {2.0 * (qx * qz + w * qy), 2.0 * (qy * qz - w * qx), 1.0 - 2.0 * (qx * qx + qy * qy)};
}

FeatureMap quadrotor_features(double dt) {
    FeatureMap f;
    f.name = "quadrotor";
    f.n_x = 13;
    f.n_u = 4;
    f.n_phi = 9;
    f.terms = {FeatureTerm::product,    FeatureTerm::product,    FeatureTerm::product,
               FeatureTerm::polynomial, FeatureTerm::product,    FeatureTerm::polynomial,
               FeatureTerm::product,    FeatureTerm::polynomial, FeatureTerm::product};
    f.fn = [dt](const Vector& x, const Vector& u) {
        const Eigen::Vector3d axis = thrust_axis(x);
        const double wx = x(kOmega), wy = x(kOmega + 1), wz = x(kOmega + 2);
        Vector phi(9);
        phi << axis * u(0), u(1), wy * wz, u(2), wz * wx, u(3), wx * wy;
        return Vector(dt * phi);
    };
    return f;
}

}  // namespace

SystemKind parse_system_kind(std::string_view name) {
    if (name == "synthetic") return SystemKind::synthetic;
    if (name == "pendulum") return SystemKind::pendulum;
    if (name == "quadrotor") return SystemKind::quadrotor;
    throw ConfigError("system", "unknown system '" + std::string(name) +
                                    "' (expected synthetic|pendulum|quadrotor)");
}

std::string_view to_string(SystemKind kind) {
    switch (kind) {
        case SystemKind::synthetic: return "synthetic";
        case SystemKind::pendulum: return "pendulum";
        case SystemKind::quadrotor: return "quadrotor";
    }
    return "unknown";
}

Vector FeatureMap::operator()(const Vector& x, const Vector& u) const {
    if (x.size() != n_x || u.size() != n_u)
        throw ShapeError("feature map '" + name + "' expects (" + std::to_string(n_x) + ", " +
                         std::to_string(n_u) + ") inputs");
    return fn(x, u);
}

DistributionSpec DistributionSpec::gaussian(Vector center, Vector scale) {
    return {Distribution::gaussian, std::move(center), std::move(scale)};
}

DistributionSpec DistributionSpec::uniform(Vector center, Vector half_width) {
    return {Distribution::uniform, std::move(center), std::move(half_width)};
}

Vector DistributionSpec::sample(Rng& rng) const {
    Vector out(dim());
    if (family == Distribution::gaussian) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index i = 0; i < out.size(); ++i) out(i) = center(i) + scale(i) * normal(rng);
    } else {
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        for (Index i = 0; i < out.size(); ++i) out(i) = center(i) + scale(i) * unit(rng);
    }
    return out;
}

Vector step(const SystemModel& sys, const Vector& x, const Vector& u, const Vector& w) {
    if (w.size() != sys.target_dim()) throw ShapeError("disturbance dimension mismatch");
    const Vector y = sys.true_theta * sys.features(x, u) + w;
    return sys.advance(x, u, y);
}

Matrix make_synthetic_theta(const Matrix& a, const Matrix& b) {
    Matrix theta(a.rows(), a.cols() + b.cols());
    theta << a, b;
    return theta;
}

SystemModel make_synthetic_system(Index n_x, Index n_u, Seed seed, double noise_std) {
    require(n_x >= 1, "n_x", "synthetic system needs n_x >= 1");
    require(n_u >= 1, "n_u", "synthetic system needs n_u >= 1");
    require(noise_std >= 0.0, "noise_std", "noise_std must be >= 0");

    SystemModel sys;
    sys.kind = SystemKind::synthetic;
    sys.features = synthetic_features(n_x, n_u);
    Rng rng = make_rng(derive_seed(seed, Stream::nominal));
    sys.nominal_a = standard_normal(n_x, n_x, rng);
    sys.nominal_b = standard_normal(n_x, n_u, rng);
    sys.assemble_theta = make_synthetic_theta;
    sys.true_theta = make_synthetic_theta(sys.nominal_a, sys.nominal_b);
    sys.noise_std = noise_std;
    sys.input = DistributionSpec::gaussian(Vector::Zero(n_u), Vector::Ones(n_u));
    sys.x0 = DistributionSpec::gaussian(Vector::Zero(n_x), Vector::Ones(n_x));
    sys.dt = 1.0;
    sys.default_traj_len = 5;
    sys.advance = [](const Vector&, const Vector&, const Vector& y) { return y; };
    return sys;
}

SystemModel make_pendulum_system(const PendulumParams& p) {
    require(p.mass > 0.0, "mass", "pendulum mass must be > 0");
    require(p.length > 0.0, "length", "pendulum length must be > 0");
    require(p.dt > 0.0, "dt", "pendulum dt must be > 0");
    require(p.noise_std >= 0.0, "noise_std", "noise_std must be >= 0");
    require(p.input_noise_max >= 0.0, "input_noise_max", "input_noise_max must be >= 0");
    require(p.initial_state_std >= 0.0, "initial_state_std", "initial_state_std must be >= 0");

    SystemModel sys;
    sys.kind = SystemKind::pendulum;
    sys.features = pendulum_features();
    sys.nominal_a = Matrix::Constant(1, 1, 1.0 / p.length);
    sys.nominal_b = Matrix::Constant(1, 1, 1.0 / (p.mass * p.length * p.length));
    const double dt = p.dt;
    const double g = p.gravity;
    sys.assemble_theta = [dt, g](const Matrix& a, const Matrix& b) {
        Matrix theta(1, 2);
        theta << -dt * g * a(0, 0), dt * b(0, 0);
        return theta;
    };
    sys.true_theta = sys.assemble_theta(sys.nominal_a, sys.nominal_b);
    sys.positive_directions = true;
    sys.noise_std = dt * p.noise_std;
    sys.input = DistributionSpec::uniform(Vector::Zero(1), Vector::Constant(1, p.input_noise_max));
    const double kp = p.k_p, kd = p.k_d;
    sys.policy = [kp, kd](const Vector& x) {
        Vector u(1);
        u(0) = -kp * x(0) - kd * x(1);
        return u;
    };
    sys.x0 = DistributionSpec::gaussian(Vector::Zero(2), Vector::Constant(2, p.initial_state_std));
    sys.dt = dt;
    sys.default_traj_len = 5;
    sys.advance = [dt](const Vector& x, const Vector&, const Vector& y) {
        Vector next(2);
        next << x(0) + dt * x(1), x(1) + y(0);
        return next;
    };
    return sys;
}

QuadrotorParameters quadrotor_parameters(double mass, const std::array<double, 3>& inertia) {
    const auto [ixx, iyy, izz] = inertia;
    return {{1.0 / mass, 1.0 / ixx, (iyy - izz) / ixx, 1.0 / iyy, (izz - ixx) / iyy, 1.0 / izz,
             (ixx - iyy) / izz}};
}

Matrix quadrotor_theta(const QuadrotorParameters& p) {
    const auto& t = p.values;
    Matrix theta = Matrix::Zero(6, 9);
    theta(0, 0) = theta(1, 1) = theta(2, 2) = t[0];
    theta(3, 3) = t[1];
    theta(3, 4) = t[2];
    theta(4, 5) = t[3];
    theta(4, 6) = t[4];
    theta(5, 7) = t[5];
    theta(5, 8) = t[6];
    return theta;
}

SystemModel make_quadrotor_system(const QuadrotorParams& p) {
    require(p.mass > 0.0, "mass", "quadrotor mass must be > 0");
    for (double i : p.inertia) require(i > 0.0, "inertia", "quadrotor inertias must be > 0");
    require(p.dt > 0.0, "dt", "quadrotor dt must be > 0");
    require(p.noise_std >= 0.0, "noise_std", "noise_std must be >= 0");
    require(p.thrust_noise_max >= 0.0 && p.torque_noise_max >= 0.0, "input_noise_max",
            "input noise bounds must be >= 0");

    SystemModel sys;
    sys.kind = SystemKind::quadrotor;
    sys.features = quadrotor_features(p.dt);
    const QuadrotorParameters nominal = quadrotor_parameters(p.mass, p.inertia);
    sys.nominal_a = Matrix::Constant(1, 1, nominal.values[0]);
    sys.nominal_b = Matrix(0, 0);
    sys.assemble_theta = [nominal](const Matrix& a, const Matrix&) {
        QuadrotorParameters q = nominal;
        q.values[0] = a(0, 0);
        return quadrotor_theta(q);
    };
    sys.true_theta = quadrotor_theta(nominal);
    sys.positive_directions = true;
    sys.noise_std = p.dt * p.noise_std;

    Vector input_half(4);
    input_half << p.thrust_noise_max, p.torque_noise_max, p.torque_noise_max, p.torque_noise_max;
    sys.input = DistributionSpec::uniform(Vector::Zero(4), input_half);

    // The controller only knows nominal constants.
    const double m = p.mass, g = p.gravity;
    const Eigen::Vector3d inertia(p.inertia[0], p.inertia[1], p.inertia[2]);
    const double kpz = p.k_p_z, kdz = p.k_d_z, kpa = p.k_p_att, kda = p.k_d_att;
    sys.policy = [=](const Vector& x) {
        const double tilt = std::max(thrust_axis(x)(2), 0.5);
        const double sign = x(kQuat) >= 0.0 ? 1.0 : -1.0;
        const Eigen::Vector3d att_err = sign * x.segment<3>(kQuat + 1);
        const Eigen::Vector3d omega = x.segment<3>(kOmega);
        Vector u(4);
        u(0) = m * (g - kpz * x(kPos + 2) - kdz * x(kVel + 2)) / tilt;
        u.tail<3>() = inertia.cwiseProduct(-kpa * 2.0 * att_err - kda * omega);
        return u;
    };

    Vector center = Vector::Zero(13);
    center(kQuat) = 1.0;
    Vector scale(13);
    scale << Vector::Constant(3, 0.1), Vector::Constant(3, 0.2), 0.0, Vector::Constant(3, 0.1),
        Vector::Constant(3, 0.5);
    sys.x0 = DistributionSpec::gaussian(center, scale);
    sys.dt = p.dt;
    sys.default_traj_len = 10;

    const double dt = p.dt;
    sys.advance = [dt, g](const Vector& x, const Vector&, const Vector& y) {
        Vector next(13);
        next.segment<3>(kPos) = x.segment<3>(kPos) + dt * x.segment<3>(kVel);
        next.segment<3>(kVel) = x.segment<3>(kVel) + y.head<3>();
        next(kVel + 2) -= dt * g;
        // q_dot = 0.5 * q (x) (0, omega), body-frame rates.
        const Eigen::Quaterniond q(x(kQuat), x(kQuat + 1), x(kQuat + 2), x(kQuat + 3));
        const Eigen::Quaterniond rate(0.0, x(kOmega), x(kOmega + 1), x(kOmega + 2));
        Eigen::Vector4d qn = q.coeffs() + 0.5 * dt * (q * rate).coeffs();
        qn.normalize();
        // Eigen stores (x, y, z, w).
        next(kQuat) = qn(3);
        next.segment<3>(kQuat + 1) = qn.head<3>();
        next.segment<3>(kOmega) = x.segment<3>(kOmega) + y.tail<3>();
        return next;
    };
    return sys;
}

HeterogeneitySpec make_heterogeneity(const SystemModel& base, double epsilon, Seed seed) {
    require(epsilon >= 0.0 && std::isfinite(epsilon), "epsilon", "epsilon must be finite and >= 0");
    Rng rng = make_rng(derive_seed(seed, Stream::perturbation));
    auto direction = [&](const Matrix& like) {
        if (like.size() == 0) return Matrix(like.rows(), like.cols());
        Matrix d = standard_normal(like.rows(), like.cols(), rng);
        if (base.positive_directions) d = d.cwiseAbs();
        return Matrix(d / d.norm());
    };
    HeterogeneitySpec het;
    het.epsilon = epsilon;
    het.V = direction(base.nominal_a);
    het.U = direction(base.nominal_b);
    return het;
}

double heterogeneity_constant(const SystemModel& base, const HeterogeneitySpec& het) {
    const Matrix zero_a = Matrix::Zero(base.nominal_a.rows(), base.nominal_a.cols());
    const Matrix zero_b = Matrix::Zero(base.nominal_b.rows(), base.nominal_b.cols());
    const Matrix origin = base.assemble_theta(zero_a, zero_b);
    const double along_v = spectral_norm(base.assemble_theta(het.V, zero_b) - origin);
    const double along_u =
        het.U.size() == 0 ? 0.0 : spectral_norm(base.assemble_theta(zero_a, het.U) - origin);
    return along_v + along_u;
}

std::vector<SystemModel> make_client_fleet(const SystemModel& base, const HeterogeneitySpec& het,
                                           Index num_clients, Seed seed) {
    require(num_clients >= 1, "M", "fleet needs at least one client");
    require(het.epsilon >= 0.0, "epsilon", "epsilon must be >= 0");
    if (het.V.rows() != base.nominal_a.rows() || het.V.cols() != base.nominal_a.cols() ||
        het.U.rows() != base.nominal_b.rows() || het.U.cols() != base.nominal_b.cols())
        throw ShapeError("perturbation directions do not match the nominal parameter blocks");

    std::vector<SystemModel> fleet;
    fleet.reserve(static_cast<std::size_t>(num_clients));
    for (Index i = 0; i < num_clients; ++i) {
        Rng rng = make_rng(derive_seed(seed, Stream::gamma, {static_cast<std::uint64_t>(i)}));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double g1 = het.epsilon * unit(rng);
        const double g2 = het.epsilon * unit(rng);
        SystemModel client = base;
        client.true_theta =
            base.assemble_theta(base.nominal_a + g1 * het.V, base.nominal_b + g2 * het.U);
        fleet.push_back(std::move(client));
    }
    return fleet;
}

TrajectoryBatch TrajectoryBatch::from_columns(Matrix features, Matrix targets, Index n_traj,
                                              Index traj_len) {
    if (features.cols() != targets.cols())
        throw ShapeError("features and targets must have equal column counts");
    if (features.cols() == 0) throw ShapeError("batch must have at least one column");
    if (n_traj < 0) n_traj = features.cols() / std::max<Index>(traj_len, 1);
    if (n_traj * traj_len != features.cols())
        throw ShapeError("column count must equal n_traj * traj_len");
    TrajectoryBatch b;
    b.features = std::move(features);
    b.targets = std::move(targets);
    b.noise = Matrix::Zero(b.targets.rows(), b.targets.cols());
    b.n_traj = n_traj;
    b.traj_len = traj_len;
    return b;
}

TrajectoryBatch simulate_batch(const SystemModel& sys, Index n_traj, Index traj_len, Seed seed,
                               double blow_up_threshold) {
    require(n_traj >= 1, "N_i", "n_traj must be >= 1");
    require(traj_len >= 1, "T", "traj_len must be >= 1");

    const Index n_phi = sys.feature_dim();
    const Index n_y = sys.target_dim();
    const Index n_x = sys.state_dim();
    TrajectoryBatch batch;
    batch.n_traj = n_traj;
    batch.traj_len = traj_len;
    batch.features.resize(n_phi, n_traj * traj_len);
    batch.targets.resize(n_y, n_traj * traj_len);
    batch.noise.resize(n_y, n_traj * traj_len);
    batch.states.resize(n_x, n_traj * (traj_len + 1));

    for (Index j = 0; j < n_traj; ++j) {
        // Per-trajectory distribution object: normal_distribution caches a
        // spare draw, which must not leak across substreams.
        std::normal_distribution<double> normal(0.0, 1.0);
        Rng rng = make_rng(derive_seed(seed, Stream::trajectory, {static_cast<std::uint64_t>(j)}));
        Vector x = sys.x0.sample(rng);
        if (sys.kind == SystemKind::quadrotor) x.segment<4>(kQuat).normalize();
        batch.states.col(j * (traj_len + 1)) = x;
        for (Index t = 0; t < traj_len; ++t) {
            Vector u = sys.input.sample(rng);
            if (sys.policy) u += sys.policy(x);
            const Vector phi = sys.features(x, u);
            Vector w(n_y);
            for (Index k = 0; k < n_y; ++k) w(k) = sys.noise_std * normal(rng);
            const Vector y = sys.true_theta * phi + w;
            const Index col = j * traj_len + t;
            batch.features.col(col) = phi;
            batch.targets.col(col) = y;
            batch.noise.col(col) = w;
            x = sys.advance(x, u, y);
            if (!x.allFinite() || x.cwiseAbs().maxCoeff() > blow_up_threshold)
                throw SimulationDiverged(j, t,
                                         "trajectory " + std::to_string(j) + " diverged at step " +
                                             std::to_string(t) + " (|x| > " +
                                             std::to_string(blow_up_threshold) + ")");
            batch.states.col(j * (traj_len + 1) + t + 1) = x;
        }
    }
    return batch;
}

std::vector<FeatureMap> feature_map_registry() {
    return {synthetic_features(3, 2), pendulum_features(), quadrotor_features(0.01)};
}

}  // namespace fedsysid
