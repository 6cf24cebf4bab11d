#pragma once

#include <array>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fedsysid/core.hpp"
#include "fedsysid/rng.hpp"

namespace fedsysid {

enum class SystemKind { synthetic, pendulum, quadrotor };

SystemKind parse_system_kind(std::string_view name);
std::string_view to_string(SystemKind kind);

/// Building blocks a feature coordinate may be made of. Every registered
/// feature map is composed only of these, which keeps them real-analytic.
enum class FeatureTerm { sine, polynomial, product };

/// Known nonlinear regressor map phi: (x, u) -> R^n_phi.
struct FeatureMap {
    std::string name;
    Index n_x = 0;
    Index n_u = 0;
    Index n_phi = 0;
    /// One entry per output coordinate.
    std::vector<FeatureTerm> terms;
    std::function<Vector(const Vector&, const Vector&)> fn;

    Vector operator()(const Vector& x, const Vector& u) const;
};

enum class Distribution { gaussian, uniform };

/// Per-coordinate distribution. Gaussian draws are N(center, scale^2);
/// uniform draws are U(center - scale, center + scale).
struct DistributionSpec {
    Distribution family = Distribution::gaussian;
    Vector center;
    Vector scale;

    static DistributionSpec gaussian(Vector center, Vector scale);
    static DistributionSpec uniform(Vector center, Vector half_width);

    Index dim() const { return scale.size(); }
    Vector sample(Rng& rng) const;
};

/// A linearly-parameterized nonlinear system x_{t+1} = advance(x, u, theta*phi(x,u) + w).
///
/// The regression problem is y = theta * phi(x, u) + w where y is the system's
/// target (the next state for the synthetic system, velocity residuals for the
/// mechanical ones). `advance` turns (x, u, y) back into the next state, so the
/// simulator and the regression layout share one source of truth.
struct SystemModel {
    SystemKind kind = SystemKind::synthetic;
    FeatureMap features;
    Matrix true_theta;
    /// Standard deviation of w on each target coordinate (discrete level).
    double noise_std = 0.0;
    /// Exploration noise; the applied input is policy(x) + draw.
    DistributionSpec input;
    /// Empty for open-loop systems.
    std::function<Vector(const Vector&)> policy;
    DistributionSpec x0;
    double dt = 1.0;
    Index default_traj_len = 5;
    std::function<Vector(const Vector& x, const Vector& u, const Vector& y)> advance;

    /// Physical parameter blocks (A, B) that heterogeneity perturbs, and the
    /// affine map that assembles them into theta.
    Matrix nominal_a;
    Matrix nominal_b;
    std::function<Matrix(const Matrix& a, const Matrix& b)> assemble_theta;
    /// Scalar physical blocks keep perturbation directions positive so the
    /// perturbed parameters (1/l, 1/m, ...) stay physical.
    bool positive_directions = false;

    Index state_dim() const { return features.n_x; }
    Index input_dim() const { return features.n_u; }
    Index feature_dim() const { return features.n_phi; }
    Index target_dim() const { return true_theta.rows(); }
};

/// Applies one transition with an explicit input and disturbance.
Vector step(const SystemModel& sys, const Vector& x, const Vector& u, const Vector& w);

Matrix make_synthetic_theta(const Matrix& a, const Matrix& b);

/// x_{t+1} = A sin(x_t) + B u_t + w_t with (A0, B0) drawn from N(0, 1).
SystemModel make_synthetic_system(Index n_x = 3, Index n_u = 2, Seed seed = 0, double noise_std = 1.0);

struct PendulumParams {
    double mass = 1.0;       // kg
    double length = 1.0;     // m
    double dt = 0.1;         // s
    double gravity = 9.81;   // m/s^2
    double k_p = 2.0;
    double k_d = 1.0;
    /// Angular-acceleration disturbance std (rad/s^2); enters the
    /// angular-velocity update as dt * w.
    double noise_std = 1.0;
    double input_noise_max = 1.0;       // N*m
    double initial_state_std = 0.3;     // rad and rad/s
};

/// State (alpha, alpha_dot), forward Euler. Regression target is the scalar
/// angular-velocity increment with phi = [sin(alpha); u] and
/// theta = [-dt*A*g, dt*B], A = 1/l, B = 1/(m l^2).
SystemModel make_pendulum_system(const PendulumParams& params = {});

struct QuadrotorParams {
    double mass = 1.0;                               // kg
    std::array<double, 3> inertia{0.05, 0.06, 0.09};  // kg*m^2
    double dt = 0.01;                                // s
    double gravity = 9.81;
    // Hover PD stabilizer.
    double k_p_z = 4.0;
    double k_d_z = 3.0;
    double k_p_att = 25.0;
    double k_d_att = 10.0;
    double noise_std = 1.0;            // acceleration-level disturbance std
    double thrust_noise_max = 2.0;     // N
    double torque_noise_max = 0.05;    // N*m
};

/// Quadrotor theta layout (6 x 9). Rows are the three velocity residuals and
/// three angular-velocity residuals; phi = dt * [R(q) e_z f (3), tau_x,
/// w_y w_z, tau_y, w_z w_x, tau_z, w_x w_y].
struct QuadrotorParameters {
    std::array<double, 7> values;  // theta_1 .. theta_7
};
QuadrotorParameters quadrotor_parameters(double mass, const std::array<double, 3>& inertia);
Matrix quadrotor_theta(const QuadrotorParameters& p);

/// State (p, v, q, omega) with q = (w, x, y, z); inputs (f, tau).
SystemModel make_quadrotor_system(const QuadrotorParams& params = {});

/// Fleet-wide perturbation directions: A^(i) = A0 + g1 V, B^(i) = B0 + g2 U.
struct HeterogeneitySpec {
    double epsilon = 0.0;
    Matrix V;
    Matrix U;
};

/// Draws V, U from N(0, 1) and normalizes each to unit Frobenius norm.
HeterogeneitySpec make_heterogeneity(const SystemModel& base, double epsilon, Seed seed);

/// Theta-space spread constant c with max_ij ||theta_i - theta_j||_2 <= c * epsilon.
double heterogeneity_constant(const SystemModel& base, const HeterogeneitySpec& het);

/// Builds M client systems with gamma_1, gamma_2 ~ U(0, epsilon). Client i's
/// draws come from a substream keyed by i, so a fleet of size M is a prefix of
/// any larger fleet built from the same seed.
std::vector<SystemModel> make_client_fleet(const SystemModel& base, const HeterogeneitySpec& het,
                                           Index num_clients, Seed seed);

/// Column-stacked regression data of one client.
struct TrajectoryBatch {
    Matrix features;  // n_phi x (N*T)
    Matrix targets;   // n_y x (N*T)
    Matrix noise;     // n_y x (N*T), the disturbances that produced targets
    Matrix states;    // n_x x (N*(T+1)), trajectory j at columns j*(T+1) ...
    Index n_traj = 0;
    Index traj_len = 0;

    Index columns() const { return features.cols(); }

    /// Wraps raw regression data (no states or noise) after shape checks.
    static TrajectoryBatch from_columns(Matrix features, Matrix targets, Index n_traj = -1,
                                        Index traj_len = 1);
};

inline constexpr double kDefaultBlowUpThreshold = 1e6;

TrajectoryBatch simulate_batch(const SystemModel& sys, Index n_traj, Index traj_len, Seed seed,
                               double blow_up_threshold = kDefaultBlowUpThreshold);

/// Every feature map the library ships, for structural checks.
std::vector<FeatureMap> feature_map_registry();

}  // namespace fedsysid
