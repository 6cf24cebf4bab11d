#include "fedsysid/federation.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "fedsysid/parallel.hpp"
#include "fedsysid/rng.hpp"

namespace fedsysid {

namespace {

void check_finite(const Matrix& theta, double threshold, Index client, Index step) {
    if (!theta.allFinite() || theta.cwiseAbs().maxCoeff() > threshold)
        throw FederationDiverged(client, step, -1,
                                 "client " + std::to_string(client) + " diverged at local step " +
                                     std::to_string(step) + " (learning rate too large?)");
}

}  // namespace

Matrix client_update(const ClientState& client, const Matrix& global_theta, Seed seed,
                     double divergence_threshold) {
    const Matrix& phi = client.data.features;
    const Matrix& y = client.data.targets;
    if (global_theta.rows() != y.rows() || global_theta.cols() != phi.rows())
        throw ShapeError("client_update: model shape does not match client " +
                         std::to_string(client.client_id) + " data");
    if (!(client.learning_rate > 0.0)) throw ConfigError("alpha", "learning rate must be > 0");
    if (client.local_updates < 1) throw ConfigError("K_i", "local updates must be >= 1");

    const Index n = phi.cols();
    const double alpha = client.learning_rate;
    Matrix theta = global_theta;

    if (!client.batch_size || *client.batch_size >= n) {
        // Sufficient statistics: (Y - theta Phi) Phi^T = Y Phi^T - theta (Phi Phi^T).
        const Matrix cross = y * phi.transpose();
        const Matrix g = gram(phi);
        for (Index k = 1; k <= client.local_updates; ++k) {
            theta += alpha * (cross - theta * g);
            check_finite(theta, divergence_threshold, client.client_id, k);
        }
        return theta;
    }

    const Index b = *client.batch_size;
    if (b < 1) throw ConfigError("batch_size", "batch size must be >= 1");
    Rng rng = make_rng(seed);
    std::vector<Index> order(static_cast<std::size_t>(n));
    Matrix phi_b(phi.rows(), b);
    Matrix y_b(y.rows(), b);
    for (Index k = 1; k <= client.local_updates; ++k) {
        std::iota(order.begin(), order.end(), Index{0});
        // Partial Fisher-Yates: the first b slots are a uniform sample without replacement.
        for (Index i = 0; i < b; ++i) {
            std::uniform_int_distribution<Index> pick(i, n - 1);
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
            phi_b.col(i) = phi.col(order[static_cast<std::size_t>(i)]);
            y_b.col(i) = y.col(order[static_cast<std::size_t>(i)]);
        }
        theta += alpha * (y_b - theta * phi_b) * phi_b.transpose();
        check_finite(theta, divergence_threshold, client.client_id, k);
    }
    return theta;
}

Matrix aggregate(const std::vector<Matrix>& locals) {
    if (locals.empty()) throw AggregationError("aggregate: no local models");
    const Index rows = locals.front().rows();
    const Index cols = locals.front().cols();
    for (const Matrix& m : locals)
        if (m.rows() != rows || m.cols() != cols)
            throw AggregationError("aggregate: local models have mismatched shapes");

    Matrix mean(rows, cols);
    std::vector<double> values(locals.size());
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            for (std::size_t c = 0; c < locals.size(); ++c) values[c] = locals[c](i, j);
            std::sort(values.begin(), values.end());
            // Offsets from the smallest value, so identical inputs average exactly.
            double sum = 0.0;
            for (double v : values) sum += v - values.front();
            mean(i, j) = values.front() + sum / static_cast<double>(locals.size());
        }
    }
    return mean;
}

FederationState run_federation(std::vector<ClientState> clients, const Matrix& theta0, Index rounds,
                               const std::vector<Matrix>& true_thetas, Seed seed,
                               const FederationOptions& options) {
    if (rounds < 1) throw ConfigError("rounds", "rounds must be >= 1");
    if (clients.empty()) throw ConfigError("M", "federation needs at least one client");
    if (!true_thetas.empty() && true_thetas.size() != clients.size())
        throw ShapeError("run_federation: need one true theta per client");
    for (const ClientState& c : clients) {
        if (c.data.targets.rows() != theta0.rows() || c.data.features.rows() != theta0.cols())
            throw ShapeError("run_federation: client " + std::to_string(c.client_id) +
                             " data does not match theta0 shape");
    }
    // Canonical client order: results never depend on how the caller listed them.
    std::vector<std::size_t> order(clients.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return clients[a].client_id < clients[b].client_id;
    });

    FederationState state;
    state.global_theta = theta0;
    for (ClientState& c : clients) c.local_theta = theta0;

    std::vector<Matrix> locals(clients.size());
    for (Index r = 0; r < rounds; ++r) {
        const Matrix broadcast = state.global_theta;
        parallel_for(clients.size(), options.threads, [&](std::size_t slot) {
            const ClientState& c = clients[order[slot]];
            const Seed client_seed = derive_seed(
                seed, Stream::minibatch,
                {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(c.client_id)});
            try {
                locals[slot] = client_update(c, broadcast, client_seed, options.divergence_threshold);
            } catch (const FederationDiverged& e) {
                throw FederationDiverged(e.client(), e.step(), r,
                                         "round " + std::to_string(r) + ": " + e.what());
            }
        });
        for (std::size_t slot = 0; slot < clients.size(); ++slot)
            clients[order[slot]].local_theta = locals[slot];
        state.global_theta = aggregate(locals);
        state.round = r + 1;
        if (!true_thetas.empty())
            state.history.push_back(error_record(r + 1, state.global_theta, true_thetas, options.norm));
    }
    state.clients = std::move(clients);
    return state;
}

}  // namespace fedsysid
