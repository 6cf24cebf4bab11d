#pragma once

#include <optional>
#include <vector>

#include "fedsysid/core.hpp"
#include "fedsysid/estimation.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/systems.hpp"

namespace fedsysid {

struct ClientState {
    Index client_id = 0;
    TrajectoryBatch data;
    Matrix local_theta;
    Index local_updates = 1;
    double learning_rate = 1e-2;
    /// Absent means full-batch gradient descent.
    std::optional<Index> batch_size;
};

struct FederationState {
    Index round = 0;
    Matrix global_theta;
    std::vector<ClientState> clients;
    /// One record per completed round (rounds 1..R); empty when no ground
    /// truth was supplied.
    std::vector<ErrorRecord> history;
};

struct FederationOptions {
    NormKind norm = NormKind::spectral;
    unsigned threads = 1;
    /// |theta| entries above this are treated as overflow.
    double divergence_threshold = 1e12;
};

/// K local steps of theta <- theta + alpha (Y - theta Phi) Phi^T from the
/// broadcast model. Mini-batch mode uses the same sum-form update restricted to
/// `batch_size` columns sampled without replacement, freshly for each step.
Matrix client_update(const ClientState& client, const Matrix& global_theta, Seed seed,
                     double divergence_threshold = 1e12);

/// Entry-wise arithmetic mean. Each entry is summed over its values in sorted
/// order, so the result is bit-identical under any permutation of `locals`.
Matrix aggregate(const std::vector<Matrix>& locals);

/// Runs R rounds of broadcast, local updates and averaging.
FederationState run_federation(std::vector<ClientState> clients, const Matrix& theta0, Index rounds,
                               const std::vector<Matrix>& true_thetas, Seed seed,
                               const FederationOptions& options = {});

}  // namespace fedsysid
