#pragma once

#include <array>
#include <cstdint>

#include "ehcoop/model.hpp"

namespace ehcoop {

// Brute-force reference for small instances.
struct DpConfig {
    double energy_quantum_mJ = 0.0;  // 0: derived from grid_points
    int grid_points = 40;            // quanta per largest single harvest
    std::uint64_t max_states = 400'000'000;  // cap on state-action evaluations
};

struct DpResult {
    double value_nats = 0.0;  // optimum of the quantized problem, a lower bound
    TransferPolicy policy;    // feasible under the exact dynamics
    double quantum_mJ = 0.0;
    std::uint64_t evaluations = 0;
};

/// Backward value iteration over quantized battery levels. Consumed energies
/// are rounded down to the grid; transfers within a slot follow the closed
/// form, and a full battery may pass its overflow to a node that is idle in
/// that slot.
DpResult dp_solve(const Scenario& sc, const DpConfig& cfg = {}, CoopMode mode = CoopMode::bidirectional);

struct GridTransfer {
    std::array<double, 2> delta{0.0, 0.0};
    double rate_nats = 0.0;
};

/// Exhaustive search over one-directional transfers on a uniform grid.
GridTransfer grid_transfer_max(ModelKind model, double pb1, double pb2, const Scenario& sc, int points);

}  // namespace ehcoop
