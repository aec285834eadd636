#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ehcoop/model.hpp"
#include "ehcoop/transfer.hpp"

namespace ehcoop {

struct SolveReport {
    DecomposedPolicy policy;
    TransferPolicy transmit;
    double objective_nats = 0.0;
    WaterLevels levels;
    std::vector<Regime> regimes;  // per slot
    int bcd_iterations = 0;
    std::vector<double> objective_trace;  // one entry per outer iteration
    double level_residual = 0.0;
    CoopMode mode = CoopMode::bidirectional;
    bool converged = true;
    std::string engine;  // which solver produced the final policy
    std::vector<std::string> warnings;
};

struct MacReduction {
    std::array<double, 2> alpha_star{1.0, 1.0};
    std::vector<double> aggregate;
};

// Result of a single-node allocation with the other node held fixed.
struct NodeAllocation {
    std::vector<double> consumed;
    std::vector<double> wasted;  // energy that can only overflow or stay unused
    std::vector<double> level;   // common level of the segment each slot belongs to
};

/// Directional water-filling for node k against fixed consumption of the
/// other node, unbounded battery, by forward pool merging.
std::vector<double> dwf_node(int k, const std::vector<double>& consumed_other, const Scenario& sc,
                             CoopMode mode = CoopMode::bidirectional);

/// Same problem for arbitrary level curves, harvests and an optional battery
/// size, solved as a taut string between the empty and full battery bounds.
NodeAllocation fill_node(const std::vector<LevelCurve>& curves, const std::vector<double>& harvest,
                         std::optional<double> capacity);

/// Pool-merge variant of fill_node for unbounded batteries.
NodeAllocation fill_node_pooled(const std::vector<LevelCurve>& curves, const std::vector<double>& harvest);

SolveReport bcd_solve(const Scenario& sc, CoopMode mode = CoopMode::bidirectional);
SolveReport thc_solve(const Scenario& sc, CoopMode mode = CoopMode::bidirectional);

MacReduction mac_reduce(const Scenario& sc);
std::vector<double> staircase(const std::vector<double>& aggregate, const BatteryCapacity& capacity);
SolveReport mac_solve(const Scenario& sc, CoopMode mode = CoopMode::bidirectional);

/// Finite batteries: alternating horizontal fills with a vertical search for
/// transfers out of full batteries. With refine, the result is compared with
/// a joint barrier solve and the better policy is kept.
SolveReport dwf_finite(const Scenario& sc, CoopMode mode = CoopMode::bidirectional, bool refine = true);

/// Picks the solver matching the scenario's model and battery type.
SolveReport solve(const Scenario& sc, CoopMode mode = CoopMode::bidirectional);

/// Largest relative violation of the per-node directional level conditions.
double level_residual(const Scenario& sc, const DecomposedPolicy& dp);

/// Builds a complete report from consumed powers and stored transfers:
/// per-slot transfers are recomputed in closed form.
SolveReport make_report(const Scenario& sc, CoopMode mode, NodeSeries consumed, NodeSeries stored);

}  // namespace ehcoop
