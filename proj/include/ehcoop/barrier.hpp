#pragma once

#include "ehcoop/model.hpp"

namespace ehcoop {

// General-purpose reference solver: log-barrier interior point method on the
// transmit/transfer formulation, with sparse Newton steps. Slower than the
// water-filling solvers but makes no structural assumptions, so it is used to
// refine non-smooth cases and to cross-check.
struct BarrierOptions {
    double gap_tol = 1e-9;
    int max_newton = 3000;
};

struct BarrierResult {
    TransferPolicy policy;
    double objective_nats = 0.0;
    int newton_steps = 0;
    bool converged = false;
};

/// Transfer directions with zero efficiency are left out of the problem.
BarrierResult barrier_solve(const Scenario& sc, const BarrierOptions& opt = {});

}  // namespace ehcoop
