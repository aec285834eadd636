#include "ehcoop/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "ehcoop/transfer.hpp"

namespace ehcoop {

std::string to_string(BaselineKind kind) {
    return kind == BaselineKind::constant_power_no_coop ? "constant_power_no_coop" : "constant_power_with_coop";
}

BaselineKind parse_baseline(const std::string& s) {
    if (s == "constant_power_no_coop" || s == "no_coop") return BaselineKind::constant_power_no_coop;
    if (s == "constant_power_with_coop" || s == "with_coop") return BaselineKind::constant_power_with_coop;
    throw InputError("unknown baseline kind '" + s + "'");
}

TransferPolicy constant_power(const Scenario& scenario, BaselineKind kind, CoopMode mode) {
    const Scenario sc = with_mode(scenario, kind == BaselineKind::constant_power_no_coop ? CoopMode::no_cooperation : mode);
    const std::size_t n = sc.n_slots();
    TransferPolicy out = TransferPolicy::zeros(n);
    if (n == 0) return out;
    std::array<double, 2> mean{};
    for (int k = 0; k < 2; ++k)
        mean[k] = std::accumulate(sc.harvests[k].begin(), sc.harvests[k].end(), 0.0) / static_cast<double>(n);
    std::array<double, 2> S{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, 2> x{};
        for (int k = 0; k < 2; ++k) {
            const double avail = S[k] + sc.harvests[k][i];
            x[k] = std::min(avail, mean[k]);
            S[k] = avail - x[k];
            if (!sc.capacity[k].is_infinite()) S[k] = std::min(S[k], sc.capacity[k].mj());
        }
        const SlotTransfer tr = slot_transfer(sc.model, x[0], x[1], sc);
        for (int k = 0; k < 2; ++k) {
            const int j = 1 - k;
            out.p[k][i] = std::max(0.0, x[k] - tr.delta[k] + sc.alpha[j] * tr.delta[j]);
            out.delta[k][i] = tr.delta[k];
        }
    }
    return out;
}

}  // namespace ehcoop
