#include "ehcoop/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ehcoop {

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::twc: return "TWC";
    case ModelKind::thc: return "THC";
    case ModelKind::mac: return "MAC";
    }
    return "?";
}

std::string to_string(CoopMode mode) {
    switch (mode) {
    case CoopMode::bidirectional: return "bi";
    case CoopMode::uni_1_to_2: return "uni12";
    case CoopMode::uni_2_to_1: return "uni21";
    case CoopMode::no_cooperation: return "none";
    }
    return "?";
}

ModelKind parse_model_kind(const std::string& text) {
    if (text == "TWC" || text == "twc") return ModelKind::twc;
    if (text == "THC" || text == "thc") return ModelKind::thc;
    if (text == "MAC" || text == "mac") return ModelKind::mac;
    throw InputError("model must be one of TWC, THC, MAC (got '" + text + "')");
}

CoopMode parse_coop_mode(const std::string& text) {
    if (text == "bi" || text == "bidirectional") return CoopMode::bidirectional;
    if (text == "uni12" || text == "uni_1_to_2") return CoopMode::uni_1_to_2;
    if (text == "uni21" || text == "uni_2_to_1") return CoopMode::uni_2_to_1;
    if (text == "none" || text == "no_cooperation") return CoopMode::no_cooperation;
    throw InputError("mode must be one of bi, uni12, uni21, none (got '" + text + "')");
}

BatteryCapacity BatteryCapacity::finite(double mj) {
    if (!(mj > 0.0) || !std::isfinite(mj))
        throw InputError("battery_capacity must be a positive number of mJ or \"inf\"");
    BatteryCapacity c;
    c.mj_ = mj;
    return c;
}

double BatteryCapacity::mj() const {
    if (!mj_) throw std::logic_error("mj() called on an infinite battery");
    return *mj_;
}

double Scenario::linear_gain(int k) const { return std::pow(10.0, gain_db[k] / 10.0); }

void Scenario::finalize() {
    if (harvests[0].size() != harvests[1].size())
        throw InputError("harvests: both nodes need the same number of slots");
    if (harvests[0].empty()) throw InputError("harvests: at least one slot is required");
    if (!(slot_seconds > 0.0)) throw InputError("slot_seconds must be positive");
    for (int k = 0; k < 2; ++k) {
        for (double e : harvests[k])
            if (!(e >= 0.0) || !std::isfinite(e)) throw InputError("harvests must be non-negative");
        if (!(alpha[k] >= 0.0 && alpha[k] <= 1.0))
            throw InputError("transfer_efficiency must lie in [0,1]");
        if (!(noise_w[k] > 0.0)) throw InputError("noise_power_w must be positive");
        if (!std::isfinite(gain_db[k])) throw InputError("channel_gain_db must be finite");
    }
    // The signal of node k is heard at node j, so its noise is sigma_j^2.
    for (int k = 0; k < 2; ++k) effective_noise_mw[k] = noise_w[1 - k] / linear_gain(k) * 1e3;
}

Scenario make_scenario(ModelKind model, std::vector<double> e1, std::vector<double> e2,
                       std::array<double, 2> alpha, std::array<double, 2> noise_mw) {
    Scenario sc;
    sc.model = model;
    sc.harvests = {std::move(e1), std::move(e2)};
    sc.alpha = alpha;
    sc.gain_db = {0.0, 0.0};
    sc.noise_w = {noise_mw[1] * 1e-3, noise_mw[0] * 1e-3};
    sc.finalize();
    return sc;
}

Scenario with_mode(const Scenario& sc, CoopMode mode) {
    Scenario out = sc;
    if (mode == CoopMode::uni_1_to_2 || mode == CoopMode::no_cooperation) out.alpha[1] = 0.0;
    if (mode == CoopMode::uni_2_to_1 || mode == CoopMode::no_cooperation) out.alpha[0] = 0.0;
    return out;
}

TransferPolicy TransferPolicy::zeros(std::size_t n) {
    TransferPolicy t;
    for (int k = 0; k < 2; ++k) {
        t.p[k].assign(n, 0.0);
        t.delta[k].assign(n, 0.0);
    }
    return t;
}

DecomposedPolicy DecomposedPolicy::zeros(std::size_t n) {
    DecomposedPolicy d;
    for (int k = 0; k < 2; ++k) {
        d.consumed[k].assign(n, 0.0);
        d.immediate[k].assign(n, 0.0);
        d.stored[k].assign(n, 0.0);
    }
    return d;
}

NodeSeries DecomposedPolicy::total_transfer() const {
    NodeSeries out;
    for (int k = 0; k < 2; ++k) {
        out[k].resize(n_slots());
        for (std::size_t i = 0; i < n_slots(); ++i) out[k][i] = immediate[k][i] + stored[k][i];
    }
    return out;
}

std::string FeasibilityReport::describe() const {
    std::ostringstream os;
    if (feasible) {
        os << "feasible";
    } else {
        os << "infeasible";
        if (first_violation) {
            static const char* names[] = {"causality", "negativity", "capacity"};
            os << ": " << names[static_cast<int>(first_violation->kind)] << " violation at node "
               << first_violation->node + 1 << ", slot " << first_violation->slot + 1;
        }
    }
    os << " (worst battery slack " << worst_causality_slack << " mJ";
    if (overflow) os << ", battery overflow";
    os << ")";
    return os.str();
}

InfeasiblePolicy::InfeasiblePolicy(FeasibilityReport report)
    : std::runtime_error("policy is " + report.describe()), report_(std::move(report)) {}

namespace {

void require_dims(const TransferPolicy& policy, const Scenario& sc) {
    const std::size_t n = sc.n_slots();
    for (int k = 0; k < 2; ++k)
        if (policy.p[k].size() != n || policy.delta[k].size() != n)
            throw InputError("policy dimensions do not match the scenario horizon");
}

}  // namespace

BatteryTrace battery_trace(const TransferPolicy& policy, const Scenario& sc) {
    require_dims(policy, sc);
    const std::size_t n = sc.n_slots();
    BatteryTrace tr;
    for (int k = 0; k < 2; ++k) {
        tr.state[k].assign(n, 0.0);
        tr.overflow_loss[k].assign(n, 0.0);
    }
    for (int k = 0; k < 2; ++k) {
        const int j = 1 - k;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double raw = s + sc.harvests[k][i] - policy.p[k][i] - policy.delta[k][i] +
                         sc.alpha[j] * policy.delta[j][i];
            if (!sc.capacity[k].is_infinite() && raw > sc.capacity[k].mj()) {
                tr.overflow_loss[k][i] = raw - sc.capacity[k].mj();
                raw = sc.capacity[k].mj();
            }
            tr.state[k][i] = raw;
            s = raw;
        }
    }
    return tr;
}

NodeSeries cumulative_battery(const TransferPolicy& policy, const Scenario& sc) {
    require_dims(policy, sc);
    NodeSeries out;
    for (int k = 0; k < 2; ++k) {
        const int j = 1 - k;
        out[k].resize(sc.n_slots());
        for (std::size_t i = 0; i < sc.n_slots(); ++i) {
            double sum = 0.0;
            for (std::size_t n = 0; n <= i; ++n)
                sum += sc.harvests[k][n] - policy.p[k][n] + sc.alpha[j] * policy.delta[j][n] -
                       policy.delta[k][n];
            out[k][i] = sum;
        }
    }
    return out;
}

FeasibilityReport check_feasible(const TransferPolicy& policy, const Scenario& sc) {
    FeasibilityReport rep;
    const std::size_t n = sc.n_slots();
    for (int k = 0; k < 2; ++k)
        if (policy.p[k].size() != n || policy.delta[k].size() != n) {
            rep.feasible = false;
            rep.first_violation = Violation{k, 0, ViolationKind::capacity};
            return rep;
        }
    const BatteryTrace tr = battery_trace(policy, sc);
    rep.worst_causality_slack = std::min(*std::min_element(tr.state[0].begin(), tr.state[0].end()),
                                         *std::min_element(tr.state[1].begin(), tr.state[1].end()));
    for (std::size_t i = 0; i < n && rep.feasible; ++i) {
        for (int k = 0; k < 2; ++k) {
            if (policy.p[k][i] < -kNegativityTol || policy.delta[k][i] < -kNegativityTol ||
                !std::isfinite(policy.p[k][i]) || !std::isfinite(policy.delta[k][i])) {
                rep.feasible = false;
                rep.first_violation = Violation{k, i, ViolationKind::negativity};
                break;
            }
            if (tr.state[k][i] < -kFeasibilityTol) {
                rep.feasible = false;
                rep.first_violation = Violation{k, i, ViolationKind::causality};
                break;
            }
        }
    }
    for (int k = 0; k < 2; ++k)
        for (double o : tr.overflow_loss[k])
            if (o > kFeasibilityTol) rep.overflow = true;
    return rep;
}

double rate(ModelKind model, double p1, double p2, const Scenario& sc) {
    if (p1 < 0.0 || p2 < 0.0) throw InputError("rate: transmit power must be non-negative");
    const double snr1 = p1 / sc.noise(0);
    const double snr2 = p2 / sc.noise(1);
    double r = 0.0;
    switch (model) {
    case ModelKind::twc: r = 0.5 * std::log1p(snr1) + 0.5 * std::log1p(snr2); break;
    case ModelKind::thc: r = 0.5 * std::log1p(std::min(snr1, snr2)); break;
    case ModelKind::mac: r = 0.5 * std::log1p(snr1 + snr2); break;
    }
    return r * sc.slot_seconds;
}

double objective(const TransferPolicy& policy, const Scenario& sc) {
    FeasibilityReport rep = check_feasible(policy, sc);
    if (!rep.feasible) throw InfeasiblePolicy(std::move(rep));
    double total = 0.0;
    for (std::size_t i = 0; i < sc.n_slots(); ++i)
        total += rate(sc.model, std::max(0.0, policy.p[0][i]), std::max(0.0, policy.p[1][i]), sc);
    return total;
}

TransferPolicy recover_transmit_powers(const DecomposedPolicy& dp, const Scenario& sc) {
    const std::size_t n = dp.n_slots();
    TransferPolicy out = TransferPolicy::zeros(n);
    for (int k = 0; k < 2; ++k) {
        const int j = 1 - k;
        for (std::size_t i = 0; i < n; ++i) {
            double p = dp.consumed[k][i] - dp.immediate[k][i] + sc.alpha[j] * dp.immediate[j][i];
            if (p < -kNegativityTol) {
                std::ostringstream os;
                os << "decomposed policy gives negative transmit power " << p << " at node " << k + 1
                   << ", slot " << i + 1;
                throw SolverError(os.str());
            }
            out.p[k][i] = std::max(0.0, p);
            out.delta[k][i] = dp.immediate[k][i] + dp.stored[k][i];
        }
    }
    return out;
}

bool check_procrastinating(const TransferPolicy& policy, const Scenario& sc) {
    for (std::size_t i = 0; i < policy.n_slots(); ++i)
        for (int k = 0; k < 2; ++k)
            if (policy.p[k][i] - sc.alpha[1 - k] * policy.delta[1 - k][i] < -kFeasibilityTol) return false;
    return true;
}

bool check_partially_procrastinating(const DecomposedPolicy& dp, const Scenario& sc) {
    TransferPolicy tp;
    try {
        tp = recover_transmit_powers(dp, sc);
    } catch (const SolverError&) {
        return false;
    }
    const BatteryTrace tr = battery_trace(tp, sc);
    for (std::size_t i = 0; i < dp.n_slots(); ++i) {
        if (std::min(dp.immediate[0][i], dp.immediate[1][i]) > kFeasibilityTol) return false;
        for (int k = 0; k < 2; ++k) {
            const int j = 1 - k;
            if (tp.p[k][i] - sc.alpha[j] * dp.immediate[j][i] < -kFeasibilityTol) return false;
            if (dp.stored[k][i] > kFeasibilityTol) {
                if (sc.capacity[k].is_infinite()) return false;
                if (tr.state[k][i] < sc.capacity[k].mj() - kFeasibilityTol) return false;
            }
        }
    }
    return true;
}

DecomposedPolicy procrastinate_transform(const TransferPolicy& policy, const Scenario& sc) {
    FeasibilityReport rep = check_feasible(policy, sc);
    if (!rep.feasible) throw InfeasiblePolicy(std::move(rep));

    const std::size_t n = sc.n_slots();
    DecomposedPolicy out = DecomposedPolicy::zeros(n);
    std::array<double, 2> carry{0.0, 0.0};
    std::array<double, 2> battery{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, 2> pending{policy.delta[0][i] + carry[0], policy.delta[1][i] + carry[1]};
        // Opposite obligations cancel before anything is sent; both batteries gain.
        const double both = std::min(pending[0], pending[1]);
        pending[0] -= both;
        pending[1] -= both;
        std::array<double, 2> gamma{};
        for (int k = 0; k < 2; ++k) {
            const int j = 1 - k;
            // Only what the receiver spends right away is sent now.
            const double need = sc.alpha[k] > 0.0 ? policy.p[j][i] / sc.alpha[k] : 0.0;
            gamma[k] = std::min(pending[k], need);
            carry[k] = pending[k] - gamma[k];
        }
        for (int k = 0; k < 2; ++k) out.immediate[k][i] = std::max(0.0, gamma[k] - gamma[1 - k]);

        std::array<double, 2> tentative{};
        for (int k = 0; k < 2; ++k) {
            const int j = 1 - k;
            tentative[k] = battery[k] + sc.harvests[k][i] - policy.p[k][i] - out.immediate[k][i] +
                           sc.alpha[j] * out.immediate[j][i];
        }
        for (int k = 0; k < 2; ++k) {
            if (sc.capacity[k].is_infinite()) continue;
            out.stored[k][i] = std::max(0.0, tentative[k] - sc.capacity[k].mj());
            // Energy sent ahead as overflow settles part of what is still owed.
            carry[k] = std::max(0.0, carry[k] - out.stored[k][i]);
        }
        for (int k = 0; k < 2; ++k) {
            const int j = 1 - k;
            double s = tentative[k] - out.stored[k][i] + sc.alpha[j] * out.stored[j][i];
            if (!sc.capacity[k].is_infinite()) s = std::min(s, sc.capacity[k].mj());
            battery[k] = s;
            out.consumed[k][i] = policy.p[k][i] + out.immediate[k][i] - sc.alpha[j] * out.immediate[j][i];
        }
    }
    return out;
}

}  // namespace ehcoop
