#include "ehcoop/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "ehcoop/transfer.hpp"

namespace ehcoop {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Grid index of an energy, rounded down with a little slack for values that
// are meant to sit on the grid.
long units(double e, double q) { return static_cast<long>(std::floor(e / q + 1e-9)); }

struct Step {
    long x1 = 0, x2 = 0;
};

}  // namespace

DpResult dp_solve(const Scenario& scenario, const DpConfig& cfg, CoopMode mode) {
    const Scenario sc = with_mode(scenario, mode);
    const std::size_t n = sc.n_slots();
    double peak = 0.0;
    std::array<double, 2> total{0.0, 0.0};
    for (int k = 0; k < 2; ++k)
        for (double e : sc.harvests[k]) {
            peak = std::max(peak, e);
            total[k] += e;
        }
    DpResult res;
    res.policy = TransferPolicy::zeros(n);
    if (n == 0) return res;
    if (cfg.energy_quantum_mJ < 0.0 || cfg.grid_points <= 0) throw InputError("dp_solve: quantum must be positive");
    const double q = cfg.energy_quantum_mJ > 0.0 ? cfg.energy_quantum_mJ : std::max(peak, 1e-12) / cfg.grid_points;
    res.quantum_mJ = q;

    // Largest reachable battery index per node; unbounded batteries are
    // truncated at everything that could ever arrive.
    std::array<long, 2> top{};
    for (int k = 0; k < 2; ++k) {
        const int j = 1 - k;
        top[k] = sc.capacity[k].is_infinite() ? units(total[k] + sc.alpha[j] * total[j], q) + 1
                                              : units(sc.capacity[k].mj(), q);
    }

    // Cost estimate before allocating anything.
    std::uint64_t work = 0;
    std::array<std::vector<long>, 2> reach;
    for (int k = 0; k < 2; ++k) {
        reach[k].assign(n + 1, 0);
        double H = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            H += sc.harvests[k][i] + sc.alpha[1 - k] * sc.harvests[1 - k][i];
            reach[k][i + 1] = std::min(top[k], units(H, q) + 1);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, 2> acts{};
        for (int k = 0; k < 2; ++k) {
            const long e = units(sc.harvests[k][i], q) + 1;
            const double s = static_cast<double>(reach[k][i] + 1);
            acts[k] = s * (static_cast<double>(e) + 1.0) + s * (s - 1.0) / 2.0;
        }
        work += static_cast<std::uint64_t>(acts[0] * acts[1]);
        if (work > cfg.max_states) {
            std::ostringstream os;
            os << "dp_solve: about " << work << "+ state-action pairs exceed max_states=" << cfg.max_states
               << "; use a larger quantum (now " << q << " mJ), fewer slots, or raise max_states";
            throw InputError(os.str());
        }
    }
    res.evaluations = work;

    std::array<long, 2> dim{};
    for (int k = 0; k < 2; ++k) {
        double e = 0.0;
        for (double h : sc.harvests[k]) e = std::max(e, h);
        dim[k] = top[k] + units(e, q) + 2;
    }
    std::vector<double> table(static_cast<std::size_t>(dim[0] * dim[1]));
    for (long a = 0; a < dim[0]; ++a)
        for (long b = 0; b < dim[1]; ++b) table[a * dim[1] + b] = slot_rate(sc.model, a * q, b * q, sc);
    auto R = [&](long a, long b) { return table[a * dim[1] + b]; };

    const std::array<bool, 2> bounded{!sc.capacity[0].is_infinite(), !sc.capacity[1].is_infinite()};
    const std::array<double, 2> cap{bounded[0] ? sc.capacity[0].mj() : 0.0, bounded[1] ? sc.capacity[1].mj() : 0.0};
    const long w = top[1] + 1;

    // Outcome of consuming (x1, x2) from battery indices (s1, s2) in slot i.
    struct Next {
        long s1, s2;
        double eps1, eps2;
    };
    auto advance = [&](std::size_t i, long s1, long s2, long x1, long x2) {
        std::array<double, 2> t{s1 * q + sc.harvests[0][i] - x1 * q, s2 * q + sc.harvests[1][i] - x2 * q};
        std::array<double, 2> eps{0.0, 0.0};
        const std::array<long, 2> x{x1, x2};
        for (int k = 0; k < 2; ++k) {
            const int j = 1 - k;
            if (bounded[k] && sc.alpha[k] > 0.0 && x[j] == 0 && t[k] > cap[k]) eps[k] = t[k] - cap[k];
        }
        for (int k = 0; k < 2; ++k) t[k] += sc.alpha[1 - k] * eps[1 - k] - eps[k];
        std::array<long, 2> s{};
        for (int k = 0; k < 2; ++k) s[k] = std::clamp(units(std::max(0.0, t[k]), q), 0L, top[k]);
        return Next{s[0], s[1], eps[0], eps[1]};
    };

    std::vector<double> next_value(static_cast<std::size_t>((top[0] + 1) * w), 0.0), value(next_value.size());
    std::vector<std::vector<Step>> choice(n, std::vector<Step>(next_value.size()));
    for (std::size_t i = n; i-- > 0;) {
        std::fill(value.begin(), value.end(), kNegInf);
        for (long s1 = 0; s1 <= reach[0][i]; ++s1)
            for (long s2 = 0; s2 <= reach[1][i]; ++s2) {
                const long a1 = units(s1 * q + sc.harvests[0][i], q);
                const long a2 = units(s2 * q + sc.harvests[1][i], q);
                double best = kNegInf;
                Step arg;
                for (long x1 = 0; x1 <= a1; ++x1)
                    for (long x2 = 0; x2 <= a2; ++x2) {
                        const Next nx = advance(i, s1, s2, x1, x2);
                        const double v = R(x1, x2) + next_value[nx.s1 * w + nx.s2];
                        if (v > best) {
                            best = v;
                            arg = {x1, x2};
                        }
                    }
                value[s1 * w + s2] = best;
                choice[i][s1 * w + s2] = arg;
            }
        std::swap(value, next_value);
    }
    res.value_nats = next_value[0];

    long s1 = 0, s2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Step st = choice[i][s1 * w + s2];
        const Next nx = advance(i, s1, s2, st.x1, st.x2);
        const SlotTransfer tr = slot_transfer(sc.model, st.x1 * q, st.x2 * q, sc);
        const std::array<double, 2> x{st.x1 * q, st.x2 * q};
        const std::array<double, 2> eps{nx.eps1, nx.eps2};
        for (int k = 0; k < 2; ++k) {
            const int j = 1 - k;
            res.policy.p[k][i] = std::max(0.0, x[k] - tr.delta[k] + sc.alpha[j] * tr.delta[j]);
            res.policy.delta[k][i] = tr.delta[k] + eps[k];
        }
        s1 = nx.s1;
        s2 = nx.s2;
    }
    return res;
}

GridTransfer grid_transfer_max(ModelKind model, double pb1, double pb2, const Scenario& sc, int points) {
    if (points < 1) throw InputError("grid_transfer_max: points must be positive");
    const std::array<double, 2> pb{pb1, pb2};
    GridTransfer best;
    best.rate_nats = rate(model, pb1, pb2, sc);
    for (int k = 0; k < 2; ++k) {
        if (sc.alpha[k] <= 0.0) continue;
        const int j = 1 - k;
        for (int g = 1; g <= points; ++g) {
            const double d = pb[k] * g / points;
            std::array<double, 2> p{};
            p[k] = std::max(0.0, pb[k] - d);
            p[j] = pb[j] + sc.alpha[k] * d;
            const double r = rate(model, p[0], p[1], sc);
            if (r > best.rate_nats) {
                best.rate_nats = r;
                best.delta = {0.0, 0.0};
                best.delta[k] = d;
            }
        }
    }
    return best;
}

}  // namespace ehcoop
