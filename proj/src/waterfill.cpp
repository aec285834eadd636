#include "ehcoop/waterfill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ehcoop/barrier.hpp"

namespace ehcoop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Total consumption F(L) = sum_i inverse_i(L) over a run of slots. F is
// continuous, non-decreasing and piecewise linear in L, so it is stored
// exactly as its values at the breakpoints plus the slope past the last one.
class PoolLevel {
public:
    PoolLevel(const std::vector<LevelCurve>& curves, std::size_t first, std::size_t last) {
        std::vector<std::pair<double, double>> events;
        for (std::size_t i = first; i <= last; ++i) {
            const auto& c = curves[i];
            base_ = std::min(base_, c.right(0.0));
            for (const auto& pc : c.pieces()) {
                events.emplace_back(pc.v0, 1.0 / pc.slope);
                if (std::isfinite(pc.x1)) events.emplace_back(pc.end_value(), -1.0 / pc.slope);
            }
        }
        std::sort(events.begin(), events.end());
        double slope = 0.0, f = 0.0;
        for (std::size_t e = 0; e < events.size();) {
            const double L = events[e].first;
            if (!knots_.empty()) f += slope * (L - knots_.back());
            while (e < events.size() && events[e].first == L) slope += events[e++].second;
            knots_.push_back(L);
            F_.push_back(f);
        }
        tail_ = knots_.empty() ? 0.0 : std::max(0.0, slope);
    }

    double base() const { return base_; }

    // inf{L : F(L) >= y}
    double smallest(double y) const {
        if (y <= 0.0) return -kInf;
        const auto it = std::lower_bound(F_.begin(), F_.end(), y);
        if (it == F_.end()) return beyond(y);
        const std::size_t i = static_cast<std::size_t>(it - F_.begin());
        if (i == 0) return knots_[0];
        return interpolate(i - 1, y);
    }

    // sup{L : F(L) <= y}
    double largest(double y) const {
        if (knots_.empty()) return kInf;
        if (y < 0.0) return -kInf;
        const auto it = std::upper_bound(F_.begin(), F_.end(), y);
        if (it == F_.end()) return beyond(y);
        const std::size_t i = static_cast<std::size_t>(it - F_.begin());
        if (i == 0) return knots_[0];
        return interpolate(i - 1, y);
    }

private:
    double beyond(double y) const {
        if (knots_.empty() || tail_ <= 0.0) return kInf;
        return knots_.back() + (y - F_.back()) / tail_;
    }
    double interpolate(std::size_t i, double y) const {
        const double df = F_[i + 1] - F_[i];
        if (df <= 0.0) return knots_[i];
        return knots_[i] + (y - F_[i]) * (knots_[i + 1] - knots_[i]) / df;
    }

    std::vector<double> knots_, F_;
    double tail_ = 0.0;
    double base_ = kInf;
};

double consume_at(const LevelCurve& c, double level) {
    if (level == -kInf) return 0.0;
    if (level == kInf) {
        if (!std::isfinite(c.cap())) throw SolverError("water level diverged on an uncapped slot");
        return c.cap();
    }
    return c.inverse(level);
}

std::vector<double> prefix(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = s += v[i];
    return out;
}

// Energy that has to leave the battery beyond what the slots can use
// (everything past a cap) is recorded as waste where the bound binds.
void place_segment(const std::vector<LevelCurve>& curves, const std::vector<double>& lower, std::size_t first,
                   std::size_t last, double level, double report_level, double& C, NodeAllocation& out) {
    for (std::size_t i = first; i <= last; ++i) {
        out.consumed[i] = consume_at(curves[i], level);
        out.level[i] = report_level;
        C += out.consumed[i];
        const double need = lower[i] - C;
        if (need > 1e-12 * (1.0 + std::abs(lower[i]))) {
            out.wasted[i] = need;
            C += need;
        }
    }
}

}  // namespace

NodeAllocation fill_node(const std::vector<LevelCurve>& curves, const std::vector<double>& harvest,
                         std::optional<double> capacity) {
    const std::size_t n = harvest.size();
    if (curves.size() != n) throw InputError("fill_node: one level curve per slot is required");
    NodeAllocation out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    // Cumulative consumption C must stay inside [lower, upper]. Both bounds are
    // made monotone so that harvests reduced by outgoing transfers still work.
    const std::vector<double> H = prefix(harvest);
    std::vector<double> upper(H), lower(n, -kInf);
    for (std::size_t i = n - 1; i-- > 0;) upper[i] = std::min(upper[i], upper[i + 1]);
    if (capacity)
        for (std::size_t i = 0; i < n; ++i) lower[i] = std::max(i ? lower[i - 1] : -kInf, H[i] - *capacity);
    double C = 0.0;
    std::size_t s = 0;
    while (s < n) {
        double LO = -kInf, HI = kInf;
        std::size_t argLO = s, argHI = s, end = n - 1;
        double level = 0.0, report = 0.0;
        for (std::size_t t = s; t < n; ++t) {
            const PoolLevel P(curves, s, t);
            const double U = upper[t] - C;
            const double lo = std::isfinite(lower[t]) ? P.smallest(lower[t] - C) : -kInf;
            const double hi = P.largest(U);
            if (lo > HI) {
                end = argHI;
                level = HI;
                break;
            }
            if (hi < LO) {
                end = argLO;
                level = LO;
                break;
            }
            if (lo >= LO) {
                LO = lo;
                argLO = t;
            }
            if (hi <= HI) {
                HI = hi;
                argHI = t;
            }
            if (t + 1 == n) {
                const double L = P.smallest(U);
                if (L > HI) {
                    end = argHI;
                    level = HI;
                } else if (L < LO) {
                    end = argLO;
                    level = LO;
                } else {
                    end = t;
                    level = L;
                }
            }
        }
        report = level == -kInf ? PoolLevel(curves, s, end).base() : level;
        place_segment(curves, lower, s, end, level, report, C, out);
        s = end + 1;
    }
    return out;
}

NodeAllocation fill_node_pooled(const std::vector<LevelCurve>& curves, const std::vector<double>& harvest) {
    const std::size_t n = harvest.size();
    if (curves.size() != n) throw InputError("fill_node: one level curve per slot is required");
    struct Pool {
        std::size_t first, last;
        double budget, level;
    };
    auto level_of = [&](const Pool& p) {
        const PoolLevel P(curves, p.first, p.last);
        return p.budget > 0.0 ? P.smallest(p.budget) : P.base();
    };
    std::vector<Pool> pools;
    for (std::size_t i = 0; i < n; ++i) {
        Pool p{i, i, harvest[i], 0.0};
        p.level = level_of(p);
        pools.push_back(p);
        // Energy only flows forward: merge while the newest pool sits lower.
        while (pools.size() >= 2 && pools.back().level < pools[pools.size() - 2].level) {
            Pool top = pools.back();
            pools.pop_back();
            Pool& prev = pools.back();
            prev.last = top.last;
            prev.budget += top.budget;
            prev.level = level_of(prev);
        }
    }
    NodeAllocation out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (const auto& p : pools) {
        double used = 0.0;
        for (std::size_t i = p.first; i <= p.last; ++i) {
            out.consumed[i] = p.budget > 0.0 ? consume_at(curves[i], p.level) : 0.0;
            out.level[i] = p.level;
            used += out.consumed[i];
        }
        if (p.level == kInf) out.wasted[p.last] = std::max(0.0, p.budget - used);
    }
    return out;
}

std::vector<double> dwf_node(int k, const std::vector<double>& consumed_other, const Scenario& sc,
                             CoopMode mode) {
    if (!sc.capacity[k].is_infinite()) throw InputError("dwf_node needs an unbounded battery");
    const Scenario m = with_mode(sc, mode);
    if (consumed_other.size() != m.n_slots()) throw InputError("dwf_node: other-node series has wrong length");
    std::vector<LevelCurve> curves;
    curves.reserve(m.n_slots());
    for (double q : consumed_other) {
        if (!(q >= 0.0)) throw InputError("dwf_node: other-node consumption must be non-negative");
        curves.push_back(level_curve(m.model, k, q, m));
    }
    return fill_node_pooled(curves, m.harvests[k]).consumed;
}

namespace {

// Pulls a nearly feasible policy back inside the feasible set by trimming
// transmit power first and outgoing transfers second.
void repair(TransferPolicy& tp, const Scenario& sc) {
    const std::size_t n = sc.n_slots();
    for (int k = 0; k < 2; ++k)
        for (std::size_t i = 0; i < n; ++i) {
            tp.p[k][i] = std::max(0.0, tp.p[k][i]);
            tp.delta[k][i] = sc.alpha[k] > 0.0 ? std::max(0.0, tp.delta[k][i]) : 0.0;
        }
    std::array<double, 2> S{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, 2> raw{};
        for (int pass = 0; pass < 4; ++pass) {
            bool ok = true;
            for (int k = 0; k < 2; ++k) {
                const int j = 1 - k;
                raw[k] = S[k] + sc.harvests[k][i] - tp.p[k][i] - tp.delta[k][i] + sc.alpha[j] * tp.delta[j][i];
            }
            for (int k = 0; k < 2; ++k) {
                if (raw[k] >= 0.0) continue;
                ok = false;
                double need = -raw[k];
                const double a = std::min(tp.p[k][i], need);
                tp.p[k][i] -= a;
                need -= a;
                tp.delta[k][i] -= std::min(tp.delta[k][i], need);
            }
            if (ok) break;
        }
        for (int k = 0; k < 2; ++k) {
            double s = std::max(0.0, raw[k]);
            if (!sc.capacity[k].is_infinite()) s = std::min(s, sc.capacity[k].mj());
            S[k] = s;
        }
    }
}

// A THC node that cannot transfer gains nothing from power above the other hop's SNR.
void clamp_thc(NodeSeries& consumed, const Scenario& sc) {
    if (sc.model != ModelKind::thc) return;
    const NodeSeries orig = consumed;
    for (int k = 0; k < 2; ++k) {
        if (sc.alpha[k] > 0.0) continue;
        const int j = 1 - k;
        for (std::size_t i = 0; i < consumed[k].size(); ++i)
            consumed[k][i] = std::min(orig[k][i], orig[j][i] * sc.noise(k) / sc.noise(j));
    }
}

DecomposedPolicy with_closed_form(const Scenario& sc, const NodeSeries& consumed, const NodeSeries& stored) {
    const std::size_t n = sc.n_slots();
    DecomposedPolicy dp = DecomposedPolicy::zeros(n);
    dp.consumed = consumed;
    dp.stored = stored;
    for (std::size_t i = 0; i < n; ++i) {
        const SlotTransfer st = slot_transfer(sc.model, consumed[0][i], consumed[1][i], sc);
        dp.immediate[0][i] = st.delta[0];
        dp.immediate[1][i] = st.delta[1];
    }
    return dp;
}

double total_rate(const Scenario& sc, const NodeSeries& consumed) {
    double f = 0.0;
    for (std::size_t i = 0; i < sc.n_slots(); ++i) f += slot_rate(sc.model, consumed[0][i], consumed[1][i], sc);
    return f;
}

std::vector<LevelCurve> curves_for(const Scenario& sc, int k, const std::vector<double>& other) {
    std::vector<LevelCurve> curves;
    curves.reserve(other.size());
    for (double q : other) curves.push_back(level_curve(sc.model, k, std::max(0.0, q), sc));
    return curves;
}

NodeSeries zeros_like(const Scenario& sc) {
    return {std::vector<double>(sc.n_slots(), 0.0), std::vector<double>(sc.n_slots(), 0.0)};
}

bool better(const SolveReport& a, const SolveReport& b) {
    return a.objective_nats > b.objective_nats + 1e-12 * std::max(1.0, std::abs(b.objective_nats));
}

}  // namespace

namespace {

// Solvers that stop a hair away from a jump in the level (the THC kink, or a
// cap) would otherwise be judged by the wrong side of it.
double snap_to_jump(const LevelCurve& c, double x) {
    auto near = [&](double b) { return std::isfinite(b) && std::abs(x - b) <= 1e-7 * (1.0 + std::abs(b)); };
    if (near(c.cap())) return c.cap();
    for (const auto& p : c.pieces())
        if (near(p.x1) && c.right(p.x1) > c.left(p.x1) * (1.0 + 1e-12)) return p.x1;
    return x;
}

}  // namespace

double level_residual(const Scenario& sc, const DecomposedPolicy& dp) {
    const std::size_t n = dp.n_slots();
    TransferPolicy tp;
    try {
        tp = recover_transmit_powers(dp, sc);
    } catch (const SolverError&) {
        return kInf;
    }
    const BatteryTrace tr = battery_trace(tp, sc);
    double total = 0.0;
    for (int k = 0; k < 2; ++k)
        for (double e : sc.harvests[k]) total += e;
    const double tol = 1e-9 * (1.0 + total);
    double worst = 0.0;
    auto violation = [&](double from_left, double to_right) {
        // Moving a little energy from a slot at level `from_left` to one at `to_right` helps if to_right is lower.
        if (!std::isfinite(from_left) || !(from_left > to_right)) return;
        worst = std::max(worst, (from_left - to_right) / from_left);
    };
    for (int k = 0; k < 2; ++k) {
        const int j = 1 - k;
        const auto curves = curves_for(sc, k, dp.consumed[j]);
        std::vector<double> x(dp.consumed[k]);
        for (std::size_t i = 0; i < n; ++i) x[i] = snap_to_jump(curves[i], x[i]);
        const bool bounded = !sc.capacity[k].is_infinite();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double S = tr.state[k][i];
            const bool full = bounded && S >= sc.capacity[k].mj() - tol;
            if (x[i] > tol && !full) violation(curves[i].left(x[i]), curves[i + 1].right(x[i + 1]));
            if (x[i + 1] > tol && S > tol) violation(curves[i + 1].left(x[i + 1]), curves[i].right(x[i]));
        }
    }
    // Transfers out of a full battery into a node that is not transmitting.
    for (int k = 0; k < 2; ++k) {
        const int j = 1 - k;
        if (sc.alpha[k] <= 0.0 || sc.capacity[k].is_infinite()) continue;
        const auto mine = curves_for(sc, k, dp.consumed[j]);
        const auto theirs = curves_for(sc, j, dp.consumed[k]);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const bool full = tr.state[k][i] >= sc.capacity[k].mj() - tol;
            if (!full || dp.consumed[j][i] > tol || dp.consumed[k][i] <= tol) continue;
            const double give = sc.alpha[k] * mine[i].left(snap_to_jump(mine[i], dp.consumed[k][i]));
            const double take = theirs[i + 1].right(snap_to_jump(theirs[i + 1], dp.consumed[j][i + 1]));
            violation(give, take);
            if (dp.stored[k][i] > tol) violation(take, give);
        }
    }
    return worst;
}

SolveReport make_report(const Scenario& sc, CoopMode mode, NodeSeries consumed, NodeSeries stored) {
    const Scenario m = with_mode(sc, mode);
    const std::size_t n = m.n_slots();
    if (stored[0].empty()) stored = zeros_like(m);
    for (int k = 0; k < 2; ++k) {
        if (consumed[k].size() != n || stored[k].size() != n) throw InputError("policy length does not match scenario");
        for (std::size_t i = 0; i < n; ++i) {
            consumed[k][i] = std::max(0.0, consumed[k][i]);
            stored[k][i] = m.capacity[k].is_infinite() || m.alpha[k] <= 0.0 ? 0.0 : std::max(0.0, stored[k][i]);
        }
    }
    TransferPolicy tp = recover_transmit_powers(with_closed_form(m, consumed, stored), m);
    repair(tp, m);
    DecomposedPolicy dp = procrastinate_transform(tp, m);
    consumed = dp.consumed;
    clamp_thc(consumed, m);
    dp = with_closed_form(m, consumed, dp.stored);

    SolveReport rep;
    rep.mode = mode;
    rep.policy = dp;
    rep.transmit = recover_transmit_powers(dp, m);
    rep.objective_nats = objective(rep.transmit, m);
    rep.levels = water_levels(m.model, dp.consumed, m);
    rep.regimes.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        rep.regimes[i] = slot_transfer(m.model, dp.consumed[0][i], dp.consumed[1][i], m).regime;
    rep.level_residual = level_residual(m, dp);
    return rep;
}

namespace {

// Alternating exact maximization over the two nodes, unbounded batteries.
SolveReport run_bcd(const Scenario& sc, CoopMode mode, const NodeSeries* start = nullptr) {
    const Scenario m = with_mode(sc, mode);
    NodeSeries consumed = start ? *start : m.harvests;
    std::vector<double> trace;
    double prev = total_rate(m, consumed);
    int iter = 0;
    for (iter = 1; iter <= 200; ++iter) {
        for (int k = 0; k < 2; ++k)
            consumed[k] = fill_node_pooled(curves_for(m, k, consumed[1 - k]), m.harvests[k]).consumed;
        const double f = total_rate(m, consumed);
        trace.push_back(f);
        if (f - prev <= 1e-10 * std::max(1.0, std::abs(f)) &&
            level_residual(m, with_closed_form(m, consumed, zeros_like(m))) <= 1e-9)
            break;
        prev = f;
    }
    SolveReport rep = make_report(sc, mode, consumed, {});
    rep.bcd_iterations = std::min(iter, 200);
    rep.objective_trace = std::move(trace);
    rep.engine = "bcd";
    rep.converged = rep.level_residual <= 1e-7;
    if (!rep.converged) {
        std::ostringstream os;
        os << "level residual " << rep.level_residual << " after " << rep.bcd_iterations << " iterations";
        rep.warnings.push_back(os.str());
    }
    return rep;
}

SolveReport from_barrier(const Scenario& sc, CoopMode mode) {
    const Scenario m = with_mode(sc, mode);
    const BarrierResult br = barrier_solve(m);
    TransferPolicy tp = br.policy;
    repair(tp, m);
    const DecomposedPolicy dp = procrastinate_transform(tp, m);
    SolveReport rep = make_report(sc, mode, dp.consumed, dp.stored);
    rep.engine = "barrier";
    rep.converged = br.converged;
    return rep;
}

void require_unbounded(const Scenario& sc, const char* who) {
    if (!sc.infinite_battery())
        throw InputError(std::string(who) + " needs unbounded batteries; use dwf_finite for finite capacity");
}

}  // namespace

SolveReport bcd_solve(const Scenario& sc, CoopMode mode) {
    require_unbounded(sc, "bcd_solve");
    return run_bcd(sc, mode);
}

SolveReport thc_solve(const Scenario& sc, CoopMode mode) {
    if (sc.model != ModelKind::thc) throw InputError("thc_solve needs a THC scenario");
    require_unbounded(sc, "thc_solve");
    SolveReport rep = run_bcd(sc, mode);
    // Alternating maximization can stall on the kink of the min(); a barrier
    // solve of the joint problem gets past it, and alternating fills started
    // from there clean up what the interior point leaves.
    SolveReport ref = from_barrier(sc, mode);
    if (better(ref, rep)) {
        const bool barrier_ok = ref.converged;
        SolveReport polished = run_bcd(sc, mode, &ref.policy.consumed);
        if (polished.objective_nats >= ref.objective_nats - 1e-12 * std::max(1.0, ref.objective_nats))
            ref = std::move(polished);
        ref.bcd_iterations = rep.bcd_iterations;
        ref.objective_trace = rep.objective_trace;
        ref.engine = "bcd+barrier";
        ref.converged = barrier_ok && ref.level_residual <= 1e-7;
        if (!ref.converged && ref.warnings.empty()) {
            std::ostringstream os;
            os << "level residual " << ref.level_residual << " after barrier refinement";
            ref.warnings.push_back(os.str());
        }
        return ref;
    }
    rep.converged = true;
    rep.warnings.clear();
    return rep;
}

MacReduction mac_reduce(const Scenario& sc) {
    if (sc.model != ModelKind::mac) throw InputError("mac_reduce needs a MAC scenario");
    const std::array<double, 2> c{1.0 / sc.noise(0), 1.0 / sc.noise(1)};
    MacReduction red;
    for (int k = 0; k < 2; ++k) red.alpha_star[k] = std::max(1.0, sc.alpha[k] * c[1 - k] / c[k]);
    red.aggregate.resize(sc.n_slots());
    for (std::size_t i = 0; i < sc.n_slots(); ++i)
        red.aggregate[i] = red.alpha_star[0] * sc.harvests[0][i] + red.alpha_star[1] * sc.harvests[1][i];
    return red;
}

std::vector<double> staircase(const std::vector<double>& aggregate, const BatteryCapacity& capacity) {
    for (double a : aggregate)
        if (!(a >= 0.0)) throw InputError("staircase: aggregate harvests must be non-negative");
    // Any increasing linear level gives the same single-user allocation.
    const std::vector<LevelCurve> curves(aggregate.size(), LevelCurve({{0.0, kInf, 1.0, 1.0}}, kInf));
    const std::optional<double> cap = capacity.is_infinite() ? std::nullopt : std::optional<double>(capacity.mj());
    return fill_node(curves, aggregate, cap).consumed;
}

SolveReport mac_solve(const Scenario& sc, CoopMode mode) {
    if (sc.model != ModelKind::mac) throw InputError("mac_solve needs a MAC scenario");
    if (!sc.infinite_battery()) {
        SolveReport rep = dwf_finite(sc, mode);
        return rep;
    }
    const Scenario m = with_mode(sc, mode);
    const std::size_t n = m.n_slots();
    // Effective SNR per unit of each node's energy once the corner transfer is applied.
    const std::array<double, 2> c{1.0 / m.noise(0), 1.0 / m.noise(1)};
    const std::array<double, 2> w{std::max(c[0], m.alpha[0] * c[1]), std::max(c[1], m.alpha[1] * c[0])};
    std::vector<double> pooled(n);
    for (std::size_t i = 0; i < n; ++i) pooled[i] = w[0] * m.harvests[0][i] + w[1] * m.harvests[1][i];
    const std::vector<double> y = staircase(pooled, BatteryCapacity::infinite());

    // Hand the pooled SNR back to the nodes: the transferring node drains its
    // own energy first, the other node covers the rest.
    const int first = m.alpha[1] * c[0] > c[1] ? 1 : 0;
    const int second = 1 - first;
    NodeSeries consumed = zeros_like(m);
    std::array<double, 2> S{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 2; ++k) S[k] += m.harvests[k][i];
        double need = y[i];
        const double a = std::min(S[first], need / w[first]);
        consumed[first][i] = a;
        need -= a * w[first];
        const double b = std::min(S[second], std::max(0.0, need) / w[second]);
        consumed[second][i] = b;
        S[first] -= a;
        S[second] -= b;
    }
    SolveReport rep = make_report(sc, mode, consumed, {});
    rep.engine = "staircase";
    rep.converged = rep.level_residual <= 1e-7;
    return rep;
}

namespace {

struct FiniteState {
    const Scenario& m;
    NodeSeries consumed;
    NodeSeries eps;  // energy sent into the other battery while the sender is full

    std::optional<double> cap(int k) const {
        return m.capacity[k].is_infinite() ? std::nullopt : std::optional<double>(m.capacity[k].mj());
    }
    std::vector<double> harvest(int k) const {
        const int j = 1 - k;
        std::vector<double> h(m.harvests[k]);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] += m.alpha[j] * eps[j][i] - eps[k][i];
        return h;
    }
    NodeAllocation fill(int k) const { return fill_node(curves_for(m, k, consumed[1 - k]), harvest(k), cap(k)); }
    // Battery level of node k at the end of each slot.
    std::vector<double> state(int k) const {
        const auto h = harvest(k);
        std::vector<double> S(h.size());
        double s = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            s = std::max(0.0, s + h[i] - consumed[k][i]);
            if (cap(k)) s = std::min(s, *cap(k));
            S[i] = s;
        }
        return S;
    }
};

// Largest amount node k can push out at slot i without running dry later.
double send_limit(const FiniteState& st, int k, std::size_t i) {
    auto h = st.harvest(k);
    h[i] += st.eps[k][i];
    double H = 0.0, lim = kInf;
    for (std::size_t t = 0; t < h.size(); ++t) {
        H += h[t];
        if (t >= i) lim = std::min(lim, H);
    }
    return std::max(0.0, lim);
}

// Picks eps[k][i] so that the unit k gives up at slot i (its battery is full,
// so it comes out of that slot) and the alpha units j can use from slot i+1 on
// are worth the same.
bool balance(FiniteState& st, int k, std::size_t i) {
    const int j = 1 - k;
    const double alpha = st.m.alpha[k];
    auto gap = [&](double e) {
        st.eps[k][i] = e;
        const double wk = st.fill(k).level[i];
        const double wj = st.fill(j).level[i + 1];
        if (!std::isfinite(wj)) return -1.0;
        if (!std::isfinite(wk)) return 1.0;
        return alpha * wk - wj;
    };
    const double old = st.eps[k][i];
    const double hi = send_limit(st, k, i);
    double e;
    if (gap(0.0) <= 0.0)
        e = 0.0;
    else if (gap(hi) >= 0.0)
        e = hi;
    else {
        double a = 0.0, b = hi;
        for (int it = 0; it < 60 && b - a > 1e-13 * (1.0 + hi); ++it) {
            const double mid = 0.5 * (a + b);
            (gap(mid) > 0.0 ? a : b) = mid;
        }
        e = 0.5 * (a + b);
    }
    st.eps[k][i] = e;
    return std::abs(e - old) > 1e-11 * (1.0 + old);
}

SolveReport run_finite_passes(const Scenario& sc, CoopMode mode, const DecomposedPolicy* start = nullptr) {
    const Scenario m = with_mode(sc, mode);
    const std::size_t n = m.n_slots();
    FiniteState st{m, m.harvests, zeros_like(m)};
    if (start) {
        st.consumed = start->consumed;
        for (int k = 0; k < 2; ++k)
            if (m.alpha[k] > 0.0 && !m.capacity[k].is_infinite()) st.eps[k] = start->stored[k];
    }
    std::vector<double> trace;
    double total = 0.0;
    for (int k = 0; k < 2; ++k)
        for (double e : m.harvests[k]) total += e;
    const double tol = 1e-9 * (1.0 + total);
    int pass = 0;
    for (pass = 1; pass <= 500; ++pass) {
        NodeSeries before = st.consumed;
        for (int k = 0; k < 2; ++k) st.consumed[k] = st.fill(k).consumed;
        bool moved = false;
        for (int k = 0; k < 2; ++k) {
            if (m.alpha[k] <= 0.0 || !st.cap(k)) continue;
            const int j = 1 - k;
            const auto S = st.state(k);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const bool open = S[i] >= *st.cap(k) - tol && st.consumed[j][i] <= tol;
                if (!open && st.eps[k][i] == 0.0) continue;
                if (!open) {
                    st.eps[k][i] = 0.0;
                    moved = true;
                    continue;
                }
                moved = balance(st, k, i) || moved;
            }
            if (moved)
                for (int r = 0; r < 2; ++r) st.consumed[r] = st.fill(r).consumed;
        }
        trace.push_back(total_rate(m, st.consumed));
        double change = 0.0;
        for (int k = 0; k < 2; ++k)
            for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(st.consumed[k][i] - before[k][i]));
        if (!moved && change <= 1e-12 * (1.0 + total)) break;
    }
    SolveReport rep = make_report(sc, mode, st.consumed, st.eps);
    rep.bcd_iterations = std::min(pass, 500);
    rep.objective_trace = std::move(trace);
    rep.engine = "dwf";
    rep.converged = rep.level_residual <= 1e-7;
    return rep;
}

}  // namespace

SolveReport dwf_finite(const Scenario& sc, CoopMode mode, bool refine) {
    SolveReport rep = run_finite_passes(sc, mode);
    if (!refine) return rep;
    // The alternating passes can stop short when both batteries bind at once;
    // the joint barrier solve is the safety net.
    SolveReport ref = from_barrier(sc, mode);
    if (better(ref, rep)) {
        const bool barrier_ok = ref.converged;
        SolveReport polished = run_finite_passes(sc, mode, &ref.policy);
        if (polished.objective_nats >= ref.objective_nats - 1e-12 * std::max(1.0, ref.objective_nats))
            ref = std::move(polished);
        ref.converged = barrier_ok;
        ref.bcd_iterations = rep.bcd_iterations;
        ref.objective_trace = rep.objective_trace;
        ref.engine = "dwf+barrier";
        if (!ref.converged) ref.warnings.push_back("barrier refinement did not reach its gap tolerance");
        return ref;
    }
    rep.converged = true;
    return rep;
}

SolveReport solve(const Scenario& sc, CoopMode mode) {
    if (!sc.infinite_battery()) return dwf_finite(sc, mode);
    switch (sc.model) {
    case ModelKind::twc: return bcd_solve(sc, mode);
    case ModelKind::thc: return thc_solve(sc, mode);
    case ModelKind::mac: return mac_solve(sc, mode);
    }
    return {};
}

}  // namespace ehcoop
