#include "ehcoop/transfer.hpp"

#include <algorithm>
#include <cmath>

namespace ehcoop {

const char* to_string(Regime r) {
    switch (r) {
    case Regime::no_transfer: return "none";
    case Regime::interior_1to2: return "interior_1to2";
    case Regime::interior_2to1: return "interior_2to1";
    case Regime::full_1to2: return "full_1to2";
    case Regime::full_2to1: return "full_2to1";
    }
    return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonnegative(double pb1, double pb2) {
    if (!(pb1 >= 0.0) || !(pb2 >= 0.0)) throw InputError("consumed power must be non-negative");
}

SlotTransfer finish(ModelKind model, double pb1, double pb2, std::array<double, 2> delta, Regime regime,
                    const Scenario& sc) {
    SlotTransfer out;
    out.delta = delta;
    out.regime = regime;
    const double p1 = std::max(0.0, pb1 - delta[0] + sc.alpha[1] * delta[1]);
    const double p2 = std::max(0.0, pb2 - delta[1] + sc.alpha[0] * delta[0]);
    out.rate_nats = rate(model, p1, p2, sc);
    return out;
}

Regime interior(int sender) { return sender == 0 ? Regime::interior_1to2 : Regime::interior_2to1; }
Regime full(int sender) { return sender == 0 ? Regime::full_1to2 : Regime::full_2to1; }

// TWC case seen from node k: who sends and whether the sender gives everything.
enum class Rel { none, k_interior, j_interior, k_all, j_all };

Rel relative(Regime r, int k) {
    switch (r) {
    case Regime::no_transfer: return Rel::none;
    case Regime::interior_1to2: return k == 0 ? Rel::k_interior : Rel::j_interior;
    case Regime::interior_2to1: return k == 1 ? Rel::k_interior : Rel::j_interior;
    case Regime::full_1to2: return k == 0 ? Rel::k_all : Rel::j_all;
    case Regime::full_2to1: return k == 1 ? Rel::k_all : Rel::j_all;
    }
    return Rel::none;
}

// Level in per-slot energy units (before dividing by the slot length) and its slope in x.
std::pair<double, double> twc_level(Rel rel, double A, double B, double q, double x, double ak, double aj) {
    switch (rel) {
    case Rel::none: return {2.0 * (A + x), 2.0};
    case Rel::k_interior: return {(A + x) + B / ak, 1.0};
    case Rel::j_interior: return {(A + x) + aj * B, 1.0};
    case Rel::k_all: return {2.0 * (x + B / ak), 2.0};
    case Rel::j_all: return {2.0 * (A + x + aj * q), 2.0};
    }
    return {0.0, 1.0};
}

void pair_value(double pbk, double q, int k, double& pb1, double& pb2) {
    pb1 = k == 0 ? pbk : q;
    pb2 = k == 0 ? q : pbk;
}

}  // namespace

SlotTransfer twc_transfer(double pb1, double pb2, const Scenario& sc) {
    require_nonnegative(pb1, pb2);
    const std::array<double, 2> pb{pb1, pb2};
    std::array<double, 2> delta{0.0, 0.0};
    Regime regime = Regime::no_transfer;
    for (int k = 0; k < 2; ++k) {
        const int j = 1 - k;
        if (sc.alpha[k] <= 0.0) continue;
        const double cand = 0.5 * ((sc.noise(k) + pb[k]) - (sc.noise(j) + pb[j]) / sc.alpha[k]);
        if (cand <= 0.0) continue;
        if (cand > pb[k] + 1e-12) {
            delta[k] = pb[k];
            regime = full(k);
        } else {
            delta[k] = std::min(cand, pb[k]);
            regime = interior(k);
        }
        if (delta[k] == 0.0) regime = Regime::no_transfer;
    }
    return finish(ModelKind::twc, pb1, pb2, delta, regime, sc);
}

SlotTransfer thc_transfer(double pb1, double pb2, const Scenario& sc) {
    require_nonnegative(pb1, pb2);
    const std::array<double, 2> pb{pb1, pb2};
    const std::array<double, 2> snr{pb1 / sc.noise(0), pb2 / sc.noise(1)};
    std::array<double, 2> delta{0.0, 0.0};
    Regime regime = Regime::no_transfer;
    for (int k = 0; k < 2; ++k) {
        const int j = 1 - k;
        if (sc.alpha[k] <= 0.0 || !(snr[k] > snr[j])) continue;
        // Equalize the received SNR of the two hops.
        delta[k] = std::min(pb[k], (snr[k] - snr[j]) / (1.0 / sc.noise(k) + sc.alpha[k] / sc.noise(j)));
        regime = interior(k);
    }
    return finish(ModelKind::thc, pb1, pb2, delta, regime, sc);
}

SlotTransfer mac_transfer(double pb1, double pb2, const Scenario& sc) {
    require_nonnegative(pb1, pb2);
    const std::array<double, 2> pb{pb1, pb2};
    const std::array<double, 2> c{1.0 / sc.noise(0), 1.0 / sc.noise(1)};
    std::array<double, 2> delta{0.0, 0.0};
    Regime regime = Regime::no_transfer;
    for (int k = 0; k < 2; ++k) {
        // Ties keep the energy at home.
        if (sc.alpha[k] * c[1 - k] > c[k] && pb[k] > 0.0) {
            delta[k] = pb[k];
            regime = full(k);
        }
    }
    return finish(ModelKind::mac, pb1, pb2, delta, regime, sc);
}

SlotTransfer slot_transfer(ModelKind model, double pb1, double pb2, const Scenario& sc) {
    switch (model) {
    case ModelKind::twc: return twc_transfer(pb1, pb2, sc);
    case ModelKind::thc: return thc_transfer(pb1, pb2, sc);
    case ModelKind::mac: return mac_transfer(pb1, pb2, sc);
    }
    return {};
}

double water_level(ModelKind model, int k, double pb1, double pb2, const Scenario& sc) {
    require_nonnegative(pb1, pb2);
    const int j = 1 - k;
    const double x = k == 0 ? pb1 : pb2;
    const double q = k == 0 ? pb2 : pb1;
    const double nk = sc.noise(k), nj = sc.noise(j);
    const double ak = sc.alpha[k], aj = sc.alpha[j];
    const double T = sc.slot_seconds;
    switch (model) {
    case ModelKind::twc: {
        const Rel rel = relative(twc_transfer(pb1, pb2, sc).regime, k);
        return twc_level(rel, nk, nj + q, q, x, ak, aj).first / T;
    }
    case ModelKind::thc: {
        const double sk = x / nk, sj = q / nj;
        if (sk < sj || (sk == sj && x > 0.0)) return 2.0 * (x + aj * q + nk + aj * nj) / T;
        if (ak <= 0.0) return kInf;
        return 2.0 * (x + q / ak + nk + nj / ak) / T;
    }
    case ModelKind::mac: {
        const double ck = std::max(1.0 / nk, ak / nj);
        const double cj = std::max(1.0 / nj, aj / nk);
        return 2.0 * (1.0 + ck * x + cj * q) / (ck * T);
    }
    }
    return kInf;
}

WaterLevels water_levels(ModelKind model, const NodeSeries& consumed, const Scenario& sc) {
    WaterLevels out;
    const std::size_t n = consumed[0].size();
    for (int k = 0; k < 2; ++k) {
        out.v[k].resize(n);
        for (std::size_t i = 0; i < n; ++i)
            out.v[k][i] = water_level(model, k, std::max(0.0, consumed[0][i]), std::max(0.0, consumed[1][i]), sc);
    }
    return out;
}

LevelCurve::LevelCurve(std::vector<LevelPiece> pieces, double cap) : pieces_(std::move(pieces)), cap_(cap) {}

double LevelCurve::right(double x) const {
    if (x >= cap_) return kInf;
    for (const auto& pc : pieces_)
        if (x < pc.x1) return pc.at(std::max(x, pc.x0));
    return kInf;
}

double LevelCurve::left(double x) const {
    if (x > cap_) return kInf;
    if (x <= 0.0) return right(0.0);
    for (const auto& pc : pieces_)
        if (x <= pc.x1) return pc.at(x);
    return kInf;
}

double LevelCurve::inverse(double L) const {
    for (const auto& pc : pieces_) {
        if (L < pc.v0) return pc.x0;
        const double x = pc.x0 + (L - pc.v0) / pc.slope;
        if (x < pc.x1) return x;
    }
    return cap_;
}

void LevelCurve::knots(std::vector<double>& out) const {
    for (const auto& pc : pieces_) {
        out.push_back(pc.v0);
        if (std::isfinite(pc.x1)) out.push_back(pc.end_value());
    }
}

LevelCurve level_curve(ModelKind model, int k, double q, const Scenario& sc) {
    const int j = 1 - k;
    const double nk = sc.noise(k), nj = sc.noise(j);
    const double ak = sc.alpha[k], aj = sc.alpha[j];
    const double T = sc.slot_seconds;
    std::vector<LevelPiece> pieces;

    switch (model) {
    case ModelKind::twc: {
        const double A = nk, B = nj + q;
        std::vector<double> bps{0.0};
        auto add = [&](double b) {
            if (b > 0.0 && std::isfinite(b)) bps.push_back(b);
        };
        if (aj > 0.0) {
            add(aj * (B - 2.0 * q) - A);
            add(aj * B - A);
        }
        if (ak > 0.0) {
            add(B / ak - A);
            add(A - B / ak);
        }
        std::sort(bps.begin(), bps.end());
        bps.erase(std::unique(bps.begin(), bps.end()), bps.end());
        for (std::size_t t = 0; t < bps.size(); ++t) {
            const double a = bps[t];
            const double b = t + 1 < bps.size() ? bps[t + 1] : kInf;
            const double mid = std::isfinite(b) ? 0.5 * (a + b) : a + std::max(1.0, a);
            double pb1 = 0.0, pb2 = 0.0;
            pair_value(mid, q, k, pb1, pb2);
            const Rel rel = relative(twc_transfer(pb1, pb2, sc).regime, k);
            const auto [v, slope] = twc_level(rel, A, B, q, a, ak, aj);
            pieces.push_back({a, b, v / T, slope / T});
        }
        return LevelCurve(std::move(pieces), kInf);
    }
    case ModelKind::thc: {
        const double kink = q * nk / nj;
        if (kink > 0.0) pieces.push_back({0.0, kink, 2.0 * (aj * q + nk + aj * nj) / T, 2.0 / T});
        if (ak <= 0.0) return LevelCurve(std::move(pieces), kink);
        pieces.push_back({kink, kInf, 2.0 * (kink + q / ak + nk + nj / ak) / T, 2.0 / T});
        return LevelCurve(std::move(pieces), kInf);
    }
    case ModelKind::mac: {
        const double ck = std::max(1.0 / nk, ak / nj);
        const double cj = std::max(1.0 / nj, aj / nk);
        pieces.push_back({0.0, kInf, 2.0 * (1.0 + cj * q) / (ck * T), 2.0 / T});
        return LevelCurve(std::move(pieces), kInf);
    }
    }
    return {};
}

}  // namespace ehcoop
