#pragma once

#include <array>
#include <limits>
#include <vector>

#include "ehcoop/model.hpp"

namespace ehcoop {

// Which per-slot case is active. THC only uses no_transfer and the interior
// cases (equalizing transfer); MAC only no_transfer and the full cases.
enum class Regime { no_transfer, interior_1to2, interior_2to1, full_1to2, full_2to1 };

const char* to_string(Regime r);

struct SlotTransfer {
    std::array<double, 2> delta{0.0, 0.0};
    Regime regime = Regime::no_transfer;
    double rate_nats = 0.0;
};

SlotTransfer twc_transfer(double pb1, double pb2, const Scenario& sc);
SlotTransfer thc_transfer(double pb1, double pb2, const Scenario& sc);
SlotTransfer mac_transfer(double pb1, double pb2, const Scenario& sc);
SlotTransfer slot_transfer(ModelKind model, double pb1, double pb2, const Scenario& sc);

// Best per-slot rate as a function of consumed powers.
inline double slot_rate(ModelKind model, double pb1, double pb2, const Scenario& sc) {
    return slot_transfer(model, pb1, pb2, sc).rate_nats;
}

/// Reciprocal marginal rate of node k at consumed powers (pb1, pb2).
/// THC is not differentiable where both links see equal SNR; there the
/// left limit (smaller value) is returned. May be +inf for THC when
/// node k cannot transfer and already out-powers the other link.
double water_level(ModelKind model, int k, double pb1, double pb2, const Scenario& sc);

struct WaterLevels {
    NodeSeries v;
};

WaterLevels water_levels(ModelKind model, const NodeSeries& consumed, const Scenario& sc);

// Water level of one node in one slot as a function of its own consumed
// power x with the other node's consumption held fixed. Piecewise linear,
// increasing, possibly with upward jumps, and +inf beyond `cap`.
struct LevelPiece {
    double x0 = 0.0;
    double x1 = std::numeric_limits<double>::infinity();
    double v0 = 0.0;
    double slope = 1.0;

    double at(double x) const { return v0 + slope * (x - x0); }
    double end_value() const { return at(x1); }
};

class LevelCurve {
public:
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    LevelCurve() = default;
    LevelCurve(std::vector<LevelPiece> pieces, double cap);

    double cap() const { return cap_; }
    const std::vector<LevelPiece>& pieces() const { return pieces_; }

    // Right and left limits of the level at x.
    double right(double x) const;
    double left(double x) const;

    /// sup{x in [0, cap] : level(x) <= L}; 0 when L is below the level at 0.
    double inverse(double L) const;

    /// Every level value where inverse() changes slope.
    void knots(std::vector<double>& out) const;

private:
    std::vector<LevelPiece> pieces_;
    double cap_ = kInf;
};

LevelCurve level_curve(ModelKind model, int k, double other, const Scenario& sc);

}  // namespace ehcoop
