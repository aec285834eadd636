#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ehcoop {

// Per-node sequences, indexed [node][slot] with node 0 = T1, node 1 = T2.
using NodeSeries = std::array<std::vector<double>, 2>;

enum class ModelKind { twc, thc, mac };

// Which transfer directions a solve may use.
enum class CoopMode { bidirectional, uni_1_to_2, uni_2_to_1, no_cooperation };

std::string to_string(ModelKind kind);
std::string to_string(CoopMode mode);
ModelKind parse_model_kind(const std::string& text);
CoopMode parse_coop_mode(const std::string& text);

class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kFeasibilityTol = 1e-9;
inline constexpr double kNegativityTol = 1e-12;

/// Battery size in mJ, or the distinguished unbounded value.
class BatteryCapacity {
public:
    static BatteryCapacity infinite() { return BatteryCapacity{}; }
    static BatteryCapacity finite(double mj);

    bool is_infinite() const { return !mj_.has_value(); }
    double mj() const;

    friend bool operator==(const BatteryCapacity&, const BatteryCapacity&) = default;

private:
    std::optional<double> mj_;
};

/// Static description of a two-node energy harvesting network.
///
/// Energies are in mJ, gains in dB and noise in W. The derived effective
/// noise n_k = sigma_j^2 / h_k (in mW) is the only channel quantity the
/// solvers use; call `finalize()` after editing raw fields.
struct Scenario {
    ModelKind model = ModelKind::twc;
    double slot_seconds = 1.0;
    NodeSeries harvests;
    std::array<BatteryCapacity, 2> capacity{BatteryCapacity::infinite(), BatteryCapacity::infinite()};
    std::array<double, 2> alpha{0.0, 0.0};
    std::array<double, 2> gain_db{-100.0, -100.0};
    std::array<double, 2> noise_w{1e-13, 1e-13};
    std::array<double, 2> effective_noise_mw{1.0, 1.0};

    std::size_t n_slots() const { return harvests[0].size(); }

    // Noise expressed per slot of energy, the unit the solvers work in.
    double noise(int k) const { return effective_noise_mw[k] * slot_seconds; }
    bool infinite_battery() const { return capacity[0].is_infinite() && capacity[1].is_infinite(); }
    double linear_gain(int k) const;

    /// Validates raw fields and recomputes effective noise.
    void finalize();
};

/// Builds a validated scenario whose effective noises equal `noise_mw`.
Scenario make_scenario(ModelKind model, std::vector<double> e1, std::vector<double> e2,
                       std::array<double, 2> alpha, std::array<double, 2> noise_mw = {1.0, 1.0});

/// Copy of `sc` with the efficiencies of disallowed transfer directions set to zero.
Scenario with_mode(const Scenario& sc, CoopMode mode);

struct TransferPolicy {
    NodeSeries p;      // transmit energy per slot (mW at unit slots)
    NodeSeries delta;  // transferred energy per slot, mJ

    static TransferPolicy zeros(std::size_t n);
    std::size_t n_slots() const { return p[0].size(); }
};

struct DecomposedPolicy {
    NodeSeries consumed;   // energy drawn from the battery
    NodeSeries immediate;  // transfer spent by the receiver in the same slot
    NodeSeries stored;     // transfer kept in the receiver's battery

    static DecomposedPolicy zeros(std::size_t n);
    std::size_t n_slots() const { return consumed[0].size(); }
    NodeSeries total_transfer() const;
};

struct BatteryTrace {
    NodeSeries state;
    NodeSeries overflow_loss;
};

enum class ViolationKind { causality, negativity, capacity };

struct Violation {
    int node = 0;
    std::size_t slot = 0;
    ViolationKind kind = ViolationKind::causality;
};

struct FeasibilityReport {
    bool feasible = true;
    std::optional<Violation> first_violation;
    double worst_causality_slack = 0.0;
    bool overflow = false;  // legal, but never optimal

    std::string describe() const;
};

class InfeasiblePolicy : public std::runtime_error {
public:
    explicit InfeasiblePolicy(FeasibilityReport report);
    const FeasibilityReport& report() const { return report_; }

private:
    FeasibilityReport report_;
};

BatteryTrace battery_trace(const TransferPolicy& policy, const Scenario& sc);

/// Sum form of the battery state; valid for unbounded batteries only.
NodeSeries cumulative_battery(const TransferPolicy& policy, const Scenario& sc);

FeasibilityReport check_feasible(const TransferPolicy& policy, const Scenario& sc);

/// Instantaneous sum rate in nats for transmit energies (p1, p2) over one slot.
double rate(ModelKind model, double p1, double p2, const Scenario& sc);

/// Sum throughput in nats; throws InfeasiblePolicy when the policy is not feasible.
double objective(const TransferPolicy& policy, const Scenario& sc);

inline double nats_to_bits(double nats) { return nats / 0.69314718055994530942; }

TransferPolicy recover_transmit_powers(const DecomposedPolicy& dp, const Scenario& sc);

bool check_procrastinating(const TransferPolicy& policy, const Scenario& sc);
bool check_partially_procrastinating(const DecomposedPolicy& dp, const Scenario& sc);

/// Postpones transfers that the receiver does not spend immediately, cancels
/// simultaneous opposite transfers and forwards battery overflow as stored
/// transfer. Transmit powers are left untouched.
DecomposedPolicy procrastinate_transform(const TransferPolicy& policy, const Scenario& sc);

}  // namespace ehcoop
