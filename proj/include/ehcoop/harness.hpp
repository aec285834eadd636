#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "ehcoop/model.hpp"
#include "ehcoop/waterfill.hpp"

namespace ehcoop {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kGeneratorName = "splitmix64";

// Scenario files: energies in mJ, gains in dB, noise in W, capacity a number or "inf".
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& sc);
Scenario load_scenario(const std::string& path);

/// n i.i.d. uniform draws on [0, peak] from SplitMix64 seeded with `seed`.
/// Each draw takes the top 53 bits of the next output as a fraction of 2^53.
std::vector<double> generate_harvests(double peak_mJ, std::size_t n, std::uint64_t seed);

/// Seed of the harvest stream for one trial and node; every sweep point
/// reuses the same streams, so neighbouring points compare like with like.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t trial, int node);

enum class SweptParameter { peak_harvest_node1, alpha1 };

struct SweepSpec {
    Scenario base;  // harvests are replaced by generated ones
    SweptParameter parameter = SweptParameter::peak_harvest_node1;
    double lo = 0.0, hi = 10.0, step = 1.0;
    int trials_per_point = 50;
    std::uint64_t seed = 1;
    std::size_t n_slots = 100;
    std::array<double, 2> peak_mJ{10.0, 10.0};
    // Cooperation modes (bi, uni12, uni21, none) and baseline kinds.
    std::vector<std::string> modes{"bi", "uni12", "uni21", "none", "constant_power_no_coop",
                                   "constant_power_with_coop"};
    int threads = 0;  // 0: hardware concurrency

    std::vector<double> points() const;
};

SweepSpec sweep_from_json(const nlohmann::json& j);
SweepSpec load_sweep(const std::string& path);

struct SweepRow {
    double swept_value = 0.0;
    std::string mode;
    double mean_nats = 0.0;
    double mean_bits = 0.0;
    int trials = 0;
    std::uint64_t seed = 0;
    int nonconverged = 0;  // trials whose solver flagged a problem
};

/// Rows ordered by sweep point, then by the order of spec.modes.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

void write_csv(const std::vector<SweepRow>& rows, std::ostream& os);
void emit_csv(const std::vector<SweepRow>& rows, const std::string& path);

nlohmann::json report_to_json(const SolveReport& rep, const Scenario& sc);
nlohmann::json policy_to_json(const TransferPolicy& tp, const Scenario& sc);
void emit_json(const nlohmann::json& j, const std::string& path);

// Reads the decomposed policy back out of a report produced by report_to_json.
DecomposedPolicy policy_from_report(const nlohmann::json& j);

}  // namespace ehcoop
