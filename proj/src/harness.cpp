#include "ehcoop/harness.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "ehcoop/baselines.hpp"
#include "ehcoop/transfer.hpp"

namespace ehcoop {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw InputError(where + ": expected a JSON object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw InputError(where + ": unknown field '" + key + "'");
}

double number(const json& j, const std::string& field) {
    if (!j.is_number()) throw InputError(field + " must be a number");
    return j.get<double>();
}

// A pair of per-node values, or one value for both nodes.
std::array<double, 2> pair_of(const json& j, const std::string& field) {
    if (j.is_number()) return {j.get<double>(), j.get<double>()};
    if (!j.is_array() || j.size() != 2) throw InputError(field + " must be a number or a list of two numbers");
    return {number(j[0], field), number(j[1], field)};
}

BatteryCapacity capacity_of(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() != "inf") throw InputError("battery_capacity must be a positive number or \"inf\"");
        return BatteryCapacity::infinite();
    }
    return BatteryCapacity::finite(number(j, "battery_capacity"));
}

json capacity_json(const BatteryCapacity& c) { return c.is_infinite() ? json("inf") : json(c.mj()); }

json series_json(const NodeSeries& s) { return json::array({s[0], s[1]}); }

NodeSeries series_from(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 2) throw InputError(field + " must hold one list per node");
    NodeSeries s;
    for (int k = 0; k < 2; ++k) {
        if (!j[k].is_array()) throw InputError(field + " must hold one list per node");
        for (const auto& v : j[k]) s[k].push_back(number(v, field));
    }
    return s;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(path + ": " + e.what());
    }
}

Scenario scenario_impl(const json& j, bool need_harvests) {
    check_keys(j,
               {"model", "slot_seconds", "harvests", "battery_capacity", "transfer_efficiency", "channel_gain_db",
                "noise_power_w", "name"},
               "scenario");
    Scenario sc;
    if (!j.contains("model") || !j["model"].is_string()) throw InputError("model is required (TWC, THC or MAC)");
    sc.model = parse_model_kind(j["model"].get<std::string>());
    if (j.contains("slot_seconds")) sc.slot_seconds = number(j["slot_seconds"], "slot_seconds");
    if (j.contains("harvests"))
        sc.harvests = series_from(j["harvests"], "harvests");
    else if (need_harvests)
        throw InputError("harvests is required");
    else
        sc.harvests = {std::vector<double>{0.0}, std::vector<double>{0.0}};
    if (j.contains("battery_capacity")) {
        const json& c = j["battery_capacity"];
        if (c.is_array()) {
            if (c.size() != 2) throw InputError("battery_capacity must be one value or a list of two");
            sc.capacity = {capacity_of(c[0]), capacity_of(c[1])};
        } else {
            sc.capacity = {capacity_of(c), capacity_of(c)};
        }
    }
    if (j.contains("transfer_efficiency")) sc.alpha = pair_of(j["transfer_efficiency"], "transfer_efficiency");
    if (j.contains("channel_gain_db")) sc.gain_db = pair_of(j["channel_gain_db"], "channel_gain_db");
    if (j.contains("noise_power_w")) sc.noise_w = pair_of(j["noise_power_w"], "noise_power_w");
    sc.finalize();
    return sc;
}

}  // namespace

Scenario scenario_from_json(const json& j) { return scenario_impl(j, true); }

json scenario_to_json(const Scenario& sc) {
    return {{"model", to_string(sc.model)},
            {"slot_seconds", sc.slot_seconds},
            {"harvests", series_json(sc.harvests)},
            {"battery_capacity", json::array({capacity_json(sc.capacity[0]), capacity_json(sc.capacity[1])})},
            {"transfer_efficiency", sc.alpha},
            {"channel_gain_db", sc.gain_db},
            {"noise_power_w", sc.noise_w}};
}

Scenario load_scenario(const std::string& path) { return scenario_from_json(parse_file(path)); }

std::vector<double> generate_harvests(double peak_mJ, std::size_t n, std::uint64_t seed) {
    if (!(peak_mJ >= 0.0)) throw InputError("peak harvest must be non-negative");
    std::vector<double> out(n);
    std::uint64_t state = seed;
    for (auto& e : out) e = peak_mJ * (static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53);
    return out;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t trial, int node) {
    std::uint64_t state = seed;
    const std::uint64_t a = splitmix64(state);
    state = a ^ (trial * 2 + static_cast<std::uint64_t>(node));
    return splitmix64(state);
}

std::vector<double> SweepSpec::points() const {
    std::vector<double> out;
    if (hi < lo) return out;
    for (long i = 0;; ++i) {
        const double v = lo + static_cast<double>(i) * step;
        if (v > hi + 1e-9 * step) break;
        // 0.1 * 3 should print as 0.3 in the table.
        out.push_back(std::round(v * 1e12) / 1e12);
    }
    return out;
}

SweepSpec sweep_from_json(const json& j) {
    check_keys(j, {"scenario", "sweep", "trials_per_point", "seed", "n_slots", "peak_harvest_mJ", "modes", "threads"},
               "sweep config");
    SweepSpec spec;
    if (!j.contains("scenario")) throw InputError("sweep config: scenario is required");
    spec.base = scenario_impl(j["scenario"], false);
    if (!j.contains("sweep")) throw InputError("sweep config: sweep is required");
    const json& s = j["sweep"];
    check_keys(s, {"parameter", "lo", "hi", "step"}, "sweep");
    const std::string param = s.value("parameter", "peak_harvest_node1");
    if (param == "peak_harvest_node1")
        spec.parameter = SweptParameter::peak_harvest_node1;
    else if (param == "alpha1")
        spec.parameter = SweptParameter::alpha1;
    else
        throw InputError("sweep.parameter must be peak_harvest_node1 or alpha1");
    spec.lo = number(s.at("lo"), "sweep.lo");
    spec.hi = number(s.at("hi"), "sweep.hi");
    spec.step = number(s.at("step"), "sweep.step");
    if (!(spec.step > 0.0)) throw InputError("sweep.step must be positive");
    if (spec.hi < spec.lo) throw InputError("sweep.hi must not be below sweep.lo");
    if (j.contains("trials_per_point")) spec.trials_per_point = j["trials_per_point"].get<int>();
    if (spec.trials_per_point < 1) throw InputError("trials_per_point must be at least 1");
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("n_slots")) spec.n_slots = j["n_slots"].get<std::size_t>();
    if (spec.n_slots < 1) throw InputError("n_slots must be at least 1");
    if (j.contains("peak_harvest_mJ")) spec.peak_mJ = pair_of(j["peak_harvest_mJ"], "peak_harvest_mJ");
    if (j.contains("modes")) spec.modes = j["modes"].get<std::vector<std::string>>();
    if (j.contains("threads")) spec.threads = j["threads"].get<int>();
    for (const auto& m : spec.modes) {
        try {
            parse_coop_mode(m);
        } catch (const InputError&) {
            parse_baseline(m);
        }
    }
    return spec;
}

SweepSpec load_sweep(const std::string& path) { return sweep_from_json(parse_file(path)); }

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
    const std::vector<double> pts = spec.points();
    const std::size_t n_modes = spec.modes.size();
    const std::size_t trials = static_cast<std::size_t>(spec.trials_per_point);
    struct Cell {
        double nats = 0.0;
        bool flagged = false;
    };
    std::vector<Cell> cells(pts.size() * trials * n_modes);

    auto run_one = [&](std::size_t job) {
        const std::size_t p = job / trials, t = job % trials;
        Scenario sc = spec.base;
        std::array<double, 2> peak = spec.peak_mJ;
        if (spec.parameter == SweptParameter::peak_harvest_node1) peak[0] = pts[p];
        else sc.alpha[0] = pts[p];
        for (int k = 0; k < 2; ++k) sc.harvests[k] = generate_harvests(peak[k], spec.n_slots, stream_seed(spec.seed, t, k));
        sc.finalize();
        for (std::size_t m = 0; m < n_modes; ++m) {
            Cell& c = cells[job * n_modes + m];
            const std::string& name = spec.modes[m];
            if (name.rfind("constant_power", 0) == 0) {
                c.nats = objective(constant_power(sc, parse_baseline(name)), sc);
            } else {
                const SolveReport rep = solve(sc, parse_coop_mode(name));
                c.nats = rep.objective_nats;
                c.flagged = !rep.converged;
            }
        }
    };

    const std::size_t jobs = pts.size() * trials;
    unsigned workers = spec.threads > 0 ? static_cast<unsigned>(spec.threads) : std::thread::hardware_concurrency();
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(jobs, 1))));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t job; (job = next.fetch_add(1)) < jobs;) {
            try {
                run_one(job);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = jobs;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<SweepRow> rows;
    for (std::size_t p = 0; p < pts.size(); ++p)
        for (std::size_t m = 0; m < n_modes; ++m) {
            SweepRow row;
            row.swept_value = pts[p];
            row.mode = spec.modes[m];
            row.trials = spec.trials_per_point;
            row.seed = spec.seed;
            double sum = 0.0;
            for (std::size_t t = 0; t < trials; ++t) {
                const Cell& c = cells[(p * trials + t) * n_modes + m];
                sum += c.nats;
                row.nonconverged += c.flagged ? 1 : 0;
            }
            row.mean_nats = sum / static_cast<double>(trials);
            row.mean_bits = nats_to_bits(row.mean_nats);
            rows.push_back(row);
        }
    return rows;
}

void write_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
    os << "swept_value,mode,mean_nats,mean_bits,trials,seed,nonconverged\n";
    for (const auto& r : rows)
        os << format_number(r.swept_value) << ',' << csv_field(r.mode) << ',' << format_number(r.mean_nats) << ','
           << format_number(r.mean_bits) << ',' << r.trials << ',' << r.seed << ',' << r.nonconverged << '\n';
}

void emit_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    write_csv(rows, out);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

json report_to_json(const SolveReport& rep, const Scenario& sc) {
    json regimes = json::array();
    for (Regime r : rep.regimes) regimes.push_back(to_string(r));
    return {{"tool_version", kToolVersion},
            {"generator", kGeneratorName},
            {"scenario", scenario_to_json(sc)},
            {"mode", to_string(rep.mode)},
            {"engine", rep.engine},
            {"objective_nats", rep.objective_nats},
            {"objective_bits", nats_to_bits(rep.objective_nats)},
            {"converged", rep.converged},
            {"level_residual", rep.level_residual},
            {"iterations", rep.bcd_iterations},
            {"objective_trace", rep.objective_trace},
            {"warnings", rep.warnings},
            {"policy",
             {{"consumed", series_json(rep.policy.consumed)},
              {"immediate", series_json(rep.policy.immediate)},
              {"stored", series_json(rep.policy.stored)},
              {"transmit_power", series_json(rep.transmit.p)},
              {"transfer", series_json(rep.transmit.delta)}}},
            {"levels", series_json(rep.levels.v)},
            {"regimes", regimes}};
}

json policy_to_json(const TransferPolicy& tp, const Scenario& sc) {
    const double f = objective(tp, sc);
    return {{"tool_version", kToolVersion},
            {"scenario", scenario_to_json(sc)},
            {"objective_nats", f},
            {"objective_bits", nats_to_bits(f)},
            {"feasible", check_feasible(tp, sc).feasible},
            {"policy", {{"transmit_power", series_json(tp.p)}, {"transfer", series_json(tp.delta)}}}};
}

void emit_json(const json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

DecomposedPolicy policy_from_report(const json& j) {
    const json& p = j.at("policy");
    DecomposedPolicy dp;
    dp.consumed = series_from(p.at("consumed"), "policy.consumed");
    dp.immediate = series_from(p.at("immediate"), "policy.immediate");
    dp.stored = series_from(p.at("stored"), "policy.stored");
    return dp;
}

}  // namespace ehcoop
