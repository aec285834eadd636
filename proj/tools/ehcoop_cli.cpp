// ehcoop: offline throughput-optimal power and energy transfer policies.
//
//   ehcoop solve    --config scenario.json [--mode bi|uni12|uni21|none] [--out report.json] [--bits]
//   ehcoop sweep    --config sweep.json [--out table.csv]
//   ehcoop verify   --config scenario.json [--grid-points 40]
//   ehcoop baseline --config scenario.json --kind constant_power_no_coop|constant_power_with_coop [--out p.json]
//
// Exit codes: 0 ok, 1 bad input, 2 solver did not converge, 3 verification failed.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "ehcoop/baselines.hpp"
#include "ehcoop/harness.hpp"
#include "ehcoop/oracle.hpp"
#include "ehcoop/waterfill.hpp"

using namespace ehcoop;

namespace {

enum Exit { ok = 0, input_error = 1, not_converged = 2, verify_failed = 3 };

void write_out(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

int cmd_solve(const std::string& config, const std::string& mode, const std::string& out, bool bits) {
    const Scenario sc = load_scenario(config);
    const SolveReport rep = solve(sc, parse_coop_mode(mode));
    write_out(out, report_to_json(rep, sc).dump(2) + "\n");
    const double value = bits ? nats_to_bits(rep.objective_nats) : rep.objective_nats;
    std::fprintf(stderr, "%s %s: %.10g %s (engine %s, residual %.3g)\n", to_string(sc.model).c_str(), mode.c_str(),
                 value, bits ? "bits" : "nats", rep.engine.c_str(), rep.level_residual);
    for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (!rep.converged) {
        std::fprintf(stderr, "solver did not converge\n");
        return not_converged;
    }
    return ok;
}

int cmd_sweep(const std::string& config, const std::string& out) {
    const SweepSpec spec = load_sweep(config);
    const auto rows = run_sweep(spec);
    std::ostringstream os;
    write_csv(rows, os);
    write_out(out, os.str());
    int flagged = 0;
    for (const auto& r : rows) flagged += r.nonconverged;
    if (flagged > 0) {
        std::fprintf(stderr, "%d solves did not converge (see the nonconverged column)\n", flagged);
        return not_converged;
    }
    return ok;
}

int cmd_baseline(const std::string& config, const std::string& kind, const std::string& mode, const std::string& out) {
    const Scenario sc = load_scenario(config);
    const TransferPolicy tp = constant_power(sc, parse_baseline(kind), parse_coop_mode(mode));
    write_out(out, policy_to_json(tp, sc).dump(2) + "\n");
    std::fprintf(stderr, "%s: %.10g nats\n", kind.c_str(), objective(tp, sc));
    return ok;
}

int cmd_verify(const std::string& config, int grid_points) {
    const Scenario sc = load_scenario(config);
    int failures = 0;
    auto check = [&](bool pass, const std::string& what) {
        std::printf("%s  %s\n", pass ? "PASS" : "FAIL", what.c_str());
        if (!pass) ++failures;
    };
    const double tol = 1e-9;
    std::array<double, 4> value{};
    const std::array<CoopMode, 4> modes{CoopMode::bidirectional, CoopMode::uni_1_to_2, CoopMode::uni_2_to_1,
                                        CoopMode::no_cooperation};
    for (std::size_t m = 0; m < modes.size(); ++m) {
        const std::string tag = to_string(modes[m]);
        const SolveReport rep = solve(sc, modes[m]);
        value[m] = rep.objective_nats;
        const Scenario restricted = with_mode(sc, modes[m]);
        check(check_feasible(rep.transmit, restricted).feasible, tag + ": policy is feasible");
        if (sc.infinite_battery())
            check(check_procrastinating(rep.transmit, restricted), tag + ": policy is procrastinating");
        else
            check(check_partially_procrastinating(rep.policy, restricted), tag + ": policy is partially procrastinating");
        check(rep.converged, tag + ": solver converged (level residual " + std::to_string(rep.level_residual) + ")");
        const auto base = constant_power(sc, modes[m] == CoopMode::no_cooperation ? BaselineKind::constant_power_no_coop
                                                                               : BaselineKind::constant_power_with_coop,
                                         modes[m]);
        check(rep.objective_nats >= objective(base, sc) - tol, tag + ": beats the constant-power baseline");

        DpConfig cfg;
        cfg.grid_points = grid_points;
        const DpResult dp = dp_solve(sc, cfg, modes[m]);
        char line[160];
        std::snprintf(line, sizeof line, "%s: oracle lower bound %.9g <= solver %.9g (quantum %.3g mJ)", tag.c_str(),
                      dp.value_nats, rep.objective_nats, dp.quantum_mJ);
        check(dp.value_nats <= rep.objective_nats + tol, line);
    }
    check(value[0] >= value[1] - tol && value[0] >= value[2] - tol, "bidirectional >= each unidirectional mode");
    check(value[1] >= value[3] - tol && value[2] >= value[3] - tol, "each unidirectional mode >= no cooperation");
    std::printf("%d check(s) failed\n", failures);
    return failures ? verify_failed : ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Offline sum-throughput optimal policies for energy harvesting two-node channels"};
    app.require_subcommand(1);

    std::string config, mode = "bi", out, kind;
    bool bits = false;
    int grid_points = 40;

    auto* solve_cmd = app.add_subcommand("solve", "optimal policy for one scenario");
    solve_cmd->add_option("--config", config, "scenario JSON")->required();
    solve_cmd->add_option("--mode", mode, "transfer directions")->check(CLI::IsMember({"bi", "uni12", "uni21", "none"}));
    solve_cmd->add_option("--out", out, "report JSON (stdout if omitted)");
    solve_cmd->add_flag("--bits", bits, "print the objective in bits");

    auto* sweep_cmd = app.add_subcommand("sweep", "averaged objectives over a parameter sweep");
    sweep_cmd->add_option("--config", config, "sweep JSON")->required();
    sweep_cmd->add_option("--out", out, "CSV path (stdout if omitted)");

    auto* verify_cmd = app.add_subcommand("verify", "oracle and invariant checks for one scenario");
    verify_cmd->add_option("--config", config, "scenario JSON")->required();
    verify_cmd->add_option("--grid-points", grid_points, "oracle quanta per largest harvest")->check(CLI::PositiveNumber);

    auto* base_cmd = app.add_subcommand("baseline", "constant-power reference policy");
    base_cmd->add_option("--config", config, "scenario JSON")->required();
    base_cmd->add_option("--kind", kind, "baseline kind")
        ->required()
        ->check(CLI::IsMember({"constant_power_no_coop", "constant_power_with_coop"}));
    base_cmd->add_option("--mode", mode, "transfer directions for the cooperative variant")
        ->check(CLI::IsMember({"bi", "uni12", "uni21", "none"}));
    base_cmd->add_option("--out", out, "policy JSON (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : input_error;
    }

    try {
        if (*solve_cmd) return cmd_solve(config, mode, out, bits);
        if (*sweep_cmd) return cmd_sweep(config, out);
        if (*verify_cmd) return cmd_verify(config, grid_points);
        if (*base_cmd) return cmd_baseline(config, kind, mode, out);
    } catch (const InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return input_error;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return not_converged;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return input_error;
    }
    return ok;
}
