#include "doctest.h"

#include <random>

#include "ehcoop/baselines.hpp"
#include "ehcoop/waterfill.hpp"

using namespace ehcoop;

TEST_CASE("constant power baseline") {
    Scenario flat = make_scenario(ModelKind::twc, {3, 3, 3}, {1, 1, 1}, {0.5, 0.5});
    auto tp = constant_power(flat, BaselineKind::constant_power_no_coop);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(tp.p[0][i] == doctest::Approx(3.0));
        CHECK(tp.p[1][i] == doctest::Approx(1.0));
    }
    Scenario two = make_scenario(ModelKind::twc, {2, 0}, {0, 0}, {0.5, 0.5});
    tp = constant_power(two, BaselineKind::constant_power_no_coop);
    CHECK(tp.p[0] == std::vector<double>{1, 1});
    Scenario zero = make_scenario(ModelKind::mac, {0, 0}, {0, 0}, {0.5, 0.5});
    tp = constant_power(zero, BaselineKind::constant_power_with_coop);
    for (int k = 0; k < 2; ++k)
        for (std::size_t i = 0; i < 2; ++i) CHECK(tp.p[k][i] + tp.delta[k][i] == 0.0);
    // Late harvest: nothing to spend in slot 1.
    Scenario late = make_scenario(ModelKind::twc, {0, 4}, {0, 0}, {0.5, 0.5});
    CHECK(constant_power(late, BaselineKind::constant_power_no_coop).p[0] == std::vector<double>{0, 2});
}

TEST_CASE("baselines are feasible and dominated by the optimum") {
    std::mt19937_64 rng(91);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 45; ++t) {
        const auto model = static_cast<ModelKind>(t % 3);
        std::vector<double> e1(6), e2(6);
        for (int i = 0; i < 6; ++i) {
            e1[i] = 5 * u(rng);
            e2[i] = 5 * u(rng);
        }
        Scenario sc = make_scenario(model, e1, e2, {u(rng), u(rng)});
        if (t % 3 == 1) sc.capacity = {BatteryCapacity::finite(2.0), BatteryCapacity::finite(3.0)};
        INFO(to_string(model) << " trial " << t);
        const auto a = constant_power(sc, BaselineKind::constant_power_no_coop);
        const auto b = constant_power(sc, BaselineKind::constant_power_with_coop);
        CHECK(check_feasible(a, sc).feasible);
        CHECK(check_feasible(b, sc).feasible);
        CHECK(objective(b, sc) >= objective(a, sc) - 1e-12);
        CHECK(solve(sc, CoopMode::no_cooperation).objective_nats >= objective(a, sc) - 1e-9);
        CHECK(solve(sc).objective_nats >= objective(b, sc) - 1e-9);
    }
}
