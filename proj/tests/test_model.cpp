#include "doctest.h"

#include <cmath>
#include <random>

#include "ehcoop/model.hpp"

using namespace ehcoop;

namespace {

NodeSeries ns(std::vector<double> a, std::vector<double> b) { return {std::move(a), std::move(b)}; }

Scenario fig2(ModelKind m = ModelKind::twc) {
    return make_scenario(m, {2, 5, 0, 0}, {0, 4, 0, 7}, {0.5, 0.5});
}

}  // namespace

TEST_CASE("channel constants fold into one effective noise") {
    Scenario sc;
    sc.harvests = ns({1.0}, {1.0});
    sc.finalize();
    CHECK(sc.effective_noise_mw[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sc.effective_noise_mw[1] == doctest::Approx(1.0).epsilon(1e-12));
    sc.gain_db = {-110.0, -100.0};
    sc.finalize();
    CHECK(sc.effective_noise_mw[0] == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("bad scenarios are rejected") {
    Scenario sc;
    sc.harvests = ns({1.0, 2.0}, {1.0});
    CHECK_THROWS_AS(sc.finalize(), InputError);
    sc.harvests = ns({-1.0}, {1.0});
    CHECK_THROWS_AS(sc.finalize(), InputError);
    sc.harvests = ns({1.0}, {1.0});
    sc.alpha = {1.2, 0.0};
    CHECK_THROWS_WITH(sc.finalize(), "transfer_efficiency must lie in [0,1]");
    CHECK_THROWS_AS(BatteryCapacity::finite(-1.0), InputError);
}

TEST_CASE("battery trace") {
    Scenario sc = fig2();
    auto zero = TransferPolicy::zeros(4);
    auto tr = battery_trace(zero, sc);
    CHECK(tr.state[0] == std::vector<double>{2, 7, 7, 7});
    CHECK(tr.state[1] == std::vector<double>{0, 4, 4, 11});
    CHECK(!check_feasible(zero, sc).overflow);

    sc.capacity = {BatteryCapacity::finite(10), BatteryCapacity::finite(10)};
    tr = battery_trace(zero, sc);
    CHECK(tr.state[1] == std::vector<double>{0, 4, 4, 10});
    CHECK(tr.overflow_loss[1][3] == doctest::Approx(1.0));
    CHECK(check_feasible(zero, sc).overflow);

    Scenario one = make_scenario(ModelKind::twc, {2}, {0}, {0.0, 0.5});
    auto pol = TransferPolicy::zeros(1);
    pol.p[0][0] = 1.0;
    pol.delta[0][0] = 0.5;
    CHECK(battery_trace(pol, one).state[0][0] == doctest::Approx(0.5));

    CHECK_THROWS_AS(battery_trace(TransferPolicy::zeros(3), sc), InputError);
}

TEST_CASE("sum form equals recursion for unbounded batteries") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        Scenario sc = make_scenario(ModelKind::twc, {u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)},
                                    {u(rng), u(rng)});
        auto pol = TransferPolicy::zeros(3);
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 3; ++i) {
                pol.p[k][i] = u(rng);
                pol.delta[k][i] = u(rng);
            }
        auto tr = battery_trace(pol, sc);
        auto cum = cumulative_battery(pol, sc);
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 3; ++i) CHECK(std::abs(tr.state[k][i] - cum[k][i]) < 1e-12);
    }
}

TEST_CASE("feasibility checks") {
    Scenario sc = fig2();
    CHECK(check_feasible(TransferPolicy::zeros(4), sc).feasible);

    Scenario one = make_scenario(ModelKind::twc, {1}, {0}, {0, 0});
    auto pol = TransferPolicy::zeros(1);
    pol.p[0][0] = 2.0;
    auto rep = check_feasible(pol, one);
    REQUIRE(!rep.feasible);
    CHECK(rep.first_violation->node == 0);
    CHECK(rep.first_violation->slot == 0);
    CHECK(rep.first_violation->kind == ViolationKind::causality);
    CHECK_THROWS_AS(objective(pol, one), InfeasiblePolicy);

    Scenario recv = make_scenario(ModelKind::twc, {0}, {2}, {0, 0.5});
    pol = TransferPolicy::zeros(1);
    pol.delta[1][0] = 2.0;
    pol.p[0][0] = 1.0;
    CHECK(check_feasible(pol, recv).feasible);

    pol.p[0][0] = -1e-6;
    CHECK(check_feasible(pol, recv).first_violation->kind == ViolationKind::negativity);
}

TEST_CASE("rates") {
    Scenario sc = make_scenario(ModelKind::twc, {0}, {0}, {0.5, 0.5});
    CHECK(rate(ModelKind::twc, 1.5, 0.25, sc) == doctest::Approx(0.5 * std::log(2.5) + 0.5 * std::log(1.25)));
    CHECK(rate(ModelKind::twc, 1.5, 0.25, sc) == doctest::Approx(0.56972).epsilon(1e-5));
    CHECK(rate(ModelKind::thc, 4, 0, sc) == 0.0);
    CHECK(rate(ModelKind::mac, 0, 0, sc) == 0.0);
    CHECK(rate(ModelKind::mac, 1, 2, sc) == doctest::Approx(0.5 * std::log(4.0)));
    CHECK_THROWS_AS(rate(ModelKind::twc, -1, 0, sc), InputError);
    CHECK(nats_to_bits(std::log(2.0)) == doctest::Approx(1.0));

    Scenario slow = sc;
    slow.slot_seconds = 2.0;
    CHECK(rate(ModelKind::twc, 2.0, 0.0, slow) == doctest::Approx(2.0 * 0.5 * std::log(2.0)));
}

TEST_CASE("objective is additive") {
    Scenario sc = make_scenario(ModelKind::twc, {2, 2}, {1, 1}, {0.0, 0.0});
    auto pol = TransferPolicy::zeros(2);
    pol.p = ns({2, 2}, {1, 1});
    const double r = rate(ModelKind::twc, 2, 1, sc);
    CHECK(objective(pol, sc) == doctest::Approx(2 * r));
    CHECK(objective(TransferPolicy::zeros(2), sc) == 0.0);
}

TEST_CASE("recovering transmit powers") {
    Scenario sc = make_scenario(ModelKind::twc, {2}, {0}, {0.5, 0.5});
    auto dp = DecomposedPolicy::zeros(1);
    dp.consumed = ns({2}, {0});
    auto tp = recover_transmit_powers(dp, sc);
    CHECK(tp.p[0][0] == 2.0);

    dp.immediate[0][0] = 0.5;
    tp = recover_transmit_powers(dp, sc);
    CHECK(tp.p[0][0] == doctest::Approx(1.5));
    CHECK(tp.p[1][0] == doctest::Approx(0.25));
    CHECK(tp.delta[0][0] == doctest::Approx(0.5));

    dp.consumed = ns({1}, {0});
    dp.immediate[0][0] = 1.0;
    tp = recover_transmit_powers(dp, sc);
    CHECK(tp.p[0][0] == doctest::Approx(0.0));
    CHECK(tp.p[1][0] == doctest::Approx(0.5));

    dp.immediate[0][0] = 1.5;
    CHECK_THROWS_AS(recover_transmit_powers(dp, sc), SolverError);
}

TEST_CASE("procrastination predicates") {
    Scenario sc = make_scenario(ModelKind::twc, {3}, {3}, {0.5, 0.5});
    CHECK(check_procrastinating(TransferPolicy::zeros(1), sc));
    auto pol = TransferPolicy::zeros(1);
    pol.p[0][0] = 1.0;
    pol.delta[1][0] = 3.0;
    CHECK(!check_procrastinating(pol, sc));
    pol.p[0][0] = 1.5;
    CHECK(check_procrastinating(pol, sc));

    auto dp = DecomposedPolicy::zeros(1);
    dp.consumed = ns({1}, {1});
    CHECK(check_partially_procrastinating(dp, sc));
    dp.immediate = ns({0.5}, {0.5});
    CHECK(!check_partially_procrastinating(dp, sc));

    Scenario fin = sc;
    fin.capacity = {BatteryCapacity::finite(5), BatteryCapacity::finite(5)};
    dp = DecomposedPolicy::zeros(1);
    dp.stored[0][0] = 0.5;
    CHECK(!check_partially_procrastinating(dp, fin));
}

TEST_CASE("transform postpones transfers to the slot that spends them") {
    Scenario sc = make_scenario(ModelKind::twc, {2, 0}, {0, 0}, {0.5, 0.5});
    auto pol = TransferPolicy::zeros(2);
    pol.delta[0] = {2, 0};
    pol.p[1] = {0, 1};
    REQUIRE(check_feasible(pol, sc).feasible);
    auto dp = procrastinate_transform(pol, sc);
    CHECK(dp.immediate[0][0] == 0.0);
    CHECK(dp.immediate[0][1] == doctest::Approx(2.0));
    CHECK(check_partially_procrastinating(dp, sc));
    auto back = recover_transmit_powers(dp, sc);
    CHECK(back.p[1][1] == doctest::Approx(1.0));
    CHECK(objective(back, sc) == doctest::Approx(objective(pol, sc)).epsilon(1e-12));
}

TEST_CASE("transform fixed point and cancellation") {
    Scenario sc = make_scenario(ModelKind::twc, {2}, {2}, {0.5, 0.5});
    auto pol = TransferPolicy::zeros(1);
    pol.p = ns({1}, {1.25});
    pol.delta[0][0] = 0.5;
    auto dp = procrastinate_transform(pol, sc);
    CHECK(dp.immediate[0][0] == doctest::Approx(0.5));
    CHECK(dp.stored[0][0] == 0.0);

    pol.p = ns({1}, {1});
    pol.delta = ns({1}, {1});
    dp = procrastinate_transform(pol, sc);
    CHECK(dp.immediate[0][0] == 0.0);
    CHECK(dp.immediate[1][0] == 0.0);

    pol.p[0][0] = 5.0;
    CHECK_THROWS_AS(procrastinate_transform(pol, sc), InfeasiblePolicy);
}

TEST_CASE("transform on random feasible policies") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int t = 0; t < 400; ++t) {
        const int n = 1 + t % 6;
        std::vector<double> e1(n), e2(n);
        for (int i = 0; i < n; ++i) {
            e1[i] = 3 * u(rng);
            e2[i] = 3 * u(rng);
        }
        Scenario sc = make_scenario(static_cast<ModelKind>(t % 3), e1, e2, {u(rng), u(rng)});
        if (t % 2) sc.capacity = {BatteryCapacity::finite(0.5 + 2 * u(rng)), BatteryCapacity::finite(0.5 + 2 * u(rng))};
        // Build a feasible policy by spending a random share of what is available.
        auto pol = TransferPolicy::zeros(n);
        std::array<double, 2> s{0, 0};
        for (int i = 0; i < n; ++i) {
            std::array<double, 2> avail{s[0] + e1[i], s[1] + e2[i]};
            for (int k = 0; k < 2; ++k) {
                pol.delta[k][i] = avail[k] * u(rng) * 0.6;
                pol.p[k][i] = (avail[k] - pol.delta[k][i]) * u(rng);
            }
            for (int k = 0; k < 2; ++k) {
                double next = avail[k] - pol.p[k][i] - pol.delta[k][i] + sc.alpha[1 - k] * pol.delta[1 - k][i];
                if (!sc.capacity[k].is_infinite()) next = std::min(next, sc.capacity[k].mj());
                s[k] = next;
            }
        }
        REQUIRE(check_feasible(pol, sc).feasible);
        auto dp = procrastinate_transform(pol, sc);
        auto back = recover_transmit_powers(dp, sc);
        INFO("trial " << t);
        CHECK(check_feasible(back, sc).feasible);
        CHECK(check_partially_procrastinating(dp, sc));
        CHECK(std::abs(objective(back, sc) - objective(pol, sc)) <= 1e-12);
        ++checked;
    }
    CHECK(checked == 400);
}
