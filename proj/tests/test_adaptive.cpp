#include "support.hpp"

#include "vanetsim/adaptive.hpp"
#include "vanetsim/error.hpp"

#include <doctest.h>
#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace vanetsim;

namespace {

// Continuous allocation g_i = min(g_max, g_min + lambda * load_i) with lambda
// found by bisection so the greens sum to the budget. Budget left over once
// every loaded approach saturates goes equally to the idle ones.
std::vector<double> water_fill(const std::vector<double>& loads, int budget, int g_min, int g_max) {
    const double total = std::accumulate(loads.begin(), loads.end(), 0.0);
    const auto n = loads.size();
    if (total <= 0) return std::vector<double>(n, static_cast<double>(budget) / static_cast<double>(n));
    auto sum_at = [&](double lambda) {
        double s = 0;
        for (double l : loads) s += std::min<double>(g_max, g_min + lambda * l);
        return s;
    };
    const double saturated = sum_at(1e12);
    if (saturated < budget) {
        const auto idle = static_cast<double>(std::count(loads.begin(), loads.end(), 0.0));
        std::vector<double> g;
        for (double l : loads) g.push_back(l > 0 ? g_max : g_min + (budget - saturated) / idle);
        return g;
    }
    double lo = 0, hi = 1;
    while (sum_at(hi) < budget && hi < 1e12) hi *= 2;
    for (int i = 0; i < 200; ++i) {
        const double mid = (lo + hi) / 2;
        (sum_at(mid) < budget ? lo : hi) = mid;
    }
    std::vector<double> g;
    for (double l : loads) g.push_back(std::min<double>(g_max, g_min + hi * l));
    return g;
}

PhaseProgram cross_template() {
    return parse_tl_programs(testing::fixture_text("cross/cross.tll.xml")).programs.at(0);
}

AdaptiveConfig cross_config() {
    AdaptiveConfig c;
    c.tl_id = "C";
    c.control_interval = 120;
    c.g_min = 5;
    c.g_max = 60;
    c.yellow = 9;
    c.load_metric = LoadMetric::queue_length;
    c.approach_detectors = {{0, {"dE", "dW"}}, {2, {"dN", "dS"}}};
    return c;
}

struct CrossRig {
    RoadNetwork net = testing::cross_network();
    Traffic traffic{net,
                    {plan_route(net, VehicleRoute{"ew", {"E2C", "C2W"}}), plan_route(net, VehicleRoute{"ns", {"N2C", "C2S"}})},
                    {},
                    {},
                    {},
                    0.0,
                    0.1,
                    1};
    DetectorBank bank{[this] {
                          auto d = parse_detectors(testing::fixture_text("cross/cross.det.xml"));
                          resolve_detectors(d, net, "det");
                          return d;
                      }(),
                      net};

    void hold(std::size_t route, int count, const char* prefix) {
        for (int i = 0; i < count; ++i) REQUIRE(traffic.place(fmt::format("{}{}", prefix, i), route, 245.0 - 8.0 * i, 0.0));
    }
};

}  // namespace

TEST_CASE("split examples") {
    CHECK(split_green(std::vector<double>{10, 2}, 62, 5, 60) == std::vector<int>{48, 14});
    CHECK(split_green(std::vector<double>{0, 0}, 62, 5, 60) == std::vector<int>{31, 31});
    CHECK(split_green(std::vector<double>{100, 0}, 62, 5, 60) == std::vector<int>{57, 5});
    CHECK(split_green(std::vector<double>{0, 0}, 63, 5, 60) == std::vector<int>{32, 31});
}

TEST_CASE("split errors") {
    CHECK_THROWS(split_green(std::vector<double>{}, 62, 5, 60));
    CHECK_THROWS(split_green(std::vector<double>{1, 1}, 9, 5, 60));
    CHECK_THROWS(split_green(std::vector<double>{1, 1}, 130, 5, 60));
}

TEST_CASE("split matches water filling over random loads") {
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> count(1, 4);
    std::uniform_real_distribution<double> load(0.0, 30.0);
    std::bernoulli_distribution zero(0.2);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = count(rng);
        const int g_min = 5;
        const int g_max = 60;
        std::uniform_int_distribution<int> budget_dist(n * g_min, n * g_max);
        const int budget = budget_dist(rng);
        std::vector<double> loads;
        for (int i = 0; i < n; ++i) loads.push_back(zero(rng) ? 0.0 : load(rng));

        const auto greens = split_green(loads, budget, g_min, g_max);
        const auto ideal = water_fill(loads, budget, g_min, g_max);
        REQUIRE(greens.size() == loads.size());
        CHECK(std::accumulate(greens.begin(), greens.end(), 0) == budget);
        for (std::size_t i = 0; i < greens.size(); ++i) {
            CHECK(greens[i] >= g_min);
            CHECK(greens[i] <= g_max);
            CHECK(std::abs(greens[i] - ideal[i]) < 1.0 + 1e-9);
            for (std::size_t j = 0; j < greens.size(); ++j) {
                if (loads[i] > loads[j]) CHECK(greens[i] >= greens[j]);
            }
        }
    }
}

TEST_CASE("reallocation keeps the template structure") {
    const auto templ = cross_template();
    const auto config = cross_config();
    CHECK(green_phases(templ) == std::vector<std::size_t>{0, 2});
    CHECK(green_budget(config, templ) == 62);

    const std::vector<ApproachLoad> loads{{0, 10.0}, {2, 2.0}};
    const auto p = reallocate_green(loads, config, templ);
    REQUIRE(p.phases.size() == 4);
    CHECK(p.phases[0].duration == 48);
    CHECK(p.phases[1].duration == 9);
    CHECK(p.phases[2].duration == 14);
    CHECK(p.phases[3].duration == 9);
    for (std::size_t i = 0; i < 4; ++i) CHECK(p.phases[i].state == templ.phases[i].state);
    CHECK(p.origin == ProgramOrigin::adaptive);
    CHECK(p.tl_id == "C");

    // A link never goes from green straight to red across any phase boundary.
    for (std::size_t i = 0; i < p.phases.size(); ++i) {
        const auto& a = p.phases[i].state;
        const auto& b = p.phases[(i + 1) % p.phases.size()].state;
        for (std::size_t k = 0; k < a.size(); ++k) {
            const bool green = a[k] == 'G' || a[k] == 'g';
            CHECK_FALSE((green && b[k] == 'r'));
        }
    }

    const std::vector<ApproachLoad> even{{0, 0.0}, {2, 0.0}};
    const auto same = reallocate_green(even, config, templ);
    for (std::size_t i = 0; i < 4; ++i) CHECK(same.phases[i].duration == templ.phases[i].duration);
}

TEST_CASE("template without alternating yellow is rejected") {
    PhaseProgram p;
    p.tl_id = "t";
    p.phases = {{31, "Gr"}, {31, "rG"}};
    CHECK_THROWS_AS(green_phases(p), ValidationError);
}

TEST_CASE("load metrics") {
    CrossRig rig;
    const auto config = cross_config();
    const auto templ = cross_template();

    SUBCASE("empty lanes") {
        for (const auto& l : measure_loads(config, templ, rig.bank, rig.traffic)) CHECK(l.load == 0.0);
    }
    SUBCASE("queues of ten and two") {
        rig.hold(0, 10, "e");
        rig.hold(1, 2, "n");
        const auto loads = measure_loads(config, templ, rig.bank, rig.traffic);
        REQUIRE(loads.size() == 2);
        CHECK(loads[0].phase_index == 0);
        CHECK(loads[0].load == 10.0);
        CHECK(loads[1].load == 2.0);
    }
    SUBCASE("occupancy") {
        auto occ = config;
        occ.load_metric = LoadMetric::occupancy;
        occ.approach_detectors = {{0, {"qE"}}, {2, {"dN"}}};
        for (int i = 0; i < 4; ++i) REQUIRE(rig.traffic.place(fmt::format("e{}", i), 0, 495.0 - 8.0 * i, 0.0));
        const auto loads = measure_loads(occ, templ, rig.bank, rig.traffic);
        CHECK(loads[0].load == doctest::Approx(0.4));
    }
}

TEST_CASE("controller ticks on interval boundaries") {
    CrossRig rig;
    GreenController controller(cross_config(), cross_template(), 0.0);
    CHECK_FALSE(controller.tick(0.0, rig.bank, rig.traffic));
    CHECK_FALSE(controller.tick(119.9, rig.bank, rig.traffic));

    rig.hold(0, 10, "e");
    rig.hold(1, 2, "n");
    const auto decision = controller.tick(120.0, rig.bank, rig.traffic);
    REQUIRE(decision);
    CHECK(decision->t == 120.0);
    CHECK(decision->loads == std::vector<double>{10, 2});
    CHECK(decision->greens == std::vector<int>{48, 14});
    CHECK_FALSE(controller.tick(120.1, rig.bank, rig.traffic));
    CHECK(controller.tick(240.0, rig.bank, rig.traffic));
}

TEST_CASE("metric names") {
    for (auto m : {LoadMetric::queue_length, LoadMetric::occupancy, LoadMetric::count}) {
        CHECK(parse_load_metric(to_string(m)) == m);
    }
    CHECK_THROWS(parse_load_metric("speed"));
}
