#include "support.hpp"

#include "vanetsim/error.hpp"
#include "vanetsim/signals.hpp"

#include <doctest.h>
#include <fmt/format.h>

#include <algorithm>

using namespace vanetsim;

namespace {

const PhaseProgram& by_id(const ProgramSet& set, const std::string& id) {
    const auto it = std::find_if(set.programs.begin(), set.programs.end(),
                                 [&](const PhaseProgram& p) { return p.tl_id == id; });
    REQUIRE(it != set.programs.end());
    return *it;
}

PhaseProgram two_phase() {
    PhaseProgram p;
    p.tl_id = "t";
    p.program_id = "0";
    p.phases = {{31, "GG"}, {9, "yy"}};
    return p;
}

}  // namespace

TEST_CASE("state characters") {
    CHECK(link_permission('G') == LinkPermission::green_priority);
    CHECK(link_permission('g') == LinkPermission::green_yield);
    CHECK(link_permission('y') == LinkPermission::yellow);
    CHECK(link_permission('r') == LinkPermission::red);
    CHECK_THROWS_AS(link_permission('q'), std::invalid_argument);
    for (char c : std::string("Ggyr")) CHECK(state_char(link_permission(c)) == c);
}

TEST_CASE("first snippet block parses field by field") {
    const auto set = parse_tl_programs(testing::fixture_text("city_a.tll.xml"), LengthMode::permissive);
    const auto& first = set.programs.at(0);
    CHECK(first.tl_id == "1274361397");
    CHECK(first.program_id == "0");
    CHECK(first.phases == std::vector<Phase>{{31, "GG"}, {9, "yy"}});
}

TEST_CASE("state_at follows the cyclic schedule") {
    const auto p = two_phase();
    CHECK(state_at(p, 0) == "GG");
    CHECK(state_at(p, 30.999) == "GG");
    CHECK(state_at(p, 31) == "yy");
    CHECK(state_at(p, 40) == "GG");
    CHECK(state_at(p, 80 + 35) == "yy");

    auto shifted = p;
    shifted.offset = 10;
    CHECK(state_at(shifted, 25) == "yy");
}

TEST_CASE("four-phase block: cycle and state at 45 s") {
    for (const char* file : {"city_a.tll.xml", "city_b.tll.xml"}) {
        const auto set = parse_tl_programs(testing::fixture_text(file), LengthMode::permissive);
        const auto& p = by_id(set, "1284510665");
        CHECK(p.phases.size() == 4);
        CHECK(p.cycle() == 80.0);
        CHECK(state_at(p, 45) == "rrrggg");
        CHECK(p.phase_index_at(45) == 2);
    }
}

TEST_CASE("permissive mode normalises inconsistent lengths with a warning") {
    const auto set = parse_tl_programs(testing::fixture_text("city_a.tll.xml"), LengthMode::permissive);
    const auto& odd = by_id(set, "1274361418");
    for (const auto& ph : odd.phases) CHECK(ph.state.size() == 10);
    CHECK(odd.phases[1].state == "rrrryygggr");
    REQUIRE_FALSE(set.warnings.empty());
    CHECK(std::any_of(set.warnings.begin(), set.warnings.end(),
                      [](const std::string& w) { return w.find("1274361418") != std::string::npos; }));
}

TEST_CASE("strict mode names the block, phase and both lengths") {
    const std::pair<const char*, const char*> cases[] = {
        {"city_a.tll.xml", "phase 1 state \"rrrryyggg\" has length 9, phase 0 state \"rrrrGGGggg\" has length 10"},
        {"city_b.tll.xml", "phase 4 state \"ggggrrrrGGG\" has length 11, phase 0 state \"rrrrGGGrrr\" has length 10"},
    };
    for (const auto& [file, detail] : cases) {
        try {
            parse_tl_programs(testing::fixture_text(file), LengthMode::strict, file);
            FAIL("expected a schema error");
        } catch (const SchemaError& e) {
            const std::string what = e.what();
            CHECK(what.find(file) != std::string::npos);
            CHECK(what.find("1274361418") != std::string::npos);
            CHECK(what.find(detail) != std::string::npos);
        }
    }
}

TEST_CASE("program schema errors") {
    CHECK_THROWS_WITH_AS(parse_tl_programs(R"(<tlLogic id="t"><phase duration="5" state="Gx"/></tlLogic>)"),
                         doctest::Contains("'x'"), SchemaError);
    CHECK_THROWS_WITH_AS(parse_tl_programs(R"(<tlLogic id="t"></tlLogic>)"), doctest::Contains("empty phase list"),
                         SchemaError);
}

TEST_CASE("fit_program against a link count") {
    std::vector<std::string> warnings;
    auto p = two_phase();
    CHECK_THROWS_AS(fit_program(p, 12, LengthMode::strict, warnings), ValidationError);
    fit_program(p, 4, LengthMode::permissive, warnings);
    CHECK(p.phases[0].state == "GGrr");
    CHECK(warnings.size() == 2);
}

TEST_CASE("program round trip") {
    const auto set = parse_tl_programs(testing::fixture_text("cross/cross.tll.xml"));
    const auto again = parse_tl_programs(write_tl_programs(set.programs));
    CHECK(again.programs == set.programs);

    const auto city = parse_tl_programs(testing::fixture_text("city_b.tll.xml"), LengthMode::permissive);
    CHECK(parse_tl_programs(write_tl_programs(city.programs)).programs == city.programs);
}

namespace {

// A single lane "ab" (100 m) with a detector at its end.
struct DetectorRig {
    RoadNetwork net = testing::straight_road(100.0, 15.0);
    Traffic traffic{net, {plan_route(net, VehicleRoute{"r", {"ab", "bc"}})}, {}, {}, {}, 0.0, 0.1, 1};
    Detector det;

    DetectorRig() {
        det.id = "d";
        det.lane_id = "ab_0";
        det.lane = *net.find_lane("ab_0");
        det.pos = 100.0;
        det.window = 60.0;
        det.queue_zone = 50.0;
    }
};

}  // namespace

TEST_CASE("detector on an empty lane") {
    DetectorRig rig;
    const auto r = read_detector(rig.det, {}, rig.traffic);
    CHECK(r.count == 0);
    CHECK(r.mean_speed == 0.0);
    CHECK(r.occupancy == 0.0);
    CHECK(r.queue_length == 0);
}

TEST_CASE("four stopped cars fill 20 of 50 meters") {
    DetectorRig rig;
    for (int i = 0; i < 4; ++i) REQUIRE(rig.traffic.place(fmt::format("v{}", i), 0, 98.0 - 8.0 * i, 0.0));
    const auto r = read_detector(rig.det, {}, rig.traffic);
    CHECK(r.occupancy == doctest::Approx(20.0 / 50.0));
    CHECK(r.queue_length == 4);
    CHECK(r.mean_speed == 0.0);
}

TEST_CASE("crossing counts expire with the window") {
    DetectorRig rig;
    const std::vector<double> crossings{10.0};
    for (int k = 0; k < 300; ++k) rig.traffic.step([](std::size_t) { return 'r'; });
    REQUIRE(rig.traffic.clock() == doctest::Approx(30.0));
    CHECK(read_detector(rig.det, crossings, rig.traffic).count == 1);
    for (int k = 0; k < 450; ++k) rig.traffic.step([](std::size_t) { return 'r'; });
    REQUIRE(rig.traffic.clock() == doctest::Approx(75.0));
    CHECK(read_detector(rig.det, crossings, rig.traffic).count == 0);
}

TEST_CASE("detector bank records crossings from moves") {
    DetectorRig rig;
    rig.det.pos = 50.0;
    DetectorBank bank({rig.det}, rig.net);
    REQUIRE(rig.traffic.place("v", 0, 40.0, 10.0));
    for (int k = 0; k < 20; ++k) {
        const auto moves = rig.traffic.step({});
        bank.observe(moves, rig.traffic.clock());
    }
    CHECK(bank.read(0, rig.traffic).count == 1);
    CHECK(bank.find("d") == std::size_t{0});
    CHECK_FALSE(bank.find("nope"));
}

TEST_CASE("queue length") {
    DetectorRig rig;
    const SignalView red = [](std::size_t) { return 'r'; };
    const LaneRef lane = *rig.net.find_lane("ab_0");

    SUBCASE("free flow") {
        REQUIRE(rig.traffic.place("v", 0, 60.0, 15.0));
        rig.traffic.step({});
        CHECK(queue_length(lane, rig.traffic) == 0);
    }
    SUBCASE("moving platoon") {
        for (int i = 0; i < 3; ++i) REQUIRE(rig.traffic.place(fmt::format("v{}", i), 0, 80.0 - 20.0 * i, 10.0));
        CHECK(queue_length(lane, rig.traffic) == 0);
    }
    SUBCASE("three arrivals held at red for 30 s") {
        for (int i = 0; i < 3; ++i) REQUIRE(rig.traffic.place(fmt::format("v{}", i), 0, 60.0 - 15.0 * i, 5.0));
        for (int k = 0; k < 300; ++k) rig.traffic.step(red);
        CHECK(queue_length(lane, rig.traffic) == 3);
    }
}

TEST_CASE("detector file parsing and resolution") {
    auto dets = parse_detectors(testing::fixture_text("cross/cross.det.xml"));
    CHECK(dets.size() == 5);
    const auto net = testing::cross_network();
    resolve_detectors(dets, net, "det");
    CHECK(net.lane_id(dets[0].lane) == dets[0].lane_id);

    auto bad = parse_detectors(R"(<additional><e1Detector id="x" lane="W2C_4" pos="10"/></additional>)");
    CHECK_THROWS_WITH_AS(resolve_detectors(bad, net, "det"), doctest::Contains("W2C_4"), ValidationError);
    auto far = parse_detectors(R"(<additional><detector id="x" lane="W2C_0" pos="900"/></additional>)");
    CHECK_THROWS_AS(resolve_detectors(far, net, "det"), ValidationError);
}
