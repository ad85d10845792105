#pragma once

#include "vanetsim/mobility.hpp"
#include "vanetsim/netmodel.hpp"
#include "vanetsim/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(VANETSIM_FIXTURES) / name;
}

inline std::string fixture_text(const std::string& name) { return vanetsim::read_text_file(fixture(name), "fixture"); }

inline vanetsim::RoadNetwork cross_network() {
    return vanetsim::build_network(vanetsim::parse_plain_network(
        fixture_text("cross/cross.nod.xml"), fixture_text("cross/cross.edg.xml"), fixture_text("cross/cross.con.xml")));
}

/// Straight road a -> b -> c, no lights: edges "ab" and "bc".
inline vanetsim::RoadNetwork straight_road(double length = 1000.0, double speed = 30.0) {
    using namespace vanetsim;
    return build_network({Node{"a", 0, 0}, Node{"b", length, 0}, Node{"c", 2 * length, 0}},
                         {Edge{"ab", "a", "b", length, speed, 1}, Edge{"bc", "b", "c", length, speed, 1}},
                         {Connection{"ab", 0, "bc", 0, std::nullopt, std::nullopt}});
}

/// Unique temporary directory removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline TempDir::TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("vanetsim-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
}

inline TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

}  // namespace testing

namespace testing {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

/// Scenario document over the cross fixture; files default to the fixture
/// copies and can be swapped for absolute paths.
struct CrossBundle {
    std::string routes = fixture("cross/heavy_ew.rou.xml").string();
    std::string tllogic = fixture("cross/cross.tll.xml").string();
    std::string detectors = fixture("cross/cross.det.xml").string();
    std::string time = R"(<time begin="0" end="1000" step="0.1"/>)";
    std::string extra;

    std::string xml() const {
        return "<scenario id=\"bundle\">\n<input nodes=\"" + fixture("cross/cross.nod.xml").string() + "\" edges=\"" +
               fixture("cross/cross.edg.xml").string() + "\" connections=\"" + fixture("cross/cross.con.xml").string() +
               "\" routes=\"" + routes + "\" detectors=\"" + detectors + "\" tllogic=\"" + tllogic + "\"/>\n" + time +
               "\n<seed value=\"42\"/>\n" + extra + "\n</scenario>\n";
    }
};

}  // namespace testing
