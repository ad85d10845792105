#pragma once

#include "vanetsim/simulation.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vanetsim {

enum class Verb { step, get, set, bye };
enum class Subject { sim_time, tl_state, tl_program, detector, vehicles, metrics };

struct Command {
    Verb verb = Verb::bye;
    std::optional<Subject> subject;
    std::vector<std::string> args;
};

/// Error codes on the wire.
enum class ErrorCode { malformed = 1, unknown_id = 2, bad_state = 3, past_end = 4 };

struct Response {
    bool ok = true;
    std::string payload;
    int code = 0;

    static Response success(std::string payload = {}) { return {true, std::move(payload), 0}; }
    static Response failure(ErrorCode code, std::string message) {
        return {false, std::move(message), static_cast<int>(code)};
    }
    /// `OK[ <payload>]` or `ERR <code> <message>`, without the newline.
    std::string line() const;
};

inline constexpr std::uint16_t kDefaultControlPort = 8813;

/// Tokenizes one request line. Malformed input yields an ERR 1 response.
std::variant<Command, Response> parse_command(std::string_view line);

/// Applies one command. GET never mutates the simulation.
Response handle_command(const Command& command, Simulation& sim);

/// Line-level protocol state for one client.
class ControlSession {
public:
    explicit ControlSession(Simulation& sim) : sim_(&sim) {}

    /// Response line (no newline) for one request line.
    std::string handle_line(std::string_view line);
    bool closed() const { return closed_; }

private:
    Simulation* sim_;
    bool closed_ = false;
};

/// Feeds `commands` through a session and returns the transcript: each
/// request as `> line` followed by its response as `< line`. Stops after BYE.
std::string run_script(Simulation& sim, std::span<const std::string> commands);

/// Single-client TCP endpoint on the loopback interface.
class ControlServer {
public:
    /// Binds and listens; port 0 picks an ephemeral port. Throws IoError.
    explicit ControlServer(std::uint16_t port = kDefaultControlPort);
    ~ControlServer();
    ControlServer(const ControlServer&) = delete;
    ControlServer& operator=(const ControlServer&) = delete;

    std::uint16_t port() const { return port_; }

    /// Accepts one client, stops listening so later connects are refused,
    /// and serves it until BYE or disconnect.
    void serve_one(Simulation& sim);

private:
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
};

}  // namespace vanetsim
