#include "vanetsim/control.hpp"

#include "vanetsim/error.hpp"

#include <fmt/format.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

namespace vanetsim {

namespace {

std::optional<Subject> parse_subject(std::string_view s) {
    if (s == "SIM_TIME") return Subject::sim_time;
    if (s == "TL_STATE") return Subject::tl_state;
    if (s == "TL_PROGRAM") return Subject::tl_program;
    if (s == "DETECTOR") return Subject::detector;
    if (s == "VEHICLES") return Subject::vehicles;
    if (s == "METRICS") return Subject::metrics;
    return std::nullopt;
}

Response malformed(std::string_view why) { return Response::failure(ErrorCode::malformed, std::string(why)); }

// Argument count after the subject, per verb/subject pair; -1 marks an invalid pair.
int arity(Verb verb, Subject subject) {
    switch (verb) {
        case Verb::get:
            switch (subject) {
                case Subject::sim_time:
                case Subject::vehicles:
                case Subject::metrics: return 0;
                case Subject::tl_state:
                case Subject::detector: return 1;
                case Subject::tl_program: return -1;
            }
            break;
        case Verb::set:
            if (subject == Subject::tl_state || subject == Subject::tl_program) return 2;
            return -1;
        default: break;
    }
    return -1;
}

std::string num(double v) { return fmt::format("{:.3f}", v); }

}  // namespace

std::string Response::line() const {
    if (ok) return payload.empty() ? "OK" : "OK " + payload;
    return fmt::format("ERR {} {}", code, payload);
}

std::variant<Command, Response> parse_command(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> tokens;
    std::istringstream in{std::string(line)};
    for (std::string t; in >> t;) tokens.push_back(t);
    if (tokens.empty()) return malformed("empty command");

    Command c;
    const std::string& verb = tokens[0];
    if (verb == "BYE") {
        if (tokens.size() != 1) return malformed("BYE takes no arguments");
        c.verb = Verb::bye;
        return c;
    }
    if (verb == "STEP") {
        if (tokens.size() != 2) return malformed("usage: STEP <n>");
        unsigned long long n = 0;
        const auto& a = tokens[1];
        auto [ptr, ec] = std::from_chars(a.data(), a.data() + a.size(), n);
        if (ec != std::errc{} || ptr != a.data() + a.size() || n == 0) return malformed("STEP needs a positive integer");
        c.verb = Verb::step;
        c.args.push_back(a);
        return c;
    }
    if (verb == "GET") {
        c.verb = Verb::get;
    } else if (verb == "SET") {
        c.verb = Verb::set;
    } else {
        return malformed(fmt::format("unknown verb '{}'", verb));
    }
    if (tokens.size() < 2) return malformed(fmt::format("{} needs an object", verb));
    c.subject = parse_subject(tokens[1]);
    if (!c.subject) return malformed(fmt::format("unknown object '{}'", tokens[1]));
    const int want = arity(c.verb, *c.subject);
    if (want < 0) return malformed(fmt::format("{} {} is not a command", verb, tokens[1]));
    if (tokens.size() != static_cast<std::size_t>(want) + 2) {
        return malformed(fmt::format("{} {} takes {} argument{}", verb, tokens[1], want, want == 1 ? "" : "s"));
    }
    c.args.assign(tokens.begin() + 2, tokens.end());
    return c;
}

Response handle_command(const Command& command, Simulation& sim) {
    switch (command.verb) {
        case Verb::bye: return Response::success();
        case Verb::step: {
            const auto n = std::stoull(command.args.at(0));
            const auto taken = sim.advance(n);
            if (taken < n) {
                return Response::failure(ErrorCode::past_end, fmt::format("end reached; clamped at {}", num(sim.clock())));
            }
            return Response::success(num(sim.clock()));
        }
        case Verb::get:
        case Verb::set: break;
    }

    const auto& args = command.args;
    switch (*command.subject) {
        case Subject::sim_time: return Response::success(num(sim.clock()));
        case Subject::tl_state: {
            if (!sim.has_light(args.at(0))) {
                return Response::failure(ErrorCode::unknown_id, fmt::format("unknown traffic light '{}'", args[0]));
            }
            if (command.verb == Verb::get) return Response::success(sim.light_state(args[0]));
            try {
                sim.override_state(args[0], args.at(1));
            } catch (const std::invalid_argument& e) {
                return Response::failure(ErrorCode::bad_state, e.what());
            }
            return Response::success();
        }
        case Subject::tl_program: {
            if (!sim.has_light(args.at(0))) {
                return Response::failure(ErrorCode::unknown_id, fmt::format("unknown traffic light '{}'", args[0]));
            }
            if (!sim.request_program(args[0], args.at(1))) {
                return Response::failure(ErrorCode::unknown_id,
                                         fmt::format("traffic light '{}' has no program '{}'", args[0], args[1]));
            }
            return Response::success();
        }
        case Subject::detector: {
            const auto index = sim.detectors().find(args.at(0));
            if (!index) return Response::failure(ErrorCode::unknown_id, fmt::format("unknown detector '{}'", args[0]));
            const DetectorReading r = sim.detectors().read(*index, sim.traffic());
            return Response::success(fmt::format("count={} mean_speed={} occupancy={} queue={}", r.count,
                                                 num(r.mean_speed), num(r.occupancy), r.queue_length));
        }
        case Subject::vehicles: {
            const Traffic& t = sim.traffic();
            return Response::success(fmt::format("active={} inserted={} arrived={} pending={} waiting_time={}",
                                                 t.vehicles().size(), t.inserted(), t.arrived(), t.pending(),
                                                 num(t.total_waiting_time())));
        }
        case Subject::metrics: {
            const NetMetrics m = sim.metrics();
            return Response::success(fmt::format("sent={} received={} pdf={} avg_pkts_s={} avg_bits_s={}", m.sent,
                                                 m.received, num(m.pdf), num(m.avg_packets_per_s),
                                                 num(m.avg_bits_per_s)));
        }
    }
    return malformed("unsupported command");
}

std::string ControlSession::handle_line(std::string_view line) {
    if (closed_) return Response::failure(ErrorCode::malformed, "session closed").line();
    auto parsed = parse_command(line);
    if (auto* r = std::get_if<Response>(&parsed)) return r->line();
    const auto& command = std::get<Command>(parsed);
    if (command.verb == Verb::bye) closed_ = true;
    return handle_command(command, *sim_).line();
}

std::string run_script(Simulation& sim, std::span<const std::string> commands) {
    ControlSession session(sim);
    std::string transcript;
    for (const auto& c : commands) {
        transcript += "> " + c + "\n< " + session.handle_line(c) + "\n";
        if (session.closed()) break;
    }
    return transcript;
}

ControlServer::ControlServer(std::uint16_t port) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw IoError(fmt::format("socket: {}", std::strerror(errno)));
    const int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 1) < 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd_);
        throw IoError(fmt::format("cannot listen on port {}: {}", port, why));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

ControlServer::~ControlServer() {
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void ControlServer::serve_one(Simulation& sim) {
    if (listen_fd_ < 0) throw IoError("control server already served its client");
    int client = -1;
    do {
        client = ::accept(listen_fd_, nullptr, nullptr);
    } while (client < 0 && errno == EINTR);
    ::close(listen_fd_);
    listen_fd_ = -1;
    if (client < 0) throw IoError(fmt::format("accept: {}", std::strerror(errno)));

    ControlSession session(sim);
    std::string buffer;
    char chunk[4096];
    while (!session.closed()) {
        const auto newline = buffer.find('\n');
        if (newline == std::string::npos) {
            const ssize_t n = ::recv(client, chunk, sizeof chunk, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) break;  // disconnect ends the session; state stays valid
            buffer.append(chunk, static_cast<std::size_t>(n));
            continue;
        }
        const std::string line = buffer.substr(0, newline);
        buffer.erase(0, newline + 1);
        const std::string reply = session.handle_line(line) + "\n";
        std::size_t sent = 0;
        while (sent < reply.size()) {
            const ssize_t n = ::send(client, reply.data() + sent, reply.size() - sent, MSG_NOSIGNAL);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) break;
            sent += static_cast<std::size_t>(n);
        }
        if (sent < reply.size()) break;
    }
    ::close(client);
}

}  // namespace vanetsim
