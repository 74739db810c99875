#include "escalate/service/http_server.hpp"

#include <charconv>

#include "httplib.h"

namespace escalate::service {

namespace {

using json = nlohmann::json;

void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ServiceError(400, "BAD_JSON", std::string("request body is not JSON: ") + e.what());
    }
}

std::optional<std::int64_t> int_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    const auto text = req.get_param_value(name);
    std::int64_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw ServiceError(422, "SCHEMA", std::string("query parameter '") + name + "' must be an integer");
    }
    return v;
}

bool bool_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return false;
    const auto v = req.get_param_value(name);
    if (v == "" || v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ServiceError(422, "SCHEMA", std::string("query parameter '") + name + "' must be true or false");
}

/// Wraps a handler so every failure becomes a JSON error body.
template <typename F>
httplib::Server::Handler handle(F fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const ServiceError& e) {
            send(res, e.status(), e.body());
        } catch (const Error& e) {
            json body{{"code", e.code()}, {"message", e.what()}};
            if (!e.path().empty()) body["path"] = e.path();
            send(res, status_for(e.code()), body);
        } catch (const std::exception& e) {
            send(res, 500, {{"code", "INTERNAL"}, {"message", e.what()}});
        }
    };
}

}  // namespace

std::pair<std::string, int> parse_address(const std::string& address) {
    const auto colon = address.rfind(':');
    const std::string host = colon == std::string::npos ? "127.0.0.1" : address.substr(0, colon);
    const std::string port = colon == std::string::npos ? address : address.substr(colon + 1);
    int p = -1;
    const auto [end, ec] = std::from_chars(port.data(), port.data() + port.size(), p);
    if (ec != std::errc{} || end != port.data() + port.size() || p < 0 || p > 65535 || host.empty()) {
        throw Error("INVALID_ARGUMENT", "address must look like host:port, got '" + address + "'");
    }
    return {host, p};
}

HttpServer::HttpServer(CaseService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    return server_->bind_to_port(host, port) ? port : -1;
}

bool HttpServer::run() { return server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

void HttpServer::install_routes() {
    auto& s = *server_;
    auto& svc = service_;

    s.Post("/models", handle([&svc](const httplib::Request& req, httplib::Response& res) {
        auto out = svc.register_model(req.body);
        send(res, out["created"].get<bool>() ? 201 : 200, out);
    }));
    s.Get(R"(/models/([^/]+))", handle([&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, 200, svc.get_model(req.matches[1]));
    }));
    s.Get(R"(/models/([^/]+)/longrun)", handle([&svc](const httplib::Request& req, httplib::Response& res) {
        const auto horizon = int_param(req, "horizon").value_or(1'000'000);
        if (horizon < 1) throw ServiceError(422, "SCHEMA", "horizon must be at least 1");
        std::optional<std::string> sweep;
        if (req.has_param("neutral_rate_sweep")) sweep = req.get_param_value("neutral_rate_sweep");
        send(res, 200,
             svc.longrun(req.matches[1], static_cast<std::size_t>(horizon), bool_param(req, "mobilised_absorbing"), sweep));
    }));

    s.Post("/cases", handle([&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, 201, svc.create_case(parse_body(req)));
    }));
    s.Get("/cases", handle([&svc](const httplib::Request&, httplib::Response& res) { send(res, 200, svc.list_cases()); }));
    s.Get(R"(/cases/([^/]+))", handle([&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, 200, svc.case_summary(req.matches[1]));
    }));
    s.Post(R"(/cases/([^/]+)/observations)", handle([&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, 200, svc.ingest(req.matches[1], parse_body(req), IngestKind::observation));
    }));
    s.Post(R"(/cases/([^/]+)/evidence)", handle([&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, 200, svc.ingest(req.matches[1], parse_body(req), IngestKind::evidence));
    }));
    s.Post(R"(/cases/([^/]+)/annotations)", handle([&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, 200, svc.annotate(req.matches[1], parse_body(req)));
    }));
    s.Get(R"(/cases/([^/]+)/timeline)", handle([&svc](const httplib::Request& req, httplib::Response& res) {
        const auto from = int_param(req, "from");
        const auto to = int_param(req, "to");
        const auto format = req.has_param("format") ? req.get_param_value("format") : std::string("json");
        if (format == "csv") {
            res.status = 200;
            res.set_content(svc.timeline_csv(req.matches[1], from, to), "text/csv");
        } else if (format == "json") {
            send(res, 200, svc.timeline(req.matches[1], from, to));
        } else {
            throw ServiceError(422, "SCHEMA", "format must be json or csv");
        }
    }));
    s.Get(R"(/cases/([^/]+)/journal)", handle([&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, 200, svc.journal(req.matches[1]));
    }));
    s.Post(R"(/cases/([^/]+)/whatif)", handle([&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, 200, svc.whatif(req.matches[1], parse_body(req)));
    }));
}

}  // namespace escalate::service
