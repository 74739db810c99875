#pragma once

#include <memory>
#include <string>
#include <utility>

#include "escalate/service/case_service.hpp"

namespace httplib {
class Server;
}

namespace escalate::service {

/// "host:port" -> (host, port). A bare port binds 127.0.0.1.
std::pair<std::string, int> parse_address(const std::string& address);

/// JSON routes over a CaseService. Errors are {code, message, findings?}.
class HttpServer {
public:
    explicit HttpServer(CaseService& service);
    ~HttpServer();

    /// Binds; port 0 picks a free port. Returns the bound port or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop(); returns false if the listener failed.
    bool run();
    void stop();

private:
    void install_routes();

    CaseService& service_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace escalate::service
