#pragma once

// Runs `escalate serve` as a child process on a free port.

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <thread>

class ServerProcess {
public:
    ServerProcess(std::string binary, std::filesystem::path data_dir)
        : binary_(std::move(binary)), data_(std::move(data_dir)) {}
    ~ServerProcess() { kill(SIGKILL); }

    /// Starts the server and waits for its "listening on host:port" line.
    void start() {
        int fds[2];
        if (::pipe(fds) != 0) throw std::runtime_error("pipe failed");
        pid_ = ::fork();
        if (pid_ < 0) throw std::runtime_error("fork failed");
        if (pid_ == 0) {
            ::dup2(fds[1], STDOUT_FILENO);
            ::close(fds[0]);
            ::close(fds[1]);
            const std::string data = data_.string();
            ::execl(binary_.c_str(), binary_.c_str(), "serve", "--addr", "127.0.0.1:0", "--data", data.c_str(),
                    static_cast<char*>(nullptr));
            std::_Exit(127);
        }
        ::close(fds[1]);
        std::string line;
        char c = 0;
        while (::read(fds[0], &c, 1) == 1 && c != '\n') line += c;
        ::close(fds[0]);
        const auto colon = line.find(':');
        if (line.rfind("listening on ", 0) != 0 || colon == std::string::npos) {
            kill(SIGKILL);
            throw std::runtime_error("server did not start: '" + line + "'");
        }
        port_ = std::stoi(line.substr(colon + 1));
    }

    void kill(int sig) {
        if (pid_ <= 0) return;
        ::kill(pid_, sig);
        int status = 0;
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
    }

    int port() const { return port_; }

private:
    std::string binary_;
    std::filesystem::path data_;
    pid_t pid_ = -1;
    int port_ = 0;
};

inline std::filesystem::path fresh_temp_dir(const std::string& stem) {
    std::string pattern = (std::filesystem::temp_directory_path() / (stem + "-XXXXXX")).string();
    if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    return pattern;
}
