#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <string>

#include "configym/protocol.hpp"
#include <httplib.h>

namespace configym {

// Talks the line protocol to a child process over its standard streams.
// One message line out, one reply line back, with a per-reply deadline.
class SubprocessAgent : public Agent {
public:
    explicit SubprocessAgent(const std::string& command, int timeout_seconds = 300)
        : timeout_seconds_(timeout_seconds) {
        int to_child[2], from_child[2];
        if (pipe(to_child) != 0 || pipe(from_child) != 0)
            throw ProtocolError("pipe creation failed");
        pid_ = fork();
        if (pid_ < 0) throw ProtocolError("fork failed");
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        stdin_fd_ = to_child[1];
        stdout_fd_ = from_child[0];
    }

    ~SubprocessAgent() override {
        if (stdin_fd_ >= 0) close(stdin_fd_);
        if (stdout_fd_ >= 0) close(stdout_fd_);
        if (pid_ > 0) {
            kill(pid_, SIGTERM);
            int status = 0;
            waitpid(pid_, &status, 0);
        }
    }

    SubprocessAgent(const SubprocessAgent&) = delete;
    SubprocessAgent& operator=(const SubprocessAgent&) = delete;

    ProtocolMessage respond(const ProtocolMessage& message) override {
        std::string line = message_to_json(message).dump() + "\n";
        std::size_t written = 0;
        while (written < line.size()) {
            ssize_t n = write(stdin_fd_, line.data() + written, line.size() - written);
            if (n < 0) throw ProtocolError("agent process closed its input");
            written += static_cast<std::size_t>(n);
        }
        return parse_message_line(read_line());
    }

private:
    std::string read_line() {
        while (true) {
            std::size_t nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            pollfd pfd{stdout_fd_, POLLIN, 0};
            int ready = poll(&pfd, 1, timeout_seconds_ * 1000);
            if (ready == 0) throw AgentTimeout("agent reply deadline exceeded");
            if (ready < 0) throw ProtocolError("poll on agent stdout failed");
            char chunk[4096];
            ssize_t n = read(stdout_fd_, chunk, sizeof(chunk));
            if (n <= 0) throw ProtocolError("agent process closed its output");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    int timeout_seconds_;
    std::string buffer_;
};

// Talks the same schema over HTTP: each gym message is POSTed to /message
// and the response body is the agent's reply line.
class HttpAgent : public Agent {
public:
    HttpAgent(const std::string& host, int port, int timeout_seconds = 300)
        : client_(host, port) {
        client_.set_read_timeout(timeout_seconds, 0);
        client_.set_write_timeout(timeout_seconds, 0);
    }

    ProtocolMessage respond(const ProtocolMessage& message) override {
        auto res = client_.Post("/message", message_to_json(message).dump() + "\n",
                                "application/json");
        if (!res) {
            if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write)
                throw AgentTimeout("agent endpoint timed out");
            throw ProtocolError("agent endpoint unreachable");
        }
        if (res->status != 200)
            throw ProtocolError("agent endpoint returned status " +
                                std::to_string(res->status));
        return parse_message_line(res->body);
    }

private:
    httplib::Client client_;
};

} // namespace configym
