#pragma once
// Network-facing halves of the gateway: the HTTP and child-process upstream
// clients and the HTTP server loop. Included by gateway.hpp; not useful on
// its own.

#include <httplib.h>

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "agentguard/gateway.hpp"
#include "agentguard/judge_http.hpp"  // split_url

namespace agentguard::gateway {

// ---------------------------------------------------------------------------
// HTTP upstream: JSON-RPC over POST. One request at a time per upstream.
// ---------------------------------------------------------------------------

class HttpUpstream : public Upstream {
public:
    explicit HttpUpstream(std::string url) : url_(std::move(url)) {
        auto [base, path] = split_url(url_);
        base_ = base;
        path_ = path == "/v1/chat/completions" && url_.find(path) == std::string::npos ? "/rpc" : path;
    }

    std::string describe() const override { return url_; }

    json request(const std::string& method, const json& params, int timeout_ms) override {
        json req{{"jsonrpc", "2.0"}, {"id", next_id_++}, {"method", method}, {"params", params}};
        std::lock_guard<std::mutex> lock(mu_);
        httplib::Client cli(base_);
        cli.set_connection_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
        cli.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
        auto res = cli.Post(path_, req.dump(), "application/json");
        if (!res) {
            bool timed_out = res.error() == httplib::Error::Read ||
                             res.error() == httplib::Error::ConnectionTimeout;
            throw UpstreamError("upstream '" + url_ + "': " + httplib::to_string(res.error()),
                                timed_out);
        }
        if (res->status != 200)
            throw UpstreamError("upstream '" + url_ + "' returned HTTP " +
                                    std::to_string(res->status),
                                false);
        json body = json::parse(res->body, nullptr, false);
        if (body.is_discarded())
            throw UpstreamError("upstream '" + url_ + "' returned invalid JSON", false);
        if (body.contains("error"))
            throw RpcError(body["error"].value("code", -32000), body["error"].value("message", ""),
                           body["error"].value("data", json()));
        return body.value("result", json());
    }

private:
    std::string url_, base_, path_;
    std::mutex mu_;
    std::atomic<int> next_id_{1};
};

// ---------------------------------------------------------------------------
// Stdio upstream: a child process speaking newline-delimited JSON-RPC.
// ---------------------------------------------------------------------------

class StdioUpstream : public Upstream {
public:
    explicit StdioUpstream(std::vector<std::string> command) : command_(std::move(command)) {
        ::signal(SIGPIPE, SIG_IGN);  // broken pipes surface as write errors
    }

    ~StdioUpstream() override { terminate_child(); }

    std::string describe() const override {
        std::string out = "stdio:";
        for (const auto& a : command_) out += " " + a;
        return out;
    }

    json request(const std::string& method, const json& params, int timeout_ms) override {
        std::lock_guard<std::mutex> lock(mu_);
        ensure_running();
        int id = next_id_++;
        json req{{"jsonrpc", "2.0"}, {"id", id}, {"method", method}, {"params", params}};
        std::string line = req.dump() + "\n";
        if (!write_all(line)) {
            terminate_child();
            throw UpstreamError("upstream child closed its stdin", false);
        }
        auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
        while (true) {
            // drain complete lines already buffered
            size_t nl;
            while ((nl = buffer_.find('\n')) != std::string::npos) {
                std::string one = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                json res = json::parse(one, nullptr, false);
                if (res.is_discarded() || res.value("id", -1) != id) continue;
                if (res.contains("error"))
                    throw RpcError(res["error"].value("code", -32000),
                                   res["error"].value("message", ""),
                                   res["error"].value("data", json()));
                return res.value("result", json());
            }
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 deadline - std::chrono::steady_clock::now())
                                 .count();
            if (remaining <= 0)
                throw UpstreamError("upstream child did not answer within " +
                                        std::to_string(timeout_ms) + " ms",
                                    true);
            struct pollfd pfd{from_child_, POLLIN, 0};
            int rc = ::poll(&pfd, 1, static_cast<int>(remaining));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw UpstreamError(std::string("poll: ") + std::strerror(errno), false);
            }
            if (rc == 0)
                throw UpstreamError("upstream child did not answer within " +
                                        std::to_string(timeout_ms) + " ms",
                                    true);
            char chunk[4096];
            ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
            if (n <= 0) {
                terminate_child();
                throw UpstreamError("upstream child exited", false);
            }
            buffer_.append(chunk, static_cast<size_t>(n));
        }
    }

private:
    void ensure_running() {
        if (pid_ > 0) {
            int status = 0;
            if (::waitpid(pid_, &status, WNOHANG) == 0) return;  // still alive
            pid_ = -1;
        }
        spawn();
    }

    void spawn() {
        int to_child[2], from_child[2];
        if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
            throw UpstreamError(std::string("pipe: ") + std::strerror(errno), false);
        pid_t pid = ::fork();
        if (pid < 0) throw UpstreamError(std::string("fork: ") + std::strerror(errno), false);
        if (pid == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            std::vector<char*> argv;
            for (const auto& a : command_) argv.push_back(const_cast<char*>(a.c_str()));
            argv.push_back(nullptr);
            ::execvp(argv[0], argv.data());
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        pid_ = pid;
        to_child_ = to_child[1];
        from_child_ = from_child[0];
        buffer_.clear();
    }

    bool write_all(const std::string& data) {
        size_t written = 0;
        while (written < data.size()) {
            ssize_t n = ::write(to_child_, data.data() + written, data.size() - written);
            if (n < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            written += static_cast<size_t>(n);
        }
        return true;
    }

    void terminate_child() {
        if (to_child_ >= 0) ::close(to_child_);
        if (from_child_ >= 0) ::close(from_child_);
        to_child_ = from_child_ = -1;
        if (pid_ > 0) {
            ::kill(pid_, SIGTERM);
            int status = 0;
            for (int i = 0; i < 50 && ::waitpid(pid_, &status, WNOHANG) == 0; ++i)
                std::this_thread::sleep_for(std::chrono::milliseconds(10));
            if (::waitpid(pid_, &status, WNOHANG) == 0) {
                ::kill(pid_, SIGKILL);
                ::waitpid(pid_, &status, 0);
            }
            pid_ = -1;
        }
    }

    std::vector<std::string> command_;
    pid_t pid_ = -1;
    int to_child_ = -1, from_child_ = -1;
    std::string buffer_;
    std::mutex mu_;
    int next_id_ = 1;
};

// ---------------------------------------------------------------------------
// Gateway member definitions that need the networking types
// ---------------------------------------------------------------------------

inline std::unique_ptr<Upstream> Gateway::make_upstream(const UpstreamDescriptor& desc) {
    switch (desc.kind) {
        case UpstreamDescriptor::Kind::Http:
            return std::make_unique<HttpUpstream>(desc.url);
        case UpstreamDescriptor::Kind::Stdio:
            return std::make_unique<StdioUpstream>(desc.command);
        case UpstreamDescriptor::Kind::InProcess:
            if (!inprocess_server_)
                throw ConfigError("route uses an in-process upstream but none was provided");
            return std::make_unique<InProcessUpstream>(inprocess_server_);
    }
    throw ConfigError("unknown upstream kind");
}

inline void Gateway::serve_http() {
    if (!cfg_.listen_http) throw ConfigError("gateway/listen/http is not configured");
    const auto& [host, port] = *cfg_.listen_http;

    httplib::Server server;
    server.Post("/rpc", [this](const httplib::Request& req, httplib::Response& res) {
        std::string session = req.get_header_value("X-Agentguard-Session");
        if (session.empty()) session = "default";
        json request = json::parse(req.body, nullptr, false);
        json response;
        if (request.is_discarded()) {
            response = json{{"jsonrpc", "2.0"},
                            {"id", nullptr},
                            {"error", {{"code", -32700}, {"message", "parse error: invalid JSON"}}}};
        } else {
            response = handle_rpc(session, request);
        }
        res.set_content(response.dump(), "application/json");
    });

    {
        std::lock_guard<std::mutex> lock(http_mu_);
        http_server_ = &server;
    }
    if (!server.bind_to_port(host, port)) {
        std::lock_guard<std::mutex> lock(http_mu_);
        http_server_ = nullptr;
        throw BindError("cannot bind " + host + ":" + std::to_string(port));
    }
    server.listen_after_bind();  // blocks until stop_http()
    std::lock_guard<std::mutex> lock(http_mu_);
    http_server_ = nullptr;
}

inline void Gateway::stop_http() {
    std::lock_guard<std::mutex> lock(http_mu_);
    if (http_server_) static_cast<httplib::Server*>(http_server_)->stop();
}

}  // namespace agentguard::gateway
