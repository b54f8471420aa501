#pragma once

#include "cogest/session.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace cogest
{
    struct GatewayOptions
    {
        std::string host = "127.0.0.1";
        int port = 8080; // 0 picks a free port
        std::optional<std::string> static_dir; // console assets served at /
        double tick_hz = 24.0;                 // session clock pump
    };

    inline int http_status(ErrorCode code)
    {
        switch (code)
        {
        case ErrorCode::SessionEnded: return 409;
        case ErrorCode::MalformedMessage:
        case ErrorCode::InvalidConfig: return 400;
        default: return 500;
        }
    }

    // HTTP + server-sent events front end for a SessionManager.
    //   POST   /sessions                 create   {"config": {...}, "instant": bool}
    //   GET    /sessions                 list descriptors
    //   DELETE /sessions/{id}            end
    //   POST   /sessions/{id}/events     one ClientMessage
    //   GET    /sessions/{id}/state      StateSnapshot
    //   GET    /sessions/{id}/messages   ?since=N&wait_ms=M, JSON array
    //   GET    /sessions/{id}/stream     text/event-stream: StateSnapshot, then every message
    //   GET    /sessions/{id}/trace      session trace (JSON lines)
    class HttpGateway
    {
    public:
        HttpGateway(std::shared_ptr<SessionManager> sessions, GatewayOptions options)
            : sessions_(std::move(sessions)), options_(std::move(options))
        {
            routes();
        }

        ~HttpGateway() { stop(); }

        HttpGateway(const HttpGateway&) = delete;
        HttpGateway& operator=(const HttpGateway&) = delete;

        // Binds and starts serving on background threads. Returns the bound port.
        int start()
        {
            if (options_.port == 0)
                port_ = server_.bind_to_any_port(options_.host);
            else
                port_ = server_.bind_to_port(options_.host, options_.port) ? options_.port : -1;
            if (port_ < 0)
                throw Error(ErrorCode::InvalidConfig, "cannot bind " + options_.host + ":" + std::to_string(options_.port));
            running_ = true;
            listener_ = std::thread([this] { server_.listen_after_bind(); });
            ticker_ = std::thread([this] {
                const auto period = std::chrono::duration<double>(1.0 / options_.tick_hz);
                while (running_)
                {
                    sessions_->tick_all();
                    std::this_thread::sleep_for(period);
                }
            });
            server_.wait_until_ready();
            return port_;
        }

        // Blocks until stop() is called from elsewhere.
        void wait()
        {
            if (listener_.joinable())
                listener_.join();
        }

        void stop()
        {
            if (!running_.exchange(false))
                return;
            for (const auto& s : sessions_->list())
                s->end(); // releases open streams
            server_.stop();
            if (listener_.joinable())
                listener_.join();
            if (ticker_.joinable())
                ticker_.join();
        }

        int port() const noexcept { return port_; }

    private:
        static void send_json(httplib::Response& res, const Json& j, int status = 200)
        {
            res.status = status;
            res.set_content(j.dump(), "application/json");
        }

        static void send_error(httplib::Response& res, const Error& e, int status)
        {
            send_json(res, {{"type", "Error"}, {"code", to_string(e.code())}, {"detail", e.detail()}}, status);
        }

        template <class F>
        static void guarded(httplib::Response& res, F&& f)
        {
            try
            {
                f();
            }
            catch (const Error& e)
            {
                const bool unknown = e.code() == ErrorCode::MalformedMessage && e.detail().starts_with("unknown session");
                send_error(res, e, unknown ? 404 : http_status(e.code()));
            }
            catch (const nlohmann::json::exception& e)
            {
                send_error(res, Error(ErrorCode::MalformedMessage, e.what()), 400);
            }
        }

        static Json body_json(const httplib::Request& req)
        {
            if (req.body.empty())
                return Json::object();
            try
            {
                return Json::parse(req.body);
            }
            catch (const nlohmann::json::exception& e)
            {
                throw Error(ErrorCode::MalformedMessage, std::string("request body is not JSON: ") + e.what());
            }
        }

        void routes()
        {
            server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                    Json body;
                    try
                    {
                        body = body_json(req);
                    }
                    catch (const Error& e)
                    {
                        throw Error(ErrorCode::InvalidConfig, e.detail());
                    }
                    auto s = sessions_->create(body);
                    send_json(res, to_json(s->descriptor()), 201);
                });
            });
            server_.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
                Json list = Json::array();
                for (const auto& s : sessions_->list())
                {
                    Json d = to_json(s->descriptor());
                    d.erase("config");
                    list.push_back(std::move(d));
                }
                send_json(res, list);
            });
            server_.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                    auto s = sessions_->get(req.matches[1]);
                    s->end();
                    send_json(res, to_json(s->descriptor()));
                });
            });
            server_.Post(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                    auto s = sessions_->get(req.matches[1]);
                    send_json(res, s->ingest(body_json(req)));
                });
            });
            server_.Get(R"(/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                    auto s = sessions_->get(req.matches[1]);
                    s->tick();
                    send_json(res, to_json(s->snapshot()));
                });
            });
            server_.Get(R"(/sessions/([^/]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                    auto s = sessions_->get(req.matches[1]);
                    std::uint64_t since = 0;
                    long wait_ms = 0;
                    try
                    {
                        if (req.has_param("since"))
                            since = std::stoull(req.get_param_value("since"));
                        if (req.has_param("wait_ms"))
                            wait_ms = std::stol(req.get_param_value("wait_ms"));
                    }
                    catch (const std::exception&)
                    {
                        throw Error(ErrorCode::MalformedMessage, "since and wait_ms must be integers");
                    }
                    Json out = Json::array();
                    for (const auto& m : s->messages_since(since, std::chrono::milliseconds(std::clamp(wait_ms, 0L, 30000L))))
                        out.push_back(to_json(m));
                    send_json(res, out);
                });
            });
            server_.Get(R"(/sessions/([^/]+)/trace)", [this](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                    auto s = sessions_->get(req.matches[1]);
                    res.set_content(s->trace_text(), "application/x-ndjson");
                });
            });
            server_.Get(R"(/sessions/([^/]+)/stream)", [this](const httplib::Request& req, httplib::Response& res) {
                std::shared_ptr<Session> s;
                guarded(res, [&] { s = sessions_->get(req.matches[1]); });
                if (!s)
                    return;
                auto [snap, pos] = s->subscribe();
                auto cursor = std::make_shared<std::uint64_t>(pos);
                auto first = std::make_shared<std::optional<ServerMessage>>(std::move(snap));
                res.set_header("Cache-Control", "no-cache");
                res.set_chunked_content_provider(
                    "text/event-stream", [this, s, cursor, first](std::size_t, httplib::DataSink& sink) {
                        auto send = [&](const ServerMessage& m) {
                            const std::string frame = "id: " + std::to_string(m.seq) + "\nevent: " + m.type +
                                                      "\ndata: " + to_json(m).dump() + "\n\n";
                            return sink.write(frame.data(), frame.size());
                        };
                        if (*first)
                        {
                            if (!send(**first))
                                return false;
                            first->reset();
                        }
                        const auto batch = s->messages_since(*cursor, std::chrono::milliseconds(250));
                        for (const auto& m : batch)
                        {
                            if (!send(m))
                                return false;
                            *cursor = m.seq;
                        }
                        if (batch.empty() && (s->ended() || !running_))
                        {
                            sink.done();
                            return true;
                        }
                        if (s->ended() && *cursor >= s->message_count())
                            sink.done();
                        return true;
                    });
            });
            if (options_.static_dir)
                server_.set_mount_point("/", *options_.static_dir);
        }

        std::shared_ptr<SessionManager> sessions_;
        GatewayOptions options_;
        httplib::Server server_;
        std::thread listener_;
        std::thread ticker_;
        std::atomic<bool> running_{false};
        int port_ = -1;
    };
} // namespace cogest
