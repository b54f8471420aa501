#pragma once

#include "cogest/config.hpp"
#include "cogest/engine.hpp"
#include "cogest/harness.hpp"
#include "cogest/trace.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <ctime>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace cogest
{
    // Source of session time in seconds. Only differences are used.
    class Clock
    {
    public:
        virtual ~Clock() = default;
        virtual Seconds now() const = 0;
    };

    class SteadyClock final : public Clock
    {
    public:
        Seconds now() const override
        {
            using namespace std::chrono;
            return duration<double>(steady_clock::now().time_since_epoch()).count();
        }
    };

    class ManualClock final : public Clock
    {
    public:
        explicit ManualClock(Seconds start = 0.0) : t_(start) {}
        Seconds now() const override { return t_.load(); }
        void set(Seconds t) { t_.store(t); }
        void advance(Seconds dt) { t_.store(t_.load() + dt); }

    private:
        std::atomic<double> t_;
    };

    // The scene used by live sessions and the bundled scenarios: five rods on
    // the left of the table, five rocker arms on the right.
    inline SceneState assembly_scene()
    {
        SceneState s;
        const std::pair<double, double> rods[] = {{160, 150}, {200, 260}, {170, 370}, {230, 480}, {200, 580}};
        const std::pair<double, double> arms[] = {{1120, 150}, {1080, 260}, {1110, 370}, {1050, 480}, {1080, 580}};
        int id = 1;
        for (auto [x, y] : rods)
        {
            s.objects[id] = {id, ObjectClass::rod(), {x, y}, ObjectStatus::OnTable};
            ++id;
        }
        for (auto [x, y] : arms)
        {
            s.objects[id] = {id, ObjectClass::rocker_arm(), {x, y}, ObjectStatus::OnTable};
            ++id;
        }
        s.place_location = {640.0, 600.0};
        return s;
    }

    enum class SessionStatus
    {
        Running,
        Ended
    };

    constexpr std::string_view to_string(SessionStatus s) noexcept { return s == SessionStatus::Running ? "Running" : "Ended"; }

    struct SessionDescriptor
    {
        std::string session_id;
        std::string started_at; // UTC, ISO 8601
        Json config;
        SessionStatus status = SessionStatus::Running;
    };

    inline Json to_json(const SessionDescriptor& d)
    {
        return {{"session_id", d.session_id}, {"started_at", d.started_at}, {"status", to_string(d.status)}, {"config", d.config}};
    }

    struct ServerMessage
    {
        std::string session_id;
        std::uint64_t seq = 0;
        std::string type; // StateSnapshot, CommandIssued, SimEvent, Transcript, Error
        Seconds t = 0.0;
        Json body = Json::object();
    };

    inline Json to_json(const ServerMessage& m)
    {
        Json j;
        j["session_id"] = m.session_id;
        j["seq"] = m.seq;
        j["type"] = m.type;
        j["t"] = m.t;
        for (const auto& [k, v] : m.body.items())
            j[k] = v;
        return j;
    }

    enum class ClientKind
    {
        SayPhrase,
        WristMove,
        PointClick,
        HaltNow,
        ResumeNow
    };

    struct ClientMessage
    {
        ClientKind kind = ClientKind::SayPhrase;
        std::optional<std::uint64_t> seq;
        std::string text;   // SayPhrase
        Wrist side = Wrist::Left;
        ImagePoint image;   // WristMove, front camera
        TablePoint table;   // PointClick, top-down camera
    };

    inline ClientMessage client_message_from_json(const Json& j)
    {
        auto bad = [](const std::string& what) { return Error(ErrorCode::MalformedMessage, what); };
        if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
            throw bad("message needs a string 'type'");
        ClientMessage m;
        const auto type = j["type"].get<std::string>();
        if (j.contains("seq"))
        {
            if (!j["seq"].is_number_integer() || j["seq"].get<std::int64_t>() < 0)
                throw bad("seq must be a non-negative integer");
            m.seq = j["seq"].get<std::uint64_t>();
        }
        auto point = [&](const char* key) {
            if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2 || !j[key][0].is_number() ||
                !j[key][1].is_number())
                throw bad(std::string("'") + key + "' must be [x, y]");
            const double x = j[key][0].get<double>(), y = j[key][1].get<double>();
            if (!std::isfinite(x) || !std::isfinite(y))
                throw bad(std::string("'") + key + "' must be finite");
            return std::pair{x, y};
        };
        if (type == "SayPhrase")
        {
            m.kind = ClientKind::SayPhrase;
            if (!j.contains("text") || !j["text"].is_string())
                throw bad("SayPhrase needs 'text'");
            m.text = j["text"].get<std::string>();
        }
        else if (type == "WristMove")
        {
            m.kind = ClientKind::WristMove;
            const auto side = j.value("side", std::string());
            if (side != "left" && side != "right")
                throw bad("WristMove 'side' must be 'left' or 'right'");
            m.side = side == "left" ? Wrist::Left : Wrist::Right;
            const auto [x, y] = point("point");
            m.image = {x, y};
        }
        else if (type == "PointClick")
        {
            m.kind = ClientKind::PointClick;
            const auto [x, y] = point("point");
            m.table = {x, y};
        }
        else if (type == "HaltNow")
            m.kind = ClientKind::HaltNow;
        else if (type == "ResumeNow")
            m.kind = ClientKind::ResumeNow;
        else
            throw bad("unknown message type '" + type + "'");
        return m;
    }

    struct SessionOptions
    {
        HarnessConfig config;
        SceneState scene = assembly_scene();
        bool instant = false; // recognition without the latency model
    };

    inline std::string utc_now_iso()
    {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    // One live engine. Every client message is written to the session trace
    // before it takes effect, so the trace replays to the same command log.
    class Session
    {
    public:
        Session(std::string id, SessionOptions options, std::shared_ptr<const Clock> clock)
            : clock_(std::move(clock)), config_(prepare(std::move(options.config), options.instant)),
              engine_(config_, options.scene), writer_(trace_)
        {
            desc_.session_id = std::move(id);
            desc_.started_at = utc_now_iso();
            desc_.config = to_json(config_);
            start_ = clock_->now();
            TraceHeader h;
            h.config = desc_.config;
            h.scene = to_json(options.scene);
            writer_.header(h);
            engine_.set_sink([this](const EngineOutput& o) { on_output(o); });
            left_ = rest_position(Wrist::Left, config_.gestures);
            right_ = rest_position(Wrist::Right, config_.gestures);
            std::lock_guard lock(mu_);
            catch_up(0.0);
        }

        Session(const Session&) = delete;
        Session& operator=(const Session&) = delete;

        const std::string& id() const noexcept { return desc_.session_id; }

        SessionDescriptor descriptor() const
        {
            std::lock_guard lock(mu_);
            return desc_;
        }

        // Session time now.
        Seconds elapsed() const
        {
            std::lock_guard lock(mu_);
            return elapsed_locked();
        }

        // Records and applies one client message. Returns the acknowledgement.
        Json ingest(const ClientMessage& m)
        {
            std::lock_guard lock(mu_);
            if (desc_.status == SessionStatus::Ended)
                throw Error(ErrorCode::SessionEnded, "session " + desc_.session_id + " has ended");
            if (m.seq)
            {
                if (last_client_seq_ && *m.seq <= *last_client_seq_)
                    throw Error(ErrorCode::MalformedMessage, "client seq must increase");
                last_client_seq_ = m.seq;
            }
            const Seconds t = elapsed_locked();
            catch_up(t);
            std::uint64_t seq = 0;
            switch (m.kind)
            {
            case ClientKind::SayPhrase:
                seq = record(t, RecordKind::Utterance, to_payload(UtteranceEvent{m.text, t, t}));
                break;
            case ClientKind::WristMove:
            {
                (m.side == Wrist::Left ? left_ : right_) = m.image;
                SkeletonObservation obs;
                obs.timestamp = t;
                obs.wrist_left = left_;
                obs.wrist_right = right_;
                seq = record(t, RecordKind::Skeleton, to_payload(obs));
                break;
            }
            case ClientKind::PointClick:
                seq = record(t, RecordKind::Pointing, to_payload(PointingEvent{0, t, m.table}));
                break;
            case ClientKind::HaltNow:
            case ClientKind::ResumeNow:
                seq = record(t, RecordKind::Operator,
                             to_payload(OperatorSignal{0, t, m.kind == ClientKind::HaltNow ? OperatorAction::Halt
                                                                                          : OperatorAction::Resume}));
                break;
            }
            // zero-latency work scheduled at t (instant mode) runs now
            engine_.advance_to(t);
            Json ack = {{"session_id", desc_.session_id}, {"trace_seq", seq}, {"t", t}};
            if (m.seq)
                ack["client_seq"] = *m.seq;
            return ack;
        }

        Json ingest(const Json& message) { return ingest(client_message_from_json(message)); }

        // Advances the session to the clock's current time.
        void tick()
        {
            std::lock_guard lock(mu_);
            if (desc_.status == SessionStatus::Running)
                catch_up(elapsed_locked());
        }

        // Current state plus the seq of the last message it reflects.
        ServerMessage snapshot() const
        {
            std::lock_guard lock(mu_);
            return snapshot_locked();
        }

        // Snapshot and the backlog position, taken atomically.
        std::pair<ServerMessage, std::uint64_t> subscribe() const
        {
            std::lock_guard lock(mu_);
            return {snapshot_locked(), messages_.size()};
        }

        // Messages with seq > since; waits up to `timeout` if none are available.
        std::vector<ServerMessage> messages_since(std::uint64_t since, std::chrono::milliseconds timeout = {}) const
        {
            std::unique_lock lock(mu_);
            if (timeout.count() > 0)
                cv_.wait_for(lock, timeout, [&] { return messages_.size() > since || desc_.status == SessionStatus::Ended; });
            std::vector<ServerMessage> out;
            for (std::size_t i = since; i < messages_.size(); ++i)
                out.push_back(messages_[i]);
            return out;
        }

        std::uint64_t message_count() const
        {
            std::lock_guard lock(mu_);
            return messages_.size();
        }

        bool ended() const
        {
            std::lock_guard lock(mu_);
            return desc_.status == SessionStatus::Ended;
        }

        void end()
        {
            {
                std::lock_guard lock(mu_);
                if (desc_.status == SessionStatus::Ended)
                    return;
                desc_.status = SessionStatus::Ended;
                push("Error", last_t_, {{"code", "SessionEnded"}, {"detail", "session ended"}});
            }
            cv_.notify_all();
        }

        std::string trace_text() const
        {
            std::lock_guard lock(mu_);
            return trace_.str();
        }

        std::string command_log() const
        {
            std::lock_guard lock(mu_);
            return engine_.command_log();
        }

    private:
        static HarnessConfig prepare(HarnessConfig c, bool instant)
        {
            if (instant)
            {
                c.speech.pause_filter = 0.0;
                c.speech.latency_mean = 0.0;
                c.speech.latency_jitter = 0.0;
            }
            c.validate();
            return c;
        }

        Seconds elapsed_locked() const { return std::max(last_t_, clock_->now() - start_); }

        ServerMessage snapshot_locked() const
        {
            ServerMessage m;
            m.session_id = desc_.session_id;
            m.seq = messages_.size();
            m.type = "StateSnapshot";
            m.t = last_t_;
            m.body = engine_.state_json();
            m.body["status"] = to_string(desc_.status);
            return m;
        }

        std::uint64_t record(Seconds t, RecordKind kind, Json payload)
        {
            TraceRecord r;
            r.t = t;
            r.kind = kind;
            r.payload = payload;
            r.seq = writer_.write(t, kind, std::move(payload));
            engine_.ingest(r);
            return r.seq;
        }

        // Emits the detection snapshots due by t, then runs the engine to t.
        void catch_up(Seconds t)
        {
            last_t_ = std::max(last_t_, t);
            for (;;)
            {
                const Seconds ts = static_cast<double>(next_snapshot_) / config_.detection.rate_hz;
                if (ts > t)
                    break;
                engine_.advance_to(std::max(ts, engine_.now()));
                const Seconds at = std::max(ts, engine_.now());
                const auto snap = engine_.workcell().snapshot_detections(config_.detection.noise, next_snapshot_, at);
                record(at, RecordKind::DetectionSnapshot, to_payload(snap));
                ++next_snapshot_;
            }
            engine_.advance_to(std::max(t, engine_.now()));
        }

        void on_output(const EngineOutput& o)
        {
            writer_.write(o.t, o.kind, o.payload);
            switch (o.kind)
            {
            case RecordKind::Command: push("CommandIssued", o.t, {{"command", o.payload}}); break;
            case RecordKind::SimEvent: push("SimEvent", o.t, {{"event", o.payload}}); break;
            case RecordKind::Transcript: push("Transcript", o.t, {{"transcript", o.payload}}); break;
            case RecordKind::Fault:
                push("Error", o.t,
                     {{"code", o.payload["fault"]}, {"detail", o.payload["detail"]}, {"source", o.payload["source"]}});
                break;
            default: break;
            }
        }

        void push(std::string type, Seconds t, Json body)
        {
            ServerMessage m;
            m.session_id = desc_.session_id;
            m.seq = messages_.size() + 1;
            m.type = std::move(type);
            m.t = t;
            m.body = std::move(body);
            messages_.push_back(std::move(m));
            cv_.notify_all();
        }

        std::shared_ptr<const Clock> clock_;
        HarnessConfig config_;
        Engine engine_;
        std::ostringstream trace_;
        TraceWriter writer_;
        SessionDescriptor desc_;
        Seconds start_ = 0.0;
        Seconds last_t_ = 0.0;
        std::int64_t next_snapshot_ = 0;
        ImagePoint left_;
        ImagePoint right_;
        std::optional<std::uint64_t> last_client_seq_;
        std::vector<ServerMessage> messages_;
        mutable std::mutex mu_;
        mutable std::condition_variable cv_;
    };

    class SessionManager
    {
    public:
        explicit SessionManager(std::shared_ptr<const Clock> clock = std::make_shared<SteadyClock>(),
                                HarnessConfig base = {})
            : clock_(std::move(clock)), base_(std::move(base))
        {
        }

        const HarnessConfig& base_config() const noexcept { return base_; }

        // `request`: {"config": {...overrides}, "instant": bool}
        std::shared_ptr<Session> create(const Json& request = Json::object())
        {
            if (!request.is_object())
                throw Error(ErrorCode::InvalidConfig, "session request must be an object");
            for (const auto& [k, v] : request.items())
                if (k != "config" && k != "instant")
                    throw Error(ErrorCode::InvalidConfig, "unknown session option '" + k + "'");
            SessionOptions opt;
            opt.config = config_from_json(request.value("config", Json::object()), base_);
            if (request.contains("instant"))
            {
                if (!request["instant"].is_boolean())
                    throw Error(ErrorCode::InvalidConfig, "'instant' must be a boolean");
                opt.instant = request["instant"].get<bool>();
            }
            else
                opt.instant = instant_default_;
            return create(std::move(opt));
        }

        std::shared_ptr<Session> create(SessionOptions opt)
        {
            std::string id;
            {
                std::lock_guard lock(mu_);
                id = "s" + std::to_string(++counter_) + "-" + suffix();
            }
            auto s = std::make_shared<Session>(id, std::move(opt), clock_);
            std::lock_guard lock(mu_);
            sessions_[id] = s;
            return s;
        }

        void set_instant_default(bool v) { instant_default_ = v; }

        std::shared_ptr<Session> get(const std::string& id) const
        {
            std::lock_guard lock(mu_);
            auto it = sessions_.find(id);
            if (it == sessions_.end())
                throw Error(ErrorCode::MalformedMessage, "unknown session '" + id + "'");
            return it->second;
        }

        void end(const std::string& id) { get(id)->end(); }

        std::vector<std::shared_ptr<Session>> list() const
        {
            std::lock_guard lock(mu_);
            std::vector<std::shared_ptr<Session>> out;
            for (const auto& [id, s] : sessions_)
                out.push_back(s);
            return out;
        }

        void tick_all()
        {
            for (const auto& s : list())
                s->tick();
        }

    private:
        std::string suffix()
        {
            static const char* hex = "0123456789abcdef";
            std::string s;
            for (int i = 0; i < 8; ++i)
                s += hex[rd_() & 15u];
            return s;
        }

        std::shared_ptr<const Clock> clock_;
        HarnessConfig base_;
        bool instant_default_ = false;
        std::uint64_t counter_ = 0;
        std::random_device rd_;
        std::map<std::string, std::shared_ptr<Session>> sessions_;
        mutable std::mutex mu_;
    };
} // namespace cogest
