#pragma once

#include "cogest/config.hpp"
#include "cogest/fusion.hpp"
#include "cogest/gestures.hpp"
#include "cogest/speech.hpp"
#include "cogest/workcell.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace cogest
{
    inline constexpr std::string_view trace_format = "cogest-trace";
    inline constexpr int trace_version = 1;

    enum class RecordKind
    {
        // inputs
        Utterance,
        Skeleton,
        DetectionSnapshot,
        Pointing, // table-frame pointing injected by the console
        Operator, // console halt/resume buttons
        // outputs
        Transcript,
        Command,
        SimEvent,
        Fault
    };

    constexpr std::string_view to_string(RecordKind k) noexcept
    {
        switch (k)
        {
        case RecordKind::Utterance: return "Utterance";
        case RecordKind::Skeleton: return "Skeleton";
        case RecordKind::DetectionSnapshot: return "DetectionSnapshot";
        case RecordKind::Pointing: return "Pointing";
        case RecordKind::Operator: return "Operator";
        case RecordKind::Transcript: return "Transcript";
        case RecordKind::Command: return "Command";
        case RecordKind::SimEvent: return "SimEvent";
        case RecordKind::Fault: return "Fault";
        }
        return "?";
    }

    inline std::optional<RecordKind> record_kind_from_string(std::string_view s)
    {
        for (auto k : {RecordKind::Utterance, RecordKind::Skeleton, RecordKind::DetectionSnapshot, RecordKind::Pointing,
                       RecordKind::Operator, RecordKind::Transcript, RecordKind::Command, RecordKind::SimEvent,
                       RecordKind::Fault})
            if (to_string(k) == s)
                return k;
        return std::nullopt;
    }

    constexpr bool is_input(RecordKind k) noexcept
    {
        return k == RecordKind::Utterance || k == RecordKind::Skeleton || k == RecordKind::DetectionSnapshot ||
               k == RecordKind::Pointing || k == RecordKind::Operator;
    }

    struct TraceRecord
    {
        std::uint64_t seq = 0;
        Seconds t = 0.0;
        RecordKind kind = RecordKind::Utterance;
        Json payload = Json::object();
        std::size_t line = 0; // 1-based source line, 0 if not read from a file
    };

    struct TraceHeader
    {
        Json config = Json::object();
        Json scene = Json::object();
    };

    struct Trace
    {
        TraceHeader header;
        std::vector<TraceRecord> records;
    };

    // Non-safety faults raised anywhere in the pipeline.
    struct EngineFault
    {
        std::string kind; // FaultKind name, "GrammarError", "ObjectUnavailable" or "PointAtInfinity"
        Seconds at = 0.0;
        std::uint64_t source_id = 0;
        std::string detail;

        friend bool operator==(const EngineFault&, const EngineFault&) = default;
    };

    // ---- primitive codecs ---------------------------------------------------

    template <class Frame>
    Json point_json(const Point<Frame>& p)
    {
        return Json::array({p.x, p.y});
    }

    namespace codec
    {
        struct Reader
        {
            const Json& j;
            std::size_t line;

            [[noreturn]] void fail(const std::string& what) const
            {
                throw Error(ErrorCode::MalformedTrace, (line ? "line " + std::to_string(line) + ": " : std::string()) + what);
            }

            const Json& at(const char* key) const
            {
                if (!j.is_object() || !j.contains(key))
                    fail(std::string("missing field '") + key + "'");
                return j.at(key);
            }

            bool has(const char* key) const { return j.is_object() && j.contains(key) && !j.at(key).is_null(); }

            double num(const char* key) const
            {
                const auto& v = at(key);
                if (!v.is_number())
                    fail(std::string("field '") + key + "' is not a number");
                return v.get<double>();
            }

            std::uint64_t u64(const char* key) const
            {
                const auto& v = at(key);
                if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                    fail(std::string("field '") + key + "' is not a non-negative integer");
                return v.get<std::uint64_t>();
            }

            std::int64_t i64(const char* key) const
            {
                const auto& v = at(key);
                if (!v.is_number_integer())
                    fail(std::string("field '") + key + "' is not an integer");
                return v.get<std::int64_t>();
            }

            std::string str(const char* key) const
            {
                const auto& v = at(key);
                if (!v.is_string())
                    fail(std::string("field '") + key + "' is not a string");
                return v.get<std::string>();
            }

            bool boolean(const char* key) const
            {
                const auto& v = at(key);
                if (!v.is_boolean())
                    fail(std::string("field '") + key + "' is not a boolean");
                return v.get<bool>();
            }

            template <class Frame>
            Point<Frame> point(const Json& v, const char* what) const
            {
                if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
                    fail(std::string(what) + " must be [x, y]");
                return {v[0].get<double>(), v[1].get<double>()};
            }

            template <class Frame>
            Point<Frame> point(const char* key) const
            {
                return point<Frame>(at(key), key);
            }

            template <class Frame>
            Rect<Frame> rect(const Json& v) const
            {
                if (!v.is_array() || v.size() != 4)
                    fail("bbox must be [x0, y0, x1, y1]");
                for (const auto& e : v)
                    if (!e.is_number())
                        fail("bbox must be numeric");
                return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
            }
        };
    } // namespace codec

    // ---- inputs -------------------------------------------------------------

    inline Json to_payload(const UtteranceEvent& u)
    {
        return {{"text", u.text}, {"speech_start", u.speech_start}, {"speech_end", u.speech_end}};
    }

    inline UtteranceEvent utterance_from(const TraceRecord& r)
    {
        codec::Reader rd{r.payload, r.line};
        UtteranceEvent u;
        u.text = rd.str("text");
        u.speech_start = rd.num("speech_start");
        u.speech_end = rd.num("speech_end");
        u.id = r.seq;
        if (u.speech_end < u.speech_start)
            rd.fail("utterance ends before it starts");
        return u;
    }

    inline Json to_payload(const SkeletonObservation& s)
    {
        Json j;
        j["left"] = s.wrist_left ? point_json(*s.wrist_left) : Json(nullptr);
        j["right"] = s.wrist_right ? point_json(*s.wrist_right) : Json(nullptr);
        j["confidence_left"] = s.confidence_left;
        j["confidence_right"] = s.confidence_right;
        return j;
    }

    inline SkeletonObservation skeleton_from(const TraceRecord& r)
    {
        codec::Reader rd{r.payload, r.line};
        SkeletonObservation s;
        s.timestamp = r.t;
        if (rd.has("left"))
            s.wrist_left = rd.point<FrontCamera>("left");
        if (rd.has("right"))
            s.wrist_right = rd.point<FrontCamera>("right");
        s.confidence_left = rd.has("confidence_left") ? rd.num("confidence_left") : 1.0;
        s.confidence_right = rd.has("confidence_right") ? rd.num("confidence_right") : 1.0;
        return s;
    }

    inline Json to_payload(const ObjectDetectionSnapshot& s)
    {
        Json dets = Json::array();
        for (const auto& d : s.detections)
            dets.push_back({{"id", d.id},
                            {"class", d.object_class.label()},
                            {"bbox", Json::array({d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1})},
                            {"confidence", d.confidence}});
        return {{"detections", dets}};
    }

    inline ObjectDetectionSnapshot snapshot_from(const TraceRecord& r)
    {
        codec::Reader rd{r.payload, r.line};
        ObjectDetectionSnapshot s;
        s.timestamp = r.t;
        s.id = r.seq;
        const auto& dets = rd.at("detections");
        if (!dets.is_array())
            rd.fail("detections must be an array");
        for (const auto& dj : dets)
        {
            codec::Reader d{dj, r.line};
            Detection det;
            det.id = static_cast<int>(d.i64("id"));
            det.object_class = ObjectClass(d.str("class"));
            det.bbox = d.rect<TopDownCamera>(d.at("bbox"));
            det.confidence = d.has("confidence") ? d.num("confidence") : 1.0;
            s.detections.push_back(std::move(det));
        }
        try
        {
            s.validate();
        }
        catch (const Error& e)
        {
            rd.fail(e.detail());
        }
        return s;
    }

    inline Json to_payload(const PointingEvent& p) { return {{"point", point_json(p.point)}}; }

    inline PointingEvent pointing_from(const TraceRecord& r)
    {
        codec::Reader rd{r.payload, r.line};
        return {r.seq, r.t, rd.point<TopDownCamera>("point")};
    }

    inline Json to_payload(const OperatorSignal& s)
    {
        return {{"action", s.action == OperatorAction::Halt ? "halt" : "resume"}};
    }

    inline OperatorSignal operator_from(const TraceRecord& r)
    {
        codec::Reader rd{r.payload, r.line};
        const auto a = rd.str("action");
        if (a != "halt" && a != "resume")
            rd.fail("operator action must be 'halt' or 'resume'");
        return {r.seq, r.t, a == "halt" ? OperatorAction::Halt : OperatorAction::Resume};
    }

    // ---- outputs ------------------------------------------------------------

    inline Json to_payload(const SpeechTranscript& s)
    {
        return {{"text", s.text}, {"speech_end", s.speech_end}, {"recognized_at", s.recognized_at}, {"utterance", s.id}};
    }

    constexpr std::string_view to_string(TriggerSource s) noexcept
    {
        switch (s)
        {
        case TriggerSource::Speech: return "speech";
        case TriggerSource::Gesture: return "gesture";
        case TriggerSource::Operator: return "operator";
        }
        return "?";
    }

    inline Json ref_json(const std::optional<EventRef>& r)
    {
        if (!r)
            return nullptr;
        return {{"id", r->id}, {"t", r->time}};
    }

    inline Json to_payload(const RobotCommand& c)
    {
        Json j;
        j["id"] = c.id;
        j["kind"] = to_string(c.kind);
        if (c.object_id)
            j["object_id"] = *c.object_id;
        if (!c.place_target.empty())
            j["place_target"] = c.place_target;
        j["source"] = to_string(c.provenance.source);
        j["transcript"] = ref_json(c.provenance.transcript);
        j["trigger"] = ref_json(c.provenance.trigger);
        j["pointing"] = ref_json(c.provenance.pointing);
        j["snapshot"] = ref_json(c.provenance.snapshot);
        j["issued_at"] = c.issued_at;
        return j;
    }

    inline RobotCommand command_from(const Json& j, std::size_t line = 0)
    {
        codec::Reader rd{j, line};
        RobotCommand c;
        c.id = rd.u64("id");
        const auto kind = command_kind_from_string(rd.str("kind"));
        if (!kind)
            rd.fail("unknown command kind");
        c.kind = *kind;
        if (rd.has("object_id"))
            c.object_id = static_cast<int>(rd.i64("object_id"));
        if (rd.has("place_target"))
            c.place_target = rd.str("place_target");
        const auto src = rd.str("source");
        if (src == "speech")
            c.provenance.source = TriggerSource::Speech;
        else if (src == "gesture")
            c.provenance.source = TriggerSource::Gesture;
        else if (src == "operator")
            c.provenance.source = TriggerSource::Operator;
        else
            rd.fail("unknown command source");
        auto ref = [&](const char* key) -> std::optional<EventRef> {
            if (!rd.has(key))
                return std::nullopt;
            codec::Reader r{j.at(key), line};
            return EventRef{r.u64("id"), r.num("t")};
        };
        c.provenance.transcript = ref("transcript");
        c.provenance.trigger = ref("trigger");
        c.provenance.pointing = ref("pointing");
        c.provenance.snapshot = ref("snapshot");
        c.issued_at = rd.num("issued_at");
        return c;
    }

    inline std::optional<Phase> phase_from_string(std::string_view s)
    {
        for (auto p : {Phase::Idle, Phase::MovingToObject, Phase::Grasping, Phase::MovingToPlace, Phase::Releasing,
                       Phase::MovingToHandover, Phase::AwaitingHumanTake, Phase::MovingHome, Phase::Paused})
            if (to_string(p) == s)
                return p;
        return std::nullopt;
    }

    // Inverse of describe(RobotPhase): "MovingToObject" or "Paused{MovingToObject}".
    inline std::optional<RobotPhase> robot_phase_from_string(std::string_view s)
    {
        constexpr std::string_view prefix = "Paused{";
        if (s.starts_with(prefix) && s.ends_with("}"))
        {
            const auto inner = phase_from_string(s.substr(prefix.size(), s.size() - prefix.size() - 1));
            if (!inner || *inner == Phase::Paused)
                return std::nullopt;
            return RobotPhase{Phase::Paused, *inner};
        }
        const auto p = phase_from_string(s);
        if (!p || *p == Phase::Paused)
            return std::nullopt;
        return RobotPhase{*p, Phase::Idle};
    }

    inline std::optional<ObjectStatus> object_status_from_string(std::string_view s)
    {
        for (auto v : {ObjectStatus::OnTable, ObjectStatus::InGripper, ObjectStatus::Placed, ObjectStatus::WithHuman})
            if (to_string(v) == s)
                return v;
        return std::nullopt;
    }

    inline std::optional<SimEventKind> sim_event_kind_from_string(std::string_view s)
    {
        for (auto k : {SimEventKind::PhaseChanged, SimEventKind::ObjectMoved, SimEventKind::CommandStarted,
                       SimEventKind::CommandCompleted, SimEventKind::CommandRejected, SimEventKind::Warning})
            if (to_string(k) == s)
                return k;
        return std::nullopt;
    }

    inline Json to_payload(const SimEvent& e)
    {
        Json j;
        j["event"] = to_string(e.kind);
        j["tick"] = e.tick;
        if (e.kind == SimEventKind::PhaseChanged)
        {
            j["from"] = describe(e.from);
            j["to"] = describe(e.to);
        }
        if (e.command_id)
            j["command_id"] = *e.command_id;
        if (e.object_id)
            j["object_id"] = *e.object_id;
        if (e.status)
            j["status"] = to_string(*e.status);
        if (e.pose)
            j["pose"] = point_json(*e.pose);
        if (!e.detail.empty())
            j["detail"] = e.detail;
        return j;
    }

    inline SimEvent sim_event_from(const TraceRecord& r)
    {
        codec::Reader rd{r.payload, r.line};
        SimEvent e;
        const auto kind = sim_event_kind_from_string(rd.str("event"));
        if (!kind)
            rd.fail("unknown sim event");
        e.kind = *kind;
        e.time = r.t;
        e.tick = rd.i64("tick");
        if (rd.has("from") || rd.has("to"))
        {
            const auto from = robot_phase_from_string(rd.str("from"));
            const auto to = robot_phase_from_string(rd.str("to"));
            if (!from || !to)
                rd.fail("unknown robot phase");
            e.from = *from;
            e.to = *to;
        }
        if (rd.has("command_id"))
            e.command_id = rd.u64("command_id");
        if (rd.has("object_id"))
            e.object_id = static_cast<int>(rd.i64("object_id"));
        if (rd.has("status"))
        {
            const auto st = object_status_from_string(rd.str("status"));
            if (!st)
                rd.fail("unknown object status");
            e.status = *st;
        }
        if (rd.has("pose"))
            e.pose = rd.point<TopDownCamera>("pose");
        if (rd.has("detail"))
            e.detail = rd.str("detail");
        return e;
    }

    inline Json to_payload(const EngineFault& f)
    {
        return {{"fault", f.kind}, {"source", f.source_id}, {"detail", f.detail}};
    }

    // ---- scene --------------------------------------------------------------

    inline Json to_json(const SceneState& s)
    {
        Json objs = Json::array();
        for (const auto& [id, o] : s.objects)
        {
            Json oj = {{"id", id}, {"class", o.object_class.label()}, {"pose", point_json(o.pose)}};
            if (o.status != ObjectStatus::OnTable)
                oj["status"] = to_string(o.status);
            objs.push_back(std::move(oj));
        }
        return {{"objects", objs},
                {"place_location", point_json(s.place_location)},
                {"home_pose", s.home_pose},
                {"handover_pose", s.handover_pose}};
    }

    // Throws `code` (InvalidSpec for scenarios, MalformedTrace for trace headers).
    inline SceneState scene_from_json(const Json& j, ErrorCode code = ErrorCode::InvalidSpec)
    {
        try
        {
            codec::Reader rd{j, 0};
            SceneState s;
            for (const auto& oj : rd.at("objects"))
            {
                codec::Reader o{oj, 0};
                SceneObject obj;
                obj.id = static_cast<int>(o.i64("id"));
                obj.object_class = ObjectClass(o.str("class"));
                obj.pose = o.point<TopDownCamera>("pose");
                if (o.has("status"))
                {
                    const auto st = object_status_from_string(o.str("status"));
                    if (!st)
                        o.fail("unknown object status");
                    obj.status = *st;
                }
                if (!s.objects.emplace(obj.id, obj).second)
                    o.fail("duplicate object id " + std::to_string(obj.id));
            }
            if (rd.has("place_location"))
                s.place_location = rd.point<TopDownCamera>("place_location");
            if (rd.has("home_pose"))
                s.home_pose = rd.str("home_pose");
            if (rd.has("handover_pose"))
                s.handover_pose = rd.str("handover_pose");
            int in_gripper = 0;
            for (const auto& [id, o] : s.objects)
                in_gripper += o.status == ObjectStatus::InGripper ? 1 : 0;
            if (in_gripper > 1)
                rd.fail("more than one object in the gripper");
            return s;
        }
        catch (const Error& e)
        {
            if (e.code() == code)
                throw;
            throw Error(code, "scene: " + e.detail());
        }
    }

    // ---- line format --------------------------------------------------------

    inline Json header_json(const TraceHeader& h)
    {
        Json j;
        j["format"] = trace_format;
        j["version"] = trace_version;
        j["config"] = h.config;
        j["scene"] = h.scene;
        return j;
    }

    inline std::string format_record(const TraceRecord& r)
    {
        Json j;
        j["seq"] = r.seq;
        j["t"] = r.t;
        j["kind"] = to_string(r.kind);
        j["payload"] = r.payload;
        return j.dump();
    }

    // Append-only writer. Assigns sequence numbers and enforces the record invariants.
    class TraceWriter
    {
    public:
        explicit TraceWriter(std::ostream& out) : out_(&out) {}

        void header(const TraceHeader& h)
        {
            if (wrote_header_)
                throw Error(ErrorCode::MalformedTrace, "header already written");
            *out_ << header_json(h).dump() << '\n';
            wrote_header_ = true;
        }

        // Returns the assigned seq.
        std::uint64_t write(Seconds t, RecordKind kind, Json payload)
        {
            if (!wrote_header_)
                throw Error(ErrorCode::MalformedTrace, "record written before header");
            if (t < last_t_)
                throw Error(ErrorCode::OutOfOrder, "trace timestamps must be nondecreasing");
            TraceRecord r{next_seq_++, t, kind, std::move(payload)};
            last_t_ = t;
            *out_ << format_record(r) << '\n';
            out_->flush();
            return r.seq;
        }

        std::uint64_t next_seq() const noexcept { return next_seq_; }

    private:
        std::ostream* out_;
        bool wrote_header_ = false;
        std::uint64_t next_seq_ = 1;
        Seconds last_t_ = -std::numeric_limits<double>::infinity();
    };

    inline Trace parse_trace(std::istream& in)
    {
        Trace trace;
        std::string line;
        std::size_t line_no = 0;
        bool have_header = false;
        std::optional<std::uint64_t> last_seq;
        Seconds last_t = -std::numeric_limits<double>::infinity();
        auto fail = [&](const std::string& what) -> void {
            throw Error(ErrorCode::MalformedTrace, "line " + std::to_string(line_no) + ": " + what);
        };
        while (std::getline(in, line))
        {
            ++line_no;
            if (line.empty())
                continue;
            Json j;
            try
            {
                j = Json::parse(line);
            }
            catch (const nlohmann::json::exception& e)
            {
                fail(std::string("invalid JSON (") + e.what() + ")");
            }
            if (!j.is_object())
                fail("record is not an object");
            if (!have_header)
            {
                if (j.value("format", std::string()) != trace_format)
                    fail("missing cogest-trace header");
                if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != trace_version)
                    fail("unsupported trace version");
                trace.header.config = j.value("config", Json::object());
                trace.header.scene = j.value("scene", Json::object());
                have_header = true;
                continue;
            }
            if (j.size() != 4 || !j.contains("seq") || !j.contains("t") || !j.contains("kind") || !j.contains("payload"))
                fail("record needs exactly seq, t, kind, payload");
            if (!j["seq"].is_number_unsigned())
                fail("seq must be a non-negative integer");
            if (!j["t"].is_number() || !std::isfinite(j["t"].get<double>()))
                fail("t must be a finite number");
            if (!j["kind"].is_string())
                fail("kind must be a string");
            if (!j["payload"].is_object())
                fail("payload must be an object");
            TraceRecord r;
            r.seq = j["seq"].get<std::uint64_t>();
            r.t = j["t"].get<double>();
            const auto kind = record_kind_from_string(j["kind"].get<std::string>());
            if (!kind)
                fail("unknown kind '" + j["kind"].get<std::string>() + "'");
            r.kind = *kind;
            r.payload = std::move(j["payload"]);
            r.line = line_no;
            if (last_seq && r.seq <= *last_seq)
                fail("seq not strictly increasing");
            if (r.t < last_t)
                fail("timestamp decreases");
            last_seq = r.seq;
            last_t = r.t;
            trace.records.push_back(std::move(r));
        }
        // a file with no lines at all is an empty trace under default configuration
        return trace;
    }

    inline Trace parse_trace(const std::string& text)
    {
        std::istringstream in(text);
        return parse_trace(in);
    }

    inline void write_trace(std::ostream& out, const Trace& trace)
    {
        out << header_json(trace.header).dump() << '\n';
        for (const auto& r : trace.records)
            out << format_record(r) << '\n';
    }

    inline std::string format_trace(const Trace& trace)
    {
        std::ostringstream os;
        write_trace(os, trace);
        return os.str();
    }

    inline Trace load_trace(const std::string& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw Error(ErrorCode::MalformedTrace, "cannot open " + path);
        return parse_trace(in);
    }
} // namespace cogest
