#pragma once

#include "cogest/config.hpp"
#include "cogest/engine.hpp"
#include "cogest/trace.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace cogest
{
    // ---- scenario -----------------------------------------------------------

    enum class ActionType
    {
        Say,
        Zone,
        Point,
        Operator
    };

    struct ScriptAction
    {
        ActionType type = ActionType::Say;
        Seconds t = 0.0;
        std::string text;                    // Say
        std::optional<Seconds> speech_duration;
        ZoneRole zone = ZoneRole::Stop;      // Zone
        int object_id = 0;                   // Point
        Seconds hold = 2.0;                  // Zone, Point
        std::optional<Wrist> wrist;          // Zone, Point
        OperatorAction action = OperatorAction::Halt;
    };

    struct ScenarioSpec
    {
        std::string name;
        SceneState scene;
        std::vector<ScriptAction> script;
        std::vector<CommandKind> expectations;
        std::optional<Seconds> duration;
        Json config = Json::object(); // overrides onto the harness config
    };

    inline std::size_t word_count(std::string_view text)
    {
        std::size_t n = 0;
        bool in = false;
        for (char c : text)
        {
            const bool space = c == ' ' || c == '\t' || c == '\n';
            if (!space && !in)
                ++n;
            in = !space;
        }
        return n;
    }

    // Spoken length of a scripted phrase.
    inline Seconds speech_duration(const ScriptAction& a)
    {
        return a.speech_duration ? *a.speech_duration : 0.25 * static_cast<double>(word_count(a.text)) + 0.2;
    }

    inline Seconds action_end(const ScriptAction& a)
    {
        switch (a.type)
        {
        case ActionType::Say: return a.t + speech_duration(a);
        case ActionType::Zone:
        case ActionType::Point: return a.t + a.hold;
        case ActionType::Operator: return a.t;
        }
        return a.t;
    }

    inline std::optional<ZoneRole> zone_role_from_string(std::string_view s)
    {
        for (auto r : {ZoneRole::Stop, ZoneRole::Continue, ZoneRole::PointLeft, ZoneRole::PointRight})
            if (to_string(r) == s)
                return r;
        return std::nullopt;
    }

    inline ScenarioSpec scenario_from_json(const Json& j)
    {
        auto bad = [](const std::string& what) -> Error { return Error(ErrorCode::InvalidSpec, what); };
        if (!j.is_object())
            throw bad("scenario must be a JSON object");
        for (const auto& [k, v] : j.items())
            if (k != "name" && k != "scene" && k != "script" && k != "expectations" && k != "duration" && k != "config")
                throw bad("unknown scenario key '" + k + "'");
        ScenarioSpec s;
        try
        {
            s.name = j.value("name", std::string("scenario"));
            s.scene = scene_from_json(j.at("scene"), ErrorCode::InvalidSpec);
            if (j.contains("duration"))
                s.duration = j["duration"].get<double>();
            if (j.contains("config"))
                s.config = j["config"];
            for (const auto& aj : j.value("script", Json::array()))
            {
                ScriptAction a;
                a.t = aj.at("t").get<double>();
                if (aj.contains("hold"))
                    a.hold = aj["hold"].get<double>();
                if (aj.contains("wrist"))
                {
                    const auto w = aj["wrist"].get<std::string>();
                    if (w != "left" && w != "right")
                        throw bad("wrist must be 'left' or 'right'");
                    a.wrist = w == "left" ? Wrist::Left : Wrist::Right;
                }
                if (aj.contains("say"))
                {
                    a.type = ActionType::Say;
                    a.text = aj["say"].get<std::string>();
                    if (aj.contains("speech_duration"))
                        a.speech_duration = aj["speech_duration"].get<double>();
                }
                else if (aj.contains("zone"))
                {
                    a.type = ActionType::Zone;
                    const auto r = zone_role_from_string(aj["zone"].get<std::string>());
                    if (!r)
                        throw bad("unknown zone '" + aj["zone"].get<std::string>() + "'");
                    a.zone = *r;
                }
                else if (aj.contains("point"))
                {
                    a.type = ActionType::Point;
                    a.object_id = aj["point"].get<int>();
                }
                else if (aj.contains("operator"))
                {
                    a.type = ActionType::Operator;
                    const auto op = aj["operator"].get<std::string>();
                    if (op != "halt" && op != "resume")
                        throw bad("operator action must be 'halt' or 'resume'");
                    a.action = op == "halt" ? OperatorAction::Halt : OperatorAction::Resume;
                }
                else
                    throw bad("script action needs one of say, zone, point, operator");
                s.script.push_back(std::move(a));
            }
            for (const auto& ej : j.value("expectations", Json::array()))
            {
                const auto k = command_kind_from_string(ej.get<std::string>());
                if (!k)
                    throw bad("unknown expected command kind '" + ej.get<std::string>() + "'");
                s.expectations.push_back(*k);
            }
        }
        catch (const nlohmann::json::exception& e)
        {
            throw bad(std::string("scenario: ") + e.what());
        }
        return s;
    }

    inline Json to_json(const ScenarioSpec& s)
    {
        Json script = Json::array();
        for (const auto& a : s.script)
        {
            Json aj;
            aj["t"] = a.t;
            switch (a.type)
            {
            case ActionType::Say:
                aj["say"] = a.text;
                if (a.speech_duration)
                    aj["speech_duration"] = *a.speech_duration;
                break;
            case ActionType::Zone:
                aj["zone"] = to_string(a.zone);
                aj["hold"] = a.hold;
                break;
            case ActionType::Point:
                aj["point"] = a.object_id;
                aj["hold"] = a.hold;
                break;
            case ActionType::Operator: aj["operator"] = a.action == OperatorAction::Halt ? "halt" : "resume"; break;
            }
            if (a.wrist)
                aj["wrist"] = to_string(*a.wrist);
            script.push_back(std::move(aj));
        }
        Json exp = Json::array();
        for (auto k : s.expectations)
            exp.push_back(to_string(k));
        Json j;
        j["name"] = s.name;
        if (s.duration)
            j["duration"] = *s.duration;
        j["config"] = s.config;
        j["scene"] = to_json(s.scene);
        j["script"] = script;
        j["expectations"] = exp;
        return j;
    }

    inline ScenarioSpec load_scenario(const std::string& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw Error(ErrorCode::InvalidSpec, "cannot open " + path);
        try
        {
            return scenario_from_json(Json::parse(in));
        }
        catch (const nlohmann::json::exception& e)
        {
            throw Error(ErrorCode::InvalidSpec, path + ": " + e.what());
        }
    }

    // ---- generation ---------------------------------------------------------

    // Wrist rest positions, clear of every standard zone.
    inline ImagePoint rest_position(Wrist w, const GestureConfig& g)
    {
        return {g.front_width * (w == Wrist::Left ? 0.40 : 0.60), g.front_height * 0.45};
    }

    struct WristHold
    {
        Seconds start = 0.0;
        Seconds end = 0.0;
        ImagePoint target;
    };

    inline Seconds scenario_duration(const ScenarioSpec& spec)
    {
        if (spec.duration)
            return *spec.duration;
        Seconds end = 0.0;
        for (const auto& a : spec.script)
            end = std::max(end, action_end(a));
        return std::ceil(end) + 20.0;
    }

    inline void validate_scenario(const ScenarioSpec& spec, const HarnessConfig& cfg)
    {
        auto bad = [](const std::string& what) { return Error(ErrorCode::InvalidSpec, what); };
        std::size_t can_issue = 0;
        Seconds last = -std::numeric_limits<double>::infinity();
        const ZoneSet zones = cfg.gestures.zone_set();
        const auto inverse = cfg.calibration.homography.inverse();
        for (std::size_t i = 0; i < spec.script.size(); ++i)
        {
            const auto& a = spec.script[i];
            const std::string where = "script[" + std::to_string(i) + "]: ";
            if (!std::isfinite(a.t) || a.t < 0.0)
                throw bad(where + "time must be finite and non-negative");
            if (a.t < last)
                throw bad(where + "actions must be in time order");
            last = a.t;
            switch (a.type)
            {
            case ActionType::Say:
                if (word_count(a.text) == 0)
                    throw bad(where + "empty phrase");
                if (a.speech_duration && !(*a.speech_duration >= 0.0))
                    throw bad(where + "negative speech duration");
                ++can_issue;
                break;
            case ActionType::Zone:
                if (!zones.find(a.zone))
                    throw bad(where + "zone not configured");
                if (!(a.hold > 0.0))
                    throw bad(where + "hold must be positive");
                can_issue += is_pointing_zone(a.zone) ? 0 : 1;
                break;
            case ActionType::Point:
            {
                auto it = spec.scene.objects.find(a.object_id);
                if (it == spec.scene.objects.end())
                    throw bad(where + "no object " + std::to_string(a.object_id) + " in the scene");
                if (!(a.hold > 0.0))
                    throw bad(where + "hold must be positive");
                ImagePoint p;
                try
                {
                    p = inverse.apply(it->second.pose);
                }
                catch (const Error&)
                {
                    throw bad(where + "object " + std::to_string(a.object_id) + " has no front-image preimage");
                }
                bool inside = false;
                for (const auto& z : zones.zones())
                    inside = inside || (is_pointing_zone(z.role) && z.rect.contains(p));
                if (!inside)
                    throw bad(where + "object " + std::to_string(a.object_id) + " cannot be pointed at from any pointing zone");
                break;
            }
            case ActionType::Operator: ++can_issue; break;
            }
        }
        if (spec.expectations.size() > can_issue)
            throw bad("expects " + std::to_string(spec.expectations.size()) + " commands but the script can issue at most " +
                      std::to_string(can_issue));
        if (scenario_duration(spec) < last)
            throw bad("duration ends before the script");
    }

    struct GenerateOptions
    {
        std::uint64_t seed = 0;
        HarnessConfig base; // the scenario's config block applies on top
    };

    inline HarnessConfig generation_config(const ScenarioSpec& spec, const GenerateOptions& opt)
    {
        HarnessConfig cfg;
        try
        {
            cfg = config_from_json(spec.config, opt.base);
        }
        catch (const Error& e)
        {
            throw Error(ErrorCode::InvalidSpec, "scenario config: " + e.detail());
        }
        cfg.speech.rng_seed = mix_seed(opt.seed, 1);
        cfg.detection.noise.seed = mix_seed(opt.seed, 2);
        return cfg;
    }

    // Synthesizes sensor input for a scenario in closed loop with the workcell
    // (snapshots reflect the robot's progress), and records inputs plus the
    // engine's outputs as a trace.
    inline std::string generate(const ScenarioSpec& spec, const GenerateOptions& opt = {})
    {
        const HarnessConfig cfg = generation_config(spec, opt);
        validate_scenario(spec, cfg);
        const Seconds duration = scenario_duration(spec);
        const ZoneSet zones = cfg.gestures.zone_set();
        const auto inverse = cfg.calibration.homography.inverse();

        // wrist holds
        std::map<Wrist, std::vector<WristHold>> holds;
        for (const auto& a : spec.script)
        {
            if (a.type != ActionType::Zone && a.type != ActionType::Point)
                continue;
            ImagePoint target;
            Wrist w = Wrist::Right;
            if (a.type == ActionType::Zone)
            {
                target = zones.find(a.zone)->rect.center();
                if (a.zone == ZoneRole::Stop)
                    w = Wrist::Left;
                else if (a.zone == ZoneRole::Continue)
                    w = Wrist::Right;
                else
                    w = a.wrist.value_or(a.zone == ZoneRole::PointLeft ? Wrist::Left : Wrist::Right);
            }
            else
            {
                target = inverse.apply(spec.scene.objects.at(a.object_id).pose);
                w = a.wrist.value_or(target.x < cfg.gestures.front_width / 2.0 ? Wrist::Left : Wrist::Right);
            }
            auto& list = holds[w];
            if (!list.empty() && a.t < list.back().end)
                throw Error(ErrorCode::InvalidSpec, "overlapping holds for the " + std::string(to_string(w)) + " wrist");
            list.push_back({a.t, a.t + a.hold, target});
        }

        auto target_at = [&](Wrist w, Seconds t) {
            for (const auto& h : holds[w])
                if (t >= h.start && t < h.end)
                    return h.target;
            return rest_position(w, cfg.gestures);
        };

        enum Source
        {
            Speech,
            Button,
            Snapshot,
            Frame
        };
        struct Slot
        {
            Seconds t;
            int source;
            std::size_t index;
        };
        std::vector<Slot> slots;
        for (std::size_t i = 0; i < spec.script.size(); ++i)
        {
            const auto& a = spec.script[i];
            if (a.type == ActionType::Say)
                slots.push_back({a.t, Speech, i});
            else if (a.type == ActionType::Operator)
                slots.push_back({a.t, Button, i});
        }
        const auto frames = static_cast<std::size_t>(std::ceil(duration * cfg.skeleton.rate_hz - 1e-9));
        for (std::size_t k = 0; k < frames; ++k)
            slots.push_back({static_cast<double>(k) / cfg.skeleton.rate_hz, Frame, k});
        const auto snaps = static_cast<std::size_t>(std::ceil(duration * cfg.detection.rate_hz - 1e-9));
        for (std::size_t k = 0; k < snaps; ++k)
            slots.push_back({static_cast<double>(k) / cfg.detection.rate_hz, Snapshot, k});
        std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
            return std::tie(a.t, a.source, a.index) < std::tie(b.t, b.source, b.index);
        });

        std::ostringstream out;
        TraceWriter writer(out);
        TraceHeader header;
        header.config = to_json(cfg);
        header.scene = to_json(spec.scene);
        writer.header(header);

        Engine engine(cfg, spec.scene);
        engine.set_sink([&](const EngineOutput& o) { writer.write(o.t, o.kind, o.payload); });

        Rng skeleton_rng(mix_seed(opt.seed, 3));
        auto record = [&](Seconds t, RecordKind kind, Json payload) {
            engine.advance_to(t);
            TraceRecord r;
            r.t = t;
            r.kind = kind;
            r.payload = payload;
            r.seq = writer.write(t, kind, std::move(payload));
            engine.ingest(r);
        };

        for (const auto& s : slots)
        {
            switch (s.source)
            {
            case Speech:
            {
                const auto& a = spec.script[s.index];
                record(a.t, RecordKind::Utterance, to_payload(UtteranceEvent{a.text, a.t, a.t + speech_duration(a)}));
                break;
            }
            case Button:
                record(s.t, RecordKind::Operator, to_payload(OperatorSignal{0, s.t, spec.script[s.index].action}));
                break;
            case Snapshot:
            {
                engine.advance_to(s.t);
                const auto snap = engine.workcell().snapshot_detections(cfg.detection.noise,
                                                                        static_cast<std::int64_t>(s.index), s.t);
                record(s.t, RecordKind::DetectionSnapshot, to_payload(snap));
                break;
            }
            case Frame:
            {
                SkeletonObservation obs;
                obs.timestamp = s.t;
                for (Wrist w : {Wrist::Left, Wrist::Right})
                {
                    // fixed draw count per wrist and frame
                    const bool seen = skeleton_rng.bernoulli(cfg.skeleton.p_detect);
                    const double nx = skeleton_rng.normal(0.0, cfg.skeleton.sigma_px);
                    const double ny = skeleton_rng.normal(0.0, cfg.skeleton.sigma_px);
                    const ImagePoint target = target_at(w, s.t);
                    std::optional<ImagePoint> p;
                    if (seen)
                        p = ImagePoint{target.x + nx, target.y + ny};
                    (w == Wrist::Left ? obs.wrist_left : obs.wrist_right) = p;
                    (w == Wrist::Left ? obs.confidence_left : obs.confidence_right) = seen ? 0.9 : 0.0;
                }
                record(s.t, RecordKind::Skeleton, to_payload(obs));
                break;
            }
            }
        }
        engine.advance_to(duration);
        engine.finish();
        return out.str();
    }

    // ---- metrics ------------------------------------------------------------

    struct SummaryStats
    {
        std::size_t count = 0;
        double mean = 0.0;
        double median = 0.0;
        double min = 0.0;
        double max = 0.0;

        static SummaryStats of(std::vector<double> v)
        {
            SummaryStats s;
            s.count = v.size();
            if (v.empty())
                return s;
            std::sort(v.begin(), v.end());
            double sum = 0.0;
            for (double x : v)
                sum += x;
            s.mean = sum / static_cast<double>(v.size());
            const std::size_t n = v.size();
            s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
            s.min = v.front();
            s.max = v.back();
            return s;
        }
    };

    struct Metrics
    {
        std::size_t utterances = 0;
        std::size_t skeleton_frames = 0;
        std::size_t snapshots = 0;
        double wrist_detection_rate = 0.0;   // over wrist-frames
        double detections_per_snapshot = 0.0;

        std::size_t commands = 0;
        std::map<std::string, std::size_t> by_kind;
        std::size_t speech_originated = 0;
        std::size_t gesture_originated = 0;
        std::size_t operator_originated = 0;
        std::size_t co_speech = 0;

        std::size_t unresolved = 0;
        std::size_t stale = 0;
        std::size_t superseded = 0;
        std::size_t grammar_errors = 0;
        std::size_t rejected = 0;
        std::size_t warnings = 0;

        SummaryStats command_latency;     // utterance end -> command issued, speech-originated
        SummaryStats recognition_latency; // utterance end -> transcript
        SummaryStats halt_response;       // trigger source time -> Paused

        std::size_t completed = 0;
        bool scenario_complete = false;
        Seconds end_time = 0.0;

        std::optional<bool> expectations_met;
        std::vector<std::string> expectation_errors;
        std::optional<bool> recorded_outputs_match;
    };

    inline Metrics compute_metrics(const Engine& engine, const Trace& trace)
    {
        Metrics m;
        std::size_t wrist_frames = 0, wrists_seen = 0, detections = 0;
        for (const auto& r : trace.records)
        {
            switch (r.kind)
            {
            case RecordKind::Utterance: ++m.utterances; break;
            case RecordKind::Skeleton:
                ++m.skeleton_frames;
                wrist_frames += 2;
                wrists_seen += (r.payload.contains("left") && !r.payload["left"].is_null()) ? 1 : 0;
                wrists_seen += (r.payload.contains("right") && !r.payload["right"].is_null()) ? 1 : 0;
                break;
            case RecordKind::DetectionSnapshot:
                ++m.snapshots;
                detections += r.payload.contains("detections") ? r.payload["detections"].size() : 0;
                break;
            default: break;
            }
        }
        m.wrist_detection_rate = wrist_frames ? static_cast<double>(wrists_seen) / static_cast<double>(wrist_frames) : 0.0;
        m.detections_per_snapshot = m.snapshots ? static_cast<double>(detections) / static_cast<double>(m.snapshots) : 0.0;

        for (auto k : {CommandKind::PickPlace, CommandKind::Handover, CommandKind::GoHome, CommandKind::Halt, CommandKind::Resume})
            m.by_kind[std::string(to_string(k))] = 0;

        const auto& cmds = engine.commands();
        const auto& events = engine.sim_events();
        std::vector<double> latency, halt;
        m.commands = cmds.size();
        for (const auto& c : cmds)
        {
            ++m.by_kind[std::string(to_string(c.kind))];
            switch (c.provenance.source)
            {
            case TriggerSource::Speech:
                ++m.speech_originated;
                latency.push_back(c.issued_at - c.provenance.transcript->time);
                break;
            case TriggerSource::Gesture: ++m.gesture_originated; break;
            case TriggerSource::Operator: ++m.operator_originated; break;
            }
            m.co_speech += c.co_speech() ? 1 : 0;

            if (c.kind != CommandKind::Halt)
                continue;
            bool redundant = false;
            for (const auto& e : events)
                redundant = redundant || (e.kind == SimEventKind::Warning && e.command_id == c.id && e.detail == "AlreadyPaused");
            if (redundant)
                continue;
            const Seconds source = c.provenance.transcript ? c.provenance.transcript->time : c.provenance.trigger->time;
            for (const auto& e : events)
                if (e.kind == SimEventKind::PhaseChanged && e.to.paused() && e.time >= c.issued_at)
                {
                    halt.push_back(e.time - source);
                    break;
                }
        }
        m.command_latency = SummaryStats::of(latency);
        m.halt_response = SummaryStats::of(halt);

        std::vector<double> recog;
        for (const auto& t : engine.transcripts())
            recog.push_back(t.recognized_at - t.speech_end);
        m.recognition_latency = SummaryStats::of(recog);

        for (const auto& f : engine.faults())
        {
            if (f.kind == "UnresolvedReference")
                ++m.unresolved;
            else if (f.kind == "StaleScene")
                ++m.stale;
            else if (f.kind == "Superseded")
                ++m.superseded;
            else if (f.kind == "GrammarError")
                ++m.grammar_errors;
            else if (f.kind == "ObjectUnavailable")
                ++m.rejected;
        }
        std::size_t motion = 0;
        for (const auto& c : cmds)
            motion += is_safety(c.kind) ? 0 : 1;
        for (const auto& e : events)
        {
            m.completed += e.kind == SimEventKind::CommandCompleted ? 1 : 0;
            m.rejected += e.kind == SimEventKind::CommandRejected ? 1 : 0;
            m.warnings += e.kind == SimEventKind::Warning ? 1 : 0;
        }
        m.scenario_complete = engine.workcell().idle() && !engine.workcell().phase().paused() && m.completed == motion &&
                              m.unresolved == 0 && m.stale == 0 && m.rejected == 0;
        m.end_time = engine.now();
        return m;
    }

    // ---- replay -------------------------------------------------------------

    struct ReplayOptions
    {
        Json config_overrides = Json::object(); // applied on top of the trace header
        std::optional<HarnessConfig> config;    // replaces the header config entirely
        bool compare_recorded = true;
    };

    struct ReplayResult
    {
        HarnessConfig config;
        std::vector<RobotCommand> commands;
        std::vector<EngineOutput> outputs;
        std::string command_log;
        std::string output_log; // recomputed output records, one JSON line each
        Metrics metrics;
    };

    inline HarnessConfig trace_config(const Trace& trace, const ReplayOptions& opt)
    {
        if (opt.config)
            return config_from_json(opt.config_overrides, *opt.config);
        try
        {
            return config_from_json(opt.config_overrides, config_from_json(trace.header.config));
        }
        catch (const Error& e)
        {
            if (e.code() != ErrorCode::InvalidConfig)
                throw;
            throw Error(ErrorCode::MalformedTrace, "line 1: trace config: " + e.detail());
        }
    }

    inline std::string output_line(const EngineOutput& o)
    {
        Json j;
        j["t"] = o.t;
        j["kind"] = to_string(o.kind);
        j["payload"] = o.payload;
        return j.dump();
    }

    inline std::vector<std::string> check_expectations(const std::vector<RobotCommand>& cmds,
                                                       const std::vector<CommandKind>& expected)
    {
        std::vector<std::string> errors;
        const std::size_t n = std::max(cmds.size(), expected.size());
        for (std::size_t i = 0; i < n; ++i)
        {
            const std::string got = i < cmds.size() ? std::string(to_string(cmds[i].kind)) : "<none>";
            const std::string want = i < expected.size() ? std::string(to_string(expected[i])) : "<none>";
            if (got != want)
                errors.push_back("command " + std::to_string(i + 1) + ": expected " + want + ", got " + got);
        }
        return errors;
    }

    // Feeds every input record through the pipeline in order. Recorded output
    // records are ignored for computation and optionally compared.
    inline ReplayResult replay(const Trace& trace, const ReplayOptions& opt = {}, const ScenarioSpec* spec = nullptr)
    {
        ReplayResult res;
        res.config = trace_config(trace, opt);
        const bool empty_scene = trace.header.scene.empty();
        const SceneState scene = empty_scene ? SceneState{} : scene_from_json(trace.header.scene, ErrorCode::MalformedTrace);

        Engine engine(res.config, scene);
        for (const auto& r : trace.records)
            if (is_input(r.kind))
                engine.ingest(r);
        engine.finish();

        res.commands = engine.commands();
        res.outputs = engine.outputs();
        res.command_log = engine.command_log();
        for (const auto& o : res.outputs)
        {
            res.output_log += output_line(o);
            res.output_log += '\n';
        }
        res.metrics = compute_metrics(engine, trace);

        if (opt.compare_recorded)
        {
            std::string recorded;
            bool any = false;
            for (const auto& r : trace.records)
                if (!is_input(r.kind))
                {
                    any = true;
                    recorded += output_line({r.t, r.kind, r.payload});
                    recorded += '\n';
                }
            if (any)
                res.metrics.recorded_outputs_match = recorded == res.output_log;
        }
        if (spec)
        {
            res.metrics.expectation_errors = check_expectations(res.commands, spec->expectations);
            res.metrics.expectations_met = res.metrics.expectation_errors.empty();
        }
        return res;
    }

    inline void require_expectations(const ReplayResult& r)
    {
        if (r.metrics.expectations_met && !*r.metrics.expectations_met)
        {
            std::string detail;
            for (const auto& e : r.metrics.expectation_errors)
                detail += (detail.empty() ? "" : "; ") + e;
            throw Error(ErrorCode::ExpectationFailed, detail);
        }
    }

    // ---- report -------------------------------------------------------------

    inline Json stats_json(const SummaryStats& s)
    {
        return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"min", s.min}, {"max", s.max}};
    }

    inline Json report_json(const Metrics& m)
    {
        Json j;
        j["inputs"] = {{"utterances", m.utterances},
                       {"skeleton_frames", m.skeleton_frames},
                       {"snapshots", m.snapshots},
                       {"wrist_detection_rate", m.wrist_detection_rate},
                       {"detections_per_snapshot", m.detections_per_snapshot}};
        Json kinds;
        for (const auto& [k, n] : m.by_kind)
            kinds[k] = n;
        j["commands"] = {{"total", m.commands},
                         {"by_kind", kinds},
                         {"speech_originated", m.speech_originated},
                         {"gesture_originated", m.gesture_originated},
                         {"operator_originated", m.operator_originated},
                         {"co_speech", m.co_speech}};
        j["faults"] = {{"unresolved", m.unresolved},
                       {"stale_scene", m.stale},
                       {"superseded", m.superseded},
                       {"grammar_errors", m.grammar_errors},
                       {"rejected", m.rejected},
                       {"warnings", m.warnings}};
        j["latency"] = {{"command", stats_json(m.command_latency)},
                        {"recognition", stats_json(m.recognition_latency)},
                        {"halt_response", stats_json(m.halt_response)}};
        j["completed_commands"] = m.completed;
        j["scenario_complete"] = m.scenario_complete;
        j["end_time"] = m.end_time;
        if (m.expectations_met)
        {
            j["expectations_met"] = *m.expectations_met;
            j["expectation_errors"] = m.expectation_errors;
        }
        if (m.recorded_outputs_match)
            j["recorded_outputs_match"] = *m.recorded_outputs_match;
        return j;
    }

    inline std::string report_text(const Metrics& m)
    {
        std::ostringstream os;
        os << std::fixed << std::setprecision(3);
        auto row = [&](const std::string& name, auto value) { os << "  " << std::left << std::setw(22) << name << ' ' << value << '\n'; };
        auto stats = [&](const std::string& name, const SummaryStats& s) {
            os << "  " << std::left << std::setw(22) << name << " n=" << s.count << " mean=" << s.mean << " median=" << s.median
               << " min=" << s.min << " max=" << s.max << '\n';
        };
        os << "inputs: " << m.utterances << " utterances, " << m.skeleton_frames << " skeleton frames, " << m.snapshots
           << " snapshots\n";
        row("wrist detection rate", m.wrist_detection_rate);
        row("detections/snapshot", m.detections_per_snapshot);
        os << "commands: " << m.commands << '\n';
        for (const auto& [k, n] : m.by_kind)
            row(k, n);
        row("speech-originated", m.speech_originated);
        row("gesture-originated", m.gesture_originated);
        row("operator-originated", m.operator_originated);
        row("co-speech groundings", m.co_speech);
        os << "faults:\n";
        row("unresolved", m.unresolved);
        row("stale scene", m.stale);
        row("superseded", m.superseded);
        row("grammar errors", m.grammar_errors);
        row("rejected", m.rejected);
        row("warnings", m.warnings);
        os << "latency (s):\n";
        stats("command", m.command_latency);
        stats("recognition", m.recognition_latency);
        stats("halt response", m.halt_response);
        os << "completed commands: " << m.completed << '\n';
        os << "scenario complete: " << (m.scenario_complete ? "yes" : "no") << '\n';
        os << "end time: " << m.end_time << " s\n";
        if (m.expectations_met)
        {
            os << "expectations: " << (*m.expectations_met ? "met" : "FAILED") << '\n';
            for (const auto& e : m.expectation_errors)
                os << "  " << e << '\n';
        }
        if (m.recorded_outputs_match)
            os << "recorded outputs: " << (*m.recorded_outputs_match ? "match" : "DIFFER") << '\n';
        return os.str();
    }
} // namespace cogest
