#pragma once

#include "cogest/config.hpp"
#include "cogest/fusion.hpp"
#include "cogest/gestures.hpp"
#include "cogest/grammar.hpp"
#include "cogest/speech.hpp"
#include "cogest/trace.hpp"
#include "cogest/workcell.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

namespace cogest
{
    struct EngineOutput
    {
        Seconds t = 0.0;
        RecordKind kind = RecordKind::Command;
        Json payload;
    };

    // The full pipeline: speech channel, grammar, gesture zones, homography,
    // fusion and workcell, driven by timestamped input records. Internal timed
    // work (segmenter deadlines, recognitions, pairing expiry, simulator ticks)
    // runs in time order inside advance_to(), so results do not depend on how
    // the caller chunks time.
    class Engine
    {
    public:
        using Sink = std::function<void(const EngineOutput&)>;

        Engine(HarnessConfig config, SceneState scene)
            : config_(std::move(config)),
              speech_(config_.speech),
              detector_(config_.gestures.zone_set(), config_.gestures.min_confidence),
              fusion_(config_.fusion),
              workcell_(std::move(scene), config_.sim)
        {
            config_.validate();
        }

        void set_sink(Sink sink) { sink_ = std::move(sink); }

        const HarnessConfig& config() const noexcept { return config_; }
        const Workcell& workcell() const noexcept { return workcell_; }
        const FusionEngine& fusion() const noexcept { return fusion_; }
        const GestureDetector& detector() const noexcept { return detector_; }
        Seconds now() const noexcept { return now_; }

        const std::vector<RobotCommand>& commands() const noexcept { return commands_; }
        const std::vector<SimEvent>& sim_events() const noexcept { return sim_events_; }
        const std::vector<EngineFault>& faults() const noexcept { return faults_; }
        const std::vector<SpeechTranscript>& transcripts() const noexcept { return transcripts_; }
        const std::vector<EngineOutput>& outputs() const noexcept { return outputs_; }

        // Runs all internal work scheduled at or before t.
        void advance_to(Seconds t)
        {
            if (t < now_)
                throw Error(ErrorCode::OutOfOrder, "cannot advance from " + std::to_string(now_) + " back to " +
                                                       std::to_string(t));
            for (;;)
            {
                // ties resolve in this order: segmenter, recognition, tick, pairing expiry
                Seconds best = std::numeric_limits<double>::infinity();
                int which = -1;
                auto offer = [&](std::optional<Seconds> at, int id, bool strict) {
                    if (!at || (strict ? !(*at < t) : !(*at <= t)))
                        return;
                    if (*at < best)
                    {
                        best = *at;
                        which = id;
                    }
                };
                offer(speech_.deadline(), 0, false);
                offer(recognitions_.empty() ? std::nullopt : std::optional<Seconds>(recognitions_.top().recognized_at), 1,
                      false);
                offer(next_tick_time(), 2, false);
                offer(fusion_.next_deadline(), 3, true);
                if (which < 0)
                    break;
                now_ = std::max(now_, best);
                switch (which)
                {
                case 0:
                    if (auto u = speech_.finalize_until(best))
                        recognitions_.push(speech_.recognize(*u));
                    break;
                case 1:
                {
                    const SpeechTranscript tr = recognitions_.top();
                    recognitions_.pop();
                    on_transcript(tr);
                    break;
                }
                case 2:
                    for (auto& e : workcell_.tick())
                        emit_sim(std::move(e));
                    break;
                case 3:
                    expire_pending();
                    break;
                }
            }
            now_ = t;
        }

        // Feeds one input record (seq becomes the event id).
        void ingest(const TraceRecord& r)
        {
            if (!is_input(r.kind))
                throw Error(ErrorCode::MalformedTrace, "line " + std::to_string(r.line) + ": " +
                                                           std::string(to_string(r.kind)) + " is not an input record");
            advance_to(r.t);
            switch (r.kind)
            {
            case RecordKind::Utterance:
                on_utterance(utterance_from(r));
                break;
            case RecordKind::Skeleton:
                on_skeleton(skeleton_from(r), r.seq);
                break;
            case RecordKind::DetectionSnapshot:
                apply(fusion_.ingest(snapshot_from(r)));
                break;
            case RecordKind::Pointing:
                apply(fusion_.ingest(pointing_from(r)));
                break;
            case RecordKind::Operator:
                apply(fusion_.ingest(operator_from(r)));
                break;
            default:
                break;
            }
        }

        // Drains buffered speech and runs the simulator until nothing is left
        // to do (idle, or paused with no pending work), or until `limit` seconds
        // of simulated time have passed.
        void finish(Seconds limit = 600.0)
        {
            if (auto u = speech_.flush())
                recognitions_.push(speech_.recognize(*u));
            const Seconds stop_at = now_ + limit;
            while (now_ < stop_at)
            {
                const bool quiet = workcell_.idle() || workcell_.phase().paused();
                if (recognitions_.empty() && !fusion_.next_deadline() && quiet)
                    break;
                advance_to(*next_tick_time());
            }
        }

        // Current state for a subscriber joining mid-session.
        Json state_json() const
        {
            Json j;
            j["t"] = now_;
            j["phase"] = describe(workcell_.phase());
            j["tick"] = workcell_.tick_index();
            j["halt_pending"] = workcell_.halt_pending();
            j["active"] = workcell_.active() ? Json(workcell_.active()->id) : Json(nullptr);
            Json queue = Json::array();
            for (const auto& c : workcell_.queue())
                queue.push_back(c.id);
            j["queue"] = queue;
            Json scene = to_json(workcell_.scene());
            for (auto& o : scene["objects"])
                if (!o.contains("status"))
                    o["status"] = "OnTable";
            j["scene"] = scene;
            j["consumed_ids"] = Json(std::vector<int>(fusion_.state().consumed_ids.begin(), fusion_.state().consumed_ids.end()));
            Json zones = Json::array();
            for (const auto& z : detector_.zones().zones())
                zones.push_back({{"role", to_string(z.role)}, {"rect", rect_json(z.rect)}});
            j["zones"] = zones;
            const auto& snap = fusion_.state().last_snapshot;
            j["detections"] = snap ? to_payload(*snap)["detections"] : Json::array();
            j["pending_intent"] = fusion_.state().pending_intent ? Json(describe(fusion_.state().pending_intent->event.intent))
                                                                 : Json(nullptr);
            return j;
        }

        // One JSON line per issued command.
        std::string command_log() const
        {
            std::string out;
            for (const auto& c : commands_)
            {
                out += to_payload(c).dump();
                out += '\n';
            }
            return out;
        }

    private:
        struct LaterRecognition
        {
            bool operator()(const SpeechTranscript& a, const SpeechTranscript& b) const
            {
                return a.recognized_at != b.recognized_at ? a.recognized_at > b.recognized_at : a.id > b.id;
            }
        };

        std::optional<Seconds> next_tick_time() const
        {
            return static_cast<double>(workcell_.tick_index() + 1) * config_.sim.tick;
        }

        void emit(Seconds t, RecordKind kind, Json payload)
        {
            outputs_.push_back({t, kind, std::move(payload)});
            if (sink_)
                sink_(outputs_.back());
        }

        void emit_sim(SimEvent e)
        {
            emit(e.time, RecordKind::SimEvent, to_payload(e));
            sim_events_.push_back(std::move(e));
        }

        void fault(EngineFault f)
        {
            emit(f.at, RecordKind::Fault, to_payload(f));
            faults_.push_back(std::move(f));
        }

        void apply(const IngestResult& result)
        {
            for (const auto& f : result.faults)
                fault({std::string(to_string(f.kind)), f.at, f.source_id, f.detail});
            for (const auto& c : result.commands)
            {
                commands_.push_back(c);
                emit(c.issued_at, RecordKind::Command, to_payload(c));
                try
                {
                    for (auto& e : workcell_.submit(c, now_))
                        emit_sim(std::move(e));
                }
                catch (const Error& e)
                {
                    if (e.code() != ErrorCode::ObjectUnavailable)
                        throw;
                    fault({"ObjectUnavailable", now_, c.id, e.detail()});
                }
            }
        }

        void expire_pending()
        {
            // advance fusion just past the deadline without moving the engine clock
            const Seconds d = *fusion_.next_deadline();
            apply(fusion_.ingest(ClockEvent{std::nextafter(d, std::numeric_limits<double>::infinity())}));
        }

        void on_utterance(const UtteranceEvent& u)
        {
            for (const auto& done : speech_.push(u))
                recognitions_.push(speech_.recognize(done));
        }

        void on_transcript(const SpeechTranscript& tr)
        {
            transcripts_.push_back(tr);
            emit(tr.recognized_at, RecordKind::Transcript, to_payload(tr));
            CommandIntent intent;
            try
            {
                intent = parse(tokenize(tr.text, *config_.vocabulary), *config_.vocabulary);
            }
            catch (const Error& e)
            {
                fault({"GrammarError", tr.recognized_at, tr.id, std::string(to_string(e.code())) + ": " + e.detail()});
                return;
            }
            apply(fusion_.ingest(IntentEvent{tr.id, intent, tr.speech_end, tr.recognized_at}));
        }

        void on_skeleton(const SkeletonObservation& obs, std::uint64_t id)
        {
            for (const auto& g : detector_.feed(obs, id))
            {
                if (g.kind != TriggerKind::PointingArmed)
                {
                    apply(fusion_.ingest(g));
                    continue;
                }
                try
                {
                    const TablePoint p = config_.calibration.homography.apply(g.anchor);
                    apply(fusion_.ingest(PointingEvent{g.id, g.timestamp, p}));
                }
                catch (const Error& e)
                {
                    if (e.code() != ErrorCode::PointAtInfinity)
                        throw;
                    fault({"PointAtInfinity", g.timestamp, g.id, e.detail()});
                }
            }
        }

        HarnessConfig config_;
        SpeechChannel speech_;
        GestureDetector detector_;
        FusionEngine fusion_;
        Workcell workcell_;
        Sink sink_;
        Seconds now_ = 0.0;
        std::priority_queue<SpeechTranscript, std::vector<SpeechTranscript>, LaterRecognition> recognitions_;
        std::vector<RobotCommand> commands_;
        std::vector<SimEvent> sim_events_;
        std::vector<EngineFault> faults_;
        std::vector<SpeechTranscript> transcripts_;
        std::vector<EngineOutput> outputs_;
    };
} // namespace cogest
