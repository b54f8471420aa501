#pragma once

#include "cogest/core.hpp"
#include "cogest/gestures.hpp"
#include "cogest/grammar.hpp"
#include "cogest/spatial.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cogest
{
    struct FusionConfig
    {
        Seconds pairing_window = 2.0;     // max |pointing time - utterance end|
        bool gesture_precedence = true;   // pointing may precede the phrase
        Seconds snapshot_staleness = 1.0; // max snapshot age at grounding time
        double max_radius = 150.0;        // top-down px, for pointing resolution

        void validate() const
        {
            if (!(pairing_window > 0.0) || !(snapshot_staleness > 0.0) || !(max_radius > 0.0))
                throw Error(ErrorCode::InvalidConfig, "fusion windows and radius must be positive");
        }
    };

    // A debounced pointing trigger with its anchor already mapped to the table.
    struct PointingEvent
    {
        std::uint64_t id = 0;
        Seconds timestamp = 0.0;
        TablePoint point;
    };

    // A parsed utterance. Ordered in the event stream by recognized_at.
    struct IntentEvent
    {
        std::uint64_t id = 0;
        CommandIntent intent;
        Seconds speech_end = 0.0;
        Seconds recognized_at = 0.0;
    };

    enum class OperatorAction
    {
        Halt,
        Resume
    };

    // Console buttons (HaltNow / ResumeNow).
    struct OperatorSignal
    {
        std::uint64_t id = 0;
        Seconds timestamp = 0.0;
        OperatorAction action = OperatorAction::Halt;
    };

    // Advances the fusion clock without new perception.
    struct ClockEvent
    {
        Seconds now = 0.0;
    };

    using FusionInput = std::variant<IntentEvent, GestureTrigger, PointingEvent, ObjectDetectionSnapshot, OperatorSignal, ClockEvent>;

    inline Seconds timestamp_of(const FusionInput& in)
    {
        struct
        {
            Seconds operator()(const IntentEvent& e) const { return e.recognized_at; }
            Seconds operator()(const GestureTrigger& e) const { return e.timestamp; }
            Seconds operator()(const PointingEvent& e) const { return e.timestamp; }
            Seconds operator()(const ObjectDetectionSnapshot& e) const { return e.timestamp; }
            Seconds operator()(const OperatorSignal& e) const { return e.timestamp; }
            Seconds operator()(const ClockEvent& e) const { return e.now; }
        } visitor;
        return std::visit(visitor, in);
    }

    enum class CommandKind
    {
        PickPlace,
        Handover,
        GoHome,
        Halt,
        Resume
    };

    constexpr std::string_view to_string(CommandKind k) noexcept
    {
        switch (k)
        {
        case CommandKind::PickPlace: return "PickPlace";
        case CommandKind::Handover: return "Handover";
        case CommandKind::GoHome: return "GoHome";
        case CommandKind::Halt: return "Halt";
        case CommandKind::Resume: return "Resume";
        }
        return "?";
    }

    inline std::optional<CommandKind> command_kind_from_string(std::string_view s)
    {
        for (auto k : {CommandKind::PickPlace, CommandKind::Handover, CommandKind::GoHome, CommandKind::Halt, CommandKind::Resume})
            if (to_string(k) == s)
                return k;
        return std::nullopt;
    }

    constexpr bool is_safety(CommandKind k) noexcept { return k == CommandKind::Halt || k == CommandKind::Resume; }

    struct EventRef
    {
        std::uint64_t id = 0;
        Seconds time = 0.0;

        friend bool operator==(const EventRef&, const EventRef&) = default;
    };

    enum class TriggerSource
    {
        Speech,
        Gesture,
        Operator
    };

    // Contributing events. `source` tells which modality issued the command.
    struct Provenance
    {
        TriggerSource source = TriggerSource::Speech;
        std::optional<EventRef> transcript; // time = utterance end
        std::optional<EventRef> trigger;    // gesture trigger or operator signal
        std::optional<EventRef> pointing;
        std::optional<EventRef> snapshot;

        bool empty() const noexcept { return !transcript && !trigger && !pointing && !snapshot; }

        friend bool operator==(const Provenance&, const Provenance&) = default;
    };

    struct RobotCommand
    {
        std::uint64_t id = 0;
        CommandKind kind = CommandKind::Halt;
        std::optional<int> object_id;
        std::string place_target; // PickPlace only
        Provenance provenance;
        Seconds issued_at = 0.0;

        bool co_speech() const noexcept { return provenance.transcript.has_value() && provenance.pointing.has_value(); }

        friend bool operator==(const RobotCommand&, const RobotCommand&) = default;
    };

    enum class FaultKind
    {
        UnresolvedReference,
        StaleScene,
        Superseded
    };

    constexpr std::string_view to_string(FaultKind k) noexcept
    {
        switch (k)
        {
        case FaultKind::UnresolvedReference: return "UnresolvedReference";
        case FaultKind::StaleScene: return "StaleScene";
        case FaultKind::Superseded: return "Superseded";
        }
        return "?";
    }

    struct FusionFault
    {
        FaultKind kind = FaultKind::UnresolvedReference;
        Seconds at = 0.0;
        std::uint64_t source_id = 0; // transcript id of the affected intent
        std::string detail;

        friend bool operator==(const FusionFault&, const FusionFault&) = default;
    };

    struct IngestResult
    {
        std::vector<RobotCommand> commands;
        std::vector<FusionFault> faults;
    };

    // True iff a pointing at `pointing_time` may pair with an utterance ending at `intent_time`.
    inline bool pair(Seconds intent_time, Seconds pointing_time, const FusionConfig& config)
    {
        if (std::abs(pointing_time - intent_time) > config.pairing_window)
            return false;
        if (pointing_time <= intent_time)
            return config.gesture_precedence;
        return true;
    }

    // Binds an object-requiring intent to a detection id.
    //   This/That: nearest detection to the pointing (class-filtered), list order irrelevant.
    //   Another / no deixis: first detection of the class in list order not yet consumed.
    //   Last: last such detection.
    inline int resolve_deixis(const CommandIntent& intent, const std::optional<PointingEvent>& pointing,
                              const ObjectDetectionSnapshot& snapshot, const std::set<int>& consumed,
                              double max_radius = 150.0)
    {
        if (is_pointing_deixis(intent.deixis))
        {
            if (!pointing)
                throw Error(ErrorCode::UnresolvedReference, "deictic reference without a pointing gesture");
            return nearest_object(pointing->point, snapshot, intent.object_class, max_radius);
        }
        auto eligible = [&](const Detection& d) {
            return (!intent.object_class || d.object_class == *intent.object_class) && !consumed.contains(d.id);
        };
        if (intent.deixis == Deixis::Last)
        {
            for (auto it = snapshot.detections.rbegin(); it != snapshot.detections.rend(); ++it)
                if (eligible(*it))
                    return it->id;
        }
        else
        {
            for (const auto& d : snapshot.detections)
                if (eligible(d))
                    return d.id;
        }
        throw Error(ErrorCode::NoCandidate, "no unconsumed " +
                                                (intent.object_class ? intent.object_class->label() : std::string("object")) +
                                                " in the scene");
    }

    struct PendingIntent
    {
        IntentEvent event;
    };

    struct FusionState
    {
        std::optional<PendingIntent> pending_intent;
        std::optional<PointingEvent> armed_pointing;
        std::optional<ObjectDetectionSnapshot> last_snapshot;
        std::set<int> consumed_ids;
        std::set<int> observed_ids;
        Seconds now = 0.0;
        std::uint64_t next_command_id = 1;
    };

    // Single-threaded fusion loop: aligns intents, gesture triggers and
    // detection snapshots into grounded robot commands.
    class FusionEngine
    {
    public:
        explicit FusionEngine(FusionConfig config = {}, std::string place_target = "place")
            : config_(config), place_target_(std::move(place_target))
        {
            config_.validate();
        }

        const FusionConfig& config() const noexcept { return config_; }
        const FusionState& state() const noexcept { return state_; }

        // Earliest time at which a pending intent expires.
        std::optional<Seconds> next_deadline() const
        {
            if (!state_.pending_intent)
                return std::nullopt;
            return state_.pending_intent->event.speech_end + config_.pairing_window;
        }

        IngestResult ingest(const FusionInput& input)
        {
            const Seconds t = timestamp_of(input);
            if (t < state_.now)
                throw Error(ErrorCode::OutOfOrder, "fusion input at " + std::to_string(t) + " precedes clock " +
                                                       std::to_string(state_.now));
            IngestResult out;
            expire(t, out);
            state_.now = t;
            std::visit([&](const auto& ev) { handle(ev, out); }, input);
            return out;
        }

    private:
        void expire(Seconds t, IngestResult& out)
        {
            if (!state_.pending_intent)
                return;
            const auto& ev = state_.pending_intent->event;
            const Seconds deadline = ev.speech_end + config_.pairing_window;
            if (t > deadline)
            {
                out.faults.push_back({FaultKind::UnresolvedReference, deadline, ev.id,
                                      "no pointing gesture within the pairing window for '" + describe(ev.intent) + "'"});
                state_.pending_intent.reset();
            }
        }

        RobotCommand make(CommandKind kind, Provenance prov, Seconds at)
        {
            RobotCommand c;
            c.id = state_.next_command_id++;
            c.kind = kind;
            c.provenance = std::move(prov);
            c.issued_at = at;
            return c;
        }

        static Provenance from_transcript(const IntentEvent& ev)
        {
            Provenance p;
            p.source = TriggerSource::Speech;
            p.transcript = EventRef{ev.id, ev.speech_end};
            return p;
        }

        void handle(const IntentEvent& ev, IngestResult& out)
        {
            const auto& in = ev.intent;
            switch (in.verb)
            {
            case Verb::Stop:
            case Verb::Pause:
                out.commands.push_back(make(CommandKind::Halt, from_transcript(ev), ev.recognized_at));
                return;
            case Verb::Continue:
                out.commands.push_back(make(CommandKind::Resume, from_transcript(ev), ev.recognized_at));
                return;
            case Verb::GoHome:
                out.commands.push_back(make(CommandKind::GoHome, from_transcript(ev), ev.recognized_at));
                return;
            case Verb::Pick:
            case Verb::Place:
            case Verb::Give:
                break;
            }

            if (is_pointing_deixis(in.deixis))
            {
                if (state_.armed_pointing && pair(ev.speech_end, state_.armed_pointing->timestamp, config_))
                {
                    const PointingEvent p = *state_.armed_pointing;
                    state_.armed_pointing.reset();
                    ground(ev, p, ev.recognized_at, out);
                    return;
                }
                // recognition landed after the window closed: nothing later can pair
                if (ev.recognized_at > ev.speech_end + config_.pairing_window)
                {
                    out.faults.push_back({FaultKind::UnresolvedReference, ev.recognized_at, ev.id,
                                          "pairing window closed before '" + describe(in) + "' was recognized"});
                    return;
                }
                if (state_.pending_intent)
                    out.faults.push_back({FaultKind::Superseded, ev.recognized_at, state_.pending_intent->event.id,
                                          "replaced by a newer command"});
                state_.pending_intent = PendingIntent{ev};
                return;
            }
            ground(ev, std::nullopt, ev.recognized_at, out);
        }

        void handle(const GestureTrigger& g, IngestResult& out)
        {
            Provenance p;
            p.source = TriggerSource::Gesture;
            p.trigger = EventRef{g.id, g.timestamp};
            if (g.kind == TriggerKind::Stop)
                out.commands.push_back(make(CommandKind::Halt, p, g.timestamp));
            else if (g.kind == TriggerKind::Continue)
                out.commands.push_back(make(CommandKind::Resume, p, g.timestamp));
            // PointingArmed must be mapped to the table first and arrives as a PointingEvent.
        }

        void handle(const OperatorSignal& s, IngestResult& out)
        {
            Provenance p;
            p.source = TriggerSource::Operator;
            p.trigger = EventRef{s.id, s.timestamp};
            out.commands.push_back(
                make(s.action == OperatorAction::Halt ? CommandKind::Halt : CommandKind::Resume, p, s.timestamp));
        }

        void handle(const PointingEvent& p, IngestResult& out)
        {
            if (state_.pending_intent && pair(state_.pending_intent->event.speech_end, p.timestamp, config_))
            {
                const IntentEvent ev = state_.pending_intent->event;
                state_.pending_intent.reset();
                ground(ev, p, p.timestamp, out);
                return;
            }
            // Pointing alone issues nothing; it waits for a phrase.
            state_.armed_pointing = p;
        }

        void handle(const ObjectDetectionSnapshot& s, IngestResult&)
        {
            for (const auto& d : s.detections)
                state_.observed_ids.insert(d.id);
            state_.last_snapshot = s;
        }

        void handle(const ClockEvent&, IngestResult&) {}

        void ground(const IntentEvent& ev, const std::optional<PointingEvent>& pointing, Seconds at, IngestResult& out)
        {
            const auto& snap = state_.last_snapshot;
            if (!snap || at - snap->timestamp > config_.snapshot_staleness)
            {
                out.faults.push_back({FaultKind::StaleScene, at, ev.id,
                                      snap ? "latest detection snapshot is " + std::to_string(at - snap->timestamp) + " s old"
                                           : std::string("no detection snapshot received")});
                return;
            }
            int id = 0;
            try
            {
                id = resolve_deixis(ev.intent, pointing, *snap, state_.consumed_ids, config_.max_radius);
            }
            catch (const Error& e)
            {
                out.faults.push_back({FaultKind::UnresolvedReference, at, ev.id, e.what()});
                return;
            }
            state_.consumed_ids.insert(id);

            Provenance prov = from_transcript(ev);
            if (pointing)
                prov.pointing = EventRef{pointing->id, pointing->timestamp};
            prov.snapshot = EventRef{snap->id, snap->timestamp};

            const bool handover = ev.intent.verb == Verb::Give;
            RobotCommand cmd = make(handover ? CommandKind::Handover : CommandKind::PickPlace, std::move(prov), at);
            cmd.object_id = id;
            if (!handover)
                cmd.place_target = place_target_;
            out.commands.push_back(std::move(cmd));
        }

        FusionConfig config_;
        std::string place_target_;
        FusionState state_;
    };
} // namespace cogest
