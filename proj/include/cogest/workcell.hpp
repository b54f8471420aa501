#pragma once

#include "cogest/core.hpp"
#include "cogest/fusion.hpp"
#include "cogest/spatial.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cogest
{
    enum class Phase
    {
        Idle,
        MovingToObject,
        Grasping,
        MovingToPlace,
        Releasing,
        MovingToHandover,
        AwaitingHumanTake,
        MovingHome,
        Paused
    };

    constexpr std::string_view to_string(Phase p) noexcept
    {
        switch (p)
        {
        case Phase::Idle: return "Idle";
        case Phase::MovingToObject: return "MovingToObject";
        case Phase::Grasping: return "Grasping";
        case Phase::MovingToPlace: return "MovingToPlace";
        case Phase::Releasing: return "Releasing";
        case Phase::MovingToHandover: return "MovingToHandover";
        case Phase::AwaitingHumanTake: return "AwaitingHumanTake";
        case Phase::MovingHome: return "MovingHome";
        case Phase::Paused: return "Paused";
        }
        return "?";
    }

    constexpr bool is_motion(Phase p) noexcept
    {
        return p == Phase::MovingToObject || p == Phase::MovingToPlace || p == Phase::MovingToHandover ||
               p == Phase::MovingHome;
    }

    constexpr bool is_gripper_op(Phase p) noexcept { return p == Phase::Grasping || p == Phase::Releasing; }

    struct RobotPhase
    {
        Phase phase = Phase::Idle;
        Phase resume_phase = Phase::Idle; // meaningful only while Paused

        bool paused() const noexcept { return phase == Phase::Paused; }

        friend bool operator==(const RobotPhase&, const RobotPhase&) = default;
    };

    inline std::string describe(const RobotPhase& p)
    {
        if (p.paused())
            return "Paused{" + std::string(to_string(p.resume_phase)) + "}";
        return std::string(to_string(p.phase));
    }

    enum class ObjectStatus
    {
        OnTable,
        InGripper,
        Placed,
        WithHuman
    };

    constexpr std::string_view to_string(ObjectStatus s) noexcept
    {
        switch (s)
        {
        case ObjectStatus::OnTable: return "OnTable";
        case ObjectStatus::InGripper: return "InGripper";
        case ObjectStatus::Placed: return "Placed";
        case ObjectStatus::WithHuman: return "WithHuman";
        }
        return "?";
    }

    struct SceneObject
    {
        int id = 0;
        ObjectClass object_class;
        TablePoint pose;
        ObjectStatus status = ObjectStatus::OnTable;

        friend bool operator==(const SceneObject&, const SceneObject&) = default;
    };

    struct SceneState
    {
        std::map<int, SceneObject> objects;
        TablePoint place_location{1100.0, 600.0};
        std::string home_pose = "home";
        std::string handover_pose = "handover";

        friend bool operator==(const SceneState&, const SceneState&) = default;
    };

    struct SimConfig
    {
        Seconds tick = 1.0 / 24.0;
        Seconds move_duration = 3.0;
        Seconds grasp_duration = 1.0;
        Seconds release_duration = 1.0;
        Seconds human_take_delay = 2.0;

        void validate() const
        {
            if (!(tick > 0.0) || !(move_duration > 0.0) || !(grasp_duration > 0.0) || !(release_duration > 0.0) ||
                !(human_take_delay > 0.0))
                throw Error(ErrorCode::InvalidConfig, "simulator durations must be positive");
        }

        // Whole ticks covering a duration (at least one).
        std::int64_t ticks(Seconds d) const
        {
            return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(d / tick)));
        }
    };

    // Noise model of the simulated top-down detector.
    struct DetectionNoise
    {
        double p_detect = 0.9;
        double jitter_px = 2.0;
        std::uint64_t seed = 0;
    };

    enum class SimEventKind
    {
        PhaseChanged,
        ObjectMoved,
        CommandStarted,
        CommandCompleted,
        CommandRejected,
        Warning
    };

    constexpr std::string_view to_string(SimEventKind k) noexcept
    {
        switch (k)
        {
        case SimEventKind::PhaseChanged: return "PhaseChanged";
        case SimEventKind::ObjectMoved: return "ObjectMoved";
        case SimEventKind::CommandStarted: return "CommandStarted";
        case SimEventKind::CommandCompleted: return "CommandCompleted";
        case SimEventKind::CommandRejected: return "CommandRejected";
        case SimEventKind::Warning: return "Warning";
        }
        return "?";
    }

    struct SimEvent
    {
        SimEventKind kind = SimEventKind::PhaseChanged;
        Seconds time = 0.0;
        std::int64_t tick = 0;
        RobotPhase from;
        RobotPhase to;
        std::optional<int> object_id;
        std::optional<ObjectStatus> status;
        std::optional<TablePoint> pose;
        std::optional<std::uint64_t> command_id;
        std::string detail;

        friend bool operator==(const SimEvent&, const SimEvent&) = default;
    };

    // Fixed-duration-leg model of the collaborative robot. Time advances only
    // through tick(); Halt/Resume act immediately on submit.
    class Workcell
    {
    public:
        Workcell() : Workcell(SceneState{}, SimConfig{}) {}

        Workcell(SceneState scene, SimConfig config) : scene_(std::move(scene)), config_(config)
        {
            config_.validate();
        }

        const SceneState& scene() const noexcept { return scene_; }
        const SimConfig& config() const noexcept { return config_; }
        const RobotPhase& phase() const noexcept { return phase_; }
        std::int64_t tick_index() const noexcept { return tick_; }
        Seconds time() const noexcept { return static_cast<double>(tick_) * config_.tick; }
        const std::deque<RobotCommand>& queue() const noexcept { return queue_; }
        const std::optional<RobotCommand>& active() const noexcept { return active_; }
        std::int64_t remaining_ticks() const noexcept { return remaining_; }
        bool halt_pending() const noexcept { return halt_pending_; }

        bool idle() const noexcept { return phase_.phase == Phase::Idle && queue_.empty() && !active_; }

        std::optional<int> gripper_contents() const
        {
            for (const auto& [id, o] : scene_.objects)
                if (o.status == ObjectStatus::InGripper)
                    return id;
            return std::nullopt;
        }

        // Queues a motion command, or applies Halt/Resume at once. Throws
        // ObjectUnavailable for a pick-type command whose object is not on the table.
        std::vector<SimEvent> submit(const RobotCommand& cmd, Seconds now)
        {
            std::vector<SimEvent> out;
            switch (cmd.kind)
            {
            case CommandKind::Halt:
                halt(cmd, now, out);
                return out;
            case CommandKind::Resume:
                resume(cmd, now, out);
                return out;
            case CommandKind::PickPlace:
            case CommandKind::Handover:
            {
                if (!cmd.object_id)
                    throw Error(ErrorCode::ObjectUnavailable, "command carries no object id");
                auto it = scene_.objects.find(*cmd.object_id);
                if (it == scene_.objects.end())
                    throw Error(ErrorCode::ObjectUnavailable, "object " + std::to_string(*cmd.object_id) + " does not exist");
                if (it->second.status != ObjectStatus::OnTable)
                    throw Error(ErrorCode::ObjectUnavailable, "object " + std::to_string(*cmd.object_id) + " is " +
                                                                  std::string(to_string(it->second.status)));
                break;
            }
            case CommandKind::GoHome:
                break;
            }
            queue_.push_back(cmd);
            return out;
        }

        std::vector<SimEvent> tick()
        {
            ++tick_;
            std::vector<SimEvent> out;
            if (phase_.paused())
                return out;

            if (phase_.phase == Phase::Idle)
            {
                start_next(out);
                return out;
            }

            if (--remaining_ > 0)
                return out;
            advance_phase(out);
            return out;
        }

        // Each on-table object is detected independently; order is by id.
        ObjectDetectionSnapshot snapshot_detections(const DetectionNoise& noise, std::int64_t tick_index,
                                                    Seconds timestamp) const
        {
            Rng rng(mix_seed(noise.seed, static_cast<std::uint64_t>(tick_index)));
            ObjectDetectionSnapshot snap;
            snap.timestamp = timestamp;
            for (const auto& [id, o] : scene_.objects)
            {
                // fixed draw count per object keeps streams aligned across p_detect
                const double u = rng.uniform();
                const double jx = rng.uniform(-noise.jitter_px, noise.jitter_px);
                const double jy = rng.uniform(-noise.jitter_px, noise.jitter_px);
                const double conf = 0.8 + 0.2 * rng.uniform();
                if (o.status != ObjectStatus::OnTable || !(u < noise.p_detect))
                    continue;
                const auto [hw, hh] = half_extent(o.object_class);
                const TablePoint c{o.pose.x + jx, o.pose.y + jy};
                snap.detections.push_back({id, o.object_class, TableRect{c.x - hw, c.y - hh, c.x + hw, c.y + hh}, conf});
            }
            return snap;
        }

        static std::pair<double, double> half_extent(const ObjectClass& cls)
        {
            if (cls == ObjectClass::rod())
                return {40.0, 10.0};
            if (cls == ObjectClass::rocker_arm())
                return {25.0, 25.0};
            return {20.0, 20.0};
        }

    private:
        SimEvent event(SimEventKind kind, Seconds at) const
        {
            SimEvent e;
            e.kind = kind;
            e.time = at;
            e.tick = tick_;
            e.from = phase_;
            e.to = phase_;
            return e;
        }

        void set_phase(RobotPhase next, Seconds at, std::vector<SimEvent>& out)
        {
            if (next == phase_)
                return;
            SimEvent e = event(SimEventKind::PhaseChanged, at);
            e.from = phase_;
            e.to = next;
            if (active_)
                e.command_id = active_->id;
            phase_ = next;
            out.push_back(std::move(e));
        }

        void enter(Phase p, Seconds duration, std::vector<SimEvent>& out)
        {
            set_phase({p, Phase::Idle}, time(), out);
            remaining_ = config_.ticks(duration);
        }

        void halt(const RobotCommand& cmd, Seconds now, std::vector<SimEvent>& out)
        {
            if (phase_.paused() || halt_pending_)
            {
                SimEvent w = event(SimEventKind::Warning, now);
                w.command_id = cmd.id;
                w.detail = "AlreadyPaused";
                out.push_back(std::move(w));
                return;
            }
            if (is_gripper_op(phase_.phase))
            {
                // gripper operations are atomic; pause once this one finishes
                halt_pending_ = true;
                return;
            }
            set_phase({Phase::Paused, phase_.phase}, now, out);
        }

        void resume(const RobotCommand& cmd, Seconds now, std::vector<SimEvent>& out)
        {
            if (halt_pending_)
            {
                halt_pending_ = false;
                return;
            }
            if (!phase_.paused())
            {
                SimEvent w = event(SimEventKind::Warning, now);
                w.command_id = cmd.id;
                w.detail = "NotPaused";
                out.push_back(std::move(w));
                return;
            }
            set_phase({phase_.resume_phase, Phase::Idle}, now, out);
        }

        void start_next(std::vector<SimEvent>& out)
        {
            while (!queue_.empty())
            {
                RobotCommand cmd = queue_.front();
                queue_.pop_front();
                if (cmd.object_id)
                {
                    auto it = scene_.objects.find(*cmd.object_id);
                    if (it == scene_.objects.end() || it->second.status != ObjectStatus::OnTable)
                    {
                        SimEvent r = event(SimEventKind::CommandRejected, time());
                        r.command_id = cmd.id;
                        r.object_id = cmd.object_id;
                        r.detail = "ObjectUnavailable";
                        out.push_back(std::move(r));
                        continue;
                    }
                }
                active_ = cmd;
                SimEvent s = event(SimEventKind::CommandStarted, time());
                s.command_id = cmd.id;
                s.object_id = cmd.object_id;
                out.push_back(std::move(s));
                if (cmd.kind == CommandKind::GoHome)
                    enter(Phase::MovingHome, config_.move_duration, out);
                else
                    enter(Phase::MovingToObject, config_.move_duration, out);
                return;
            }
        }

        void move_object(int id, ObjectStatus status, std::optional<TablePoint> pose, std::vector<SimEvent>& out)
        {
            auto& o = scene_.objects.at(id);
            o.status = status;
            if (pose)
                o.pose = *pose;
            SimEvent e = event(SimEventKind::ObjectMoved, time());
            e.object_id = id;
            e.status = status;
            e.pose = o.pose;
            if (active_)
                e.command_id = active_->id;
            out.push_back(std::move(e));
        }

        void complete(std::vector<SimEvent>& out)
        {
            SimEvent e = event(SimEventKind::CommandCompleted, time());
            e.command_id = active_->id;
            e.object_id = active_->object_id;
            set_phase({Phase::Idle, Phase::Idle}, time(), out);
            out.push_back(std::move(e));
            active_.reset();
            remaining_ = 0;
        }

        TablePoint place_slot() const
        {
            int placed = 0;
            for (const auto& [id, o] : scene_.objects)
                placed += o.status == ObjectStatus::Placed ? 1 : 0;
            // small fan-out around the place location
            return {scene_.place_location.x + 15.0 * static_cast<double>(placed % 4),
                    scene_.place_location.y + 15.0 * static_cast<double>(placed / 4)};
        }

        void advance_phase(std::vector<SimEvent>& out)
        {
            const bool handover = active_ && active_->kind == CommandKind::Handover;
            switch (phase_.phase)
            {
            case Phase::MovingToObject:
                enter(Phase::Grasping, config_.grasp_duration, out);
                break;
            case Phase::Grasping:
                move_object(*active_->object_id, ObjectStatus::InGripper, std::nullopt, out);
                enter(handover ? Phase::MovingToHandover : Phase::MovingToPlace, config_.move_duration, out);
                break;
            case Phase::MovingToPlace:
                enter(Phase::Releasing, config_.release_duration, out);
                break;
            case Phase::Releasing:
                move_object(*active_->object_id, ObjectStatus::Placed, place_slot(), out);
                complete(out);
                break;
            case Phase::MovingToHandover:
                enter(Phase::AwaitingHumanTake, config_.human_take_delay, out);
                break;
            case Phase::AwaitingHumanTake:
                move_object(*active_->object_id, ObjectStatus::WithHuman, std::nullopt, out);
                complete(out);
                break;
            case Phase::MovingHome:
                complete(out);
                break;
            case Phase::Idle:
            case Phase::Paused:
                break;
            }
            if (halt_pending_ && !is_gripper_op(phase_.phase))
            {
                halt_pending_ = false;
                set_phase({Phase::Paused, phase_.phase}, time(), out);
            }
        }

        SceneState scene_;
        SimConfig config_;
        RobotPhase phase_;
        std::deque<RobotCommand> queue_;
        std::optional<RobotCommand> active_;
        std::int64_t remaining_ = 0;
        std::int64_t tick_ = 0;
        bool halt_pending_ = false;
    };
} // namespace cogest
