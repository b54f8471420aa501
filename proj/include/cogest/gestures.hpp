#pragma once

#include "cogest/core.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace cogest
{
    enum class Wrist
    {
        Left,
        Right
    };

    enum class WristRequirement
    {
        Left,
        Right,
        Either
    };

    enum class ZoneRole
    {
        Stop,
        Continue,
        PointLeft,
        PointRight
    };

    constexpr std::string_view to_string(Wrist w) noexcept { return w == Wrist::Left ? "left" : "right"; }

    constexpr std::string_view to_string(ZoneRole r) noexcept
    {
        switch (r)
        {
        case ZoneRole::Stop: return "stop";
        case ZoneRole::Continue: return "continue";
        case ZoneRole::PointLeft: return "point_left";
        case ZoneRole::PointRight: return "point_right";
        }
        return "?";
    }

    constexpr bool accepts(WristRequirement req, Wrist w) noexcept
    {
        return req == WristRequirement::Either || (req == WristRequirement::Left) == (w == Wrist::Left);
    }

    constexpr bool is_pointing_zone(ZoneRole r) noexcept { return r == ZoneRole::PointLeft || r == ZoneRole::PointRight; }

    struct TriggerZone
    {
        ZoneRole role = ZoneRole::Stop;
        ImageRect rect;
        WristRequirement wrist = WristRequirement::Either;
        int debounce_frames = 5;

        friend bool operator==(const TriggerZone&, const TriggerZone&) = default;
    };

    class ZoneSet
    {
    public:
        ZoneSet() = default;
        explicit ZoneSet(std::vector<TriggerZone> zones) : zones_(std::move(zones)) { validate(); }

        // Four corner squares of side min(W,H)/4, inset 5% from the image borders.
        static ZoneSet standard(double width = 1920.0, double height = 1080.0, int debounce_frames = 5)
        {
            const double side = std::min(width, height) / 4.0;
            const double ix = 0.05 * width;
            const double iy = 0.05 * height;
            const double left = ix;
            const double right = width - ix - side;
            const double top = iy;
            const double bottom = height - iy - side;
            auto sq = [side](double x, double y) { return ImageRect{x, y, x + side, y + side}; };
            return ZoneSet({
                {ZoneRole::Stop, sq(left, top), WristRequirement::Left, debounce_frames},
                {ZoneRole::Continue, sq(right, top), WristRequirement::Right, debounce_frames},
                {ZoneRole::PointLeft, sq(left, bottom), WristRequirement::Either, debounce_frames},
                {ZoneRole::PointRight, sq(right, bottom), WristRequirement::Either, debounce_frames},
            });
        }

        void validate() const
        {
            for (std::size_t i = 0; i < zones_.size(); ++i)
            {
                const auto& z = zones_[i];
                if (!z.rect.valid())
                    throw Error(ErrorCode::InvalidConfig, "zone rectangle is inverted");
                if (z.debounce_frames < 1)
                    throw Error(ErrorCode::InvalidConfig, "debounce_frames must be positive");
                if (z.role == ZoneRole::Stop && z.wrist != WristRequirement::Left)
                    throw Error(ErrorCode::InvalidConfig, "stop zone requires the left wrist");
                if (z.role == ZoneRole::Continue && z.wrist != WristRequirement::Right)
                    throw Error(ErrorCode::InvalidConfig, "continue zone requires the right wrist");
                if (is_pointing_zone(z.role) && z.wrist != WristRequirement::Either)
                    throw Error(ErrorCode::InvalidConfig, "pointing zones accept either wrist");
                for (std::size_t j = 0; j < i; ++j)
                {
                    if (zones_[j].role == z.role)
                        throw Error(ErrorCode::InvalidConfig, "duplicate zone role");
                    if (zones_[j].rect.intersects(z.rect))
                        throw Error(ErrorCode::InvalidConfig, "zones must be pairwise disjoint");
                }
            }
        }

        const std::vector<TriggerZone>& zones() const noexcept { return zones_; }

        const TriggerZone* find(ZoneRole role) const
        {
            for (const auto& z : zones_)
                if (z.role == role)
                    return &z;
            return nullptr;
        }

    private:
        std::vector<TriggerZone> zones_;
    };

    struct SkeletonObservation
    {
        Seconds timestamp = 0.0;
        std::optional<ImagePoint> wrist_left;
        std::optional<ImagePoint> wrist_right;
        double confidence_left = 1.0;
        double confidence_right = 1.0;

        // Wrist position, or nullopt if missing or below the confidence gate.
        std::optional<ImagePoint> wrist(Wrist w, double min_confidence) const
        {
            const auto& p = w == Wrist::Left ? wrist_left : wrist_right;
            const double c = w == Wrist::Left ? confidence_left : confidence_right;
            if (!p || c < min_confidence)
                return std::nullopt;
            return p;
        }
    };

    struct ZoneHit
    {
        ZoneRole role;
        Wrist wrist;

        friend bool operator==(const ZoneHit&, const ZoneHit&) = default;
    };

    inline std::vector<ZoneHit> classify(const SkeletonObservation& obs, const ZoneSet& zones, double min_confidence = 0.3)
    {
        std::vector<ZoneHit> hits;
        for (Wrist w : {Wrist::Left, Wrist::Right})
        {
            const auto p = obs.wrist(w, min_confidence);
            if (!p)
                continue;
            for (const auto& z : zones.zones())
                if (accepts(z.wrist, w) && z.rect.contains(*p))
                    hits.push_back({z.role, w});
        }
        return hits;
    }

    // Consecutive-run debouncer over a hit/miss stream: fires on the Nth
    // consecutive hit, then stays latched until at least one miss.
    class RunDebouncer
    {
    public:
        explicit RunDebouncer(int frames) : frames_(frames)
        {
            if (frames < 1)
                throw Error(ErrorCode::InvalidParams, "debounce frames must be positive");
        }

        bool feed(bool hit)
        {
            if (!hit)
            {
                run_ = 0;
                latched_ = false;
                return false;
            }
            if (latched_)
                return false;
            if (++run_ >= frames_)
            {
                latched_ = true;
                run_ = 0;
                return true;
            }
            return false;
        }

    private:
        int frames_;
        int run_ = 0;
        bool latched_ = false;
    };

    // Zero-based indices of the frames at which the debouncer fires.
    inline std::vector<std::size_t> debounce(const std::vector<bool>& hits, int frames)
    {
        RunDebouncer d(frames);
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < hits.size(); ++i)
            if (d.feed(hits[i]))
                out.push_back(i);
        return out;
    }

    // Per-frame state of one (zone, wrist) channel.
    enum class ZoneSample
    {
        Inside,
        Outside, // wrist detected elsewhere
        Absent   // wrist not detected this frame
    };

    // RunDebouncer on a three-valued stream: any non-Inside frame breaks the
    // run, but only an Outside frame (the wrist seen leaving) re-arms after a
    // trigger. Detector dropout while the wrist is held in a zone cannot re-fire.
    class ZoneLatch
    {
    public:
        explicit ZoneLatch(int frames) : frames_(frames)
        {
            if (frames < 1)
                throw Error(ErrorCode::InvalidParams, "debounce frames must be positive");
        }

        bool feed(ZoneSample s)
        {
            if (s != ZoneSample::Inside)
            {
                run_ = 0;
                if (s == ZoneSample::Outside)
                    latched_ = false;
                return false;
            }
            if (latched_)
                return false;
            if (++run_ >= frames_)
            {
                latched_ = true;
                run_ = 0;
                return true;
            }
            return false;
        }

        bool latched() const noexcept { return latched_; }

    private:
        int frames_;
        int run_ = 0;
        bool latched_ = false;
    };

    enum class TriggerKind
    {
        Stop,
        Continue,
        PointingArmed
    };

    constexpr std::string_view to_string(TriggerKind k) noexcept
    {
        switch (k)
        {
        case TriggerKind::Stop: return "Stop";
        case TriggerKind::Continue: return "Continue";
        case TriggerKind::PointingArmed: return "PointingArmed";
        }
        return "?";
    }

    struct GestureTrigger
    {
        TriggerKind kind = TriggerKind::Stop;
        Wrist wrist = Wrist::Left;
        Seconds timestamp = 0.0;
        ImagePoint anchor;
        std::uint64_t id = 0; // seq of the frame that completed the run
    };

    constexpr TriggerKind trigger_kind(ZoneRole r) noexcept
    {
        switch (r)
        {
        case ZoneRole::Stop: return TriggerKind::Stop;
        case ZoneRole::Continue: return TriggerKind::Continue;
        default: return TriggerKind::PointingArmed;
        }
    }

    class GestureDetector
    {
    public:
        explicit GestureDetector(ZoneSet zones, double min_confidence = 0.3)
            : zones_(std::move(zones)), min_confidence_(min_confidence)
        {
            for (const auto& z : zones_.zones())
                for (Wrist w : {Wrist::Left, Wrist::Right})
                    if (accepts(z.wrist, w))
                        latches_.emplace(std::pair{z.role, w}, ZoneLatch(z.debounce_frames));
        }

        const ZoneSet& zones() const noexcept { return zones_; }
        double min_confidence() const noexcept { return min_confidence_; }

        // Frames must arrive in timestamp order.
        std::vector<GestureTrigger> feed(const SkeletonObservation& obs, std::uint64_t frame_id = 0)
        {
            std::vector<GestureTrigger> out;
            for (const auto& z : zones_.zones())
                for (Wrist w : {Wrist::Left, Wrist::Right})
                {
                    auto it = latches_.find(std::pair{z.role, w});
                    if (it == latches_.end())
                        continue;
                    const auto p = obs.wrist(w, min_confidence_);
                    const ZoneSample s = !p ? ZoneSample::Absent : z.rect.contains(*p) ? ZoneSample::Inside
                                                                                        : ZoneSample::Outside;
                    if (it->second.feed(s))
                        out.push_back({trigger_kind(z.role), w, obs.timestamp, *p, frame_id});
                }
            return out;
        }

    private:
        ZoneSet zones_;
        double min_confidence_;
        std::map<std::pair<ZoneRole, Wrist>, ZoneLatch> latches_;
    };

    // Monte-Carlo estimate of P(a run of `frames` consecutive detections occurs
    // within `horizon` frames) with independent per-frame detection probability.
    // Draws are common across p, so the estimate is monotone in p for a fixed seed.
    inline double trigger_reliability(double p_frame, int frames, int horizon, int trials, std::uint64_t seed)
    {
        if (!(p_frame >= 0.0 && p_frame <= 1.0) || frames < 1 || horizon < frames || trials < 1)
            throw Error(ErrorCode::InvalidParams, "trigger_reliability: need p in [0,1], 1 <= N <= horizon, trials >= 1");
        Rng rng(seed);
        int fired = 0;
        for (int t = 0; t < trials; ++t)
        {
            RunDebouncer d(frames);
            bool hit = false;
            for (int f = 0; f < horizon; ++f)
            {
                // consume every draw so trials stay aligned across p
                if (d.feed(rng.uniform() < p_frame))
                    hit = true;
            }
            fired += hit ? 1 : 0;
        }
        return static_cast<double>(fired) / static_cast<double>(trials);
    }
} // namespace cogest
