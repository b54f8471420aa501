#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace cogest
{
    // Session clock, in seconds.
    using Seconds = double;

    enum class ErrorCode
    {
        // command grammar
        NoVerb,
        AmbiguousIntent,
        MissingObject,
        InvalidVocabulary,
        // speech channel
        OutOfOrder,
        // gestures / parameters
        InvalidParams,
        // spatial resolver
        DegenerateConfiguration,
        InsufficientPoints,
        PointAtInfinity,
        NoCandidate,
        // fusion
        UnresolvedReference,
        StaleScene,
        // workcell
        ObjectUnavailable,
        // harness
        MalformedTrace,
        ExpectationFailed,
        InvalidSpec,
        InvalidConfig,
        // session service
        SessionEnded,
        MalformedMessage,
    };

    constexpr std::string_view to_string(ErrorCode code) noexcept
    {
        switch (code)
        {
        case ErrorCode::NoVerb: return "NoVerb";
        case ErrorCode::AmbiguousIntent: return "AmbiguousIntent";
        case ErrorCode::MissingObject: return "MissingObject";
        case ErrorCode::InvalidVocabulary: return "InvalidVocabulary";
        case ErrorCode::OutOfOrder: return "OutOfOrder";
        case ErrorCode::InvalidParams: return "InvalidParams";
        case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
        case ErrorCode::InsufficientPoints: return "InsufficientPoints";
        case ErrorCode::PointAtInfinity: return "PointAtInfinity";
        case ErrorCode::NoCandidate: return "NoCandidate";
        case ErrorCode::UnresolvedReference: return "UnresolvedReference";
        case ErrorCode::StaleScene: return "StaleScene";
        case ErrorCode::ObjectUnavailable: return "ObjectUnavailable";
        case ErrorCode::MalformedTrace: return "MalformedTrace";
        case ErrorCode::ExpectationFailed: return "ExpectationFailed";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::SessionEnded: return "SessionEnded";
        case ErrorCode::MalformedMessage: return "MalformedMessage";
        }
        return "Unknown";
    }

    class Error : public std::runtime_error
    {
    public:
        Error(ErrorCode code, const std::string& detail)
            : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail)
        {
        }

        ErrorCode code() const noexcept { return code_; }
        const std::string& detail() const noexcept { return detail_; }

    private:
        ErrorCode code_;
        std::string detail_;
    };

    // Camera frame tags. Points and rectangles are typed by the image they live in
    // so a front-camera wrist position cannot be compared against a top-down bbox.
    struct FrontCamera
    {
    };
    struct TopDownCamera
    {
    };

    template <class Frame>
    struct Point
    {
        double x = 0.0;
        double y = 0.0;

        friend bool operator==(const Point&, const Point&) = default;
    };

    template <class Frame>
    double squared_distance(const Point<Frame>& a, const Point<Frame>& b) noexcept
    {
        const double dx = a.x - b.x;
        const double dy = a.y - b.y;
        return dx * dx + dy * dy;
    }

    template <class Frame>
    double distance(const Point<Frame>& a, const Point<Frame>& b) noexcept
    {
        return std::sqrt(squared_distance(a, b));
    }

    using ImagePoint = Point<FrontCamera>;
    using TablePoint = Point<TopDownCamera>;

    // Axis-aligned rectangle, inclusive of its edges.
    template <class Frame>
    struct Rect
    {
        double x0 = 0.0;
        double y0 = 0.0;
        double x1 = 0.0;
        double y1 = 0.0;

        bool contains(const Point<Frame>& p) const noexcept
        {
            return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
        }
        bool intersects(const Rect& o) const noexcept
        {
            return !(o.x0 > x1 || o.x1 < x0 || o.y0 > y1 || o.y1 < y0);
        }
        bool valid() const noexcept { return x1 >= x0 && y1 >= y0; }
        Point<Frame> center() const noexcept { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }

        friend bool operator==(const Rect&, const Rect&) = default;
    };

    using ImageRect = Rect<FrontCamera>;
    using TableRect = Rect<TopDownCamera>;

    // Object class label ("rod", "rocker_arm", ...). Kept open so vocabularies can add classes.
    class ObjectClass
    {
    public:
        ObjectClass() = default;
        explicit ObjectClass(std::string label) : label_(std::move(label)) {}

        static ObjectClass rod() { return ObjectClass("rod"); }
        static ObjectClass rocker_arm() { return ObjectClass("rocker_arm"); }

        const std::string& label() const noexcept { return label_; }

        friend bool operator==(const ObjectClass&, const ObjectClass&) = default;
        friend auto operator<=>(const ObjectClass&, const ObjectClass&) = default;

    private:
        std::string label_;
    };

    // Deterministic random helpers. std distributions are implementation-defined,
    // so draws are derived directly from the engine's raw output.
    inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept
    {
        std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

        // Uniform in [0, 1).
        double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
        double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
        bool bernoulli(double p) { return uniform() < p; }

        double normal(double mean, double sigma)
        {
            if (spare_)
            {
                const double v = *spare_;
                spare_.reset();
                return mean + sigma * v;
            }
            double u1 = uniform();
            while (u1 <= 0.0)
                u1 = uniform();
            const double u2 = uniform();
            const double r = std::sqrt(-2.0 * std::log(u1));
            const double theta = 2.0 * 3.14159265358979323846 * u2;
            spare_ = r * std::sin(theta);
            return mean + sigma * r * std::cos(theta);
        }

    private:
        std::mt19937_64 engine_;
        std::optional<double> spare_;
    };
} // namespace cogest
