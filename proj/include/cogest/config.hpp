#pragma once

#include "cogest/core.hpp"
#include "cogest/fusion.hpp"
#include "cogest/gestures.hpp"
#include "cogest/grammar.hpp"
#include "cogest/spatial.hpp"
#include "cogest/speech.hpp"
#include "cogest/workcell.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cogest
{
    using Json = nlohmann::ordered_json;

    // ---- calibration file -------------------------------------------------
    //
    //   # comment
    //   homography
    //   h00 h01 h02
    //   h10 h11 h12
    //   h20 h21 h22
    //   correspondences
    //   front_x front_y table_x table_y
    //   ...
    //
    // Either section may be omitted (not both); a missing matrix is fitted
    // from the correspondences.

    inline Calibration parse_calibration(std::istream& in)
    {
        std::vector<double> matrix;
        std::vector<Correspondence> pairs;
        std::string section;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line))
        {
            ++line_no;
            if (auto hash = line.find('#'); hash != std::string::npos)
                line.erase(hash);
            std::istringstream ls(line);
            std::string first;
            if (!(ls >> first))
                continue;
            if (first == "homography" || first == "correspondences")
            {
                section = first;
                continue;
            }
            std::istringstream vs(line);
            std::vector<double> vals;
            double v = 0.0;
            while (vs >> v)
                vals.push_back(v);
            if (!vs.eof())
                throw Error(ErrorCode::InvalidConfig, "calibration line " + std::to_string(line_no) + ": not numeric");
            if (section == "homography" && vals.size() == 3)
                matrix.insert(matrix.end(), vals.begin(), vals.end());
            else if (section == "correspondences" && vals.size() == 4)
                pairs.push_back({{vals[0], vals[1]}, {vals[2], vals[3]}});
            else
                throw Error(ErrorCode::InvalidConfig, "calibration line " + std::to_string(line_no) + ": unexpected row");
        }
        if (!matrix.empty() && matrix.size() != 9)
            throw Error(ErrorCode::InvalidConfig, "homography section needs exactly 3 rows of 3");
        if (matrix.empty())
        {
            if (pairs.empty())
                throw Error(ErrorCode::InvalidConfig, "calibration file has neither a matrix nor correspondences");
            return calibrate(pairs);
        }
        Calibration out;
        std::array<double, 9> rows{};
        std::copy(matrix.begin(), matrix.end(), rows.begin());
        out.homography = Homography::from_rows(rows);
        out.correspondences = pairs;
        if (!pairs.empty())
        {
            double sq = 0.0;
            for (const auto& c : pairs)
                sq += squared_distance(out.homography.apply(c.front), c.table);
            out.rms_error = std::sqrt(sq / static_cast<double>(pairs.size()));
        }
        return out;
    }

    inline std::string format_calibration(const Calibration& cal)
    {
        std::ostringstream os;
        os.precision(17);
        os << "# front camera px -> top-down px\nhomography\n";
        const auto r = cal.homography.rows();
        for (int i = 0; i < 3; ++i)
            os << r[3 * i] << ' ' << r[3 * i + 1] << ' ' << r[3 * i + 2] << '\n';
        if (!cal.correspondences.empty())
        {
            os << "correspondences\n";
            for (const auto& c : cal.correspondences)
                os << c.front.x << ' ' << c.front.y << ' ' << c.table.x << ' ' << c.table.y << '\n';
        }
        return os.str();
    }

    // Lower band of the front image onto the table area of the top-down image.
    inline Calibration default_calibration()
    {
        const std::vector<Correspondence> pairs{
            {{96.0, 756.0}, {80.0, 80.0}},
            {{1824.0, 756.0}, {1200.0, 80.0}},
            {{1824.0, 1026.0}, {1140.0, 640.0}},
            {{96.0, 1026.0}, {140.0, 640.0}},
        };
        return calibrate(pairs);
    }

    // ---- harness configuration ----------------------------------------------

    struct GestureConfig
    {
        double front_width = 1920.0;
        double front_height = 1080.0;
        int debounce_frames = 5;
        double min_confidence = 0.3;
        std::optional<ZoneSet> zones; // defaults to the standard corner squares

        ZoneSet zone_set() const { return zones ? *zones : ZoneSet::standard(front_width, front_height, debounce_frames); }
    };

    struct DetectionFeedConfig
    {
        DetectionNoise noise;
        double rate_hz = 4.5;
    };

    // Synthetic skeleton frames (generator and console).
    struct SkeletonFeedConfig
    {
        double rate_hz = 24.0;
        double p_detect = 0.9;
        double sigma_px = 3.0;
    };

    struct HarnessConfig
    {
        SpeechChannelConfig speech;
        GestureConfig gestures;
        FusionConfig fusion;
        SimConfig sim;
        DetectionFeedConfig detection;
        SkeletonFeedConfig skeleton;
        Calibration calibration = default_calibration();
        std::optional<std::string> vocabulary_file;
        std::shared_ptr<const Vocabulary> vocabulary = std::make_shared<const Vocabulary>(Vocabulary::standard());

        void validate() const
        {
            speech.validate();
            fusion.validate();
            sim.validate();
            gestures.zone_set().validate();
            if (!(gestures.min_confidence >= 0.0 && gestures.min_confidence <= 1.0))
                throw Error(ErrorCode::InvalidConfig, "min_confidence must lie in [0,1]");
            if (!(detection.noise.p_detect >= 0.0 && detection.noise.p_detect <= 1.0) || !(detection.rate_hz > 0.0))
                throw Error(ErrorCode::InvalidConfig, "detection p_detect in [0,1] and rate_hz > 0 required");
            if (!(skeleton.p_detect >= 0.0 && skeleton.p_detect <= 1.0) || !(skeleton.rate_hz > 0.0) ||
                !(skeleton.sigma_px >= 0.0))
                throw Error(ErrorCode::InvalidConfig, "skeleton p_detect in [0,1], rate_hz > 0, sigma_px >= 0 required");
        }
    };

    inline Json rect_json(const ImageRect& r) { return Json::array({r.x0, r.y0, r.x1, r.y1}); }

    inline std::string wrist_requirement_name(WristRequirement w)
    {
        switch (w)
        {
        case WristRequirement::Left: return "left";
        case WristRequirement::Right: return "right";
        case WristRequirement::Either: return "either";
        }
        return "either";
    }

    inline Json to_json(const HarnessConfig& c)
    {
        Json zones = Json::array();
        const ZoneSet zone_set = c.gestures.zone_set();
        for (const auto& z : zone_set.zones())
            zones.push_back({{"role", to_string(z.role)},
                             {"rect", rect_json(z.rect)},
                             {"wrist", wrist_requirement_name(z.wrist)},
                             {"debounce", z.debounce_frames}});
        Json cal;
        const auto rows = c.calibration.homography.rows();
        cal["homography"] = Json(std::vector<double>(rows.begin(), rows.end()));
        Json corr = Json::array();
        for (const auto& p : c.calibration.correspondences)
            corr.push_back({p.front.x, p.front.y, p.table.x, p.table.y});
        cal["correspondences"] = corr;

        Json j;
        j["speech"] = {{"pause_filter", c.speech.pause_filter},
                       {"latency_mean", c.speech.latency_mean},
                       {"latency_jitter", c.speech.latency_jitter},
                       {"seed", c.speech.rng_seed}};
        j["gestures"] = {{"front_width", c.gestures.front_width},
                         {"front_height", c.gestures.front_height},
                         {"debounce_frames", c.gestures.debounce_frames},
                         {"min_confidence", c.gestures.min_confidence},
                         {"zones", zones}};
        j["fusion"] = {{"pairing_window", c.fusion.pairing_window},
                       {"gesture_precedence", c.fusion.gesture_precedence},
                       {"snapshot_staleness", c.fusion.snapshot_staleness},
                       {"max_radius", c.fusion.max_radius}};
        j["sim"] = {{"tick", c.sim.tick},
                    {"move_duration", c.sim.move_duration},
                    {"grasp_duration", c.sim.grasp_duration},
                    {"release_duration", c.sim.release_duration},
                    {"human_take_delay", c.sim.human_take_delay}};
        j["detection"] = {{"p_detect", c.detection.noise.p_detect},
                          {"jitter_px", c.detection.noise.jitter_px},
                          {"seed", c.detection.noise.seed},
                          {"rate_hz", c.detection.rate_hz}};
        j["skeleton"] = {{"rate_hz", c.skeleton.rate_hz}, {"p_detect", c.skeleton.p_detect}, {"sigma_px", c.skeleton.sigma_px}};
        j["calibration"] = cal;
        if (c.vocabulary_file)
            j["vocabulary_file"] = *c.vocabulary_file;
        return j;
    }

    namespace detail
    {
        inline void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed, std::string_view where)
        {
            if (!obj.is_object())
                throw Error(ErrorCode::InvalidConfig, std::string(where) + " must be an object");
            for (const auto& [k, v] : obj.items())
            {
                bool ok = false;
                for (auto a : allowed)
                    ok = ok || a == k;
                if (!ok)
                    throw Error(ErrorCode::InvalidConfig, "unknown key '" + k + "' in " + std::string(where));
            }
        }

        template <class T>
        void read(const Json& obj, const char* key, T& dst)
        {
            if (!obj.contains(key))
                return;
            try
            {
                dst = obj.at(key).get<T>();
            }
            catch (const nlohmann::json::exception& e)
            {
                throw Error(ErrorCode::InvalidConfig, std::string("bad value for '") + key + "': " + e.what());
            }
        }

        inline ZoneRole zone_role_from(const std::string& s)
        {
            for (auto r : {ZoneRole::Stop, ZoneRole::Continue, ZoneRole::PointLeft, ZoneRole::PointRight})
                if (to_string(r) == s)
                    return r;
            throw Error(ErrorCode::InvalidConfig, "unknown zone role '" + s + "'");
        }

        inline WristRequirement wrist_requirement_from(const std::string& s)
        {
            if (s == "left")
                return WristRequirement::Left;
            if (s == "right")
                return WristRequirement::Right;
            if (s == "either")
                return WristRequirement::Either;
            throw Error(ErrorCode::InvalidConfig, "unknown wrist '" + s + "'");
        }

        inline std::string read_file(const std::string& path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw Error(ErrorCode::InvalidConfig, "cannot open " + path);
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
        }
    } // namespace detail

    namespace detail
    {
        inline HarnessConfig overlay_config(const Json& j, HarnessConfig base);
    }

    // Overlays `j` onto `base`. Unknown keys and mistyped values are rejected.
    inline HarnessConfig config_from_json(const Json& j, HarnessConfig base = {})
    {
        try
        {
            return detail::overlay_config(j, std::move(base));
        }
        catch (const nlohmann::json::exception& e)
        {
            throw Error(ErrorCode::InvalidConfig, e.what());
        }
        catch (const Error& e)
        {
            // a bad calibration block is a config problem
            if (e.code() == ErrorCode::DegenerateConfiguration || e.code() == ErrorCode::InsufficientPoints)
                throw Error(ErrorCode::InvalidConfig, "calibration: " + std::string(e.what()));
            throw;
        }
    }

    inline HarnessConfig detail::overlay_config(const Json& j, HarnessConfig base)
    {
        using detail::read;
        detail::check_keys(j, {"speech", "gestures", "fusion", "sim", "detection", "skeleton", "calibration",
                               "calibration_file", "vocabulary_file"},
                           "config");
        HarnessConfig c = std::move(base);
        if (j.contains("speech"))
        {
            const auto& s = j["speech"];
            detail::check_keys(s, {"pause_filter", "latency_mean", "latency_jitter", "seed"}, "speech");
            read(s, "pause_filter", c.speech.pause_filter);
            read(s, "latency_mean", c.speech.latency_mean);
            read(s, "latency_jitter", c.speech.latency_jitter);
            read(s, "seed", c.speech.rng_seed);
        }
        if (j.contains("gestures"))
        {
            const auto& g = j["gestures"];
            detail::check_keys(g, {"front_width", "front_height", "debounce_frames", "min_confidence", "zones"}, "gestures");
            read(g, "front_width", c.gestures.front_width);
            read(g, "front_height", c.gestures.front_height);
            read(g, "debounce_frames", c.gestures.debounce_frames);
            read(g, "min_confidence", c.gestures.min_confidence);
            if (g.contains("zones"))
            {
                std::vector<TriggerZone> zones;
                for (const auto& z : g["zones"])
                {
                    detail::check_keys(z, {"role", "rect", "wrist", "debounce"}, "zone");
                    TriggerZone tz;
                    tz.role = detail::zone_role_from(z.at("role").get<std::string>());
                    const auto r = z.at("rect").get<std::vector<double>>();
                    if (r.size() != 4)
                        throw Error(ErrorCode::InvalidConfig, "zone rect needs [x0, y0, x1, y1]");
                    tz.rect = {r[0], r[1], r[2], r[3]};
                    tz.wrist = detail::wrist_requirement_from(z.at("wrist").get<std::string>());
                    tz.debounce_frames = z.value("debounce", c.gestures.debounce_frames);
                    zones.push_back(tz);
                }
                c.gestures.zones = ZoneSet(std::move(zones));
            }
        }
        if (j.contains("fusion"))
        {
            const auto& f = j["fusion"];
            detail::check_keys(f, {"pairing_window", "gesture_precedence", "snapshot_staleness", "max_radius"}, "fusion");
            read(f, "pairing_window", c.fusion.pairing_window);
            read(f, "gesture_precedence", c.fusion.gesture_precedence);
            read(f, "snapshot_staleness", c.fusion.snapshot_staleness);
            read(f, "max_radius", c.fusion.max_radius);
        }
        if (j.contains("sim"))
        {
            const auto& s = j["sim"];
            detail::check_keys(s, {"tick", "move_duration", "grasp_duration", "release_duration", "human_take_delay"}, "sim");
            read(s, "tick", c.sim.tick);
            read(s, "move_duration", c.sim.move_duration);
            read(s, "grasp_duration", c.sim.grasp_duration);
            read(s, "release_duration", c.sim.release_duration);
            read(s, "human_take_delay", c.sim.human_take_delay);
        }
        if (j.contains("detection"))
        {
            const auto& d = j["detection"];
            detail::check_keys(d, {"p_detect", "jitter_px", "seed", "rate_hz"}, "detection");
            read(d, "p_detect", c.detection.noise.p_detect);
            read(d, "jitter_px", c.detection.noise.jitter_px);
            read(d, "seed", c.detection.noise.seed);
            read(d, "rate_hz", c.detection.rate_hz);
        }
        if (j.contains("skeleton"))
        {
            const auto& s = j["skeleton"];
            detail::check_keys(s, {"rate_hz", "p_detect", "sigma_px"}, "skeleton");
            read(s, "rate_hz", c.skeleton.rate_hz);
            read(s, "p_detect", c.skeleton.p_detect);
            read(s, "sigma_px", c.skeleton.sigma_px);
        }
        if (j.contains("calibration_file"))
        {
            std::istringstream in(detail::read_file(j["calibration_file"].get<std::string>()));
            c.calibration = parse_calibration(in);
        }
        if (j.contains("calibration"))
        {
            const auto& cal = j["calibration"];
            detail::check_keys(cal, {"homography", "correspondences"}, "calibration");
            std::vector<Correspondence> pairs;
            if (cal.contains("correspondences"))
                for (const auto& row : cal["correspondences"])
                {
                    const auto v = row.get<std::vector<double>>();
                    if (v.size() != 4)
                        throw Error(ErrorCode::InvalidConfig, "correspondence needs [fx, fy, tx, ty]");
                    pairs.push_back({{v[0], v[1]}, {v[2], v[3]}});
                }
            if (cal.contains("homography"))
            {
                const auto v = cal["homography"].get<std::vector<double>>();
                if (v.size() != 9)
                    throw Error(ErrorCode::InvalidConfig, "homography needs 9 row-major entries");
                std::array<double, 9> rows{};
                std::copy(v.begin(), v.end(), rows.begin());
                c.calibration.homography = Homography::from_rows(rows);
                c.calibration.correspondences = pairs;
                double sq = 0.0;
                for (const auto& p : pairs)
                    sq += squared_distance(c.calibration.homography.apply(p.front), p.table);
                c.calibration.rms_error = pairs.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(pairs.size()));
            }
            else if (!pairs.empty())
                c.calibration = calibrate(pairs);
        }
        if (j.contains("vocabulary_file"))
        {
            c.vocabulary_file = j["vocabulary_file"].get<std::string>();
            std::istringstream in(detail::read_file(*c.vocabulary_file));
            c.vocabulary = std::make_shared<const Vocabulary>(Vocabulary::parse(in));
        }
        c.validate();
        return c;
    }

    inline HarnessConfig load_config(const std::string& path, HarnessConfig base = {})
    {
        Json j;
        try
        {
            j = Json::parse(detail::read_file(path));
        }
        catch (const nlohmann::json::exception& e)
        {
            throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
        }
        return config_from_json(j, std::move(base));
    }
} // namespace cogest
