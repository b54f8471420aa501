// One PASS/FAIL line per primary acceptance criterion. Exit status is the
// number of failures.

#include "cogest/grammar.hpp"
#include "cogest/gestures.hpp"
#include "cogest/harness.hpp"
#include "cogest/spatial.hpp"
#include "cogest/speech.hpp"
#include "cogest/workcell.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

using namespace cogest;

namespace
{
    const std::string data = COGEST_DATA_DIR;

    struct Outcome
    {
        bool ok = true;
        std::string detail;

        void require(bool cond, const std::string& why)
        {
            if (!cond && ok)
            {
                ok = false;
                detail = why;
            }
        }
    };

    std::string fmt(double v, int prec = 6)
    {
        std::ostringstream os;
        os.precision(prec);
        os << v;
        return os.str();
    }

    std::string slurp(const std::string& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw Error(ErrorCode::MalformedTrace, "cannot open " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    // ---- grammar ----

    Outcome grammar_corpus()
    {
        Outcome o;
        const ObjectClass rod = ObjectClass::rod(), arm = ObjectClass::rocker_arm();
        const std::vector<std::pair<std::string, CommandIntent>> cases{
            {"place rod", {Verb::Place, rod, Deixis::None, Target::None}},
            {"go home", {Verb::GoHome, std::nullopt, Deixis::None, Target::Home}},
            {"give me another rocker arm", {Verb::Give, arm, Deixis::Another, Target::Human}},
            {"pick up the last rod", {Verb::Pick, rod, Deixis::Last, Target::None}},
            {"pick rod", {Verb::Pick, rod, Deixis::None, Target::None}},
            {"give me this rod", {Verb::Give, rod, Deixis::This, Target::Human}},
            {"give me that rocker arm", {Verb::Give, arm, Deixis::That, Target::Human}},
            {"stop", {Verb::Stop, std::nullopt, Deixis::None, Target::None}},
            {"pause", {Verb::Pause, std::nullopt, Deixis::None, Target::None}},
            {"continue", {Verb::Continue, std::nullopt, Deixis::None, Target::None}},
        };
        std::size_t matched = 0;
        for (const auto& [text, want] : cases)
        {
            try
            {
                const auto got = parse(tokenize(text));
                o.require(got == want, "'" + text + "' -> " + describe(got));
                matched += got == want ? 1 : 0;
            }
            catch (const Error& e)
            {
                o.require(false, "'" + text + "': " + e.what());
            }
        }
        std::size_t corpus_ok = 0;
        const auto corpus = phrase_corpus();
        for (const auto& e : corpus)
        {
            const bool ok = parse(tokenize(e.phrase)) == e.intent;
            o.require(ok, "corpus '" + e.phrase + "'");
            corpus_ok += ok ? 1 : 0;
        }
        if (o.ok)
            o.detail = std::to_string(matched) + "/" + std::to_string(cases.size()) + " quoted, " + std::to_string(corpus_ok) +
                       "/" + std::to_string(corpus.size()) + " corpus";
        return o;
    }

    // ---- speech ----

    Outcome speech_latency()
    {
        Outcome o;
        auto run = [] {
            SpeechChannel ch({});
            std::vector<double> d;
            for (int i = 0; i < 50; ++i)
            {
                const Seconds end = 10.0 * i + 1.0;
                d.push_back(ch.recognize({"give me this rod", end - 1.0, end}).recognized_at - end);
            }
            return d;
        };
        const auto a = run(), b = run();
        const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
        o.require(a == b, "not deterministic under a fixed seed");
        o.require(std::abs(mean - 1.9) <= 0.1, "mean delay " + fmt(mean));
        if (o.ok)
            o.detail = "mean " + fmt(mean, 4) + " s over 50";
        return o;
    }

    // ---- gestures ----

    double exact_reliability(double p, int n, int h)
    {
        std::vector<double> state(static_cast<std::size_t>(n), 0.0);
        state[0] = 1.0;
        double fired = 0.0;
        for (int f = 0; f < h; ++f)
        {
            std::vector<double> next(state.size(), 0.0);
            for (std::size_t k = 0; k < state.size(); ++k)
            {
                next[0] += state[k] * (1.0 - p);
                if (k + 1 == state.size())
                    fired += state[k] * p;
                else
                    next[k + 1] += state[k] * p;
            }
            state = std::move(next);
        }
        return fired;
    }

    Outcome trigger_reliability_criterion()
    {
        Outcome o;
        const int trials = 100000;
        const double frozen = 0.9999979970577685; // exact value at p=0.9, N=5, 48 frames
        const double exact = exact_reliability(0.9, 5, 48);
        const double mc = trigger_reliability(0.9, 5, 48, trials, 1);
        const double mc2 = trigger_reliability(0.9, 5, 48, trials, 1);
        o.require(std::abs(exact - frozen) < 1e-12, "exact value drifted: " + fmt(exact, 17));
        o.require(mc == mc2, "not deterministic under a fixed seed");
        o.require(mc >= 0.99, "estimate " + fmt(mc));
        o.require(std::abs(mc - exact) <= 5.0 * std::sqrt(exact * (1.0 - exact) / trials) + 1e-5,
                  "estimate " + fmt(mc, 8) + " far from exact " + fmt(exact, 8));
        if (o.ok)
            o.detail = "estimate " + fmt(mc, 7) + ", exact " + fmt(exact, 10) + ", " + std::to_string(trials) + " trials";
        return o;
    }

    // ---- spatial ----

    Detection det(int id, ObjectClass c, double x, double y)
    {
        return {id, std::move(c), TableRect{x - 10, y - 10, x + 10, y + 10}, 0.9};
    }

    Outcome nearest_object_oracle()
    {
        Outcome o;
        Rng rng(2024);
        int ties = 0;
        for (int scene = 0; scene < 1000; ++scene)
        {
            const int n = 1 + static_cast<int>(rng.uniform() * 20);
            ObjectDetectionSnapshot s;
            std::vector<int> ids(64);
            std::iota(ids.begin(), ids.end(), 1);
            for (int i = 0; i < n; ++i)
            {
                const auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(ids.size()));
                const int id = ids[pick];
                ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(pick));
                const auto cls = rng.bernoulli(0.5) ? ObjectClass::rod() : ObjectClass::rocker_arm();
                s.detections.push_back(det(id, cls, static_cast<int>(rng.uniform(0, 40)) * 10, static_cast<int>(rng.uniform(0, 40)) * 10));
            }
            if (scene % 4 == 0 && n >= 2)
                s.detections[1].bbox = s.detections[0].bbox;
            const TablePoint p{static_cast<double>(static_cast<int>(rng.uniform(0, 40)) * 10),
                               static_cast<double>(static_cast<int>(rng.uniform(0, 40)) * 10)};
            const std::optional<ObjectClass> filter =
                rng.bernoulli(0.3) ? std::nullopt : std::optional(rng.bernoulli(0.5) ? ObjectClass::rod() : ObjectClass::rocker_arm());

            // brute force on exact integer squared distances
            std::optional<int> expect;
            long long best = 0;
            int at_best = 0;
            for (const auto& d : s.detections)
            {
                if (filter && d.object_class != *filter)
                    continue;
                const long long dx = static_cast<long long>(d.center().x - p.x);
                const long long dy = static_cast<long long>(d.center().y - p.y);
                const long long d2 = dx * dx + dy * dy;
                if (!expect || d2 < best)
                {
                    expect = d.id;
                    best = d2;
                    at_best = 1;
                }
                else if (d2 == best)
                {
                    expect = std::min(*expect, d.id);
                    ++at_best;
                }
            }
            ties += at_best > 1 ? 1 : 0;

            auto reversed = s;
            std::reverse(reversed.detections.begin(), reversed.detections.end());
            for (const auto* snap : {&s, &reversed})
            {
                std::optional<int> got;
                try
                {
                    got = nearest_object(p, *snap, filter, 1e9);
                }
                catch (const Error&)
                {
                }
                o.require(got == expect, "scene " + std::to_string(scene) + " disagrees");
            }
        }
        o.require(ties > 10, "only " + std::to_string(ties) + " tie cases");
        if (o.ok)
            o.detail = "1000 scenes, " + std::to_string(ties) + " ties";
        return o;
    }

    Eigen::Matrix3d random_h(Rng& rng)
    {
        const double a = rng.uniform(-0.5, 0.5);
        const double s = rng.uniform(0.5, 1.5);
        Eigen::Matrix3d m;
        m << s * std::cos(a), -s * std::sin(a) + rng.uniform(-0.1, 0.1), rng.uniform(-200, 200),
            s * std::sin(a) + rng.uniform(-0.1, 0.1), s * std::cos(a), rng.uniform(-200, 200), rng.uniform(-1e-4, 1e-4),
            rng.uniform(-1e-4, 1e-4), 1.0;
        return m;
    }

    Outcome homography_criterion()
    {
        Outcome o;
        Rng rng(77);
        double worst_exact = 0.0, worst_round = 0.0, worst_rms = 0.0;
        for (int trial = 0; trial < 100; ++trial)
        {
            const auto h = Homography::from_matrix(random_h(rng));
            std::vector<Correspondence> exact, noisy;
            for (int i = 0; i < 12; ++i)
            {
                const ImagePoint p{rng.uniform(0, 1920), rng.uniform(0, 1080)};
                const TablePoint q = h.apply(p);
                exact.push_back({p, q});
                noisy.push_back({p, {q.x + rng.uniform(-0.5, 0.5), q.y + rng.uniform(-0.5, 0.5)}});
            }
            const auto cal = calibrate(exact);
            worst_exact = std::max(worst_exact, (cal.homography.matrix() - h.matrix()).cwiseAbs().maxCoeff());

            const auto inv = h.inverse();
            for (int i = 0; i < 50; ++i)
            {
                const ImagePoint p{rng.uniform(0, 1920), rng.uniform(0, 1080)};
                const ImagePoint back = inv.apply(h.apply(p));
                worst_round = std::max(worst_round, std::hypot(back.x - p.x, back.y - p.y));
            }
            worst_rms = std::max(worst_rms, calibrate(noisy).rms_error);
        }
        o.require(worst_exact < 1e-9, "exact recovery error " + fmt(worst_exact));
        o.require(worst_round < 1e-6, "round trip error " + fmt(worst_round) + " px");
        o.require(worst_rms < 1.0, "noisy RMS " + fmt(worst_rms) + " px");
        if (o.ok)
            o.detail = "recovery " + fmt(worst_exact, 3) + ", round trip " + fmt(worst_round, 3) + " px, noisy RMS " +
                       fmt(worst_rms, 3) + " px";
        return o;
    }

    // ---- scenario ----

    Outcome paper_assembly()
    {
        Outcome o;
        const auto spec = load_scenario(data + "/scenarios/paper-assembly.json");
        const auto r = replay(parse_trace(slurp(data + "/traces/paper-assembly.trace")), {}, &spec);
        const auto& m = r.metrics;
        const auto pick = m.by_kind.at("PickPlace"), give = m.by_kind.at("Handover");
        o.require(pick == 4, std::to_string(pick) + " PickPlace");
        o.require(give == 4, std::to_string(give) + " Handover");
        o.require(m.speech_originated >= 20, std::to_string(m.speech_originated) + " speech-originated");
        o.require(m.co_speech == 7, std::to_string(m.co_speech) + " co-speech");
        o.require(m.unresolved == 0, std::to_string(m.unresolved) + " unresolved");
        o.require(m.expectation_errors.empty(), m.expectation_errors.empty() ? "" : m.expectation_errors.front());
        if (o.ok)
            o.detail = std::to_string(pick) + " PickPlace, " + std::to_string(give) + " Handover, " +
                       std::to_string(m.speech_originated) + " speech, " + std::to_string(m.co_speech) + " co-speech, " +
                       fmt(m.end_time, 5) + " s simulated";
        return o;
    }

    // ---- pause soundness ----

    SceneState five_objects()
    {
        SceneState s;
        for (int id = 1; id <= 5; ++id)
            s.objects[id] = {id, id <= 3 ? ObjectClass::rod() : ObjectClass::rocker_arm(), {100.0 * id, 200.0}};
        return s;
    }

    RobotCommand cmd(std::uint64_t id, CommandKind k, std::optional<int> obj = std::nullopt)
    {
        RobotCommand c;
        c.id = id;
        c.kind = k;
        c.object_id = obj;
        if (k == CommandKind::PickPlace)
            c.place_target = "place";
        return c;
    }

    Outcome pause_soundness()
    {
        Outcome o;
        Rng rng(31337);
        std::size_t pauses = 0;
        for (int trial = 0; trial < 200 && o.ok; ++trial)
        {
            // random command log over distinct objects, with an occasional GoHome
            std::vector<int> objs{1, 2, 3, 4, 5};
            std::vector<RobotCommand> log;
            const int n = 1 + static_cast<int>(rng.uniform() * 5);
            for (int i = 0; i < n; ++i)
            {
                const auto id = static_cast<std::uint64_t>(i + 1);
                if (rng.bernoulli(0.2))
                {
                    log.push_back(cmd(id, CommandKind::GoHome));
                    continue;
                }
                const auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(objs.size()));
                const int obj = objs[pick];
                objs.erase(objs.begin() + static_cast<std::ptrdiff_t>(pick));
                log.push_back(cmd(id, rng.bernoulli(0.5) ? CommandKind::PickPlace : CommandKind::Handover, obj));
            }

            auto run = [&](Workcell& w, const std::function<void(Workcell&)>& after_tick) {
                std::map<std::uint64_t, std::int64_t> done;
                for (const auto& c : log)
                    w.submit(c, 0.0);
                for (int i = 0; i < 20000 && !(i > 0 && w.idle() && !w.phase().paused()); ++i)
                {
                    for (const auto& e : w.tick())
                        if (e.kind == SimEventKind::CommandCompleted)
                            done[*e.command_id] = e.tick;
                    after_tick(w);
                }
                return done;
            };

            Workcell base(five_objects(), {});
            const auto ref = run(base, [](Workcell&) {});
            const std::int64_t span = ref.rbegin()->second;

            // one or two pauses at random motion ticks
            std::vector<std::int64_t> at;
            const int k = rng.bernoulli(0.5) ? 2 : 1;
            for (int i = 0; i < k; ++i)
                at.push_back(static_cast<std::int64_t>(rng.uniform(1.0, static_cast<double>(span))));
            std::sort(at.begin(), at.end());
            std::vector<std::int64_t> lengths;
            for (int i = 0; i < k; ++i)
                lengths.push_back(static_cast<std::int64_t>(rng.uniform(1.0, 240.0)));

            // (tick paused at, length) for each pause actually taken
            std::vector<std::pair<std::int64_t, std::int64_t>> taken;
            std::size_t next = 0;
            std::uint64_t safety_id = 100;
            Workcell w(five_objects(), {});
            const auto got = run(w, [&](Workcell& wc) {
                // a blocked first pause pushes the second back; keep them apart
                if (next >= at.size() || wc.tick_index() < at[next] || !is_motion(wc.phase().phase))
                    return;
                const auto t0 = wc.tick_index();
                wc.submit(cmd(safety_id++, CommandKind::Halt), wc.time());
                if (!wc.phase().paused())
                {
                    o.require(false, "Halt during motion did not pause");
                    return;
                }
                while (wc.tick_index() < t0 + lengths[next])
                    if (!wc.tick().empty())
                        o.require(false, "events while paused");
                wc.submit(cmd(safety_id++, CommandKind::Resume), wc.time());
                taken.emplace_back(t0, lengths[next]);
                ++next;
            });
            pauses += taken.size();

            o.require(w.scene() == base.scene(), "trial " + std::to_string(trial) + ": final scene differs");
            for (const auto& [id, t] : ref)
            {
                std::int64_t shift = 0;
                for (const auto& [t0, len] : taken)
                    shift += t0 < t + shift ? len : 0;
                const auto it = got.find(id);
                o.require(it != got.end() && it->second == t + shift,
                          "trial " + std::to_string(trial) + ": command " + std::to_string(id) + " completed at " +
                              (it == got.end() ? std::string("never") : std::to_string(it->second)) + ", expected " +
                              std::to_string(t + shift));
            }
        }
        if (o.ok)
            o.detail = "200 logs, " + std::to_string(pauses) + " pauses";
        return o;
    }

    // ---- determinism ----

    Outcome replay_determinism()
    {
        Outcome o;
        std::size_t bytes = 0;
        for (const char* name : {"paper-assembly", "halt-only", "go-home"})
        {
            const auto spec = load_scenario(data + "/scenarios/" + std::string(name) + ".json");
            const auto trace = parse_trace(slurp(data + "/traces/" + std::string(name) + ".trace"));
            const auto a = replay(trace, {}, &spec);
            const auto b = replay(trace, {}, &spec);
            o.require(a.command_log == b.command_log, std::string(name) + ": command logs differ");
            o.require(report_json(a.metrics).dump() == report_json(b.metrics).dump(), std::string(name) + ": reports differ");
            o.require(report_text(a.metrics) == report_text(b.metrics), std::string(name) + ": text reports differ");
            o.require(a.metrics.recorded_outputs_match.value_or(false), std::string(name) + ": recorded outputs differ");
            bytes += a.command_log.size();
        }
        if (o.ok)
            o.detail = "3 traces, " + std::to_string(bytes) + " log bytes";
        return o;
    }

    struct Criterion
    {
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
} // namespace

int main()
{
    const std::vector<Criterion> criteria{
        {"grammar-corpus", 1.0, grammar_corpus},
        {"speech-latency", 1.0, speech_latency},
        {"trigger-reliability", 30.0, trigger_reliability_criterion},
        {"nearest-object-oracle", 5.0, nearest_object_oracle},
        {"homography", 1.0, homography_criterion},
        {"paper-assembly", 10.0, paper_assembly},
        {"pause-soundness", 30.0, pause_soundness},
        {"replay-determinism", 60.0, replay_determinism},
    };
    int failures = 0;
    for (const auto& c : criteria)
    {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = c.run();
        }
        catch (const std::exception& e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.ok && secs > c.budget_s)
            o = {false, "took " + fmt(secs, 3) + " s, budget " + fmt(c.budget_s) + " s"};
        failures += o.ok ? 0 : 1;
        std::printf("%s %s: %s (%.3f s)\n", o.ok ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failures;
}
