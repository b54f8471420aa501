#include "cogest/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace cogest;

namespace
{
    const std::string data = COGEST_DATA_DIR;

    std::string slurp(const std::string& path)
    {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    ScenarioSpec scenario(const std::string& name) { return load_scenario(data + "/scenarios/" + name + ".json"); }

    std::string bundled(const std::string& name) { return slurp(data + "/traces/" + name + ".trace"); }

    std::vector<std::pair<CommandKind, std::optional<int>>> signature(const std::vector<RobotCommand>& cmds)
    {
        std::vector<std::pair<CommandKind, std::optional<int>>> out;
        for (const auto& c : cmds)
            out.emplace_back(c.kind, c.object_id);
        return out;
    }

    ErrorCode spec_error(const Json& j)
    {
        try
        {
            generate(scenario_from_json(j));
        }
        catch (const Error& e)
        {
            return e.code();
        }
        return ErrorCode::InvalidParams;
    }

    Json minimal_spec(Json script)
    {
        return {{"name", "t"},
                {"scene", to_json(scenario("go-home").scene)},
                {"script", std::move(script)},
                {"expectations", Json::array()}};
    }
} // namespace

TEST(Harness, EmptyTraceGivesZeroMetrics)
{
    const auto r = replay(parse_trace(std::string()));
    EXPECT_TRUE(r.commands.empty());
    EXPECT_EQ(r.metrics.commands, 0u);
    EXPECT_EQ(r.metrics.utterances, 0u);
    EXPECT_EQ(r.metrics.command_latency.count, 0u);
    EXPECT_FALSE(r.metrics.recorded_outputs_match);
    EXPECT_TRUE(r.command_log.empty());
}

TEST(Harness, GoHomeIssuesOneGoHome)
{
    const auto spec = scenario("go-home");
    const auto text = generate(spec, {1, {}});
    const auto r = replay(parse_trace(text), {}, &spec);
    ASSERT_EQ(r.commands.size(), 1u);
    const auto& c = r.commands[0];
    EXPECT_EQ(c.kind, CommandKind::GoHome);
    EXPECT_EQ(c.provenance.source, TriggerSource::Speech);
    // phrase "ok, go home" at t=1 lasts 0.25*3+0.2 s; recognition adds 1.9 +- 0.2
    const double end = 1.0 + 0.95;
    ASSERT_TRUE(c.provenance.transcript);
    EXPECT_GE(c.issued_at - end, 1.7 - 1e-9);
    EXPECT_LE(c.issued_at - end, 2.1 + 1e-9);
    EXPECT_TRUE(*r.metrics.expectations_met);
    EXPECT_TRUE(*r.metrics.recorded_outputs_match);
    EXPECT_TRUE(r.metrics.scenario_complete);
    EXPECT_EQ(r.metrics.completed, 1u);
}

TEST(Harness, HaltOnlyGivesOneHalt)
{
    const auto spec = scenario("halt-only");
    const auto r = replay(parse_trace(generate(spec, {7, {}})), {}, &spec);
    ASSERT_EQ(r.commands.size(), 1u);
    EXPECT_EQ(r.commands[0].kind, CommandKind::Halt);
    EXPECT_EQ(r.commands[0].provenance.source, TriggerSource::Gesture);
    // hold starts at 1.0; the fifth in-zone frame at 24 Hz is frame 28
    EXPECT_NEAR(r.commands[0].issued_at, 28.0 / 24.0, 1e-9);
    EXPECT_EQ(r.metrics.halt_response.count, 1u);
}

TEST(Harness, SeedsChangeNoiseNotCommands)
{
    const auto spec = scenario("halt-only");
    const auto a = generate(spec, {1, {}});
    const auto b = generate(spec, {2, {}});
    EXPECT_NE(a, b);
    EXPECT_EQ(signature(replay(parse_trace(a)).commands), signature(replay(parse_trace(b)).commands));

    const auto home = scenario("go-home");
    const auto ha = replay(parse_trace(generate(home, {1, {}})));
    const auto hb = replay(parse_trace(generate(home, {2, {}})));
    EXPECT_EQ(signature(ha.commands), signature(hb.commands));
    EXPECT_NE(ha.commands[0].issued_at, hb.commands[0].issued_at);
}

TEST(Harness, InputCountsFollowRates)
{
    const auto t = parse_trace(bundled("paper-assembly"));
    const auto r = replay(t);
    EXPECT_EQ(r.metrics.skeleton_frames, 4080u); // ceil(170 * 24)
    EXPECT_EQ(r.metrics.snapshots, 765u);        // ceil(170 * 4.5)
    EXPECT_NEAR(r.metrics.wrist_detection_rate, 0.9, 0.01);
}

TEST(Harness, PaperAssemblyReplay)
{
    const auto spec = scenario("paper-assembly");
    const auto r = replay(parse_trace(bundled("paper-assembly")), {}, &spec);
    const auto& m = r.metrics;
    EXPECT_EQ(m.by_kind.at("PickPlace"), 4u);
    EXPECT_EQ(m.by_kind.at("Handover"), 4u);
    EXPECT_GE(m.speech_originated, 20u);
    EXPECT_EQ(m.co_speech, 7u);
    EXPECT_EQ(m.unresolved, 0u);
    EXPECT_EQ(m.stale, 0u);
    EXPECT_TRUE(*m.expectations_met) << ::testing::PrintToString(m.expectation_errors);
    EXPECT_TRUE(*m.recorded_outputs_match);
    EXPECT_TRUE(m.scenario_complete);

    // groundings land on the objects the script points at
    std::vector<int> grounded;
    for (const auto& c : r.commands)
        if (c.object_id)
            grounded.push_back(*c.object_id);
    EXPECT_EQ(grounded, (std::vector<int>{1, 6, 2, 3, 7, 4, 8, 9}));
}

TEST(Harness, RegenerationReproducesBundledTraces)
{
    for (const char* name : {"paper-assembly", "halt-only", "go-home"})
        EXPECT_EQ(generate(scenario(name), {1, {}}), bundled(name)) << name;
}

TEST(Harness, ReplayIsDeterministic)
{
    const auto spec = scenario("paper-assembly");
    const auto t = parse_trace(bundled("paper-assembly"));
    const auto a = replay(t, {}, &spec);
    const auto b = replay(t, {}, &spec);
    EXPECT_EQ(a.command_log, b.command_log);
    EXPECT_EQ(a.output_log, b.output_log);
    EXPECT_EQ(report_json(a.metrics).dump(), report_json(b.metrics).dump());
    EXPECT_EQ(report_text(a.metrics), report_text(b.metrics));
}

TEST(Harness, MissingPointingIsUnresolved)
{
    const auto spec = scenario_from_json(minimal_spec({{{"t", 1.0}, {"say", "give me this rod"}}}));
    const auto r = replay(parse_trace(generate(spec, {1, {}})), {}, &spec);
    EXPECT_TRUE(r.commands.empty());
    EXPECT_EQ(r.metrics.unresolved, 1u);
    EXPECT_FALSE(r.metrics.scenario_complete);
    EXPECT_TRUE(*r.metrics.expectations_met);
}

TEST(Harness, ExpectationMismatchIsReported)
{
    auto j = minimal_spec({{{"t", 1.0}, {"say", "go home"}}});
    j["expectations"] = {"Halt"};
    const auto spec = scenario_from_json(j);
    const auto r = replay(parse_trace(generate(spec, {1, {}})), {}, &spec);
    EXPECT_FALSE(*r.metrics.expectations_met);
    ASSERT_EQ(r.metrics.expectation_errors.size(), 1u);
    EXPECT_EQ(r.metrics.expectation_errors[0], "command 1: expected Halt, got GoHome");
    try
    {
        require_expectations(r);
        FAIL();
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), ErrorCode::ExpectationFailed);
    }
}

TEST(Harness, ScenarioValidation)
{
    EXPECT_EQ(spec_error(Json::array()), ErrorCode::InvalidSpec);
    auto extra = minimal_spec(Json::array());
    extra["colour"] = "red";
    EXPECT_EQ(spec_error(extra), ErrorCode::InvalidSpec);
    EXPECT_EQ(spec_error(minimal_spec({{{"t", 1.0}}})), ErrorCode::InvalidSpec);
    EXPECT_EQ(spec_error(minimal_spec({{{"t", 2.0}, {"say", "stop"}}, {{"t", 1.0}, {"say", "stop"}}})), ErrorCode::InvalidSpec);
    EXPECT_EQ(spec_error(minimal_spec({{{"t", -1.0}, {"say", "stop"}}})), ErrorCode::InvalidSpec);
    EXPECT_EQ(spec_error(minimal_spec({{{"t", 1.0}, {"say", "  "}}})), ErrorCode::InvalidSpec);
    EXPECT_EQ(spec_error(minimal_spec({{{"t", 1.0}, {"zone", "wave"}, {"hold", 1.0}}})), ErrorCode::InvalidSpec);
    EXPECT_EQ(spec_error(minimal_spec({{{"t", 1.0}, {"zone", "stop"}, {"hold", 0.0}}})), ErrorCode::InvalidSpec);
    EXPECT_EQ(spec_error(minimal_spec({{{"t", 1.0}, {"point", 42}, {"hold", 1.0}}})), ErrorCode::InvalidSpec);
    EXPECT_EQ(spec_error(minimal_spec({{{"t", 1.0}, {"operator", "dance"}}})), ErrorCode::InvalidSpec);
    EXPECT_EQ(spec_error(minimal_spec({{{"t", 1.0}, {"say", "stop"}, {"wrist", "middle"}}})), ErrorCode::InvalidSpec);
    // two holds on the left wrist at once
    EXPECT_EQ(spec_error(minimal_spec({{{"t", 1.0}, {"zone", "stop"}, {"hold", 2.0}},
                                       {{"t", 2.0}, {"zone", "point_left"}, {"hold", 1.0}}})),
              ErrorCode::InvalidSpec);
    auto greedy = minimal_spec({{{"t", 1.0}, {"say", "stop"}}});
    greedy["expectations"] = {"Halt", "Halt"};
    EXPECT_EQ(spec_error(greedy), ErrorCode::InvalidSpec);
    auto short_run = minimal_spec({{{"t", 10.0}, {"say", "stop"}}});
    short_run["duration"] = 5.0;
    EXPECT_EQ(spec_error(short_run), ErrorCode::InvalidSpec);
    auto bad_cfg = minimal_spec({{{"t", 1.0}, {"say", "stop"}}});
    bad_cfg["config"] = {{"speech", {{"pause_filter", -1}}}};
    EXPECT_EQ(spec_error(bad_cfg), ErrorCode::InvalidSpec);
}

TEST(Harness, ScenarioJsonRoundTrip)
{
    const auto spec = scenario("paper-assembly");
    const auto again = scenario_from_json(to_json(spec));
    EXPECT_EQ(to_json(again).dump(), to_json(spec).dump());
    EXPECT_EQ(generate(again, {1, {}}), generate(spec, {1, {}}));
}

TEST(Harness, ConfigOverridesOnReplay)
{
    const auto t = parse_trace(bundled("go-home"));
    ReplayOptions opt;
    opt.config_overrides = {{"speech", {{"latency_mean", 3.0}, {"latency_jitter", 0.0}}}};
    const auto r = replay(t, opt);
    ASSERT_EQ(r.commands.size(), 1u);
    EXPECT_NEAR(r.commands[0].issued_at, 1.95 + 3.0, 1e-9);
    EXPECT_FALSE(*r.metrics.recorded_outputs_match);
    EXPECT_DOUBLE_EQ(r.config.speech.latency_mean, 3.0);

    opt.config_overrides = {{"speech", {{"latency_mean", -3.0}}}};
    EXPECT_THROW(replay(t, opt), Error);
}

TEST(Harness, BadTraceConfigIsMalformedTrace)
{
    const std::string text = R"({"format":"cogest-trace","version":1,"config":{"speech":{"pause_filter":-1}},"scene":{}})"
                             "\n";
    try
    {
        replay(parse_trace(text));
        FAIL();
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), ErrorCode::MalformedTrace);
        EXPECT_EQ(e.detail().rfind("line 1:", 0), 0u);
    }
}

TEST(Harness, ReportMentionsEveryCounter)
{
    const auto spec = scenario("halt-only");
    const auto r = replay(parse_trace(bundled("halt-only")), {}, &spec);
    const auto j = report_json(r.metrics);
    for (const char* k : {"inputs", "commands", "faults", "latency", "completed_commands", "scenario_complete", "end_time",
                          "expectations_met", "recorded_outputs_match"})
        EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_EQ(j["commands"]["by_kind"]["Halt"], 1);
    const auto text = report_text(r.metrics);
    EXPECT_NE(text.find("expectations: met"), std::string::npos);
    EXPECT_NE(text.find("recorded outputs: match"), std::string::npos);
}

TEST(Harness, SummaryStats)
{
    const auto s = SummaryStats::of({3, 1, 2, 10});
    EXPECT_EQ(s.count, 4u);
    EXPECT_DOUBLE_EQ(s.mean, 4.0);
    EXPECT_DOUBLE_EQ(s.median, 2.5);
    EXPECT_DOUBLE_EQ(s.min, 1.0);
    EXPECT_DOUBLE_EQ(s.max, 10.0);
    EXPECT_EQ(SummaryStats::of({}).count, 0u);
}
