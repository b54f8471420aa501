#include "cogest/trace.hpp"

#include <gtest/gtest.h>

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

    const std::string header = R"({"format":"cogest-trace","version":1,"config":{},"scene":{}})";

    // "line N: ..." message of a trace that must fail to parse
    std::string parse_failure(const std::string& text)
    {
        try
        {
            parse_trace(text);
        }
        catch (const Error& e)
        {
            EXPECT_EQ(e.code(), ErrorCode::MalformedTrace);
            return e.detail();
        }
        ADD_FAILURE() << "parsed: " << text;
        return {};
    }

    TraceRecord rec(RecordKind k, Json payload, std::uint64_t seq = 1, Seconds t = 0.0)
    {
        TraceRecord r;
        r.seq = seq;
        r.t = t;
        r.kind = k;
        r.payload = std::move(payload);
        return r;
    }
} // namespace

TEST(Trace, BundledTracesRoundTripByteForByte)
{
    for (const char* name : {"paper-assembly", "halt-only", "go-home"})
    {
        const std::string text = slurp(data + "/traces/" + name + ".trace");
        ASSERT_FALSE(text.empty()) << name;
        EXPECT_EQ(format_trace(parse_trace(text)), text) << name;
    }
}

TEST(Trace, EmptyFileIsEmptyTrace)
{
    const auto t = parse_trace(std::string());
    EXPECT_TRUE(t.records.empty());
    EXPECT_TRUE(t.header.config.empty());
}

TEST(Trace, HeaderOnly)
{
    const auto t = parse_trace(header + "\n");
    EXPECT_TRUE(t.records.empty());
}

TEST(Trace, MalformedInputsReportLineNumbers)
{
    EXPECT_EQ(parse_failure("{\"format\":\"other\",\"version\":1}\n").rfind("line 1:", 0), 0u);
    EXPECT_EQ(parse_failure("{\"format\":\"cogest-trace\",\"version\":2}\n").rfind("line 1:", 0), 0u);
    EXPECT_EQ(parse_failure(header + "\nnot json\n").rfind("line 2:", 0), 0u);
    const std::string ok = R"({"seq":1,"t":0.5,"kind":"Operator","payload":{"action":"halt"}})";
    EXPECT_EQ(parse_failure(header + "\n" + ok + "\n" + R"({"seq":1,"t":0.6,"kind":"Operator","payload":{}})").rfind("line 3:", 0), 0u);
    EXPECT_EQ(parse_failure(header + "\n" + ok + "\n" + R"({"seq":2,"t":0.4,"kind":"Operator","payload":{}})").rfind("line 3:", 0), 0u);
    EXPECT_NE(parse_failure(header + "\n" + R"({"seq":1,"t":0,"kind":"Dance","payload":{}})").find("unknown kind"), std::string::npos);
    EXPECT_NE(parse_failure(header + "\n" + R"({"seq":1,"t":0,"kind":"Operator","payload":{},"x":1})").find("exactly"),
              std::string::npos);
    EXPECT_NE(parse_failure(header + "\n" + R"({"seq":-1,"t":0,"kind":"Operator","payload":{}})").find("seq"), std::string::npos);
    EXPECT_NE(parse_failure(header + "\n" + R"({"seq":1,"t":"x","kind":"Operator","payload":{}})").find("t must"), std::string::npos);
    EXPECT_NE(parse_failure(header + "\n" + R"({"seq":1,"t":0,"kind":"Operator","payload":[]})").find("payload"), std::string::npos);
    EXPECT_NE(parse_failure(header + "\n\n[1,2]\n").find("line 3"), std::string::npos);
}

TEST(Trace, BlankLinesAreSkipped)
{
    const auto t = parse_trace(header + "\n\n" + R"({"seq":4,"t":1,"kind":"Operator","payload":{"action":"resume"}})" + "\n");
    ASSERT_EQ(t.records.size(), 1u);
    EXPECT_EQ(t.records[0].line, 3u);
    EXPECT_EQ(t.records[0].seq, 4u);
    EXPECT_EQ(operator_from(t.records[0]).action, OperatorAction::Resume);
    EXPECT_EQ(operator_from(t.records[0]).id, 4u);
}

TEST(Trace, PayloadDecodeErrorsCarryLine)
{
    auto r = rec(RecordKind::Utterance, {{"text", "stop"}, {"speech_start", 1.0}});
    r.line = 7;
    try
    {
        utterance_from(r);
        FAIL();
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), ErrorCode::MalformedTrace);
        EXPECT_EQ(e.detail().rfind("line 7:", 0), 0u);
    }
    EXPECT_THROW(skeleton_from(rec(RecordKind::Skeleton, {{"left", {1}}, {"right", nullptr}})), Error);
    EXPECT_THROW(operator_from(rec(RecordKind::Operator, {{"action", "jump"}})), Error);
    EXPECT_THROW(snapshot_from(rec(RecordKind::DetectionSnapshot, {{"detections", {{{"id", 1}, {"class", "rod"}, {"bbox", {1, 2}}}}}})),
                 Error);
}

TEST(Trace, InputPayloadsRoundTrip)
{
    const UtteranceEvent u{"give me this rod", 1.25, 2.5, 9};
    auto r = rec(RecordKind::Utterance, to_payload(u), 9);
    auto u2 = utterance_from(r);
    EXPECT_EQ(u2, u);

    SkeletonObservation s;
    s.timestamp = 3.0;
    s.wrist_left = ImagePoint{10.5, 20.25};
    s.confidence_left = 0.9;
    s.confidence_right = 0.0;
    r = rec(RecordKind::Skeleton, to_payload(s), 2, 3.0);
    const auto s2 = skeleton_from(r);
    EXPECT_EQ(s2.wrist_left, s.wrist_left);
    EXPECT_FALSE(s2.wrist_right);
    EXPECT_DOUBLE_EQ(s2.timestamp, 3.0);
    EXPECT_DOUBLE_EQ(s2.confidence_left, 0.9);

    ObjectDetectionSnapshot snap;
    snap.timestamp = 4.0;
    snap.id = 3;
    snap.detections = {{5, ObjectClass::rocker_arm(), {1, 2, 3, 4}, 0.875}, {2, ObjectClass::rod(), {5, 6, 7, 8}, 1.0}};
    r = rec(RecordKind::DetectionSnapshot, to_payload(snap), 3, 4.0);
    EXPECT_EQ(snapshot_from(r), snap);

    r = rec(RecordKind::Pointing, to_payload(PointingEvent{0, 5.0, {300, 400}}), 4, 5.0);
    const auto p = pointing_from(r);
    EXPECT_EQ(p.point, (TablePoint{300, 400}));
    EXPECT_EQ(p.id, 4u);
    EXPECT_DOUBLE_EQ(p.timestamp, 5.0);
}

TEST(Trace, SnapshotRejectsDuplicateIds)
{
    ObjectDetectionSnapshot snap;
    snap.detections = {{5, ObjectClass::rod(), {1, 2, 3, 4}, 1.0}, {5, ObjectClass::rod(), {1, 2, 3, 4}, 1.0}};
    EXPECT_THROW(snapshot_from(rec(RecordKind::DetectionSnapshot, to_payload(snap))), Error);
}

TEST(Trace, CommandPayloadRoundTrip)
{
    RobotCommand c;
    c.id = 3;
    c.kind = CommandKind::PickPlace;
    c.object_id = 7;
    c.place_target = "place";
    c.provenance.source = TriggerSource::Speech;
    c.provenance.transcript = EventRef{10, 2.5};
    c.provenance.pointing = EventRef{12, 3.0};
    c.provenance.snapshot = EventRef{11, 2.9};
    c.issued_at = 4.4;
    EXPECT_EQ(command_from(to_payload(c)), c);

    RobotCommand h;
    h.id = 4;
    h.kind = CommandKind::Halt;
    h.provenance.source = TriggerSource::Gesture;
    h.provenance.trigger = EventRef{99, 5.0};
    h.issued_at = 5.0;
    const Json j = to_payload(h);
    EXPECT_FALSE(j.contains("object_id"));
    EXPECT_EQ(command_from(j), h);
}

TEST(Trace, SimEventPayloadRoundTrip)
{
    SimEvent e;
    e.kind = SimEventKind::PhaseChanged;
    e.time = 1.5;
    e.tick = 36;
    e.from = {Phase::MovingToObject, Phase::Idle};
    e.to = {Phase::Paused, Phase::MovingToObject};
    e.command_id = 2;
    auto r = rec(RecordKind::SimEvent, to_payload(e), 1, 1.5);
    EXPECT_EQ(sim_event_from(r), e);

    SimEvent m;
    m.kind = SimEventKind::ObjectMoved;
    m.time = 2.0;
    m.tick = 48;
    m.object_id = 3;
    m.status = ObjectStatus::Placed;
    m.pose = TablePoint{640, 600};
    m.command_id = 2;
    r = rec(RecordKind::SimEvent, to_payload(m), 2, 2.0);
    EXPECT_EQ(sim_event_from(r), m);
}

TEST(Trace, PhaseNames)
{
    EXPECT_EQ(robot_phase_from_string("Paused{Grasping}"), (RobotPhase{Phase::Paused, Phase::Grasping}));
    EXPECT_EQ(robot_phase_from_string("Idle"), (RobotPhase{Phase::Idle, Phase::Idle}));
    EXPECT_FALSE(robot_phase_from_string("Paused{Paused}"));
    EXPECT_FALSE(robot_phase_from_string("Flying"));
}

TEST(Trace, SceneRoundTrip)
{
    SceneState s;
    s.objects[1] = {1, ObjectClass::rod(), {160, 150}, ObjectStatus::OnTable};
    s.objects[6] = {6, ObjectClass::rocker_arm(), {1120, 150}, ObjectStatus::WithHuman};
    s.place_location = {640, 600};
    EXPECT_EQ(scene_from_json(to_json(s)), s);
    EXPECT_THROW(scene_from_json(Json{{"objects", {{{"id", 1}}}}}), Error);
}

TEST(Trace, WriterAssignsSeqAndRejectsTimeTravel)
{
    std::ostringstream os;
    TraceWriter w(os);
    EXPECT_THROW(w.write(0, RecordKind::Operator, {{"action", "halt"}}), Error);
    w.header({});
    EXPECT_EQ(w.write(0.5, RecordKind::Operator, {{"action", "halt"}}), 1u);
    EXPECT_EQ(w.write(0.5, RecordKind::Operator, {{"action", "resume"}}), 2u);
    EXPECT_THROW(w.write(0.4, RecordKind::Operator, {{"action", "halt"}}), Error);
    const auto t = parse_trace(os.str());
    ASSERT_EQ(t.records.size(), 2u);
    EXPECT_EQ(format_trace(t), os.str());
}

TEST(Trace, KindNames)
{
    for (auto k : {RecordKind::Utterance, RecordKind::Skeleton, RecordKind::DetectionSnapshot, RecordKind::Pointing,
                   RecordKind::Operator, RecordKind::Transcript, RecordKind::Command, RecordKind::SimEvent, RecordKind::Fault})
        EXPECT_EQ(record_kind_from_string(to_string(k)), k);
    EXPECT_TRUE(is_input(RecordKind::Pointing));
    EXPECT_FALSE(is_input(RecordKind::Command));
}
