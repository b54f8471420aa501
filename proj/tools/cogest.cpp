#include "cogest/harness.hpp"
#include "cogest/session_http.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace
{
    enum Exit
    {
        Ok = 0,
        Failed = 1,
        Malformed = 2
    };

    struct Overrides
    {
        std::string config_path;
        std::optional<double> pause_filter;
        std::optional<double> latency_mean;
        std::optional<double> latency_jitter;

        // Config file (or COGEST_CONFIG) contents with flag overrides applied on top.
        cogest::Json json() const
        {
            cogest::Json j = cogest::Json::object();
            std::string path = config_path;
            if (path.empty())
                if (const char* env = std::getenv("COGEST_CONFIG"))
                    path = env;
            if (!path.empty())
            {
                std::ifstream in(path, std::ios::binary);
                if (!in)
                    throw cogest::Error(cogest::ErrorCode::InvalidConfig, "cannot open config " + path);
                try
                {
                    j = cogest::Json::parse(in);
                }
                catch (const nlohmann::json::exception& e)
                {
                    throw cogest::Error(cogest::ErrorCode::InvalidConfig, path + ": " + e.what());
                }
            }
            if (pause_filter)
                j["speech"]["pause_filter"] = *pause_filter;
            if (latency_mean)
                j["speech"]["latency_mean"] = *latency_mean;
            if (latency_jitter)
                j["speech"]["latency_jitter"] = *latency_jitter;
            return j;
        }
    };

    void write_file(const std::string& path, const std::string& text)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw cogest::Error(cogest::ErrorCode::InvalidParams, "cannot write " + path);
        out << text;
    }

    int exit_code(const cogest::Error& e)
    {
        switch (e.code())
        {
        case cogest::ErrorCode::ExpectationFailed: return Failed;
        case cogest::ErrorCode::MalformedTrace:
        case cogest::ErrorCode::InvalidSpec:
        case cogest::ErrorCode::InvalidConfig:
        case cogest::ErrorCode::InvalidVocabulary: return Malformed;
        default: return Failed;
        }
    }

    std::shared_ptr<cogest::HttpGateway> g_gateway;

    void on_signal(int)
    {
        if (g_gateway)
            std::thread([] { g_gateway->stop(); }).detach();
    }
} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"cogest: co-speech gesture command engine"};
    app.require_subcommand(1);
    app.fallthrough(); // global options may follow the subcommand
    Overrides ov;
    app.add_option("--config", ov.config_path, "harness config (JSON); defaults to $COGEST_CONFIG");
    app.add_option("--pause-filter", ov.pause_filter, "speech pause filter, seconds");
    app.add_option("--latency-mean", ov.latency_mean, "mean recognition latency, seconds");
    app.add_option("--latency-jitter", ov.latency_jitter, "recognition latency half-width, seconds");

    auto* replay = app.add_subcommand("replay", "replay a trace through the pipeline");
    std::string trace_path, scenario_path, report_path, log_path;
    bool strict = false;
    replay->add_option("trace", trace_path, "trace file")->required();
    replay->add_option("--scenario", scenario_path, "scenario spec whose expectations must hold");
    replay->add_flag("--strict", strict, "fail on unresolved references, stale scenes or output drift");
    replay->add_option("--report", report_path, "write the JSON report here");
    replay->add_option("--command-log", log_path, "write the command log (JSON lines) here");

    auto* generate = app.add_subcommand("generate", "synthesize a trace from a scenario spec");
    std::string spec_path, out_path;
    std::uint64_t seed = 0;
    generate->add_option("spec", spec_path, "scenario spec (JSON)")->required();
    generate->add_option("--seed", seed, "noise seed");
    generate->add_option("-o,--output", out_path, "output trace")->required();

    auto* serve = app.add_subcommand("serve", "run the live session service");
    cogest::GatewayOptions gw;
    bool instant = false;
    std::string static_dir;
    serve->add_option("--host", gw.host, "listen address");
    serve->add_option("--port", gw.port, "listen port (0 = any)");
    serve->add_option("--static", static_dir, "operator console assets to serve at /");
    serve->add_flag("--instant", instant, "skip the recognition latency model");

    auto* corpus = app.add_subcommand("corpus", "print the phrase corpus and parsed intents");
    bool corpus_json = false;
    corpus->add_flag("--json", corpus_json, "one JSON object per line");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*replay)
        {
            const cogest::Trace trace = cogest::load_trace(trace_path);
            std::optional<cogest::ScenarioSpec> spec;
            if (!scenario_path.empty())
                spec = cogest::load_scenario(scenario_path);
            cogest::ReplayOptions opt;
            opt.config_overrides = ov.json();
            const auto result = cogest::replay(trace, opt, spec ? &*spec : nullptr);
            std::cout << cogest::report_text(result.metrics);
            if (!report_path.empty())
                write_file(report_path, cogest::report_json(result.metrics).dump(2) + "\n");
            if (!log_path.empty())
                write_file(log_path, result.command_log);
            const auto& m = result.metrics;
            if (m.expectations_met && !*m.expectations_met)
                return Failed;
            if (strict && (m.unresolved > 0 || m.stale > 0 || (m.recorded_outputs_match && !*m.recorded_outputs_match)))
                return Failed;
            return Ok;
        }
        if (*generate)
        {
            const auto spec = cogest::load_scenario(spec_path);
            cogest::GenerateOptions opt;
            opt.seed = seed;
            opt.base = cogest::config_from_json(ov.json());
            write_file(out_path, cogest::generate(spec, opt));
            return Ok;
        }
        if (*serve)
        {
            auto manager = std::make_shared<cogest::SessionManager>(std::make_shared<cogest::SteadyClock>(),
                                                                     cogest::config_from_json(ov.json()));
            manager->set_instant_default(instant);
            if (!static_dir.empty())
                gw.static_dir = static_dir;
            g_gateway = std::make_shared<cogest::HttpGateway>(manager, gw);
            const int port = g_gateway->start();
            std::cerr << "cogest serving on http://" << gw.host << ":" << port << "\n";
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            g_gateway->wait();
            g_gateway->stop();
            return Ok;
        }
        if (*corpus)
        {
            for (const auto& e : cogest::phrase_corpus())
            {
                if (corpus_json)
                {
                    cogest::Json j;
                    j["phrase"] = e.phrase;
                    j["verb"] = cogest::to_string(e.intent.verb);
                    j["object"] = e.intent.object_class ? cogest::Json(e.intent.object_class->label()) : cogest::Json(nullptr);
                    j["deixis"] = cogest::to_string(e.intent.deixis);
                    j["target"] = cogest::to_string(e.intent.target);
                    std::cout << j.dump() << "\n";
                }
                else
                    std::cout << e.phrase << "\t" << cogest::describe(e.intent) << "\n";
            }
            return Ok;
        }
    }
    catch (const cogest::Error& e)
    {
        std::cerr << "cogest: " << e.what() << "\n";
        return exit_code(e);
    }
    return Ok;
}
