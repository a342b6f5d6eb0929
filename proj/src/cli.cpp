#include "animforge/cli.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "animforge/error.hpp"
#include "animforge/metrics.hpp"
#include "animforge/mock_providers.hpp"
#include "animforge/pipeline.hpp"
#include "animforge/workspace.hpp"

namespace animforge::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw PipelineError(PipelineErrc::ConfigInvalid, "cannot read " + p.string());
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw PipelineError(PipelineErrc::ConfigInvalid, p.string() + " is not valid JSON");
    return j;
}

std::string narrative_text(const std::string& arg) {
    std::error_code ec;
    if (fs::is_regular_file(arg, ec)) {
        std::ifstream in(arg);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
    return arg;
}

// Providers flag: "mock", or a JSON file mapping capability -> binding.
ProviderBindings bindings_from_flag(const std::string& flag) {
    if (flag == "mock") return all_mock_bindings();
    return bindings_from_json(read_json_file(flag));
}

fs::path workspace_or_env(const std::string& flag, const EnvLookup& env) {
    if (!flag.empty()) return flag;
    if (auto v = env(kWorkspaceEnv); v && !v->empty()) return *v;
    throw UsageError("--workspace is required (or set " + std::string(kWorkspaceEnv) + ")");
}

pipeline::ProgressFn progress_to(std::ostream& err) {
    return [&err](const std::string& line) { err << line << std::endl; };
}

void print_summary(const pipeline::RunSummary& s, const fs::path& ws, std::ostream& out, std::ostream& err) {
    if (!s.warnings.empty())
        for (const auto& w : s.warnings) err << "warning: " << w << "\n";
    err << "provider calls: " << s.calls_made << " issued, " << s.calls_replayed << " replayed\n";
    out << (ws / s.manifest_path).string() << std::endl;
}

struct RunArgs {
    std::string narrative;
    std::string workspace;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string providers;
};

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    RunConfig config;
    if (!a.config.empty()) config = config_from_json(read_json_file(a.config));
    if (!a.narrative.empty()) config.narrative = script::Narrative::from_text(narrative_text(a.narrative));
    else if (config.narrative.text.empty()) throw UsageError("--narrative is required unless the config file has one");
    if (a.seed) config.seed = *a.seed;
    if (!a.providers.empty()) config.providers = bindings_from_flag(a.providers);
    config.workspace = workspace_or_env(a.workspace, env);

    pipeline::RunOptions opts;
    opts.progress = progress_to(err);
    opts.env = env;
    const auto summary = pipeline::run(config, opts);
    print_summary(summary, config.workspace, out, err);
    return kExitOk;
}

int cmd_resume(const std::string& ws_flag, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    const fs::path ws = workspace_or_env(ws_flag, env);
    pipeline::RunOptions opts;
    opts.progress = progress_to(err);
    opts.env = env;
    const auto summary = pipeline::resume(ws, opts);
    if (summary.nothing_to_do) err << "nothing to do\n";
    print_summary(summary, ws, out, err);
    return kExitOk;
}

int cmd_inspect(const std::string& ws_flag, bool as_json, std::ostream& out, const EnvLookup& env) {
    Workspace ws(workspace_or_env(ws_flag, env));
    ws.load();
    const Checkpoint& cp = ws.checkpoint();
    if (as_json) {
        json j = cp.to_json();
        j.erase("calls");
        j.erase("artifacts");
        j["artifact_count"] = cp.artifacts.size();
        j["journal_entries"] = cp.calls.size();
        out << j.dump(2) << std::endl;
        return kExitOk;
    }
    out << "run " << cp.run_id << "\n";
    std::map<StageId, std::size_t> per_stage;
    for (const auto& [path, rec] : cp.artifacts) ++per_stage[rec.stage];
    for (StageId id : kAllStages)
        out << std::left << std::setw(22) << to_string(id) << std::setw(12) << to_string(cp.status(id))
            << per_stage[id] << " artifacts\n";
    out << "journal entries: " << cp.calls.size() << std::endl;
    return kExitOk;
}

struct EvalArgs {
    std::string clip;
    std::string workspace;
    std::string text;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.clip.empty() == a.workspace.empty()) throw UsageError("eval needs exactly one of --clip or --workspace");
    // Scores use the local embedder and segmenter so eval never needs the network.
    mock::ToyEmbedder embedder;
    mock::MockSegmenter segmenter;
    if (!a.clip.empty()) {
        FrameSequence clip;
        try {
            clip = read_clip_dir(a.clip);
        } catch (const std::exception& e) {
            throw PipelineError(PipelineErrc::StageFailed, "cannot read clip " + a.clip + ": " + e.what());
        }
        std::optional<EmbeddingVector> text;
        if (!a.text.empty()) text = embedder.embed_text(a.text);
        const auto report = metrics::evaluate_clip(clip, embedder, segmenter, text);
        out << metrics::to_json(report).dump(2) << std::endl;
        return kExitOk;
    }
    Workspace ws(a.workspace);
    ws.load();
    if (!ws.checkpoint().complete())
        throw PipelineError(PipelineErrc::StageFailed, "workspace " + a.workspace + " has not finished its run");
    ws.verify_all();
    json report = pipeline::read_report(ws);
    // Coherence of each same-setting seam alongside the per-scene numbers.
    double seam_sum = 0.0;
    for (const auto& b : report.at("boundaries")) seam_sum += b.at("background_consistency").get<double>();
    const auto n = report.at("boundaries").size();
    report["boundary_background_consistency"] = n ? json(seam_sum / static_cast<double>(n)) : json();
    out << report.dump(2) << std::endl;
    return kExitOk;
}

int cmd_providers_check(const std::string& flag, const std::string& config_path, std::ostream& out,
                        const EnvLookup& env) {
    RunConfig config;
    if (!config_path.empty()) config = config_from_json(read_json_file(config_path));
    if (!flag.empty()) config.providers = bindings_from_flag(flag);
    config.image_size = 64;
    const auto providers = make_providers(config, load_templates(config), env);

    const Image probe = Image::filled(16, 16, {200, 60, 60});
    struct Check {
        const char* name;
        std::function<void()> call;
    };
    const std::vector<Check> checks = {
        {"chat", [&] { providers.chat->chat({ChatMessage{"user", "Reply with OK.", {}, ""}}); }},
        {"image", [&] { providers.image->generate_images({"health check: a red square", {}, 1}, 1); }},
        {"video",
         [&] {
             VideoRequest r;
             r.conditioning_image = probe;
             r.prompt = "health check";
             r.frame_count = 2;
             providers.video->generate_videos(r, 1);
         }},
        {"segmenter", [&] { providers.segmenter->segment(probe); }},
        {"embedder", [&] { providers.embedder->embed_text("health check"); }},
    };
    bool all_ok = true;
    json report = json::array();
    for (const auto& c : checks) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string status = "OK";
        try {
            c.call();
        } catch (const std::exception& e) {
            status = std::string("FAIL: ") + e.what();
            all_ok = false;
        }
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        report.push_back({{"capability", c.name}, {"status", status}, {"latency_ms", ms}});
    }
    out << report.dump(2) << std::endl;
    return all_ok ? kExitOk : kExitDomainError;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    CLI::App app{"animforge: story-to-animation pipeline driver", "animforge"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Start a new run in an empty workspace");
    run->add_option("--narrative", run_args.narrative, "Story text, or a file containing it");
    run->add_option("--workspace", run_args.workspace, "Workspace directory (default $ANIMFORGE_WORKSPACE)");
    run->add_option("--config", run_args.config, "Run config JSON file")->check(CLI::ExistingFile);
    run->add_option("--seed", run_args.seed, "Run seed");
    run->add_option("--providers", run_args.providers, "'mock' or a provider config JSON file");

    std::string resume_ws;
    auto* resume = app.add_subcommand("resume", "Continue an interrupted run");
    resume->add_option("--workspace", resume_ws, "Workspace directory (default $ANIMFORGE_WORKSPACE)");

    std::string inspect_ws;
    bool inspect_json = false;
    auto* inspect = app.add_subcommand("inspect", "Show checkpoint status");
    inspect->add_option("--workspace", inspect_ws, "Workspace directory (default $ANIMFORGE_WORKSPACE)");
    inspect->add_flag("--json", inspect_json, "Print the status as JSON");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Score a clip directory or a finished workspace");
    eval->add_option("--clip", eval_args.clip, "Directory with meta.json and frames/");
    eval->add_option("--workspace", eval_args.workspace, "Finished workspace");
    eval->add_option("--text", eval_args.text, "Text for the alignment score");

    std::string check_providers;
    std::string check_config;
    auto* check = app.add_subcommand("providers-check", "One minimal call per configured capability");
    check->add_option("--providers", check_providers, "'mock' or a provider config JSON file");
    check->add_option("--config", check_config, "Run config JSON file")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*run) return cmd_run(run_args, out, err, env);
        if (*resume) return cmd_resume(resume_ws, out, err, env);
        if (*inspect) return cmd_inspect(inspect_ws, inspect_json, out, env);
        if (*eval) return cmd_eval(eval_args, out);
        if (*check) return cmd_providers_check(check_providers, check_config, out, env);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    } catch (const PipelineError& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomainError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomainError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomainError;
    }
    return kExitUsage;
}

}  // namespace animforge::cli
