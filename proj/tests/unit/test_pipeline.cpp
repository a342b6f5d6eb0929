#include <doctest.h>

#include "animforge/error.hpp"
#include "animforge/mock_providers.hpp"
#include "animforge/pipeline.hpp"
#include "support/oracles.hpp"

using namespace animforge;
using nlohmann::json;
namespace pl = animforge::pipeline;

namespace {

PipelineError pipeline_error(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const PipelineError& e) {
        return e;
    }
    FAIL("expected PipelineError");
    return PipelineError(PipelineErrc::StageFailed, "unreachable");
}

// Mock providers whose chat replies can be overridden per template tag.
using Override = std::function<std::optional<std::string>(const ChatMessage&)>;

pl::RunOptions with_chat_override(const RunConfig& config, Override fn) {
    auto providers = make_providers(config, load_templates(config));
    auto inner = providers.chat;
    providers.chat = std::make_shared<mock::FunctionChat>([inner, fn](const std::vector<ChatMessage>& msgs) {
        if (auto r = fn(msgs.back())) return *r;
        return inner->chat(msgs);
    });
    pl::RunOptions opts;
    opts.providers = providers;
    return opts;
}

std::string words(int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += (i ? " word" : "Word");
    return s + ".";
}

}  // namespace

TEST_SUITE("pipeline") {
    TEST_CASE("a mock run produces a consistent manifest and report") {
        fixture::TempDir dir("pipe");
        const RunConfig config = fixture::small_config(dir / "ws");
        const auto summary = pl::run(config);
        CHECK_FALSE(summary.nothing_to_do);
        CHECK(summary.stages.size() == 6);
        CHECK(summary.run_id.rfind("run-", 0) == 0);

        Workspace ws(config.workspace);
        ws.load();
        CHECK(ws.checkpoint().complete());
        CHECK_NOTHROW(ws.verify_all());

        const json manifest = pl::read_manifest(ws);
        const auto script = script::script_from_json(ws.read_json("script/script.json"));
        const auto& clips = manifest.at("clips");
        REQUIRE(clips.size() == script.scenes.size());
        int total = 0;
        for (std::size_t i = 0; i < clips.size(); ++i) {
            CHECK(clips[i].at("scene") == i);
            CHECK(clips[i].at("first_frame") == total);
            CHECK(clips[i].at("frames") == config.frame_count);
            total += clips[i].at("frames").get<int>();
        }
        CHECK(manifest.at("total_frames") == total);
        CHECK(manifest.at("duration_seconds").get<double>() == doctest::Approx(total / config.fps));
        CHECK(manifest.at("digest") == summary.manifest_digest);
        const auto frames = std::distance(std::filesystem::directory_iterator(ws.path("final/frames")),
                                          std::filesystem::directory_iterator{});
        CHECK(frames == total);

        const json report = pl::read_report(ws);
        CHECK(report.at("scenes").size() == script.scenes.size());
        const auto agg = summary.aggregate;
        CHECK(agg.coherence == doctest::Approx((agg.subject_consistency + agg.background_consistency) / 2));
        CHECK(summary.calls_made <= pl::max_provider_calls(config, script));
        int by_cap = 0;
        for (const auto& [cap, n] : summary.calls_by_capability) by_cap += n;
        CHECK(by_cap == summary.calls_made);
    }

    TEST_CASE("two fresh runs with the same config agree byte for byte") {
        fixture::TempDir dir("pipe");
        const auto a = pl::run(fixture::small_config(dir / "a", 3));
        const auto b = pl::run(fixture::small_config(dir / "b", 3));
        CHECK(a.manifest_digest == b.manifest_digest);
        CHECK(a.run_id == b.run_id);
        Workspace wa(dir / "a"), wb(dir / "b");
        wa.load();
        wb.load();
        CHECK(wa.read_bytes("final/manifest.json") == wb.read_bytes("final/manifest.json"));
        const auto c = pl::run(fixture::small_config(dir / "c", 4));
        CHECK(c.manifest_digest != a.manifest_digest);
    }

    TEST_CASE("interrupted runs resume to the same result without repeating calls") {
        fixture::TempDir dir("pipe");
        const auto reference = pl::run(fixture::small_config(dir / "ref"));
        for (int k : {1, 2, 9, 40, reference.calls_made}) {
            CAPTURE(k);
            const auto ws = dir / ("cut_" + std::to_string(k));
            pl::RunOptions opts;
            opts.interrupt_before_call = k;
            const auto err = pipeline_error([&] { pl::run(fixture::small_config(ws), opts); });
            CHECK(err.code() == PipelineErrc::Interrupted);
            const auto resumed = pl::resume(ws);
            CHECK(resumed.manifest_digest == reference.manifest_digest);
            CHECK(resumed.calls_made == reference.calls_made - (k - 1));
        }
    }

    TEST_CASE("resuming a finished run does nothing") {
        fixture::TempDir dir("pipe");
        const auto first = pl::run(fixture::small_config(dir / "ws"));
        const auto again = pl::resume(dir / "ws");
        CHECK(again.nothing_to_do);
        CHECK(again.calls_made == 0);
        CHECK(again.manifest_digest == first.manifest_digest);
    }

    TEST_CASE("run refuses a non-empty workspace") {
        fixture::TempDir dir("pipe");
        std::filesystem::create_directories(dir / "ws");
        write_file_atomic(dir / "ws" / "stray.txt", "x");
        CHECK(pipeline_error([&] { pl::run(fixture::small_config(dir / "ws")); }).code() ==
              PipelineErrc::WorkspaceNotEmpty);
    }

    TEST_CASE("resume detects an edited config and tampered artifacts") {
        fixture::TempDir dir("pipe");
        pl::RunOptions opts;
        opts.interrupt_before_call = 30;
        pipeline_error([&] { pl::run(fixture::small_config(dir / "ws"), opts); });
        Workspace ws(dir / "ws");
        ws.load();
        json cfg = ws.read_config();
        const std::string original = cfg.dump(2);
        cfg["seed"] = 12345;
        write_file_atomic(ws.path("config.json"), cfg.dump(2));
        CHECK(pipeline_error([&] { pl::resume(dir / "ws"); }).code() == PipelineErrc::ConfigMismatch);
        write_file_atomic(ws.path("config.json"), original);
        write_file_atomic(ws.path("story/refined.txt"), "tampered");
        CHECK(pipeline_error([&] { pl::resume(dir / "ws"); }).code() == PipelineErrc::CorruptWorkspace);
    }

    TEST_CASE("resume of a missing workspace is corrupt") {
        fixture::TempDir dir("pipe");
        CHECK(pipeline_error([&] { pl::resume(dir / "nowhere"); }).code() == PipelineErrc::CorruptWorkspace);
    }

    TEST_CASE("a flawed first script is repaired through the verify loop") {
        fixture::TempDir dir("pipe");
        RunConfig config = fixture::small_config(dir / "ws");
        config.providers.chat.options = {{"flaw_first_script", true}};
        pl::run(config);
        Workspace ws(config.workspace);
        ws.load();
        const json v = ws.read_json("script/validation.json");
        CHECK(v.at("rounds").get<int>() >= 1);
        CHECK(v.at("transcript").front().at("local_violations").get<int>() >= 1);
        CHECK(v.at("report").at("violations").empty());
    }

    TEST_CASE("a script that never validates is unrepairable") {
        fixture::TempDir dir("pipe");
        RunConfig config = fixture::small_config(dir / "ws");
        config.max_repair_iters = 2;
        int verify_calls = 0;
        auto opts = with_chat_override(config, [&](const ChatMessage& m) -> std::optional<std::string> {
            if (m.tag != "verify") return std::nullopt;
            ++verify_calls;
            return std::string("Scene 1 has a problem, but I cannot rewrite it.");
        });
        const auto err = pipeline_error([&] { pl::run(config, opts); });
        CHECK(err.code() == PipelineErrc::ScriptUnrepairable);
        CHECK(err.stage() == "GenerateScript");
        CHECK(verify_calls == 3);
    }

    TEST_CASE("story length: one re-ask, then failure") {
        fixture::TempDir dir("pipe");
        RunConfig config = fixture::small_config(dir / "ok");
        int asks = 0;
        auto opts = with_chat_override(config, [&](const ChatMessage& m) -> std::optional<std::string> {
            if (m.tag != "refine") return std::nullopt;
            ++asks;
            if (asks == 1) return words(20);
            CHECK(m.text.find(pl::kLengthReminder) != std::string::npos);
            return std::nullopt;
        });
        pl::run(config, opts);
        CHECK(asks == 2);

        config.workspace = dir / "bad";
        auto long_only = with_chat_override(config, [&](const ChatMessage& m) -> std::optional<std::string> {
            if (m.tag == "refine") return words(400);
            return std::nullopt;
        });
        const auto err = pipeline_error([&] { pl::run(config, long_only); });
        CHECK(err.code() == PipelineErrc::RefinementFailed);
    }

    TEST_CASE("unparsable parameters get one re-ask") {
        fixture::TempDir dir("pipe");
        RunConfig config = fixture::small_config(dir / "ws");
        int asks = 0;
        auto opts = with_chat_override(config, [&](const ChatMessage& m) -> std::optional<std::string> {
            if (m.tag != "param_predict") return std::nullopt;
            if (++asks == 1) return std::string("motion: lots");
            return std::nullopt;
        });
        pl::run(config, opts);
        Workspace ws(config.workspace);
        ws.load();
        CHECK(ws.read_json("videos/0/params.json").at("attempts") == 2);
        CHECK(ws.read_json("videos/1/params.json").at("attempts") == 1);

        config.workspace = dir / "bad";
        auto never = with_chat_override(config, [](const ChatMessage& m) -> std::optional<std::string> {
            if (m.tag == "param_predict") return std::string("{\"motion\": 9}");
            return std::nullopt;
        });
        const auto err = pipeline_error([&] { pl::run(config, never); });
        CHECK(err.code() == PipelineErrc::StageFailed);
        CHECK(err.stage() == "ProduceVideos");
    }

    TEST_CASE("invalid config is rejected before the workspace is touched") {
        fixture::TempDir dir("pipe");
        RunConfig config = fixture::small_config(dir / "ws");
        config.pools.judge_top_k = 5;
        CHECK(pipeline_error([&] { pl::run(config); }).code() == PipelineErrc::ConfigInvalid);
        CHECK_FALSE(std::filesystem::exists(dir / "ws"));
    }

    TEST_CASE("progress lines are emitted per stage") {
        fixture::TempDir dir("pipe");
        std::vector<std::string> lines;
        pl::RunOptions opts;
        opts.progress = [&](const std::string& l) { lines.push_back(l); };
        pl::run(fixture::small_config(dir / "ws"), opts);
        int done = 0;
        for (const auto& l : lines)
            if (l.find(": done in ") != std::string::npos) ++done;
        CHECK(done == 6);
    }

    TEST_CASE("scene parallelism does not change the result") {
        fixture::TempDir dir("pipe");
        RunConfig a = fixture::small_config(dir / "a");
        RunConfig b = fixture::small_config(dir / "b");
        b.scene_parallelism = 3;
        const auto ra = pl::run(a);
        const auto rb = pl::run(b);
        Workspace wa(dir / "a"), wb(dir / "b");
        wa.load();
        wb.load();
        // The configs differ, so compare the spliced frames rather than the manifest.
        const json ma = pl::read_manifest(wa), mb = pl::read_manifest(wb);
        CHECK(ma.at("clips") == mb.at("clips"));
        for (int f = 0; f < ma.at("total_frames").get<int>(); ++f)
            CHECK(wa.read_bytes("final/frames/" + frame_file_name(f)) == wb.read_bytes("final/frames/" + frame_file_name(f)));
        CHECK(ra.calls_made == rb.calls_made);
    }

    TEST_CASE("a scene whose still has no visible subject still completes") {
        // Both characters render in the setting's hue here, so frame 0 segments to background only.
        fixture::TempDir dir("pipeline");
        RunConfig config = fixture::small_config(
            dir / "ws", 10643421420448694968ull,
            "Luna the owl watches the forest at night. Max the dog runs along the river and jumps into the water.");
        config.frame_count = 23;
        config.pools.videos = 3;
        config.providers.chat.options = {{"scene_count", 2}};
        const auto summary = pl::run(config);
        CHECK(summary.calls_made > 0);

        Workspace ws(config.workspace);
        ws.load();
        const json scored = ws.read_json("videos/0/metrics.json");
        REQUIRE(scored.size() == 3);
        for (const auto& c : scored) {
            CHECK_FALSE(c.at("subject_found").get<bool>());
            CHECK(c.at("report").at("subject_consistency").get<double>() == 0.0);
        }
        CHECK(ws.read_json("videos/1/metrics.json").at(0).at("subject_found").get<bool>());
        CHECK(pl::read_manifest(ws).at("clips").size() == 2);
    }

    TEST_CASE("slugs") {
        CHECK(pl::slug("Tom the cat") == "tom_the_cat");
        CHECK(pl::slug("  Mrs. O'Neil!! ") == "mrs_o_neil");
        CHECK_FALSE(pl::slug("Zo\xC3\xAB").empty());
    }

    TEST_CASE("summary json") {
        pl::RunSummary s;
        s.run_id = "run-x";
        s.calls_by_capability = {{"chat", 3}};
        const json j = s.to_json();
        CHECK(j.at("run_id") == "run-x");
        CHECK(j.at("calls_by_capability").at("chat") == 3);
    }
}
