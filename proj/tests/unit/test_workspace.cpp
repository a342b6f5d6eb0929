#include <doctest.h>

#include <fstream>

#include "animforge/config.hpp"
#include "animforge/error.hpp"
#include "animforge/mock_providers.hpp"
#include "animforge/png_io.hpp"
#include "animforge/workspace.hpp"
#include "support/oracles.hpp"

using namespace animforge;
using nlohmann::json;

namespace {

PipelineErrc pipeline_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const PipelineError& e) {
        return e.code();
    }
    FAIL("expected PipelineError");
    return PipelineErrc::StageFailed;
}

void init(Workspace& ws) {
    Checkpoint cp;
    cp.run_id = "run-test";
    cp.config_digest = "abc";
    ws.create(json{{"k", 1}}, cp);
}

// Counts calls per capability and delegates to the mocks.
struct CountingChat : ChatProvider {
    int calls = 0;
    std::string chat(const std::vector<ChatMessage>& m) override {
        ++calls;
        return "reply to " + m.back().text;
    }
};

ProviderSet counting_set(std::shared_ptr<CountingChat> chat) {
    auto p = mock::make_mock_providers(32);
    p.chat = std::move(chat);
    return p;
}

}  // namespace

TEST_SUITE("workspace") {
    TEST_CASE("create, commit and load") {
        fixture::TempDir dir("ws");
        {
            Workspace ws(dir / "ws");
        init(ws);
            ws.write_text("a/b.txt", "hello", StageId::RefineStory);
            ws.set_stage_status(StageId::RefineStory, StageStatus::Done);
        }
        Workspace again(dir / "ws");
        again.load();
        CHECK(again.checkpoint().run_id == "run-test");
        CHECK(again.checkpoint().status(StageId::RefineStory) == StageStatus::Done);
        CHECK(again.checkpoint().status(StageId::GenerateScript) == StageStatus::Pending);
        CHECK(again.read_text("a/b.txt") == "hello");
        CHECK(again.read_config() == json{{"k", 1}});
        CHECK_NOTHROW(again.verify_all());
        CHECK_FALSE(again.checkpoint().complete());
    }

    TEST_CASE("checkpoint json round trip") {
        Checkpoint cp;
        cp.run_id = "r";
        cp.config_digest = "d";
        cp.stages[2] = StageStatus::InProgress;
        cp.artifacts["x.png"] = {"ff", StageId::GenerateAssets};
        cp.calls["k/chat_1"] = {"journal/k/chat_1.txt"};
        const auto back = Checkpoint::from_json(cp.to_json());
        CHECK(back.to_json() == cp.to_json());
        for (auto& s : cp.stages) s = StageStatus::Done;
        CHECK(cp.complete());
    }

    TEST_CASE("stage names round trip") {
        for (StageId id : kAllStages) CHECK(stage_from_string(to_string(id)) == id);
        CHECK_FALSE(stage_from_string("nope"));
    }

    TEST_CASE("tampered artifacts are detected") {
        fixture::TempDir dir("ws");
        Workspace ws(dir / "ws");
        init(ws);
        ws.write_text("story.txt", "original", StageId::RefineStory);
        {
            std::ofstream out(ws.path("story.txt"), std::ios::trunc);
            out << "changed";
        }
        CHECK(pipeline_code([&] { ws.verify_all(); }) == PipelineErrc::CorruptWorkspace);
    }

    TEST_CASE("missing or broken run.json is corrupt") {
        fixture::TempDir dir("ws");
        Workspace ws(dir.path());
        CHECK(pipeline_code([&] { ws.load(); }) == PipelineErrc::CorruptWorkspace);
        write_file_atomic(dir / "run.json", "{not json");
        CHECK(pipeline_code([&] { ws.load(); }) == PipelineErrc::CorruptWorkspace);
    }

    TEST_CASE("empty-or-absent check") {
        fixture::TempDir dir("ws");
        CHECK(Workspace::is_empty_or_absent(dir / "nothing"));
        CHECK(Workspace::is_empty_or_absent(dir.path()));
        write_file_atomic(dir / "f", "x");
        CHECK_FALSE(Workspace::is_empty_or_absent(dir.path()));
    }

    TEST_CASE("journal memoizes chat across sessions") {
        fixture::TempDir dir("ws");
        auto chat = std::make_shared<CountingChat>();
        {
            Workspace ws(dir / "ws");
        init(ws);
            Journal j(ws, counting_set(chat));
            CHECK(j.chat("s/chat_1", {ChatMessage{"user", "one", {}, ""}}) == "reply to one");
            CHECK(j.chat("s/chat_1", {ChatMessage{"user", "ignored", {}, ""}}) == "reply to one");
            CHECK(j.calls_made() == 1);
            CHECK(j.calls_replayed() == 1);
        }
        Workspace ws(dir / "ws");
        ws.load();
        Journal j(ws, counting_set(chat));
        CHECK(j.chat("s/chat_1", {ChatMessage{"user", "x", {}, ""}}) == "reply to one");
        CHECK(j.chat("s/chat_2", {ChatMessage{"user", "two", {}, ""}}) == "reply to two");
        CHECK(chat->calls == 2);
        CHECK(j.calls_by_capability().at("chat") == 1);
    }

    TEST_CASE("journal replays images, videos, masks and embeddings bit-exactly") {
        fixture::TempDir dir("ws");
        std::vector<Image> imgs;
        std::vector<FrameSequence> clips;
        std::vector<SegmentationMask> masks;
        EmbeddingVector text;
        std::vector<EmbeddingVector> batch;
        Image replaced;
        {
            Workspace ws(dir / "ws");
        init(ws);
            Journal j(ws, mock::make_mock_providers(32));
            imgs = j.generate_images("a/generate", "a", {"Tom the cat: grey", {}, 1}, 3);
            VideoRequest vr;
            vr.conditioning_image = imgs[0];
            vr.prompt = "Tom runs";
            vr.params.motion = 3;
            vr.frame_count = 4;
            clips = j.generate_videos("v/generate", "v", vr, 2);
            masks = j.segment("a/segment_1", imgs[0]);
            text = j.embed_text("m/text_1", "grey cat");
            batch = j.embed_images("m/images_1", imgs);
            replaced = j.region_replace("a/replace_1", "a/replace_1.png", imgs[0], masks.back(), {"Jerry: x", {}, 2});
            CHECK(j.calls_made() == 6);
        }
        Workspace ws(dir / "ws");
        ws.load();
        CHECK_NOTHROW(ws.verify_all());
        // Providers that would fail if called: everything must come from the journal.
        ProviderSet dead;
        Journal j(ws, dead);
        CHECK(j.generate_images("a/generate", "a", {"ignored", {}, 9}, 3) == imgs);
        VideoRequest vr;
        CHECK(j.generate_videos("v/generate", "v", vr, 2) == clips);
        CHECK(j.segment("a/segment_1", imgs[0]) == masks);
        CHECK(j.embed_text("m/text_1", "x") == text);
        CHECK(j.embed_images("m/images_1", imgs) == batch);
        CHECK(j.region_replace("a/replace_1", "a/replace_1.png", imgs[0], masks.back(), {"x", {}, 0}) == replaced);
        CHECK(j.calls_made() == 0);
        CHECK(j.calls_replayed() == 6);
    }

    TEST_CASE("interrupt fires before the k-th real call only") {
        fixture::TempDir dir("ws");
        Workspace ws(dir / "ws");
        init(ws);
        auto chat = std::make_shared<CountingChat>();
        Journal j(ws, counting_set(chat), 3);
        j.chat("k/chat_1", {ChatMessage{"user", "1", {}, ""}});
        j.chat("k/chat_2", {ChatMessage{"user", "2", {}, ""}});
        j.chat("k/chat_1", {ChatMessage{"user", "1", {}, ""}});  // replay, does not count
        CHECK(pipeline_code([&] { j.chat("k/chat_3", {ChatMessage{"user", "3", {}, ""}}); }) ==
              PipelineErrc::Interrupted);
        CHECK(chat->calls == 2);
        CHECK_FALSE(ws.find_call("k/chat_3"));
    }

    TEST_CASE("journaled adapters number their calls per scope") {
        fixture::TempDir dir("ws");
        Workspace ws(dir / "ws");
        init(ws);
        auto chat = std::make_shared<CountingChat>();
        Journal j(ws, counting_set(chat));
        JournaledChat a(j, "scope");
        a.chat({ChatMessage{"user", "x", {}, ""}});
        a.chat({ChatMessage{"user", "y", {}, ""}});
        CHECK(ws.find_call("scope/chat_1"));
        CHECK(ws.find_call("scope/chat_2"));
        JournaledChat b(j, "scope");
        CHECK(b.chat({ChatMessage{"user", "z", {}, ""}}) == "reply to x");
        CHECK(chat->calls == 2);
    }

    TEST_CASE("clip files round trip") {
        fixture::TempDir dir("ws");
        Workspace ws(dir / "ws");
        init(ws);
        std::mt19937_64 rng(4);
        FrameSequence clip;
        clip.fps = 12.0;
        for (int t = 0; t < 3; ++t) clip.frames.push_back(oracle::random_image(rng, 6, 5));
        write_clip(ws, "clips/c0", clip, StageId::ProduceVideos);
        CHECK(read_clip(ws, "clips/c0") == clip);
        CHECK(read_clip_dir(ws.path("clips/c0")) == clip);
        CHECK(std::filesystem::exists(ws.path("clips/c0/frames/" + frame_file_name(2))));
        CHECK(frame_file_name(7) == "frame_0007.png");
    }

    TEST_CASE("identical rewrites are no-ops") {
        fixture::TempDir dir("ws");
        Workspace ws(dir / "ws");
        init(ws);
        ws.write_text("x.txt", "same", StageId::RefineStory);
        const auto t0 = std::filesystem::last_write_time(ws.path("x.txt"));
        ws.write_text("x.txt", "same", StageId::RefineStory);
        CHECK(std::filesystem::last_write_time(ws.path("x.txt")) == t0);
    }
}

TEST_SUITE("config") {
    TEST_CASE("defaults") {
        RunConfig c;
        CHECK(c.frame_count == 24);
        CHECK(c.fps == 8.0);
        CHECK(c.clip_seconds() == 3.0);
        CHECK(c.pools.images == 4);
        CHECK(c.pools.videos == 10);
        CHECK(c.pools.judge_top_k == 3);
        CHECK(c.max_repair_iters == 3);
        CHECK(c.contact_sheet_frames == 5);
    }

    TEST_CASE("json round trip keeps the digest") {
        RunConfig c = fixture::small_config("/tmp/ignored", 99);
        c.providers.chat = {"remote", "https://chat.example", "CHAT_KEY", json{{"max_attachments", 8}}};
        const RunConfig back = config_from_json(to_json(c));
        CHECK(to_json(back) == to_json(c));
        CHECK(config_digest(back) == config_digest(c));
        RunConfig other = c;
        other.seed = 100;
        CHECK(config_digest(other) != config_digest(c));
        other = c;
        other.workspace = "/elsewhere";
        CHECK(config_digest(other) == config_digest(c));
    }

    TEST_CASE("validation catches bad values") {
        auto code_for = [](auto mutate) {
            RunConfig c = fixture::small_config("/tmp/x");
            mutate(c);
            return pipeline_code([&] { c.validate(); });
        };
        CHECK_NOTHROW(fixture::small_config("/tmp/x").validate());
        CHECK(code_for([](RunConfig& c) { c.pools.images = 0; }) == PipelineErrc::ConfigInvalid);
        CHECK(code_for([](RunConfig& c) { c.pools.judge_top_k = 4; }) == PipelineErrc::ConfigInvalid);
        CHECK(code_for([](RunConfig& c) { c.pools.videos = 2; }) == PipelineErrc::ConfigInvalid);
        CHECK(code_for([](RunConfig& c) { c.frame_count = 1; }) == PipelineErrc::ConfigInvalid);
        CHECK(code_for([](RunConfig& c) { c.fps = 0; }) == PipelineErrc::ConfigInvalid);
        CHECK(code_for([](RunConfig& c) { c.contact_sheet_frames = 30; }) == PipelineErrc::ConfigInvalid);
        CHECK(code_for([](RunConfig& c) { c.max_repair_iters = 0; }) == PipelineErrc::ConfigInvalid);
        CHECK(code_for([](RunConfig& c) { c.narrative.text.clear(); }) == PipelineErrc::ConfigInvalid);
        CHECK(code_for([](RunConfig& c) { c.policy.rate_limit_requests = 0; }) == PipelineErrc::ConfigInvalid);
    }

    TEST_CASE("provider bindings") {
        CHECK(bindings_from_json("mock") == all_mock_bindings());
        const auto b = bindings_from_json(json::parse(R"({"image":{"kind":"remote","endpoint":"http://x"}})"));
        CHECK(b.image.kind == "remote");
        CHECK(b.chat.kind == "mock");
        CHECK(pipeline_code([] { bindings_from_json(json::parse(R"({"music":{}})")); }) == PipelineErrc::ConfigInvalid);
        CHECK(pipeline_code([] { bindings_from_json("remote"); }) == PipelineErrc::ConfigInvalid);
    }

    TEST_CASE("remote bindings need their credential") {
        RunConfig c = fixture::small_config("/tmp/x");
        c.providers.chat = {"remote", "http://127.0.0.1:9", "ANIMFORGE_TEST_KEY", json::object()};
        EnvLookup none = [](const std::string&) { return std::optional<std::string>{}; };
        CHECK_THROWS_AS(make_providers(c, {}, none), Error);
        EnvLookup some = [](const std::string&) { return std::optional<std::string>{"k"}; };
        const auto p = make_providers(c, {}, some);
        CHECK(p.chat);
        CHECK(p.chat->max_attachments() == 16);
    }

    TEST_CASE("templates dir must exist") {
        RunConfig c = fixture::small_config("/tmp/x");
        c.templates_dir = "/definitely/not/here";
        CHECK(pipeline_code([&] { load_templates(c); }) == PipelineErrc::ConfigInvalid);
    }
}
