#include <doctest.h>

#include "animforge/curation.hpp"
#include "animforge/error.hpp"
#include "animforge/mock_providers.hpp"
#include "support/oracles.hpp"

using namespace animforge;
using namespace animforge::curation;
namespace pr = animforge::prompt;

namespace {

metrics::MetricReport scored(double d, double s, double b) {
    metrics::MetricReport r;
    r.distortion_quality = d;
    r.subject_consistency = s;
    r.background_consistency = b;
    return r;
}

metrics::ContactSheet sheet_of(Rgb c) { return {Image::filled(10, 2, c), 5, {0, 1, 2, 3, 4}}; }

// Grey backdrop with one blob per (hue, slot).
Image scene_with(const std::vector<int>& hues, int size = 64) {
    Image img = Image::filled(size, size, {120, 120, 120});
    const int slot = size / static_cast<int>(std::max<std::size_t>(1, hues.size()));
    for (std::size_t i = 0; i < hues.size(); ++i)
        for (int y = size / 3; y < size * 2 / 3; ++y)
            for (int x = static_cast<int>(i) * slot + 2; x < static_cast<int>(i + 1) * slot - 2; ++x)
                img.set(x, y, hsv_to_rgb(hues[i], 0.75, 0.9));
    return img;
}

ExpectedCharacter character(const std::string& name) {
    return {{name, "a small animal"}, Image::filled(16, 16, mock::identity_color(mock::name_hue(name)))};
}

}  // namespace

TEST_SUITE("curation") {
    TEST_CASE("rank scores: descending with ties to the lower index") {
        CHECK(rank_scores({0.2, 0.9, 0.5, 0.9}, 3) == std::vector<std::size_t>{1, 3, 2});
        CHECK(rank_scores({0.2, 0.1}, 5) == std::vector<std::size_t>{0, 1});
        CHECK(rank_scores({}, 3).empty());
    }

    TEST_CASE("rank candidates uses the composite score") {
        CandidatePool<FrameSequence> pool;
        pool.items.resize(4);
        CHECK_THROWS_AS(rank_candidates(pool, 3), CurationError);
        pool.scores = {scored(0.1, 0.1, 0.1), scored(0.9, 0.9, 0.9), scored(0.5, 0.5, 0.5), scored(1.0, 0.2, 0.9)};
        CHECK(rank_candidates(pool, 3) == std::vector<std::size_t>{1, 3, 2});
        pool.scores->pop_back();
        try {
            rank_candidates(pool, 3);
            FAIL("expected CurationError");
        } catch (const CurationError& e) {
            CHECK(e.code() == CurationErrc::ScoresMissing);
        }
    }

    TEST_CASE("image judge picks the announced index") {
        pr::TemplateSet templates;
        mock::ScriptedChat chat({"The answer is image 3. Best pose."});
        const std::vector<Image> pool(4, Image::filled(4, 4, {1, 2, 3}));
        const auto r = judge_select_image(pool, "Tom naps", chat, templates);
        CHECK(r.index == 2);
        CHECK(r.attempts == 1);
        const auto sent = chat.received().front().front();
        CHECK(sent.attachments.size() == 4);
        CHECK(sent.tag == "image_judge");
    }

    TEST_CASE("judge re-asks once with a format reminder, then fails") {
        pr::TemplateSet templates;
        mock::ScriptedChat good_second({"I like them all.", "The answer is image 2"});
        const std::vector<Image> pool(3, Image::filled(4, 4, {1, 2, 3}));
        const auto r = judge_select_image(pool, "x", good_second, templates);
        CHECK(r.index == 1);
        CHECK(r.attempts == 2);
        const auto second = good_second.received()[1].front().text;
        CHECK(second.find(kFormatReminder) != std::string::npos);

        mock::ScriptedChat never({"hmm", "The answer is image 9"});
        try {
            judge_select_image(pool, "x", never, templates);
            FAIL("expected CurationError");
        } catch (const CurationError& e) {
            CHECK(e.code() == CurationErrc::JudgeFailed);
        }
        CHECK(never.calls() == 2);
    }

    TEST_CASE("single candidates skip the judge and empty pools fail") {
        pr::TemplateSet templates;
        mock::ScriptedChat chat({});
        CHECK(judge_select_image({Image::filled(2, 2, {})}, "x", chat, templates).index == 0);
        CHECK(chat.calls() == 0);
        try {
            judge_select_image({}, "x", chat, templates);
            FAIL("expected CurationError");
        } catch (const CurationError& e) {
            CHECK(e.code() == CurationErrc::EmptyPool);
        }
    }

    TEST_CASE("video judge sees at most three sheets") {
        pr::TemplateSet templates;
        mock::ScriptedChat chat({"The answer is image 2."});
        const std::vector<metrics::ContactSheet> top = {sheet_of({1, 1, 1}), sheet_of({2, 2, 2}), sheet_of({3, 3, 3})};
        const auto r = judge_select_video(top, "Tom runs", chat, templates);
        CHECK(r.index == 1);
        CHECK(chat.received().front().front().tag == "video_judge");
        auto four = top;
        four.push_back(sheet_of({4, 4, 4}));
        try {
            judge_select_video(four, "Tom runs", chat, templates);
            FAIL("expected CurationError");
        } catch (const CurationError& e) {
            CHECK(e.code() == CurationErrc::PoolTooLarge);
        }
    }

    TEST_CASE("image pools larger than the attachment limit are rejected") {
        struct Tiny : mock::ScriptedChat {
            using ScriptedChat::ScriptedChat;
            int max_attachments() const override { return 2; }
        } chat({"The answer is image 1"});
        pr::TemplateSet templates;
        CHECK_THROWS_AS(judge_select_image(std::vector<Image>(3, Image::filled(2, 2, {})), "x", chat, templates),
                        CurationError);
    }

    TEST_CASE("mock judge choice over a real pool is reproducible") {
        pr::TemplateSet templates;
        mock::MockChat chat(templates);
        mock::MockImageProvider images(24);
        const auto pool = images.generate_images({"Jerry the mouse: small", {}, 4}, 4);
        const auto a = judge_select_image(pool, "Jerry", chat, templates);
        const auto b = judge_select_image(pool, "Jerry", chat, templates);
        CHECK(a.index == b.index);
        CHECK(a.index < 4);
    }

    TEST_CASE("repair: consistent scene takes one iteration and no replacements") {
        pr::TemplateSet templates;
        mock::MockChat chat(templates);
        mock::MockSegmenter seg;
        mock::MockImageProvider images(64);
        const auto tom = character("Tom the cat");
        const auto jerry = character("Jerry the mouse");
        const Image scene = scene_with({mock::name_hue("Tom the cat"), mock::name_hue("Jerry the mouse")});
        const auto out = consistency_repair(scene, "Tom and Jerry", {tom, jerry}, seg, images, chat, templates, 3, 1);
        CHECK(out.passed);
        CHECK(out.iterations_used == 1);
        CHECK(out.replacements == 0);
        CHECK(out.final_item == scene);
        CHECK(out.audit_log.size() == 1);
    }

    TEST_CASE("repair: a wrong hue is replaced and then passes") {
        pr::TemplateSet templates;
        mock::MockChat chat(templates);
        mock::MockSegmenter seg;
        mock::MockImageProvider images(64);
        const int tom_hue = mock::name_hue("Tom the cat");
        const auto tom = character("Tom the cat");
        const Image scene = scene_with({(tom_hue + 180) % 360});
        const auto out = consistency_repair(scene, "Tom alone", {tom}, seg, images, chat, templates, 3, 1);
        CHECK(out.passed);
        CHECK(out.iterations_used == 2);
        CHECK(out.replacements == 1);
        CHECK(out.final_item != scene);
        const auto h = dominant_hue(out.final_item);
        REQUIRE(h);
        CHECK(hue_distance(*h, tom_hue) <= 12.0);
        const auto j = to_json(out);
        CHECK(j["iterations_used"] == 2);
        CHECK(j["audit_log"].size() == 3);
    }

    TEST_CASE("repair: a judge that never passes stops at max_iters") {
        pr::TemplateSet templates;
        for (int iters : {1, 2, 3, 5}) {
            int calls = 0;
            mock::FunctionChat chat([&](const auto&) {
                ++calls;
                return std::string("Inconsistent: Tom the cat (observed hue 10)");
            });
            mock::MockSegmenter seg;
            mock::MockImageProvider images(64);
            const Image scene = scene_with({10, 200});
            const auto out =
                consistency_repair(scene, "Tom", {character("Tom the cat")}, seg, images, chat, templates, iters, 3);
            CHECK(out.iterations_used == iters);
            CHECK_FALSE(out.passed);
            CHECK(calls == iters);
            CHECK(out.replacements <= iters - 1);
            CHECK(out.final_item == scene);  // no replacement reduced the findings below the first
        }
    }

    TEST_CASE("repair rejects max_iters below one") {
        pr::TemplateSet templates;
        mock::ScriptedChat chat({});
        mock::MockSegmenter seg;
        mock::MockImageProvider images(16);
        CHECK_THROWS(consistency_repair(Image::filled(8, 8, {}), "x", {}, seg, images, chat, templates, 0));
    }

    TEST_CASE("repair mask choice prefers the reported hue") {
        const Image scene = scene_with({30, 200});
        mock::MockSegmenter seg;
        const auto masks = seg.segment(scene);
        const auto by_hue = choose_repair_mask(scene, masks, 195.0);
        REQUIRE(by_hue);
        CHECK(hue_distance(*dominant_hue(scene, &masks[*by_hue]), 200) <= 2);
        const auto largest = choose_repair_mask(scene, masks, std::nullopt);
        REQUIRE(largest);
        CHECK(masks[*largest].label != kBackgroundLabel);
        CHECK_FALSE(choose_repair_mask(scene, {masks.front()}, 30.0));
    }
}
