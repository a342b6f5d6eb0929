#include <doctest.h>

#include <cmath>

#include "animforge/error.hpp"
#include "animforge/kernels.hpp"
#include "animforge/metrics.hpp"
#include "animforge/mock_providers.hpp"
#include "support/oracles.hpp"

using namespace animforge;
namespace km = animforge::kernels;

namespace {

std::vector<double> random_unit(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> g;
    std::vector<double> v(static_cast<std::size_t>(d));
    double n = 0;
    for (auto& x : v) {
        x = g(rng);
        n += x * x;
    }
    for (auto& x : v) x /= std::sqrt(n);
    return v;
}

// Two-region scene: background hue bg, subject square hue fg.
Image two_region(int size, int bg, int fg, int shift = 0) {
    Image img = Image::filled(size, size, hsv_to_rgb(bg, 0.5, 0.8));
    for (int y = size / 4; y < size * 3 / 4; ++y)
        for (int x = size / 4 + shift; x < size * 3 / 4 + shift; ++x)
            if (x >= 0 && x < size) img.set(x, y, hsv_to_rgb(fg, 0.8, 0.9));
    return img;
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("blur score matches the direct convolution") {
        std::mt19937_64 rng(3);
        for (int i = 0; i < 50; ++i) {
            const Image img = oracle::random_image(rng, 3 + static_cast<int>(rng() % 30), 3 + static_cast<int>(rng() % 30));
            CHECK(metrics::blur_score(img) == doctest::Approx(oracle::blur_score(img)).epsilon(1e-9));
            CHECK(metrics::blur_score_serial(img) == doctest::Approx(oracle::blur_score(img)).epsilon(1e-9));
        }
        CHECK(metrics::blur_score(Image::filled(9, 9, {77, 12, 200})) == 0.0);
    }

    TEST_CASE("blurring lowers the score") {
        const Image sharp = oracle::checkerboard(32, 32, 2);
        const Image soft = oracle::box_blur_ref(sharp);
        CHECK(metrics::blur_score(soft) < metrics::blur_score(sharp));
        CHECK(metrics::blur_score(sharp) > 0.9);
    }

    TEST_CASE("blur needs 3x3") {
        try {
            metrics::blur_score(Image::filled(2, 5, {}));
            FAIL("expected MetricsError");
        } catch (const MetricsError& e) {
            CHECK(e.code() == MetricsErrc::ImageTooSmall);
        }
    }

    TEST_CASE("serial and parallel kernels agree") {
        std::mt19937_64 rng(17);
        for (int i = 0; i < 20; ++i) {
            const int w = 1 + static_cast<int>(rng() % 70);
            const int h = 1 + static_cast<int>(rng() % 70);
            const Image a = oracle::random_image(rng, w, h);
            const Image b = oracle::random_image(rng, w, h);
            const auto gs = km::serial::to_gray(a);
            const auto gp = km::parallel::to_gray(a);
            CHECK(gs.px == gp.px);
            if (w >= 3 && h >= 3)
                CHECK(km::parallel::laplacian_variance(gp) ==
                      doctest::Approx(km::serial::laplacian_variance(gs)).epsilon(1e-9));
            CHECK(km::serial::box_blur(a, 1) == km::parallel::box_blur(a, 1));
            CHECK(km::serial::box_blur(a, 2) == km::parallel::box_blur(a, 2));
            CHECK(km::serial::block_means(a) == km::parallel::block_means(a));
            CHECK(km::serial::hue_histogram(a) == km::parallel::hue_histogram(a));
            CHECK(km::serial::mean_abs_delta(a, b) == doctest::Approx(km::parallel::mean_abs_delta(a, b)).epsilon(1e-12));
        }
    }

    TEST_CASE("box blur matches the reference") {
        std::mt19937_64 rng(23);
        for (int i = 0; i < 10; ++i) {
            const Image a = oracle::random_image(rng, 13, 7);
            CHECK(km::serial::box_blur(a, 1) == oracle::box_blur_ref(a));
        }
        CHECK(km::serial::box_blur(Image::filled(3, 3, {5, 5, 5}), 0) == Image::filled(3, 3, {5, 5, 5}));
    }

    TEST_CASE("block spans cover the axis without gaps") {
        for (int len : {1, 2, 3, 4, 5, 17, 64}) {
            int prev_end = 0;
            for (int i = 0; i < km::kBlockGrid; ++i) {
                const auto s = km::block_span(i, km::kBlockGrid, len);
                CHECK(s.end > s.begin);
                if (len >= km::kBlockGrid) CHECK(s.begin == prev_end);
                prev_end = s.end;
            }
            CHECK(prev_end == len);
        }
    }

    TEST_CASE("contact sheet indices") {
        CHECK(metrics::contact_sheet_indices(24, 5) == std::vector<int>{0, 6, 12, 17, 23});
        CHECK(metrics::contact_sheet_indices(5, 5) == std::vector<int>{0, 1, 2, 3, 4});
        CHECK(metrics::contact_sheet_indices(2, 2) == std::vector<int>{0, 1});
        for (int n = 2; n < 200; ++n)
            for (int k = 2; k <= std::min(n, 12); ++k) CHECK(metrics::contact_sheet_indices(n, k) == oracle::sheet_indices(n, k));
        CHECK_THROWS_AS(metrics::contact_sheet_indices(4, 5), MetricsError);
        CHECK_THROWS_AS(metrics::contact_sheet_indices(4, 1), MetricsError);
    }

    TEST_CASE("contact sheet tiles the chosen frames") {
        FrameSequence clip;
        for (int t = 0; t < 24; ++t) clip.frames.push_back(Image::filled(4, 3, {std::uint8_t(t), 0, 0}));
        const auto sheet = metrics::contact_sheet(clip, 5);
        CHECK(sheet.image.width() == 20);
        CHECK(sheet.image.height() == 3);
        CHECK(sheet.source_frame_indices == std::vector<int>{0, 6, 12, 17, 23});
        for (int i = 0; i < 5; ++i) CHECK(sheet.image.at(i * 4 + 1, 1).r == sheet.source_frame_indices[static_cast<std::size_t>(i)]);
    }

    TEST_CASE("coherence is the plain mean") {
        CHECK(metrics::coherence(0.86, 0.93) == (0.86 + 0.93) / 2.0);
        CHECK(metrics::coherence(0.0, 1.0) == 0.5);
        CHECK_THROWS_AS(metrics::coherence(1.2, 0.5), MetricsError);
        CHECK_THROWS_AS(metrics::coherence(0.5, NAN), MetricsError);
    }

    TEST_CASE("consistency formula matches the oracle") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 2 + static_cast<int>(rng() % 20);
            std::vector<std::vector<double>> raw;
            std::vector<EmbeddingVector> embs;
            for (int t = 0; t < n; ++t) {
                raw.push_back(random_unit(rng, 16));
                embs.push_back({raw.back()});
            }
            CHECK(metrics::consistency_from_embeddings(embs) == doctest::Approx(oracle::consistency(raw)).epsilon(1e-12));
        }
        std::vector<EmbeddingVector> same(5, EmbeddingVector{{0.6, 0.8}});
        CHECK(metrics::consistency_from_embeddings(same) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK_THROWS_AS(metrics::consistency_from_embeddings({EmbeddingVector{{1.0}}}), MetricsError);
    }

    TEST_CASE("subject and background masks") {
        mock::MockSegmenter seg;
        const Image img = two_region(32, 40, 220);
        const auto masks = seg.segment(img);
        const auto& subj = metrics::select_subject_mask(masks);
        const auto& bg = metrics::select_background_mask(masks);
        CHECK(subj.area == 256);
        CHECK(bg.area == 1024 - 256);
        const Image r = metrics::restrict_to_mask(img, subj);
        CHECK(r.width() == 16);
        CHECK(r.height() == 16);
        const Image rb = metrics::restrict_to_mask(img, bg);
        CHECK(rb.width() == 32);
        CHECK(rb.at(16, 16) == metrics::kMaskFill);
        const std::vector<SegmentationMask> only_bg = {SegmentationMask::from_bits(kBackgroundLabel, 1, 1, {1})};
        CHECK_THROWS_AS(metrics::select_subject_mask(only_bg), MetricsError);
        CHECK_THROWS_AS(metrics::select_background_mask({SegmentationMask::from_bits("x", 1, 1, {1})}), MetricsError);
    }

    TEST_CASE("static clip scores full consistency") {
        mock::ToyEmbedder emb;
        mock::MockSegmenter seg;
        FrameSequence clip{std::vector<Image>(6, two_region(32, 40, 220)), 8.0};
        CHECK(metrics::subject_consistency(clip, emb, seg) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(metrics::background_consistency(clip, emb, seg) == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("changing subject hue lowers subject consistency more than background") {
        mock::ToyEmbedder emb;
        mock::MockSegmenter seg;
        FrameSequence clip;
        for (int t = 0; t < 6; ++t) clip.frames.push_back(two_region(32, 40, 220 + 20 * t));
        const double s = metrics::subject_consistency(clip, emb, seg);
        const double b = metrics::background_consistency(clip, emb, seg);
        CHECK(s < 0.99);
        CHECK(b > s);
    }

    TEST_CASE("noise lowers consistency monotonically") {
        std::mt19937_64 rng(8);
        mock::ToyEmbedder emb;
        const Image base = two_region(32, 40, 220);
        double prev = 1.1;
        for (double amp : {0.0, 20.0, 60.0, 120.0}) {
            FrameSequence clip;
            clip.frames.push_back(base);
            for (int t = 1; t < 8; ++t) {
                Image f = base;
                std::uniform_real_distribution<double> u(-amp, amp);
                for (auto& v : f.data()) v = static_cast<std::uint8_t>(std::clamp(v + u(rng), 0.0, 255.0));
                clip.frames.push_back(std::move(f));
            }
            const auto mask = SegmentationMask::from_bits(kBackgroundLabel, 32, 32, std::vector<std::uint8_t>(1024, 1));
            const double c = metrics::background_consistency(clip, emb, mask);
            CHECK(c < prev);
            prev = c;
        }
    }

    TEST_CASE("evaluate_clip fills every field") {
        mock::ToyEmbedder emb;
        mock::MockSegmenter seg;
        FrameSequence clip;
        for (int t = 0; t < 8; ++t) clip.frames.push_back(two_region(32, 40, 220, t));
        const auto text = emb.embed_text("a blue square on a orange field");
        const auto r = metrics::evaluate_clip(clip, emb, seg, text);
        CHECK(r.distortion_quality == doctest::Approx(metrics::distortion_quality(clip)));
        CHECK(r.coherence == doctest::Approx((r.subject_consistency + r.background_consistency) / 2));
        CHECK(r.text_visual_alignment == doctest::Approx(metrics::text_visual_alignment("a blue square on a orange field", clip, emb)));
        CHECK_FALSE(r.image_image_similarity);
        CHECK(metrics::composite_score(r) ==
              doctest::Approx((r.distortion_quality + r.subject_consistency + r.background_consistency) / 3));
        CHECK(metrics::report_from_json(metrics::to_json(r)) == r);

        auto r2 = r;
        r2.image_image_similarity = 0.25;
        CHECK(metrics::report_from_json(metrics::to_json(r2)) == r2);

        const auto no_text = metrics::evaluate_clip(clip, emb, seg, std::nullopt);
        CHECK(no_text.subject_consistency == r.subject_consistency);
    }

    TEST_CASE("evaluate_clip on a background-only first frame") {
        mock::ToyEmbedder emb;
        mock::MockSegmenter seg;
        const FrameSequence clip{std::vector<Image>(6, Image::filled(24, 24, {40, 90, 160})), 8.0};
        const auto masks = seg.segment(clip.frames.front());
        REQUIRE_FALSE(metrics::has_subject(masks));
        CHECK_THROWS_AS(metrics::evaluate_clip(clip, emb, seg, std::nullopt), MetricsError);
        CHECK_THROWS_AS(metrics::evaluate_clip(clip, emb, masks, std::nullopt), MetricsError);

        const auto r = metrics::evaluate_clip(clip, emb, masks, std::nullopt, metrics::MissingSubject::ScoreZero);
        CHECK(r.subject_consistency == 0.0);
        CHECK(r.background_consistency == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.coherence == doctest::Approx(0.5));

        // with a subject present both overloads agree
        FrameSequence two;
        for (int t = 0; t < 6; ++t) two.frames.push_back(two_region(32, 40, 220, t));
        const auto m2 = seg.segment(two.frames.front());
        CHECK(metrics::has_subject(m2));
        CHECK(metrics::evaluate_clip(two, emb, m2, std::nullopt, metrics::MissingSubject::ScoreZero) ==
              metrics::evaluate_clip(two, emb, seg, std::nullopt));
    }

    TEST_CASE("one frame is too short") {
        mock::ToyEmbedder emb;
        mock::MockSegmenter seg;
        FrameSequence clip{{two_region(16, 40, 220)}, 8.0};
        try {
            metrics::subject_consistency(clip, emb, seg);
            FAIL("expected MetricsError");
        } catch (const MetricsError& e) {
            CHECK(e.code() == MetricsErrc::ClipTooShort);
        }
    }

    TEST_CASE("image-image similarity") {
        mock::ToyEmbedder emb;
        const Image a = two_region(16, 40, 220);
        CHECK(metrics::image_image_similarity(a, a, emb) == doctest::Approx(1.0));
        CHECK(metrics::image_image_similarity(a, two_region(16, 150, 300), emb) < 0.99);
    }

    TEST_CASE("hsv helpers") {
        for (int h = 0; h < 360; h += 15) {
            const Rgb c = hsv_to_rgb(h, 0.8, 0.9);
            CHECK(rgb_to_hsv(c).h == doctest::Approx(h).epsilon(0.02));
            CHECK(is_chromatic(c));
        }
        CHECK_FALSE(is_chromatic({128, 128, 128}));
        CHECK(hue_distance(350, 10) == 20);
        CHECK(hue_distance(0, 180) == 180);
        CHECK_FALSE(dominant_hue(Image::filled(4, 4, {9, 9, 9})));
    }

    TEST_CASE("resize and crop") {
        std::mt19937_64 rng(1);
        const Image a = oracle::random_image(rng, 10, 6);
        CHECK(resize_area(a, 10, 6) == a);
        const Image half = resize_area(Image::filled(8, 8, {10, 20, 30}), 4, 4);
        CHECK(half == Image::filled(4, 4, {10, 20, 30}));
        const Image c = crop(a, 2, 1, 3, 2);
        CHECK(c.at(0, 0) == a.at(2, 1));
        CHECK(c.at(2, 1) == a.at(4, 2));
    }
}
