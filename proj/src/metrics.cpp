#include "animforge/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "animforge/error.hpp"
#include "animforge/kernels.hpp"

namespace animforge::metrics {

namespace {

void require_blur_size(const Image& image) {
    if (image.width() < 3 || image.height() < 3)
        throw MetricsError(MetricsErrc::ImageTooSmall, "blur_score needs an image of at least 3x3 pixels");
}

void require_clip(const FrameSequence& clip) {
    if (clip.frame_count() < 2) throw MetricsError(MetricsErrc::ClipTooShort, "consistency needs at least 2 frames");
    try {
        clip.validate();
    } catch (const std::invalid_argument& e) {
        throw MetricsError(MetricsErrc::InvalidInput, e.what());
    }
}

std::vector<Image> restricted_frames(const FrameSequence& clip, const SegmentationMask& mask) {
    if (mask.width != clip.width() || mask.height != clip.height())
        throw MetricsError(MetricsErrc::InvalidInput, "mask '" + mask.label + "' does not match the frame size");
    std::vector<Image> out;
    out.reserve(clip.frames.size());
    for (const auto& f : clip.frames) out.push_back(restrict_to_mask(f, mask));
    return out;
}

double masked_consistency(const FrameSequence& clip, Embedder& embedder, const SegmentationMask& mask) {
    require_clip(clip);
    const auto frames = restricted_frames(clip, mask);
    return consistency_from_embeddings(embedder.embed_images(frames));
}

double check_unit(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw MetricsError(MetricsErrc::InvalidInput, std::string(what) + " outside [0, 1]");
    return v;
}

}  // namespace

nlohmann::json to_json(const MetricReport& r) {
    nlohmann::json j = {
        {"distortion_quality", r.distortion_quality},
        {"subject_consistency", r.subject_consistency},
        {"background_consistency", r.background_consistency},
        {"coherence", r.coherence},
        {"text_visual_alignment", r.text_visual_alignment},
    };
    j["image_image_similarity"] = r.image_image_similarity ? nlohmann::json(*r.image_image_similarity) : nlohmann::json();
    return j;
}

MetricReport report_from_json(const nlohmann::json& j) {
    MetricReport r;
    r.distortion_quality = j.at("distortion_quality").get<double>();
    r.subject_consistency = j.at("subject_consistency").get<double>();
    r.background_consistency = j.at("background_consistency").get<double>();
    r.coherence = j.at("coherence").get<double>();
    r.text_visual_alignment = j.at("text_visual_alignment").get<double>();
    if (j.contains("image_image_similarity") && !j.at("image_image_similarity").is_null())
        r.image_image_similarity = j.at("image_image_similarity").get<double>();
    return r;
}

double blur_score(const Image& image) {
    require_blur_size(image);
    const double v = kernels::parallel::laplacian_variance(kernels::parallel::to_gray(image));
    return v / (v + kBlurSquash);
}

double blur_score_serial(const Image& image) {
    require_blur_size(image);
    const double v = kernels::serial::laplacian_variance(kernels::serial::to_gray(image));
    return v / (v + kBlurSquash);
}

const SegmentationMask& select_subject_mask(const std::vector<SegmentationMask>& masks) {
    const SegmentationMask* best = nullptr;
    for (const auto& m : masks) {
        if (m.label == kBackgroundLabel || m.area == 0) continue;
        if (!best || m.area > best->area) best = &m;
    }
    if (!best) throw MetricsError(MetricsErrc::NoSubjectFound, "segmentation found no subject besides the background");
    return *best;
}

const SegmentationMask& select_background_mask(const std::vector<SegmentationMask>& masks) {
    for (const auto& m : masks)
        if (m.label == kBackgroundLabel) return m;
    throw MetricsError(MetricsErrc::NoSubjectFound, "segmentation has no background mask");
}

Image restrict_to_mask(const Image& image, const SegmentationMask& mask) {
    if (mask.width != image.width() || mask.height != image.height())
        throw MetricsError(MetricsErrc::InvalidInput, "mask does not match the image size");
    int x0 = image.width(), y0 = image.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (!mask.contains(x, y)) continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0) throw MetricsError(MetricsErrc::InvalidInput, "mask '" + mask.label + "' is empty");
    Image out(x1 - x0 + 1, y1 - y0 + 1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) out.set(x - x0, y - y0, mask.contains(x, y) ? image.at(x, y) : kMaskFill);
    return out;
}

double consistency_from_embeddings(const std::vector<EmbeddingVector>& f) {
    if (f.size() < 2) throw MetricsError(MetricsErrc::ClipTooShort, "consistency needs at least 2 frames");
    double sum = 0.0;
    for (std::size_t t = 1; t < f.size(); ++t) sum += 0.5 * (cosine(f[t], f[0]) + cosine(f[t], f[t - 1]));
    const double mean = sum / static_cast<double>(f.size() - 1);
    return std::clamp((mean + 1.0) / 2.0, 0.0, 1.0);
}

double subject_consistency(const FrameSequence& clip, Embedder& embedder, const SegmentationMask& mask) {
    return masked_consistency(clip, embedder, mask);
}

double subject_consistency(const FrameSequence& clip, Embedder& embedder, Segmenter& segmenter) {
    require_clip(clip);
    const auto masks = segmenter.segment(clip.frames.front());
    return masked_consistency(clip, embedder, select_subject_mask(masks));
}

double background_consistency(const FrameSequence& clip, Embedder& embedder, const SegmentationMask& mask) {
    return masked_consistency(clip, embedder, mask);
}

double background_consistency(const FrameSequence& clip, Embedder& embedder, Segmenter& segmenter) {
    require_clip(clip);
    const auto masks = segmenter.segment(clip.frames.front());
    return masked_consistency(clip, embedder, select_background_mask(masks));
}

double coherence(double subject, double background) {
    return (check_unit(subject, "subject consistency") + check_unit(background, "background consistency")) / 2.0;
}

double distortion_quality(const FrameSequence& clip) {
    if (clip.frames.empty()) throw MetricsError(MetricsErrc::ClipTooShort, "clip has no frames");
    double sum = 0.0;
    for (const auto& f : clip.frames) sum += blur_score(f);
    return sum / clip.frame_count();
}

double text_visual_alignment(const EmbeddingVector& text, const std::vector<EmbeddingVector>& frames) {
    if (frames.empty()) throw MetricsError(MetricsErrc::ClipTooShort, "alignment needs at least one frame");
    double sum = 0.0;
    for (const auto& f : frames) sum += cosine(text, f);
    return std::clamp(sum / static_cast<double>(frames.size()), -1.0, 1.0);
}

double text_visual_alignment(std::string_view text, const FrameSequence& clip, Embedder& embedder) {
    return text_visual_alignment(embedder.embed_text(text), embedder.embed_images(clip.frames));
}

double image_image_similarity(const Image& a, const Image& b, Embedder& embedder) {
    const Image pair[2] = {a, b};
    const auto e = embedder.embed_images(pair);
    return cosine(e[0], e[1]);
}

MetricReport evaluate_clip(const FrameSequence& clip, Embedder& embedder, Segmenter& segmenter,
                           const std::optional<EmbeddingVector>& text_embedding) {
    require_clip(clip);
    return evaluate_clip(clip, embedder, segmenter.segment(clip.frames.front()), text_embedding);
}

bool has_subject(const std::vector<SegmentationMask>& masks) {
    return std::any_of(masks.begin(), masks.end(), [](const auto& m) { return m.label != kBackgroundLabel; });
}

MetricReport evaluate_clip(const FrameSequence& clip, Embedder& embedder, const std::vector<SegmentationMask>& masks,
                           const std::optional<EmbeddingVector>& text_embedding, MissingSubject missing) {
    require_clip(clip);
    const bool skip_subject = missing == MissingSubject::ScoreZero && !has_subject(masks);
    const SegmentationMask* subject = skip_subject ? nullptr : &select_subject_mask(masks);
    const SegmentationMask& background = select_background_mask(masks);

    MetricReport r;
    r.distortion_quality = distortion_quality(clip);
    if (subject)
        r.subject_consistency = consistency_from_embeddings(embedder.embed_images(restricted_frames(clip, *subject)));
    r.background_consistency = consistency_from_embeddings(embedder.embed_images(restricted_frames(clip, background)));
    r.coherence = coherence(r.subject_consistency, r.background_consistency);
    const auto full = embedder.embed_images(clip.frames);
    r.text_visual_alignment = text_embedding ? text_visual_alignment(*text_embedding, full) : 0.0;
    return r;
}

double composite_score(const MetricReport& r) {
    return (r.distortion_quality + r.subject_consistency + r.background_consistency) / 3.0;
}

std::vector<int> contact_sheet_indices(int n, int k) {
    if (k < 2) throw MetricsError(MetricsErrc::InvalidInput, "contact sheet needs k >= 2");
    if (n < k) throw MetricsError(MetricsErrc::ClipTooShort, "clip has fewer frames than contact sheet tiles");
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    const long long den = 2LL * (k - 1);
    for (int i = 0; i < k; ++i) out.push_back(static_cast<int>((2LL * i * (n - 1) + (k - 1)) / den));
    return out;
}

ContactSheet contact_sheet(const FrameSequence& clip, int k) {
    const auto idx = contact_sheet_indices(clip.frame_count(), k);
    try {
        clip.validate();
    } catch (const std::invalid_argument& e) {
        throw MetricsError(MetricsErrc::InvalidInput, e.what());
    }
    const int w = clip.width();
    const int h = clip.height();
    ContactSheet sheet{Image(w * k, h), k, idx};
    for (int t = 0; t < k; ++t) {
        const Image& f = clip.frames[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) sheet.image.set(t * w + x, y, f.at(x, y));
    }
    return sheet;
}

}  // namespace animforge::metrics
