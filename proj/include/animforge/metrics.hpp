#pragma once

// Quality and consistency metrics over images and clips, parameterised by an
// embedder so the same code runs against the toy embedder and a remote one.

#include <optional>
#include <vector>

#include <json.hpp>

#include "animforge/image.hpp"
#include "animforge/providers.hpp"

namespace animforge::metrics {

inline constexpr double kBlurSquash = 1000.0;
inline constexpr Rgb kMaskFill{128, 128, 128};

struct MetricReport {
    double distortion_quality = 0.0;
    double subject_consistency = 0.0;
    double background_consistency = 0.0;
    double coherence = 0.0;
    double text_visual_alignment = 0.0;
    std::optional<double> image_image_similarity;

    bool operator==(const MetricReport&) const = default;
};

nlohmann::json to_json(const MetricReport& r);
MetricReport report_from_json(const nlohmann::json& j);

// Laplacian variance v squashed to v / (v + kBlurSquash). Throws ImageTooSmall below 3x3.
double blur_score(const Image& image);
double blur_score_serial(const Image& image);

// Picks the largest non-background mask (first on ties). Throws NoSubjectFound.
const SegmentationMask& select_subject_mask(const std::vector<SegmentationMask>& masks);
// The mask labelled "background". Throws NoSubjectFound when absent.
const SegmentationMask& select_background_mask(const std::vector<SegmentationMask>& masks);

// Crop to the mask's bounding box, pixels outside the mask set to kMaskFill.
Image restrict_to_mask(const Image& image, const SegmentationMask& mask);

// Mean over t >= 1 of (cos(f_t, f_0) + cos(f_t, f_{t-1})) / 2, mapped to [0, 1].
double consistency_from_embeddings(const std::vector<EmbeddingVector>& frames);

// Restriction uses the given mask, or one derived from frame 0 via the segmenter.
double subject_consistency(const FrameSequence& clip, Embedder& embedder, const SegmentationMask& mask);
double subject_consistency(const FrameSequence& clip, Embedder& embedder, Segmenter& segmenter);
double background_consistency(const FrameSequence& clip, Embedder& embedder, const SegmentationMask& mask);
double background_consistency(const FrameSequence& clip, Embedder& embedder, Segmenter& segmenter);

// (s + b) / 2. Throws InvalidInput outside [0, 1].
double coherence(double subject, double background);

// Mean blur score over frames.
double distortion_quality(const FrameSequence& clip);

double text_visual_alignment(const EmbeddingVector& text, const std::vector<EmbeddingVector>& frames);
double text_visual_alignment(std::string_view text, const FrameSequence& clip, Embedder& embedder);
double image_image_similarity(const Image& a, const Image& b, Embedder& embedder);

// Full report for one clip: one segmentation call and three embedding batches.
// The text embedding is passed in so callers can share it across candidates.
MetricReport evaluate_clip(const FrameSequence& clip, Embedder& embedder, Segmenter& segmenter,
                           const std::optional<EmbeddingVector>& text_embedding);

enum class MissingSubject { Throw, ScoreZero };

// Same, on masks already computed for frame 0. With ScoreZero a background-only
// segmentation gives subject_consistency 0 and skips the subject batch.
MetricReport evaluate_clip(const FrameSequence& clip, Embedder& embedder, const std::vector<SegmentationMask>& masks,
                           const std::optional<EmbeddingVector>& text_embedding,
                           MissingSubject missing = MissingSubject::Throw);

bool has_subject(const std::vector<SegmentationMask>& masks);

// mean(distortion_quality, subject_consistency, background_consistency).
double composite_score(const MetricReport& r);

struct ContactSheet {
    Image image;
    int k = 0;
    std::vector<int> source_frame_indices;
};

// round(i (n-1) / (k-1)) with halves rounded up, in exact integer arithmetic.
std::vector<int> contact_sheet_indices(int frame_count, int k);
ContactSheet contact_sheet(const FrameSequence& clip, int k = 5);

}  // namespace animforge::metrics
