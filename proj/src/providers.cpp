#include "animforge/providers.hpp"

#include <algorithm>
#include <cmath>

#include "animforge/error.hpp"
#include "animforge/text.hpp"

namespace animforge {

void ImageRequest::validate() const {
    if (text::trim(prompt).empty()) throw ProviderError(ProviderErrc::Permanent, "image request has an empty prompt");
}

void VideoRequest::validate() const {
    if (text::trim(prompt).empty()) throw ProviderError(ProviderErrc::Permanent, "video request has an empty prompt");
    if (frame_count < 2) throw ProviderError(ProviderErrc::Permanent, "video request needs frame_count >= 2");
    if (!(fps > 0)) throw ProviderError(ProviderErrc::Permanent, "video request needs fps > 0");
    if (conditioning_image.empty()) throw ProviderError(ProviderErrc::Permanent, "video request has no conditioning image");
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.values.size() != b.values.size()) throw std::invalid_argument("embedding dimensions differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
    return s;
}

double norm(const EmbeddingVector& v) { return std::sqrt(dot(v, v)); }

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

void ProviderPolicy::validate() const {
    if (max_retries < 0) throw PipelineError(PipelineErrc::ConfigInvalid, "max_retries must be >= 0");
    if (backoff_base.count() <= 0 || rate_limit_window.count() <= 0 || timeout.count() <= 0)
        throw PipelineError(PipelineErrc::ConfigInvalid, "provider policy durations must be positive");
    if (rate_limit_requests < 1) throw PipelineError(PipelineErrc::ConfigInvalid, "rate limit must allow >= 1 request");
}

std::vector<EmbeddingVector> Embedder::embed_images(std::span<const Image> images) {
    std::vector<EmbeddingVector> out;
    out.reserve(images.size());
    for (const Image& img : images) out.push_back(embed_image(img));
    return out;
}

void validate_partition(const std::vector<SegmentationMask>& masks, int width, int height) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<std::uint8_t> seen(n, 0);
    for (const auto& m : masks) {
        if (m.width != width || m.height != height || m.bits.size() != n)
            throw ProviderError(ProviderErrc::Permanent, "mask '" + m.label + "' does not match the image size");
        if (m.area == 0) throw ProviderError(ProviderErrc::Permanent, "mask '" + m.label + "' is empty");
        for (std::size_t i = 0; i < n; ++i) {
            if (!m.bits[i]) continue;
            if (seen[i]) throw ProviderError(ProviderErrc::Permanent, "segmentation masks overlap");
            seen[i] = 1;
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw ProviderError(ProviderErrc::Permanent, "segmentation masks do not cover the image");
}

}  // namespace animforge
