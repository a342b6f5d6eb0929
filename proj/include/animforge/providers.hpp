#pragma once

// Capability interfaces for the five generative services. Mocks live in
// mock_providers.hpp, HTTP adapters in remote_providers.hpp.

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "animforge/image.hpp"
#include "animforge/prompt.hpp"

namespace animforge {

struct ChatMessage {
    std::string role = "user";
    std::string text;
    std::vector<Image> attachments;
    // Template id the text was rendered from ("" for free text). Remote adapters
    // do not send it; the mock chat uses it to pick a persona.
    std::string tag;
};

struct ImageRequest {
    std::string prompt;
    std::vector<Image> reference_images;
    std::uint64_t seed = 0;

    void validate() const;  // prompt non-empty
};

struct VideoRequest {
    Image conditioning_image;
    std::string prompt;
    prompt::GenerationParams params;
    std::uint64_t seed = 0;
    int frame_count = 24;
    double fps = 8.0;

    void validate() const;  // prompt non-empty, frame_count >= 2, fps > 0
};

struct EmbeddingVector {
    std::vector<double> values;
    int dimension() const noexcept { return static_cast<int>(values.size()); }
    bool operator==(const EmbeddingVector&) const = default;
};

double dot(const EmbeddingVector& a, const EmbeddingVector& b);
double norm(const EmbeddingVector& v);
// Cosine similarity clamped to [-1, 1]; 0 when either vector is zero.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct ProviderPolicy {
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{250};
    int rate_limit_requests = 60;
    std::chrono::milliseconds rate_limit_window{60'000};
    std::chrono::milliseconds timeout{120'000};

    void validate() const;  // throws PipelineError(ConfigInvalid)
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string chat(const std::vector<ChatMessage>& messages) = 0;
    virtual int max_attachments() const { return 16; }
};

class ImageProvider {
public:
    virtual ~ImageProvider() = default;
    virtual std::vector<Image> generate_images(const ImageRequest& request, int n) = 0;
    virtual Image region_replace(const Image& image, const SegmentationMask& mask, const ImageRequest& request) = 0;
};

class VideoProvider {
public:
    virtual ~VideoProvider() = default;
    virtual std::vector<FrameSequence> generate_videos(const VideoRequest& request, int n) = 0;
};

class Segmenter {
public:
    virtual ~Segmenter() = default;
    virtual std::vector<SegmentationMask> segment(const Image& image) = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed_text(std::string_view text) = 0;
    virtual EmbeddingVector embed_image(const Image& image) = 0;
    // One provider call for a batch; the default loops over embed_image.
    virtual std::vector<EmbeddingVector> embed_images(std::span<const Image> images);
};

struct ProviderSet {
    std::shared_ptr<ChatProvider> chat;
    std::shared_ptr<ImageProvider> image;
    std::shared_ptr<VideoProvider> video;
    std::shared_ptr<Segmenter> segmenter;
    std::shared_ptr<Embedder> embedder;
};

// Checks a segmentation result: masks sized like the image, non-empty,
// pairwise disjoint and covering. Throws ProviderError(Permanent) otherwise.
void validate_partition(const std::vector<SegmentationMask>& masks, int width, int height);

}  // namespace animforge
