#pragma once

// Deterministic reference implementations of every provider capability.
//
// Identity is carried by hue: a character or setting named N is drawn in the
// colour whose hue is name_hue(N). Every output is a pure function of the
// request, its seed and the candidate ordinal.

#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "animforge/prompt.hpp"
#include "animforge/providers.hpp"

namespace animforge::mock {

// fnv1a64(NFC(trim(name))) mod 360.
int name_hue(std::string_view name);
// Prompt text before the first ':' (trimmed), or the whole prompt.
std::string prompt_subject(std::string_view prompt);
// The saturated identity colour for a hue, optionally darkened by a texture factor.
Rgb identity_color(int hue, double value_scale = 1.0);
// Nearest basic colour word for a hue ("red", "orange", ...).
std::string_view color_word(int hue);

class MockImageProvider : public ImageProvider {
public:
    explicit MockImageProvider(int size = 512);
    std::vector<Image> generate_images(const ImageRequest& request, int n) override;
    Image region_replace(const Image& image, const SegmentationMask& mask, const ImageRequest& request) override;

    int size() const noexcept { return size_; }
    // Probability that a character blob in a scene candidate is drawn with a shifted hue.
    static constexpr double kGlitchProbability = 0.25;

private:
    Image render_asset(const ImageRequest& request, int ordinal) const;
    Image render_scene(const ImageRequest& request, int ordinal) const;
    int size_;
};

class MockVideoProvider : public VideoProvider {
public:
    std::vector<FrameSequence> generate_videos(const VideoRequest& request, int n) override;
};

// Connected components over integer hue, 4-connectivity. Neighbours join when
// both are neutral, or both chromatic within kHueTolerance degrees. The largest
// component is "background"; components smaller than min_fraction of the image
// are folded into it so noisy inputs stay bounded.
class MockSegmenter : public Segmenter {
public:
    static constexpr int kHueTolerance = 8;
    explicit MockSegmenter(double min_fraction = 0.002);
    std::vector<SegmentationMask> segment(const Image& image) override;

private:
    double min_fraction_;
};

// 64-dim classical embedder: 16 block luma means (4x4) followed by a 48-bin
// hue histogram normalised by pixel count, then L2-normalised. Text maps colour
// words onto the hue bins and other tokens onto hashed block dimensions.
class ToyEmbedder : public Embedder {
public:
    static constexpr int kDimension = 64;
    EmbeddingVector embed_text(std::string_view text) override;
    EmbeddingVector embed_image(const Image& image) override;
    std::vector<EmbeddingVector> embed_images(std::span<const Image> images) override;
};

struct MockChatOptions {
    int scene_count = 3;
    // The first scene of every generated script references an unlisted setting.
    bool flaw_first_script = false;
};

// Persona chat. Routes on ChatMessage::tag and recovers the slot values by
// matching the reply against the same template set the pipeline renders with.
class MockChat : public ChatProvider {
public:
    explicit MockChat(prompt::TemplateSet templates = {}, MockChatOptions options = {});
    std::string chat(const std::vector<ChatMessage>& messages) override;

private:
    prompt::TemplateSet templates_;
    MockChatOptions options_;
};

// Replays canned replies in order and records what it was sent.
class ScriptedChat : public ChatProvider {
public:
    explicit ScriptedChat(std::vector<std::string> replies);
    std::string chat(const std::vector<ChatMessage>& messages) override;

    std::size_t calls() const;
    std::vector<std::vector<ChatMessage>> received() const;

private:
    mutable std::mutex mu_;
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
    std::vector<std::vector<ChatMessage>> received_;
};

class FunctionChat : public ChatProvider {
public:
    using Fn = std::function<std::string(const std::vector<ChatMessage>&)>;
    explicit FunctionChat(Fn fn) : fn_(std::move(fn)) {}
    std::string chat(const std::vector<ChatMessage>& messages) override { return fn_(messages); }

private:
    Fn fn_;
};

// Story heuristics shared by the chat persona (exposed for tests).
std::vector<std::string> extract_character_names(std::string_view text);
std::vector<std::string> extract_setting_names(std::string_view text);

// A provider set made only of mocks.
ProviderSet make_mock_providers(int image_size = 512, prompt::TemplateSet templates = {}, MockChatOptions chat = {});

}  // namespace animforge::mock
