#pragma once

// On-disk run state: the checkpoint (run.json), digest-tracked artifacts, and a
// journal that memoizes every provider call so a resumed run replays instead of
// paying for generation again.

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "animforge/providers.hpp"

namespace animforge {

enum class StageId { RefineStory, GenerateScript, GenerateAssets, GenerateSceneImages, ProduceVideos, EnhanceAndSplice };
inline constexpr std::array kAllStages = {StageId::RefineStory,        StageId::GenerateScript,
                                          StageId::GenerateAssets,     StageId::GenerateSceneImages,
                                          StageId::ProduceVideos,      StageId::EnhanceAndSplice};
std::string_view to_string(StageId id) noexcept;
std::optional<StageId> stage_from_string(std::string_view s) noexcept;

enum class StageStatus { Pending, InProgress, Done };
std::string_view to_string(StageStatus s) noexcept;

struct ArtifactRecord {
    std::string digest;
    StageId stage = StageId::RefineStory;
};

struct Checkpoint {
    std::string run_id;
    std::string config_digest;
    std::array<StageStatus, kAllStages.size()> stages{};
    std::map<std::string, ArtifactRecord> artifacts;       // relative path -> record
    std::map<std::string, std::vector<std::string>> calls;  // journal key -> artifact paths

    StageStatus status(StageId id) const { return stages[static_cast<std::size_t>(id)]; }
    bool complete() const;

    nlohmann::json to_json() const;
    static Checkpoint from_json(const nlohmann::json& j);
};

class Workspace {
public:
    explicit Workspace(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path path(const std::string& rel) const { return root_ / rel; }

    static bool is_empty_or_absent(const std::filesystem::path& root);

    void create(const nlohmann::json& config, Checkpoint initial);
    void load();  // reads run.json; CorruptWorkspace when missing or unparsable
    nlohmann::json read_config() const;

    Checkpoint& checkpoint() { return checkpoint_; }
    const Checkpoint& checkpoint() const { return checkpoint_; }
    void commit();  // atomic rename of run.json

    // Writes bytes (skipped when identical bytes are already recorded) and records the digest.
    void write_artifact(const std::string& rel, std::span<const std::uint8_t> bytes, StageId stage);
    void write_text(const std::string& rel, std::string_view text, StageId stage);
    void write_json(const std::string& rel, const nlohmann::json& j, StageId stage);

    std::vector<std::uint8_t> read_bytes(const std::string& rel) const;
    std::string read_text(const std::string& rel) const;
    nlohmann::json read_json(const std::string& rel) const;

    // Re-hashes every recorded artifact. Throws PipelineError(CorruptWorkspace).
    void verify_all() const;

    void set_stage_status(StageId id, StageStatus status);  // commits
    void record_call(const std::string& key, std::vector<std::string> paths);  // commits
    std::optional<std::vector<std::string>> find_call(const std::string& key) const;

private:
    std::filesystem::path root_;
    Checkpoint checkpoint_;
    mutable std::mutex mu_;
};

// Atomic text write via tmp file + rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

struct CallRecord {
    std::string key;
    std::string capability;  // chat, generate_images, region_replace, generate_videos, segment, embed_text, embed_images
    int count = 0;           // n for pools, batch size for embeddings, attachments for chat
    bool replayed = false;
};

// Memoizing gateway to the providers. All calls in a run go through one journal;
// it is safe to use from concurrent scene workers.
class Journal {
public:
    Journal(Workspace& workspace, ProviderSet providers, std::optional<int> interrupt_before_call = std::nullopt);

    void set_stage(StageId stage);
    StageId stage() const;

    std::string chat(const std::string& key, const std::vector<ChatMessage>& messages);
    std::vector<Image> generate_images(const std::string& key, const std::string& dir, const ImageRequest& request, int n);
    Image region_replace(const std::string& key, const std::string& rel_path, const Image& image,
                         const SegmentationMask& mask, const ImageRequest& request);
    std::vector<FrameSequence> generate_videos(const std::string& key, const std::string& dir,
                                               const VideoRequest& request, int n);
    std::vector<SegmentationMask> segment(const std::string& key, const Image& image);
    EmbeddingVector embed_text(const std::string& key, std::string_view text);
    std::vector<EmbeddingVector> embed_images(const std::string& key, std::span<const Image> images);

    int max_attachments() const { return providers_.chat->max_attachments(); }

    // Provider calls actually issued (replays excluded).
    int calls_made() const;
    int calls_replayed() const;
    std::map<std::string, int> calls_by_capability() const;
    std::vector<CallRecord> records() const;

    Workspace& workspace() { return ws_; }

private:
    std::optional<std::vector<std::string>> lookup(const std::string& key) const;
    void before_call(const std::string& key);
    void record(const std::string& key, const std::string& capability, int count, bool replayed,
                std::vector<std::string> paths);

    Workspace& ws_;
    ProviderSet providers_;
    std::optional<int> interrupt_;
    mutable std::mutex mu_;
    StageId stage_ = StageId::RefineStory;
    int made_ = 0;
    int replayed_ = 0;
    std::vector<CallRecord> records_;
};

// "frame_0007.png"
std::string frame_file_name(int index);

// Frame sequences on disk: <dir>/frames/frame_0000.png ... plus <dir>/meta.json.
void write_clip(Workspace& ws, const std::string& dir, const FrameSequence& clip, StageId stage);
FrameSequence read_clip(const Workspace& ws, const std::string& dir);
// Same layout outside a workspace (used by eval).
FrameSequence read_clip_dir(const std::filesystem::path& dir);

// Provider adapters that route through the journal under a scope prefix; the
// n-th call of a kind gets key "<scope>/<kind>_<n>".
class JournaledChat : public ChatProvider {
public:
    JournaledChat(Journal& journal, std::string scope) : j_(journal), scope_(std::move(scope)) {}
    std::string chat(const std::vector<ChatMessage>& messages) override;
    int max_attachments() const override { return j_.max_attachments(); }

private:
    Journal& j_;
    std::string scope_;
    int n_ = 0;
};

class JournaledImageProvider : public ImageProvider {
public:
    JournaledImageProvider(Journal& journal, std::string scope) : j_(journal), scope_(std::move(scope)) {}
    std::vector<Image> generate_images(const ImageRequest& request, int n) override;
    Image region_replace(const Image& image, const SegmentationMask& mask, const ImageRequest& request) override;

private:
    Journal& j_;
    std::string scope_;
    int n_images_ = 0;
    int n_replace_ = 0;
};

class JournaledSegmenter : public Segmenter {
public:
    JournaledSegmenter(Journal& journal, std::string scope) : j_(journal), scope_(std::move(scope)) {}
    std::vector<SegmentationMask> segment(const Image& image) override;

private:
    Journal& j_;
    std::string scope_;
    int n_ = 0;
};

class JournaledEmbedder : public Embedder {
public:
    JournaledEmbedder(Journal& journal, std::string scope) : j_(journal), scope_(std::move(scope)) {}
    EmbeddingVector embed_text(std::string_view text) override;
    EmbeddingVector embed_image(const Image& image) override;
    std::vector<EmbeddingVector> embed_images(std::span<const Image> images) override;

private:
    Journal& j_;
    std::string scope_;
    int n_text_ = 0;
    int n_images_ = 0;
};

}  // namespace animforge
