#include "animforge/workspace.hpp"

#include <cstdio>
#include <functional>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "animforge/digest.hpp"
#include "animforge/error.hpp"
#include "animforge/png_io.hpp"

namespace animforge {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(StageId id) noexcept {
    switch (id) {
        case StageId::RefineStory: return "RefineStory";
        case StageId::GenerateScript: return "GenerateScript";
        case StageId::GenerateAssets: return "GenerateAssets";
        case StageId::GenerateSceneImages: return "GenerateSceneImages";
        case StageId::ProduceVideos: return "ProduceVideos";
        case StageId::EnhanceAndSplice: return "EnhanceAndSplice";
    }
    return "?";
}

std::optional<StageId> stage_from_string(std::string_view s) noexcept {
    for (StageId id : kAllStages)
        if (to_string(id) == s) return id;
    return std::nullopt;
}

std::string_view to_string(StageStatus s) noexcept {
    switch (s) {
        case StageStatus::Pending: return "Pending";
        case StageStatus::InProgress: return "InProgress";
        case StageStatus::Done: return "Done";
    }
    return "?";
}

namespace {

[[noreturn]] void corrupt(const std::string& what) { throw PipelineError(PipelineErrc::CorruptWorkspace, what); }

StageStatus status_from_string(std::string_view s) {
    if (s == "Pending") return StageStatus::Pending;
    if (s == "InProgress") return StageStatus::InProgress;
    if (s == "Done") return StageStatus::Done;
    corrupt("unknown stage status '" + std::string(s) + "'");
}

std::vector<std::uint8_t> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, std::span<const std::uint8_t> bytes) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

bool Checkpoint::complete() const {
    for (StageStatus s : stages)
        if (s != StageStatus::Done) return false;
    return true;
}

json Checkpoint::to_json() const {
    json st = json::object();
    for (StageId id : kAllStages) st[std::string(animforge::to_string(id))] = animforge::to_string(status(id));
    json arts = json::object();
    for (const auto& [path, rec] : artifacts)
        arts[path] = {{"digest", rec.digest}, {"stage", animforge::to_string(rec.stage)}};
    json calls_j = json::object();
    for (const auto& [key, paths] : calls) calls_j[key] = paths;
    return {{"run_id", run_id}, {"config_digest", config_digest}, {"stages", st}, {"artifacts", arts}, {"calls", calls_j}};
}

Checkpoint Checkpoint::from_json(const json& j) {
    try {
        Checkpoint c;
        c.run_id = j.at("run_id").get<std::string>();
        c.config_digest = j.at("config_digest").get<std::string>();
        for (StageId id : kAllStages)
            c.stages[static_cast<std::size_t>(id)] =
                status_from_string(j.at("stages").at(std::string(animforge::to_string(id))).get<std::string>());
        for (const auto& [path, rec] : j.at("artifacts").items()) {
            const auto stage = stage_from_string(rec.at("stage").get<std::string>());
            if (!stage) corrupt("artifact " + path + " names an unknown stage");
            c.artifacts[path] = {rec.at("digest").get<std::string>(), *stage};
        }
        for (const auto& [key, paths] : j.at("calls").items()) c.calls[key] = paths.get<std::vector<std::string>>();
        return c;
    } catch (const json::exception& e) {
        corrupt(std::string("run.json is malformed: ") + e.what());
    }
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    write_bytes(tmp, as_bytes(bytes));
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------

Workspace::Workspace(fs::path root) : root_(std::move(root)) {}

bool Workspace::is_empty_or_absent(const fs::path& root) {
    if (!fs::exists(root)) return true;
    if (!fs::is_directory(root)) return false;
    return fs::directory_iterator(root) == fs::directory_iterator();
}

void Workspace::create(const json& config, Checkpoint initial) {
    if (!is_empty_or_absent(root_))
        throw PipelineError(PipelineErrc::WorkspaceNotEmpty,
                            "workspace " + root_.string() + " is not empty; use 'resume' to continue a run");
    fs::create_directories(root_);
    write_file_atomic(root_ / "config.json", config.dump(2) + "\n");
    checkpoint_ = std::move(initial);
    commit();
}

void Workspace::load() {
    const fs::path p = root_ / "run.json";
    if (!fs::exists(p)) corrupt("workspace " + root_.string() + " has no run.json");
    const auto bytes = slurp(p);
    const json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) corrupt("run.json is not valid JSON");
    std::lock_guard lock(mu_);
    checkpoint_ = Checkpoint::from_json(j);
}

json Workspace::read_config() const {
    const fs::path p = root_ / "config.json";
    if (!fs::exists(p)) corrupt("workspace " + root_.string() + " has no config.json");
    const auto bytes = slurp(p);
    const json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) corrupt("config.json is not valid JSON");
    return j;
}

void Workspace::commit() {
    std::lock_guard lock(mu_);
    write_file_atomic(root_ / "run.json", checkpoint_.to_json().dump(1) + "\n");
}

void Workspace::write_artifact(const std::string& rel, std::span<const std::uint8_t> bytes, StageId stage) {
    const std::string digest = sha256_hex(bytes);
    {
        std::lock_guard lock(mu_);
        const auto it = checkpoint_.artifacts.find(rel);
        if (it != checkpoint_.artifacts.end() && it->second.digest == digest && fs::exists(root_ / rel)) return;
    }
    write_bytes(root_ / rel, bytes);
    std::lock_guard lock(mu_);
    checkpoint_.artifacts[rel] = {digest, stage};
}

void Workspace::write_text(const std::string& rel, std::string_view text, StageId stage) {
    write_artifact(rel, as_bytes(text), stage);
}

void Workspace::write_json(const std::string& rel, const json& j, StageId stage) {
    write_text(rel, j.dump(2) + "\n", stage);
}

std::vector<std::uint8_t> Workspace::read_bytes(const std::string& rel) const {
    const fs::path p = root_ / rel;
    if (!fs::exists(p)) corrupt("artifact " + rel + " is missing");
    return slurp(p);
}

std::string Workspace::read_text(const std::string& rel) const {
    const auto b = read_bytes(rel);
    return {b.begin(), b.end()};
}

json Workspace::read_json(const std::string& rel) const {
    const auto b = read_bytes(rel);
    const json j = json::parse(b.begin(), b.end(), nullptr, false);
    if (j.is_discarded()) corrupt("artifact " + rel + " is not valid JSON");
    return j;
}

void Workspace::verify_all() const {
    std::lock_guard lock(mu_);
    for (const auto& [rel, rec] : checkpoint_.artifacts) {
        const fs::path p = root_ / rel;
        if (!fs::exists(p)) corrupt("artifact " + rel + " is missing");
        if (sha256_hex(std::span<const std::uint8_t>(slurp(p))) != rec.digest)
            corrupt("artifact " + rel + " does not match its recorded digest");
    }
}

void Workspace::set_stage_status(StageId id, StageStatus status) {
    {
        std::lock_guard lock(mu_);
        checkpoint_.stages[static_cast<std::size_t>(id)] = status;
    }
    commit();
}

void Workspace::record_call(const std::string& key, std::vector<std::string> paths) {
    {
        std::lock_guard lock(mu_);
        checkpoint_.calls[key] = std::move(paths);
    }
    commit();
}

std::optional<std::vector<std::string>> Workspace::find_call(const std::string& key) const {
    std::lock_guard lock(mu_);
    const auto it = checkpoint_.calls.find(key);
    if (it == checkpoint_.calls.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------

std::string frame_file_name(int index) {
    std::ostringstream os;
    os << "frame_" << std::setw(4) << std::setfill('0') << index << ".png";
    return os.str();
}

void write_clip(Workspace& ws, const std::string& dir, const FrameSequence& clip, StageId stage) {
    for (int i = 0; i < clip.frame_count(); ++i)
        ws.write_artifact(dir + "/frames/" + frame_file_name(i), png::encode(clip.frames[static_cast<std::size_t>(i)]), stage);
    ws.write_json(dir + "/meta.json",
                  {{"fps", clip.fps}, {"frame_count", clip.frame_count()}, {"width", clip.width()}, {"height", clip.height()}},
                  stage);
}

namespace {

FrameSequence clip_from(const json& meta, const std::function<std::vector<std::uint8_t>(const std::string&)>& read) {
    FrameSequence clip;
    try {
        clip.fps = meta.at("fps").get<double>();
        const int n = meta.at("frame_count").get<int>();
        for (int i = 0; i < n; ++i) clip.frames.push_back(png::decode(read("frames/" + frame_file_name(i))));
        clip.validate();
        if (clip.width() != meta.at("width").get<int>() || clip.height() != meta.at("height").get<int>())
            throw std::invalid_argument("frame size differs from meta.json");
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("meta.json is malformed: ") + e.what());
    }
    return clip;
}

}  // namespace

FrameSequence read_clip(const Workspace& ws, const std::string& dir) {
    try {
        return clip_from(ws.read_json(dir + "/meta.json"),
                         [&](const std::string& rel) { return ws.read_bytes(dir + "/" + rel); });
    } catch (const std::invalid_argument& e) {
        corrupt("clip " + dir + ": " + e.what());
    }
}

FrameSequence read_clip_dir(const fs::path& dir) {
    const auto bytes = slurp(dir / "meta.json");
    const json meta = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (meta.is_discarded()) throw std::invalid_argument(dir.string() + "/meta.json is not valid JSON");
    return clip_from(meta, [&](const std::string& rel) { return slurp(dir / rel); });
}

// ---------------------------------------------------------------------------

Journal::Journal(Workspace& workspace, ProviderSet providers, std::optional<int> interrupt_before_call)
    : ws_(workspace), providers_(std::move(providers)), interrupt_(interrupt_before_call) {}

void Journal::set_stage(StageId stage) {
    std::lock_guard lock(mu_);
    stage_ = stage;
}

StageId Journal::stage() const {
    std::lock_guard lock(mu_);
    return stage_;
}

std::optional<std::vector<std::string>> Journal::lookup(const std::string& key) const {
    return ws_.find_call(key);
}

void Journal::before_call(const std::string& key) {
    std::lock_guard lock(mu_);
    if (interrupt_ && made_ + 1 == *interrupt_)
        throw PipelineError(PipelineErrc::Interrupted, "interrupted before provider call " + std::to_string(*interrupt_) +
                                                           " (" + key + ")");
    ++made_;
}

void Journal::record(const std::string& key, const std::string& capability, int count, bool replayed,
                     std::vector<std::string> paths) {
    {
        std::lock_guard lock(mu_);
        records_.push_back({key, capability, count, replayed});
        if (replayed) ++replayed_;
    }
    if (!replayed) ws_.record_call(key, std::move(paths));
}

std::string Journal::chat(const std::string& key, const std::vector<ChatMessage>& messages) {
    const int attachments = messages.empty() ? 0 : static_cast<int>(messages.back().attachments.size());
    if (auto paths = lookup(key)) {
        record(key, "chat", attachments, true, {});
        return ws_.read_text(paths->front());
    }
    before_call(key);
    const std::string reply = providers_.chat->chat(messages);
    const std::string rel = "journal/" + key + ".txt";
    ws_.write_text(rel, reply, stage());
    record(key, "chat", attachments, false, {rel});
    return reply;
}

std::vector<Image> Journal::generate_images(const std::string& key, const std::string& dir,
                                            const ImageRequest& request, int n) {
    if (auto paths = lookup(key)) {
        std::vector<Image> out;
        for (const auto& p : *paths) out.push_back(png::decode(ws_.read_bytes(p)));
        record(key, "generate_images", n, true, {});
        return out;
    }
    before_call(key);
    auto images = providers_.image->generate_images(request, n);
    if (static_cast<int>(images.size()) != n)
        throw ProviderError(ProviderErrc::Permanent, "image provider returned the wrong number of candidates");
    std::vector<std::string> paths;
    for (std::size_t i = 0; i < images.size(); ++i) {
        paths.push_back(dir + "/cand_" + std::to_string(i) + ".png");
        ws_.write_artifact(paths.back(), png::encode(images[i]), stage());
    }
    record(key, "generate_images", n, false, paths);
    return images;
}

Image Journal::region_replace(const std::string& key, const std::string& rel_path, const Image& image,
                              const SegmentationMask& mask, const ImageRequest& request) {
    if (auto paths = lookup(key)) {
        record(key, "region_replace", 1, true, {});
        return png::decode(ws_.read_bytes(paths->front()));
    }
    before_call(key);
    Image out = providers_.image->region_replace(image, mask, request);
    ws_.write_artifact(rel_path, png::encode(out), stage());
    record(key, "region_replace", 1, false, {rel_path});
    return out;
}

std::vector<FrameSequence> Journal::generate_videos(const std::string& key, const std::string& dir,
                                                    const VideoRequest& request, int n) {
    if (auto paths = lookup(key)) {
        std::vector<FrameSequence> out;
        for (const auto& p : *paths) out.push_back(read_clip(ws_, p));
        record(key, "generate_videos", n, true, {});
        return out;
    }
    before_call(key);
    auto clips = providers_.video->generate_videos(request, n);
    if (static_cast<int>(clips.size()) != n)
        throw ProviderError(ProviderErrc::Permanent, "video provider returned the wrong number of candidates");
    std::vector<std::string> paths;
    for (std::size_t i = 0; i < clips.size(); ++i) {
        try {
            clips[i].validate();
        } catch (const std::invalid_argument& e) {
            throw ProviderError(ProviderErrc::Permanent, std::string("video candidate is invalid: ") + e.what());
        }
        paths.push_back(dir + "/cand_" + std::to_string(i));
        write_clip(ws_, paths.back(), clips[i], stage());
    }
    record(key, "generate_videos", n, false, paths);
    return clips;
}

std::vector<SegmentationMask> Journal::segment(const std::string& key, const Image& image) {
    auto decode = [&](const json& j) {
        std::vector<SegmentationMask> out;
        for (const auto& m : j.at("masks"))
            out.push_back(png::decode_mask(base64_decode(m.at("mask").get<std::string>()), m.at("label").get<std::string>()));
        return out;
    };
    if (auto paths = lookup(key)) {
        record(key, "segment", 1, true, {});
        return decode(ws_.read_json(paths->front()));
    }
    before_call(key);
    auto masks = providers_.segmenter->segment(image);
    validate_partition(masks, image.width(), image.height());
    json arr = json::array();
    for (const auto& m : masks)
        arr.push_back({{"label", m.label}, {"mask", base64_encode(std::span<const std::uint8_t>(png::encode_mask(m)))}});
    const std::string rel = "journal/" + key + ".json";
    ws_.write_json(rel, {{"masks", arr}}, stage());
    record(key, "segment", 1, false, {rel});
    return masks;
}

EmbeddingVector Journal::embed_text(const std::string& key, std::string_view text) {
    if (auto paths = lookup(key)) {
        record(key, "embed_text", 1, true, {});
        return {ws_.read_json(paths->front()).at("embedding").get<std::vector<double>>()};
    }
    before_call(key);
    EmbeddingVector v = providers_.embedder->embed_text(text);
    const std::string rel = "journal/" + key + ".json";
    ws_.write_json(rel, {{"embedding", v.values}}, stage());
    record(key, "embed_text", 1, false, {rel});
    return v;
}

std::vector<EmbeddingVector> Journal::embed_images(const std::string& key, std::span<const Image> images) {
    const int n = static_cast<int>(images.size());
    if (auto paths = lookup(key)) {
        std::vector<EmbeddingVector> out;
        const json stored = ws_.read_json(paths->front());
        for (const auto& e : stored.at("embeddings")) out.push_back({e.get<std::vector<double>>()});
        record(key, "embed_images", n, true, {});
        return out;
    }
    before_call(key);
    auto vs = providers_.embedder->embed_images(images);
    if (vs.size() != images.size())
        throw ProviderError(ProviderErrc::Permanent, "embedder returned the wrong number of vectors");
    json arr = json::array();
    for (const auto& v : vs) arr.push_back(v.values);
    const std::string rel = "journal/" + key + ".json";
    ws_.write_json(rel, {{"embeddings", arr}}, stage());
    record(key, "embed_images", n, false, {rel});
    return vs;
}

int Journal::calls_made() const {
    std::lock_guard lock(mu_);
    return made_;
}

int Journal::calls_replayed() const {
    std::lock_guard lock(mu_);
    return replayed_;
}

std::map<std::string, int> Journal::calls_by_capability() const {
    std::lock_guard lock(mu_);
    std::map<std::string, int> out;
    for (const auto& r : records_)
        if (!r.replayed) ++out[r.capability];
    return out;
}

std::vector<CallRecord> Journal::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

// ---------------------------------------------------------------------------

std::string JournaledChat::chat(const std::vector<ChatMessage>& messages) {
    return j_.chat(scope_ + "/chat_" + std::to_string(++n_), messages);
}

std::vector<Image> JournaledImageProvider::generate_images(const ImageRequest& request, int n) {
    const std::string key = scope_ + "/images_" + std::to_string(++n_images_);
    return j_.generate_images(key, "journal/" + key, request, n);
}

Image JournaledImageProvider::region_replace(const Image& image, const SegmentationMask& mask,
                                             const ImageRequest& request) {
    const std::string key = scope_ + "/replace_" + std::to_string(++n_replace_);
    return j_.region_replace(key, key + ".png", image, mask, request);
}

std::vector<SegmentationMask> JournaledSegmenter::segment(const Image& image) {
    return j_.segment(scope_ + "/segment_" + std::to_string(++n_), image);
}

EmbeddingVector JournaledEmbedder::embed_text(std::string_view text) {
    return j_.embed_text(scope_ + "/text_" + std::to_string(++n_text_), text);
}

EmbeddingVector JournaledEmbedder::embed_image(const Image& image) {
    const Image one[1] = {image};
    return embed_images(one).front();
}

std::vector<EmbeddingVector> JournaledEmbedder::embed_images(std::span<const Image> images) {
    return j_.embed_images(scope_ + "/images_" + std::to_string(++n_images_), images);
}

}  // namespace animforge
