#include "animforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <sstream>

#include "animforge/curation.hpp"
#include "animforge/digest.hpp"
#include "animforge/error.hpp"
#include "animforge/png_io.hpp"
#include "animforge/prompt.hpp"
#include "animforge/text.hpp"

namespace animforge::pipeline {

namespace {

using nlohmann::json;
using prompt::TemplateId;
using Clock = std::chrono::steady_clock;

std::string idx_dir(const char* root, std::size_t i) { return std::string(root) + "/" + std::to_string(i); }

ChatMessage message(const prompt::TemplateSet& templates, TemplateId id, const prompt::SlotMap& slots) {
    ChatMessage m;
    m.text = prompt::render(templates.get(id), slots);
    m.tag = std::string(prompt::to_string(id));
    return m;
}

template <class F>
void for_each_scene(std::size_t n, int width, F&& fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<bool> failed{false};
    const long count = static_cast<long>(n);
#pragma omp parallel for num_threads(width) schedule(static, 1)
    for (long i = 0; i < count; ++i) {
        if (failed.load()) continue;
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
            failed = true;
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// Everything later stages need from earlier ones.
struct State {
    script::RefinedStory story;
    script::Script script;
    std::map<std::string, Image> character_assets;
    std::map<std::string, Image> setting_assets;
    std::vector<Image> scene_images;
    std::vector<std::vector<FrameSequence>> pools;
};

struct AssetJob {
    std::string dir;
    std::string name;
    std::string description;
    bool character = true;
};

std::vector<AssetJob> asset_jobs(const script::Script& s) {
    std::vector<AssetJob> jobs;
    for (std::size_t i = 0; i < s.characters.size(); ++i)
        jobs.push_back({"assets/c" + std::to_string(i) + "_" + slug(s.characters[i].name), s.characters[i].name,
                        s.characters[i].description, true});
    for (std::size_t i = 0; i < s.settings.size(); ++i)
        jobs.push_back({"assets/s" + std::to_string(i) + "_" + slug(s.settings[i].name), s.settings[i].name,
                        s.settings[i].description, false});
    return jobs;
}

class Runner {
public:
    Runner(Workspace& ws, const RunConfig& config, const RunOptions& options)
        : ws_(ws),
          config_(config),
          templates_(load_templates(config)),
          journal_(ws, options.providers ? *options.providers : make_providers(config, templates_, options.env),
                   options.interrupt_before_call),
          progress_(options.progress) {}

    RunSummary execute();

private:
    void say(const std::string& line) const {
        if (progress_) progress_(line);
    }

    void run_stage(StageId id);
    void load_stage(StageId id);

    void refine_story();
    void generate_script();
    void generate_assets();
    void generate_scene_images();
    void produce_videos();
    void enhance_and_splice();

    std::vector<Image> scene_references(const script::SceneSpec& scene) const;

    Workspace& ws_;
    const RunConfig& config_;
    prompt::TemplateSet templates_;
    Journal journal_;
    ProgressFn progress_;
    State st_;
    std::vector<std::string> warnings_;
};

RunSummary Runner::execute() {
    RunSummary summary;
    summary.run_id = ws_.checkpoint().run_id;
    const int total = static_cast<int>(kAllStages.size());
    for (StageId id : kAllStages) {
        const int k = static_cast<int>(id) + 1;
        StageReport rep;
        rep.stage = id;
        const auto t0 = Clock::now();
        if (ws_.checkpoint().status(id) == StageStatus::Done) {
            load_stage(id);
            rep.skipped = true;
            say("[" + std::to_string(k) + "/" + std::to_string(total) + "] " + std::string(to_string(id)) +
                ": already done");
        } else {
            say("[" + std::to_string(k) + "/" + std::to_string(total) + "] " + std::string(to_string(id)) + " ...");
            const int before = journal_.calls_made();
            ws_.set_stage_status(id, StageStatus::InProgress);
            journal_.set_stage(id);
            run_stage(id);
            ws_.set_stage_status(id, StageStatus::Done);
            rep.calls = journal_.calls_made() - before;
        }
        rep.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        if (!rep.skipped) {
            std::ostringstream os;
            os.setf(std::ios::fixed);
            os.precision(2);
            os << "[" << k << "/" << total << "] " << to_string(id) << ": done in " << rep.seconds << " s, "
               << rep.calls << " provider calls";
            say(os.str());
        }
        summary.stages.push_back(rep);
    }
    summary.calls_made = journal_.calls_made();
    summary.calls_replayed = journal_.calls_replayed();
    summary.calls_by_capability = journal_.calls_by_capability();
    summary.manifest_path = "final/manifest.json";
    summary.manifest_digest = read_manifest(ws_).at("digest").get<std::string>();
    summary.aggregate = metrics::report_from_json(read_report(ws_).at("aggregate"));
    summary.warnings = warnings_;
    return summary;
}

void Runner::run_stage(StageId id) {
    try {
        switch (id) {
            case StageId::RefineStory: return refine_story();
            case StageId::GenerateScript: return generate_script();
            case StageId::GenerateAssets: return generate_assets();
            case StageId::GenerateSceneImages: return generate_scene_images();
            case StageId::ProduceVideos: return produce_videos();
            case StageId::EnhanceAndSplice: return enhance_and_splice();
        }
    } catch (const PipelineError& e) {
        if (!e.stage().empty()) throw;
        throw PipelineError(e.code(), e.what(), std::string(to_string(id)));
    } catch (const Error& e) {
        throw PipelineError(PipelineErrc::StageFailed, std::string(to_string(id)) + " failed: " + e.what(),
                            std::string(to_string(id)));
    } catch (const std::exception& e) {
        throw PipelineError(PipelineErrc::StageFailed, std::string(to_string(id)) + " failed: " + e.what(),
                            std::string(to_string(id)));
    }
}

// Outputs of a stage finished in an earlier session, read back from disk.
void Runner::load_stage(StageId id) {
    switch (id) {
        case StageId::RefineStory:
            st_.story = script::RefinedStory::from_text(ws_.read_text("story/refined.txt"), config_.narrative.id);
            return;
        case StageId::GenerateScript:
            st_.script = script::script_from_json(ws_.read_json("script/script.json"));
            return;
        case StageId::GenerateAssets:
            for (const auto& job : asset_jobs(st_.script)) {
                const json sel = ws_.read_json(job.dir + "/selected.json");
                Image img = png::decode(ws_.read_bytes(sel.at("path").get<std::string>()));
                (job.character ? st_.character_assets : st_.setting_assets)[job.name] = std::move(img);
            }
            return;
        case StageId::GenerateSceneImages:
            st_.scene_images.clear();
            for (std::size_t i = 0; i < st_.script.scenes.size(); ++i)
                st_.scene_images.push_back(png::decode(ws_.read_bytes(idx_dir("scenes", i) + "/final.png")));
            return;
        case StageId::ProduceVideos:
            st_.pools.assign(st_.script.scenes.size(), {});
            for (std::size_t i = 0; i < st_.script.scenes.size(); ++i)
                for (int c = 0; c < config_.pools.videos; ++c)
                    st_.pools[i].push_back(read_clip(ws_, idx_dir("videos", i) + "/cand_" + std::to_string(c)));
            return;
        case StageId::EnhanceAndSplice:
            return;
    }
}

// --- Stage 1 ----------------------------------------------------------------

void Runner::refine_story() {
    ChatMessage msg = message(templates_, TemplateId::Refine, {{"Narrative", config_.narrative.text}});
    auto accept = [](const script::RefinedStory& s) {
        return s.word_count >= kMinStoryWords && s.word_count <= kMaxStoryWords;
    };
    auto story = script::RefinedStory::from_text(std::string(text::trim(journal_.chat("refine/chat_1", {msg}))),
                                                 config_.narrative.id);
    if (!accept(story)) {
        msg.text += "\n" + std::string(kLengthReminder);
        story = script::RefinedStory::from_text(std::string(text::trim(journal_.chat("refine/chat_2", {msg}))),
                                                config_.narrative.id);
        if (!accept(story))
            throw PipelineError(PipelineErrc::RefinementFailed,
                                "refined story has " + std::to_string(story.word_count) + " words after one re-ask");
    }
    ws_.write_text("story/refined.txt", story.text, StageId::RefineStory);
    st_.story = std::move(story);
}

// --- Stage 2 ----------------------------------------------------------------

void Runner::generate_script() {
    const std::string profiles_reply =
        journal_.chat("script/extract", {message(templates_, TemplateId::ExtractProfiles, {{"Story", st_.story.text}})});
    script::Script s = script::parse_profiles(profiles_reply);

    const std::string scenes_reply = journal_.chat(
        "script/scenes", {message(templates_, TemplateId::GenerateScenes,
                                  {{"Profiles", script::serialize_profiles(s)}, {"Story", st_.story.text}})});
    s.scenes = script::parse_scenes(scenes_reply);

    json transcript = json::array();
    int rounds = 0;
    script::ValidationReport report;
    for (int attempt = 0;; ++attempt) {
        report = script::validate_script(s);
        const std::string reply = journal_.chat(
            "script/verify_" + std::to_string(attempt + 1),
            {message(templates_, TemplateId::Verify,
                     {{"Story", st_.story.text}, {"Script", script::serialize_script(s)}, {"Issues", report.summary()}})});
        const auto verdict = prompt::parse_repair_verdict(reply);
        const bool no_problem = std::holds_alternative<prompt::NoProblem>(verdict);
        transcript.push_back({{"attempt", attempt + 1},
                              {"local_violations", report.violations.size()},
                              {"verdict", no_problem ? "no_problem" : "revised"}});
        if (no_problem && report.ok()) break;
        if (attempt == config_.max_repair_iters)
            throw PipelineError(PipelineErrc::ScriptUnrepairable,
                                "script still has problems after " + std::to_string(rounds) +
                                    " repair rounds: " + report.summary());
        if (!no_problem) {
            try {
                s = script::parse_script(std::get<prompt::NeedsRevision>(verdict).revised_text);
                ++rounds;
            } catch (const ScriptError& e) {
                transcript.back()["parse_error"] = e.what();
            }
        }
    }
    if (s.scenes.empty()) throw PipelineError(PipelineErrc::ScriptUnrepairable, "script has no scenes");

    ws_.write_json("script/script.json", script::to_json(s), StageId::GenerateScript);
    ws_.write_json("script/validation.json",
                   {{"rounds", rounds}, {"report", script::to_json(report)}, {"transcript", transcript}},
                   StageId::GenerateScript);
    st_.script = std::move(s);
}

// --- Stage 3 ----------------------------------------------------------------

void Runner::generate_assets() {
    for (const auto& job : asset_jobs(st_.script)) {
        try {
            ImageRequest req;
            req.prompt = job.name + ": " + job.description;
            req.seed = derive_seed(config_.seed, job.dir);
            const auto pool = journal_.generate_images(job.dir + "/generate", job.dir, req, config_.pools.images);
            JournaledChat judge(journal_, job.dir + "/judge");
            const auto pick = curation::judge_select_image(pool, req.prompt, judge, templates_);
            const std::string path = job.dir + "/cand_" + std::to_string(pick.index) + ".png";
            ws_.write_json(job.dir + "/selected.json",
                           {{"name", job.name},
                            {"kind", job.character ? "character" : "setting"},
                            {"index", pick.index},
                            {"path", path},
                            {"judge_reply", pick.reply},
                            {"judge_attempts", pick.attempts}},
                           StageId::GenerateAssets);
            (job.character ? st_.character_assets : st_.setting_assets)[job.name] = pool[pick.index];
        } catch (const PipelineError&) {
            throw;
        } catch (const Error& e) {
            throw PipelineError(PipelineErrc::StageFailed, "asset '" + job.name + "': " + e.what());
        }
    }
}

// --- Stage 4 ----------------------------------------------------------------

std::vector<Image> Runner::scene_references(const script::SceneSpec& scene) const {
    std::vector<Image> refs;
    for (const auto& name : scene.characters) refs.push_back(st_.character_assets.at(name));
    refs.push_back(st_.setting_assets.at(scene.setting));
    return refs;
}

void Runner::generate_scene_images() {
    const auto& scenes = st_.script.scenes;
    st_.scene_images.assign(scenes.size(), {});
    for_each_scene(scenes.size(), config_.scene_parallelism, [&](std::size_t i) {
        const auto& scene = scenes[i];
        const std::string dir = idx_dir("scenes", i);

        script::Script subset;
        for (const auto& name : scene.characters) subset.characters.push_back(*st_.script.find_character(name));
        subset.settings.push_back(*st_.script.find_setting(scene.setting));
        const std::string prompt_text = std::string(text::trim(journal_.chat(
            dir + "/prompt", {message(templates_, TemplateId::ImagePrompts,
                                      {{"Description", scene.description},
                                       {"Profiles", script::serialize_profiles(subset)},
                                       {"RenameRule", std::string(kRenameRule)}})})));
        ws_.write_text(dir + "/prompt.txt", prompt_text + "\n", StageId::GenerateSceneImages);

        ImageRequest req;
        req.prompt = prompt_text;
        req.reference_images = scene_references(scene);
        req.seed = derive_seed(config_.seed, dir);
        const auto pool = journal_.generate_images(dir + "/generate", dir, req, config_.pools.images);

        JournaledChat judge(journal_, dir + "/judge");
        const auto pick = curation::judge_select_image(pool, prompt_text, judge, templates_);

        std::vector<curation::ExpectedCharacter> expected;
        for (const auto& c : subset.characters) expected.push_back({c, st_.character_assets.at(c.name)});
        JournaledChat repair_chat(journal_, dir + "/repair");
        JournaledSegmenter repair_seg(journal_, dir + "/repair");
        JournaledImageProvider repair_img(journal_, dir + "/repair");
        const auto outcome =
            curation::consistency_repair(pool[pick.index], scene.description, expected, repair_seg, repair_img,
                                         repair_chat, templates_, config_.max_repair_iters,
                                         derive_seed(config_.seed, dir + "/repair"));

        ws_.write_json(dir + "/repair/audit.json", curation::to_json(outcome), StageId::GenerateSceneImages);
        ws_.write_artifact(dir + "/final.png", png::encode(outcome.final_item), StageId::GenerateSceneImages);
        ws_.write_json(dir + "/selected.json",
                       {{"index", pick.index},
                        {"path", dir + "/cand_" + std::to_string(pick.index) + ".png"},
                        {"judge_reply", pick.reply},
                        {"judge_attempts", pick.attempts},
                        {"repair_passed", outcome.passed},
                        {"repair_iterations", outcome.iterations_used},
                        {"replacements", outcome.replacements},
                        {"final", dir + "/final.png"}},
                       StageId::GenerateSceneImages);
        st_.scene_images[i] = outcome.final_item;
    });
}

// --- Stage 5 ----------------------------------------------------------------

void Runner::produce_videos() {
    const auto& scenes = st_.script.scenes;
    st_.pools.assign(scenes.size(), {});
    for_each_scene(scenes.size(), config_.scene_parallelism, [&](std::size_t i) {
        const auto& scene = scenes[i];
        const std::string dir = idx_dir("videos", i);

        std::vector<std::string> who;
        for (const auto& name : scene.characters) {
            const auto* c = st_.script.find_character(name);
            who.push_back(c->name + ": " + c->description);
        }
        const std::string characters = who.empty() ? std::string("no characters") : text::join(who, " ");
        const std::string video_prompt = std::string(text::trim(journal_.chat(
            dir + "/prompt", {message(templates_, TemplateId::VideoPrompts,
                                      {{"Description", scene.description}, {"Character", characters}})})));
        ws_.write_text(dir + "/prompt.txt", video_prompt + "\n", StageId::ProduceVideos);

        ChatMessage ask = message(templates_, TemplateId::ParamPredict,
                                  {{"Description", scene.description}, {"Prompt", video_prompt}});
        json raw = json::array();
        std::optional<prompt::GenerationParams> params;
        std::string last_error;
        for (int attempt = 1; attempt <= 2 && !params; ++attempt) {
            if (attempt == 2) ask.text += "\n" + std::string(kParamsReminder);
            const std::string reply = journal_.chat(dir + "/params_" + std::to_string(attempt), {ask});
            raw.push_back(reply);
            try {
                params = prompt::parse_params(reply);
            } catch (const PromptError& e) {
                last_error = e.what();
            }
        }
        if (!params)
            throw PipelineError(PipelineErrc::StageFailed,
                                "scene " + std::to_string(i) + ": parameter reply rejected twice: " + last_error);
        ws_.write_json(dir + "/params.json",
                       {{"raw", raw}, {"params", prompt::to_json(*params)}, {"attempts", raw.size()}},
                       StageId::ProduceVideos);

        VideoRequest req;
        req.conditioning_image = resize_area(st_.scene_images[i], config_.frame_size, config_.frame_size);
        req.prompt = video_prompt;
        req.params = *params;
        req.seed = derive_seed(config_.seed, dir);
        req.frame_count = config_.frame_count;
        req.fps = config_.fps;
        st_.pools[i] = journal_.generate_videos(dir + "/generate", dir, req, config_.pools.videos);
    });
}

// --- Stage 6 ----------------------------------------------------------------

void Runner::enhance_and_splice() {
    const auto& scenes = st_.script.scenes;
    std::vector<std::size_t> chosen(scenes.size());
    std::vector<metrics::MetricReport> chosen_reports(scenes.size());

    for_each_scene(scenes.size(), config_.scene_parallelism, [&](std::size_t i) {
        const auto& scene = scenes[i];
        const std::string dir = idx_dir("videos", i);
        const auto& clips = st_.pools[i];

        const EmbeddingVector text_embedding = journal_.embed_text(dir + "/metrics/text", scene.description);
        curation::CandidatePool<FrameSequence> pool;
        pool.items = clips;
        pool.scores.emplace();
        json scored = json::array();
        for (std::size_t c = 0; c < clips.size(); ++c) {
            const std::string scope = dir + "/metrics/cand_" + std::to_string(c);
            JournaledEmbedder emb(journal_, scope);
            JournaledSegmenter seg(journal_, scope);
            // A background-only first frame scores zero subject consistency instead of failing the run.
            const auto masks = seg.segment(clips[c].frames.front());
            pool.scores->push_back(
                metrics::evaluate_clip(clips[c], emb, masks, text_embedding, metrics::MissingSubject::ScoreZero));
            scored.push_back({{"candidate", c},
                              {"report", metrics::to_json(pool.scores->back())},
                              {"composite", metrics::composite_score(pool.scores->back())},
                              {"subject_found", metrics::has_subject(masks)}});
        }
        ws_.write_json(dir + "/metrics.json", scored, StageId::EnhanceAndSplice);

        const auto top = curation::rank_candidates(pool, static_cast<std::size_t>(config_.pools.judge_top_k));
        std::vector<metrics::ContactSheet> sheets;
        for (std::size_t r = 0; r < top.size(); ++r) {
            sheets.push_back(metrics::contact_sheet(clips[top[r]], config_.contact_sheet_frames));
            ws_.write_artifact(dir + "/sheets/rank_" + std::to_string(r) + ".png", png::encode(sheets.back().image),
                               StageId::EnhanceAndSplice);
        }
        JournaledChat judge(journal_, dir + "/judge");
        const auto pick = curation::judge_select_video(sheets, scene.description, judge, templates_);
        chosen[i] = top[pick.index];

        // Scene still against its references, one embedding batch.
        std::vector<Image> batch{st_.scene_images[i]};
        for (auto& ref : scene_references(scene)) batch.push_back(std::move(ref));
        JournaledEmbedder ii(journal_, dir + "/image_similarity");
        const auto vecs = ii.embed_images(batch);
        double sim = 0.0;
        for (std::size_t k = 1; k < vecs.size(); ++k) sim += cosine(vecs[0], vecs[k]);
        metrics::MetricReport rep = (*pool.scores)[chosen[i]];
        rep.image_image_similarity = sim / static_cast<double>(vecs.size() - 1);
        chosen_reports[i] = rep;

        ws_.write_json(dir + "/selected.json",
                       {{"index", chosen[i]},
                        {"path", dir + "/cand_" + std::to_string(chosen[i])},
                        {"top", top},
                        {"sheet_frames", sheets.front().source_frame_indices},
                        {"judge_reply", pick.reply},
                        {"judge_attempts", pick.attempts},
                        {"composite", metrics::composite_score((*pool.scores)[chosen[i]])}},
                       StageId::EnhanceAndSplice);
    });

    // Splice in scene order, copying the stored frame files byte for byte.
    json clips = json::array();
    std::string frame_digests;
    int next = 0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const std::string clip_dir = idx_dir("videos", i) + "/cand_" + std::to_string(chosen[i]);
        const int n = st_.pools[i][chosen[i]].frame_count();
        clips.push_back({{"scene", i},
                         {"setting", scenes[i].setting},
                         {"clip", clip_dir},
                         {"candidate", chosen[i]},
                         {"first_frame", next},
                         {"frames", n}});
        for (int f = 0; f < n; ++f) {
            const auto bytes = ws_.read_bytes(clip_dir + "/frames/" + frame_file_name(f));
            ws_.write_artifact("final/frames/" + frame_file_name(next++), bytes, StageId::EnhanceAndSplice);
            frame_digests += sha256_hex(std::span<const std::uint8_t>(bytes));
        }
    }
    json manifest = {{"run_id", ws_.checkpoint().run_id},
                     {"clips", clips},
                     {"total_frames", next},
                     {"fps", config_.fps},
                     {"duration_seconds", next / config_.fps},
                     {"frames_dir", "final/frames"}};
    manifest["digest"] = sha256_hex(manifest.dump() + frame_digests);
    ws_.write_json("final/manifest.json", manifest, StageId::EnhanceAndSplice);

    // Background continuity across consecutive scenes in the same setting.
    json boundaries = json::array();
    for (std::size_t i = 0; i + 1 < scenes.size(); ++i) {
        if (scenes[i].setting != scenes[i + 1].setting) continue;
        FrameSequence seam;
        seam.fps = config_.fps;
        seam.frames = {st_.pools[i][chosen[i]].frames.back(), st_.pools[i + 1][chosen[i + 1]].frames.front()};
        const std::string scope = "final/boundary_" + std::to_string(i);
        JournaledEmbedder emb(journal_, scope);
        JournaledSegmenter seg(journal_, scope);
        boundaries.push_back({{"from_scene", i},
                              {"to_scene", i + 1},
                              {"setting", scenes[i].setting},
                              {"background_consistency", metrics::background_consistency(seam, emb, seg)}});
    }

    json per_scene = json::array();
    metrics::MetricReport mean;
    double ii_sum = 0.0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const auto& r = chosen_reports[i];
        per_scene.push_back({{"scene", i}, {"candidate", chosen[i]}, {"report", metrics::to_json(r)}});
        mean.distortion_quality += r.distortion_quality;
        mean.subject_consistency += r.subject_consistency;
        mean.background_consistency += r.background_consistency;
        mean.coherence += r.coherence;
        mean.text_visual_alignment += r.text_visual_alignment;
        ii_sum += r.image_image_similarity.value_or(0.0);
    }
    const double n = static_cast<double>(scenes.size());
    mean.distortion_quality /= n;
    mean.subject_consistency /= n;
    mean.background_consistency /= n;
    mean.coherence /= n;
    mean.text_visual_alignment /= n;
    mean.image_image_similarity = ii_sum / n;
    ws_.write_json("final/report.json",
                   {{"scenes", per_scene}, {"aggregate", metrics::to_json(mean)}, {"boundaries", boundaries}},
                   StageId::EnhanceAndSplice);

    if (!config_.muxer_command.empty()) {
        std::string cmd = config_.muxer_command;
        auto substitute = [&](const std::string& slot, const std::string& value) {
            for (std::size_t p = cmd.find(slot); p != std::string::npos; p = cmd.find(slot, p + value.size()))
                cmd.replace(p, slot.size(), value);
        };
        substitute("{frames}", ws_.path("final/frames").string());
        substitute("{fps}", std::to_string(config_.fps));
        substitute("{output}", ws_.path("final/animation.mp4").string());
        const int rc = std::system(cmd.c_str());
        if (rc != 0) {
            warnings_.push_back("muxer command exited with status " + std::to_string(rc));
            say("warning: " + warnings_.back());
        }
    }
}

std::string run_id_for(const std::string& digest) { return "run-" + digest.substr(0, 16); }

}  // namespace

std::string slug(std::string_view name) {
    std::string out;
    bool gap = false;
    for (unsigned char c : text::nfc(name)) {
        if (std::isalnum(c)) {
            if (gap && !out.empty()) out += '_';
            out += static_cast<char>(std::tolower(c));
            gap = false;
        } else {
            gap = true;
        }
    }
    if (out.empty()) out = "x" + std::to_string(fnv1a64(name) % 100000);
    return out;
}

json RunSummary::to_json() const {
    json st = json::array();
    for (const auto& s : stages)
        st.push_back({{"stage", animforge::to_string(s.stage)},
                      {"skipped", s.skipped},
                      {"seconds", s.seconds},
                      {"calls", s.calls}});
    json j = {{"run_id", run_id},
              {"nothing_to_do", nothing_to_do},
              {"stages", st},
              {"calls_made", calls_made},
              {"calls_replayed", calls_replayed},
              {"calls_by_capability", calls_by_capability},
              {"manifest_path", manifest_path},
              {"manifest_digest", manifest_digest},
              {"aggregate", metrics::to_json(aggregate)},
              {"warnings", warnings}};
    return j;
}

json read_manifest(const Workspace& ws) { return ws.read_json("final/manifest.json"); }

json read_report(const Workspace& ws) { return ws.read_json("final/report.json"); }

RunSummary run(const RunConfig& config, const RunOptions& options) {
    config.validate();
    if (config.workspace.empty()) throw PipelineError(PipelineErrc::ConfigInvalid, "no workspace path given");
    if (!Workspace::is_empty_or_absent(config.workspace))
        throw PipelineError(PipelineErrc::WorkspaceNotEmpty,
                            "workspace " + config.workspace.string() + " is not empty; use 'resume' to continue a run");
    // Fail on bad bindings or templates before touching the disk.
    if (!options.providers) make_providers(config, load_templates(config), options.env);

    Workspace ws(config.workspace);
    Checkpoint cp;
    cp.config_digest = config_digest(config);
    cp.run_id = run_id_for(cp.config_digest);
    ws.create(to_json(config), std::move(cp));
    Runner runner(ws, config, options);
    return runner.execute();
}

RunSummary resume(const std::filesystem::path& workspace, const RunOptions& options) {
    Workspace ws(workspace);
    ws.load();
    RunConfig config;
    try {
        config = config_from_json(ws.read_config());
    } catch (const PipelineError& e) {
        throw PipelineError(PipelineErrc::CorruptWorkspace, std::string("stored config is invalid: ") + e.what());
    }
    config.workspace = workspace;
    if (config_digest(config) != ws.checkpoint().config_digest)
        throw PipelineError(PipelineErrc::ConfigMismatch, "config.json does not match the digest recorded in run.json");
    config.validate();
    ws.verify_all();

    if (ws.checkpoint().complete()) {
        RunSummary s;
        s.run_id = ws.checkpoint().run_id;
        s.nothing_to_do = true;
        for (StageId id : kAllStages) s.stages.push_back({id, true, 0.0, 0});
        s.manifest_path = "final/manifest.json";
        s.manifest_digest = read_manifest(ws).at("digest").get<std::string>();
        s.aggregate = metrics::report_from_json(read_report(ws).at("aggregate"));
        if (options.progress) options.progress("nothing to do: run " + s.run_id + " is complete");
        return s;
    }
    Runner runner(ws, config, options);
    return runner.execute();
}

int max_provider_calls(const RunConfig& config, const script::Script& s) {
    const int iters = config.max_repair_iters;
    int total = 2;              // refine + one re-ask
    total += 2 + (iters + 1);  // extract, scenes, verify rounds
    total += 3 * static_cast<int>(s.characters.size() + s.settings.size());  // pool + judge + re-ask
    for (std::size_t i = 0; i < s.scenes.size(); ++i) {
        const int chars = static_cast<int>(s.scenes[i].characters.size());
        total += 1 + 1 + 2 + iters + (iters - 1) * (1 + chars);  // stage 4
        total += 1 + 2 + 1;                                       // stage 5
        total += 1 + 4 * config.pools.videos + 2 + 1;             // stage 6
        if (i + 1 < s.scenes.size() && s.scenes[i].setting == s.scenes[i + 1].setting) total += 2;
    }
    return total;
}

}  // namespace animforge::pipeline
