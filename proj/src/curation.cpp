#include "animforge/curation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "animforge/digest.hpp"
#include "animforge/error.hpp"
#include "animforge/text.hpp"

namespace animforge::curation {

using prompt::TemplateId;

std::vector<std::size_t> rank_scores(const std::vector<double>& scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

std::vector<std::size_t> rank_candidates(const CandidatePool<FrameSequence>& pool, std::size_t k) {
    if (!pool.scores) throw CurationError(CurationErrc::ScoresMissing, "candidate pool has no scores");
    if (pool.scores->size() != pool.items.size())
        throw CurationError(CurationErrc::ScoresMissing, "candidate pool has " + std::to_string(pool.scores->size()) +
                                                             " scores for " + std::to_string(pool.items.size()) + " items");
    std::vector<double> composite;
    composite.reserve(pool.scores->size());
    for (const auto& r : *pool.scores) composite.push_back(metrics::composite_score(r));
    return rank_scores(composite, k);
}

namespace {

JudgeResult judge(const std::vector<Image>& attachments, const std::string& prompt_text, TemplateId tag,
                  ChatProvider& chat) {
    const int n = static_cast<int>(attachments.size());
    JudgeResult result;
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        ChatMessage msg;
        msg.text = attempt == 0 ? prompt_text : prompt_text + "\n" + std::string(kFormatReminder);
        msg.attachments = attachments;
        msg.tag = std::string(prompt::to_string(tag));
        result.reply = chat.chat({msg});
        result.attempts = attempt + 1;
        try {
            const auto verdict = prompt::parse_judge_verdict(result.reply, n);
            result.index = static_cast<std::size_t>(verdict.chosen_index - 1);
            return result;
        } catch (const PromptError& e) {
            last_error = e.what();
        }
    }
    throw CurationError(CurationErrc::JudgeFailed, "judge gave no usable verdict after a re-ask: " + last_error);
}

void check_pool(std::size_t n, std::size_t limit, const char* what) {
    if (n == 0) throw CurationError(CurationErrc::EmptyPool, std::string(what) + ": empty pool");
    if (n > limit)
        throw CurationError(CurationErrc::PoolTooLarge, std::string(what) + ": pool of " + std::to_string(n) +
                                                            " exceeds the limit of " + std::to_string(limit));
}

}  // namespace

JudgeResult judge_select_image(const std::vector<Image>& candidates, const std::string& description,
                               ChatProvider& chat, const prompt::TemplateSet& templates) {
    check_pool(candidates.size(), static_cast<std::size_t>(chat.max_attachments()), "judge_select_image");
    if (candidates.size() == 1) return {};
    const std::string text = prompt::render(templates.get(TemplateId::ImageJudge),
                                            {{"Description", description}, {"Count", std::to_string(candidates.size())}});
    return judge(candidates, text, TemplateId::ImageJudge, chat);
}

JudgeResult judge_select_video(const std::vector<metrics::ContactSheet>& top, const std::string& description,
                               ChatProvider& chat, const prompt::TemplateSet& templates) {
    check_pool(top.size(), std::min<std::size_t>(3, static_cast<std::size_t>(chat.max_attachments())),
               "judge_select_video");
    if (top.size() == 1) return {};
    std::vector<Image> sheets;
    for (const auto& s : top) sheets.push_back(s.image);
    const std::string text = prompt::render(templates.get(TemplateId::VideoJudge),
                                            {{"Description", description}, {"Count", std::to_string(top.size())}});
    return judge(sheets, text, TemplateId::VideoJudge, chat);
}

nlohmann::json to_json(const ReflectionOutcome& o) {
    nlohmann::json log = nlohmann::json::array();
    for (const auto& e : o.audit_log) log.push_back({{"action", e.action}, {"verdict", e.verdict}});
    return {{"iterations_used", o.iterations_used},
            {"passed", o.passed},
            {"replacements", o.replacements},
            {"final_hash", o.final_item.content_hash()},
            {"audit_log", log}};
}

std::optional<std::size_t> choose_repair_mask(const Image& image, const std::vector<SegmentationMask>& masks,
                                              std::optional<double> reported_hue) {
    const double min_area = kMinRepairArea * static_cast<double>(image.pixel_count());
    std::optional<std::size_t> best;
    double best_key = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const auto& m = masks[i];
        if (m.label == kBackgroundLabel || static_cast<double>(m.area) < min_area) continue;
        double key;
        if (reported_hue) {
            const auto hue = dominant_hue(image, &m);
            key = hue ? hue_distance(*hue, *reported_hue) : 1000.0;
        } else {
            key = -static_cast<double>(m.area);
        }
        if (key < best_key) {
            best_key = key;
            best = i;
        }
    }
    return best;
}

ReflectionOutcome consistency_repair(const Image& scene_image, const std::string& scene_description,
                                     const std::vector<ExpectedCharacter>& expected, Segmenter& segmenter,
                                     ImageProvider& images, ChatProvider& chat, const prompt::TemplateSet& templates,
                                     int max_iters, std::uint64_t seed) {
    if (max_iters < 1) throw std::invalid_argument("consistency_repair: max_iters must be >= 1");
    if (expected.size() + 1 > static_cast<std::size_t>(chat.max_attachments()))
        throw CurationError(CurationErrc::PoolTooLarge, "consistency check needs more attachments than allowed");

    std::string references;
    for (std::size_t i = 0; i < expected.size(); ++i)
        references += "Image " + std::to_string(i + 2) + ": " + expected[i].profile.name + "\n";
    if (!references.empty()) references.pop_back();
    else references = "(no characters)";
    const std::string text = prompt::render(templates.get(TemplateId::ConsistencyCheck),
                                            {{"Description", scene_description}, {"References", references}});

    ReflectionOutcome out;
    Image current = scene_image;
    Image best = scene_image;
    std::size_t best_findings = std::numeric_limits<std::size_t>::max();

    for (int iter = 1; iter <= max_iters; ++iter) {
        ChatMessage msg;
        msg.text = text;
        msg.tag = std::string(prompt::to_string(TemplateId::ConsistencyCheck));
        msg.attachments.push_back(current);
        for (const auto& e : expected) msg.attachments.push_back(e.reference);
        const std::string reply = chat.chat({msg});
        out.audit_log.push_back({"judge", reply});
        out.iterations_used = iter;

        const auto verdict = prompt::parse_consistency_verdict(reply);
        if (verdict.passed) {
            out.passed = true;
            out.final_item = std::move(current);
            return out;
        }
        const std::size_t nfind = std::max<std::size_t>(1, verdict.findings.size());
        if (nfind < best_findings) {
            best_findings = nfind;
            best = current;
        }
        if (iter == max_iters || expected.empty()) continue;

        // Without a named character, repair the first expected one at the largest region.
        std::vector<prompt::ConsistencyFinding> findings = verdict.findings;
        if (findings.empty()) findings.push_back({expected.front().profile.name, std::nullopt});

        const auto masks = segmenter.segment(current);
        std::vector<bool> used(masks.size(), false);
        std::size_t replaced_now = 0;
        for (const auto& f : findings) {
            if (replaced_now == expected.size()) break;  // keeps the call budget bounded
            const ExpectedCharacter* who = nullptr;
            for (const auto& e : expected)
                if (e.profile.name == f.character || text::equals_casefold(e.profile.name, f.character)) who = &e;
            if (!who) continue;

            std::vector<SegmentationMask> open;
            std::vector<std::size_t> open_idx;
            for (std::size_t i = 0; i < masks.size(); ++i) {
                if (used[i]) continue;
                open.push_back(masks[i]);
                open_idx.push_back(i);
            }
            const auto pick = choose_repair_mask(current, open, f.observed_hue);
            if (!pick) continue;
            const std::size_t mi = open_idx[*pick];
            used[mi] = true;

            ImageRequest req;
            req.prompt = who->profile.name + ": " + who->profile.description;
            req.reference_images = {who->reference};
            req.seed = derive_seed(seed, "repair/" + std::to_string(iter) + "/" + who->profile.name);
            current = images.region_replace(current, masks[mi], req);
            ++out.replacements;
            ++replaced_now;
            out.audit_log.push_back({"replace", "replaced " + masks[mi].label + " (" + std::to_string(masks[mi].area) +
                                                    " px) with " + who->profile.name});
        }
    }
    out.passed = false;
    out.final_item = std::move(best);
    return out;
}

}  // namespace animforge::curation
