#pragma once

// Candidate pools, metric ranking, chat-judge selection and the consistency
// repair loop.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "animforge/metrics.hpp"
#include "animforge/prompt.hpp"
#include "animforge/providers.hpp"
#include "animforge/script.hpp"

namespace animforge::curation {

template <class T>
struct CandidatePool {
    std::vector<T> items;
    std::optional<std::vector<metrics::MetricReport>> scores;
    std::optional<std::size_t> selected;
    std::string request_digest;
    std::uint64_t seed = 0;
};

// Indices of the min(k, n) best composite scores, descending, ties to the lower index.
std::vector<std::size_t> rank_candidates(const CandidatePool<FrameSequence>& pool, std::size_t k);
std::vector<std::size_t> rank_scores(const std::vector<double>& scores, std::size_t k);

struct JudgeResult {
    std::size_t index = 0;  // 0-based
    std::string reply;      // empty when no judge call was needed
    int attempts = 0;
};

inline constexpr std::string_view kFormatReminder =
    "Reply format reminder: begin your answer with 'The answer is image x', where x is the number of the chosen image.";

JudgeResult judge_select_image(const std::vector<Image>& candidates, const std::string& description,
                               ChatProvider& chat, const prompt::TemplateSet& templates);
JudgeResult judge_select_video(const std::vector<metrics::ContactSheet>& top, const std::string& description,
                               ChatProvider& chat, const prompt::TemplateSet& templates);

struct AuditEntry {
    std::string action;   // "judge" or "replace"
    std::string verdict;  // judge reply, or a description of the replacement
};

struct ReflectionOutcome {
    int iterations_used = 0;
    bool passed = false;
    Image final_item;
    std::vector<AuditEntry> audit_log;
    int replacements = 0;
};

nlohmann::json to_json(const ReflectionOutcome& outcome);

struct ExpectedCharacter {
    script::CharacterProfile profile;
    Image reference;
};

inline constexpr int kDefaultRepairIters = 3;
// Masks below this share of the image are never replaced.
inline constexpr double kMinRepairArea = 0.005;

ReflectionOutcome consistency_repair(const Image& scene_image, const std::string& scene_description,
                                     const std::vector<ExpectedCharacter>& expected, Segmenter& segmenter,
                                     ImageProvider& images, ChatProvider& chat, const prompt::TemplateSet& templates,
                                     int max_iters = kDefaultRepairIters, std::uint64_t seed = 0);

// The mask a repair replaces for a finding: nearest dominant hue to the reported
// one among non-background masks above kMinRepairArea, else the largest such mask.
std::optional<std::size_t> choose_repair_mask(const Image& image, const std::vector<SegmentationMask>& masks,
                                              std::optional<double> reported_hue);

}  // namespace animforge::curation
