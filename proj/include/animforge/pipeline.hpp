#pragma once

// Six-stage orchestrator: story refinement, script, assets, scene images,
// video candidates, and enhancement + splicing. Every provider call goes
// through the workspace journal, so an interrupted run resumes without
// repeating paid generation.

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "animforge/config.hpp"
#include "animforge/metrics.hpp"
#include "animforge/script.hpp"
#include "animforge/workspace.hpp"

namespace animforge::pipeline {

struct StageReport {
    StageId stage = StageId::RefineStory;
    bool skipped = false;  // Done before this session
    double seconds = 0.0;
    int calls = 0;  // provider calls issued by this session during the stage
};

struct RunSummary {
    std::string run_id;
    bool nothing_to_do = false;
    std::vector<StageReport> stages;
    int calls_made = 0;
    int calls_replayed = 0;
    std::map<std::string, int> calls_by_capability;
    std::string manifest_path;  // relative to the workspace
    std::string manifest_digest;
    metrics::MetricReport aggregate;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

using ProgressFn = std::function<void(const std::string&)>;

struct RunOptions {
    // Throws PipelineError(Interrupted) before the k-th real provider call (1-based).
    std::optional<int> interrupt_before_call;
    ProgressFn progress;
    // Replaces the providers built from the config bindings.
    std::optional<ProviderSet> providers;
    EnvLookup env = process_env();
};

// Fresh run into config.workspace, which must be empty or absent.
RunSummary run(const RunConfig& config, const RunOptions& options = {});

// Continues a run from its checkpoint. A completed run returns nothing_to_do.
RunSummary resume(const std::filesystem::path& workspace, const RunOptions& options = {});

// Upper bound on provider calls for a run of this script (journal replays excluded).
int max_provider_calls(const RunConfig& config, const script::Script& script);

// Word band accepted for the refined story.
inline constexpr std::size_t kMinStoryWords = 75;
inline constexpr std::size_t kMaxStoryWords = 300;

inline constexpr std::string_view kLengthReminder =
    "Reminder: the refined story must be between 75 and 300 words long, ideally about 150.";
inline constexpr std::string_view kParamsReminder =
    "Reply format reminder: answer with a single JSON object that follows the template exactly.";
inline constexpr std::string_view kRenameRule = "keep every name unchanged";

// Directory names used for asset candidates, e.g. "c0_tom_the_cat".
std::string slug(std::string_view name);

// final/manifest.json of a finished run.
nlohmann::json read_manifest(const Workspace& ws);

// Workspace-level evaluation report (per-scene reports, aggregate, boundaries).
nlohmann::json read_report(const Workspace& ws);

}  // namespace animforge::pipeline
