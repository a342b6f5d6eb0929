#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "animforge/prompt.hpp"
#include "animforge/providers.hpp"
#include "animforge/script.hpp"

namespace animforge {

struct ProviderBinding {
    std::string kind = "mock";  // "mock" or "remote"
    std::string endpoint;
    std::string credential_env;
    nlohmann::json options = nlohmann::json::object();
    bool operator==(const ProviderBinding&) const = default;
};

struct ProviderBindings {
    ProviderBinding chat;
    ProviderBinding image;
    ProviderBinding video;
    ProviderBinding segmenter;
    ProviderBinding embedder;
    bool operator==(const ProviderBindings&) const = default;
};

struct PoolSizes {
    int images = 4;
    int videos = 10;
    int judge_top_k = 3;
    bool operator==(const PoolSizes&) const = default;
};

struct RunConfig {
    script::Narrative narrative;
    std::uint64_t seed = 0;
    ProviderBindings providers;
    ProviderPolicy policy;
    PoolSizes pools;
    int frame_count = 24;
    double fps = 8.0;
    int image_size = 512;
    int frame_size = 256;
    int max_repair_iters = 3;
    int contact_sheet_frames = 5;
    int scene_parallelism = 1;
    std::string templates_dir;  // empty: built-in templates
    std::string muxer_command;  // optional, see README
    std::filesystem::path workspace;

    void validate() const;  // throws PipelineError(ConfigInvalid)
    double clip_seconds() const noexcept { return frame_count / fps; }
};

// The workspace path is not part of the serialized config or its digest.
nlohmann::json to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);
std::string config_digest(const RunConfig& config);

ProviderBindings bindings_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProviderBindings& b);
ProviderBindings all_mock_bindings();

prompt::TemplateSet load_templates(const RunConfig& config);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// Builds providers from the bindings. Remote bindings read their credential from
// the named environment variable.
ProviderSet make_providers(const RunConfig& config, const prompt::TemplateSet& templates,
                           const EnvLookup& env = process_env());

}  // namespace animforge
