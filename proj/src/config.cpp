#include "animforge/config.hpp"

#include <cstdlib>

#include "animforge/digest.hpp"
#include "animforge/error.hpp"
#include "animforge/mock_providers.hpp"
#include "animforge/remote_providers.hpp"

namespace animforge {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& what) { throw PipelineError(PipelineErrc::ConfigInvalid, what); }

ProviderBinding binding_from_json(const json& j, const char* name) {
    ProviderBinding b;
    if (j.is_string()) {
        b.kind = j.get<std::string>();
    } else if (j.is_object()) {
        b.kind = j.value("kind", "mock");
        b.endpoint = j.value("endpoint", "");
        b.credential_env = j.value("credential_env", "");
        if (j.contains("options")) b.options = j.at("options");
    } else {
        invalid(std::string("provider binding '") + name + "' must be an object or a kind string");
    }
    if (b.kind != "mock" && b.kind != "remote") invalid(std::string("provider '") + name + "' has unknown kind '" + b.kind + "'");
    if (b.kind == "remote" && b.endpoint.empty()) invalid(std::string("remote provider '") + name + "' needs an endpoint");
    if (!b.options.is_object()) invalid(std::string("provider '") + name + "' options must be an object");
    return b;
}

json binding_to_json(const ProviderBinding& b) {
    return {{"kind", b.kind}, {"endpoint", b.endpoint}, {"credential_env", b.credential_env}, {"options", b.options}};
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        invalid(std::string("config field '") + key + "' has the wrong type");
    }
}

std::shared_ptr<remote::RemoteClient> make_client(const RunConfig& config, const ProviderBinding& b,
                                                  const EnvLookup& env) {
    std::string credential;
    if (!b.credential_env.empty()) {
        const auto v = env(b.credential_env);
        if (!v) invalid("credential variable " + b.credential_env + " is not set");
        credential = *v;
    }
    return std::make_shared<remote::RemoteClient>(std::make_shared<remote::HttpTransport>(b.endpoint), config.policy,
                                                  credential);
}

}  // namespace

void RunConfig::validate() const {
    if (pools.images < 1 || pools.videos < 1 || pools.judge_top_k < 1) invalid("pool sizes must be >= 1");
    if (pools.judge_top_k > pools.videos) invalid("judge_top_k must not exceed the video pool size");
    if (pools.judge_top_k > 3) invalid("judge_top_k must be at most 3");
    if (frame_count < 2) invalid("frame_count must be >= 2");
    if (!(fps > 0)) invalid("fps must be positive");
    if (image_size < 8 || frame_size < 8) invalid("image_size and frame_size must be >= 8");
    if (max_repair_iters < 1) invalid("max_repair_iters must be >= 1");
    if (contact_sheet_frames < 2 || contact_sheet_frames > frame_count)
        invalid("contact_sheet_frames must lie in 2..frame_count");
    if (scene_parallelism < 1) invalid("scene_parallelism must be >= 1");
    if (narrative.text.empty()) invalid("narrative is empty");
    policy.validate();
}

json to_json(const ProviderBindings& b) {
    return {{"chat", binding_to_json(b.chat)},
            {"image", binding_to_json(b.image)},
            {"video", binding_to_json(b.video)},
            {"segmenter", binding_to_json(b.segmenter)},
            {"embedder", binding_to_json(b.embedder)}};
}

ProviderBindings bindings_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() != "mock") invalid("provider shorthand must be 'mock'");
        return all_mock_bindings();
    }
    if (!j.is_object()) invalid("providers must be an object");
    ProviderBindings b;
    for (const auto& [key, value] : j.items()) {
        if (key == "chat") b.chat = binding_from_json(value, "chat");
        else if (key == "image") b.image = binding_from_json(value, "image");
        else if (key == "video") b.video = binding_from_json(value, "video");
        else if (key == "segmenter") b.segmenter = binding_from_json(value, "segmenter");
        else if (key == "embedder") b.embedder = binding_from_json(value, "embedder");
        else invalid("unknown capability '" + key + "' in provider config");
    }
    return b;
}

ProviderBindings all_mock_bindings() { return {}; }

json to_json(const RunConfig& c) {
    return {
        {"narrative", {{"id", c.narrative.id}, {"text", c.narrative.text}}},
        {"seed", c.seed},
        {"providers", to_json(c.providers)},
        {"policy",
         {{"max_retries", c.policy.max_retries},
          {"backoff_base_ms", c.policy.backoff_base.count()},
          {"rate_limit_requests", c.policy.rate_limit_requests},
          {"rate_limit_window_ms", c.policy.rate_limit_window.count()},
          {"timeout_ms", c.policy.timeout.count()}}},
        {"pools", {{"images", c.pools.images}, {"videos", c.pools.videos}, {"judge_top_k", c.pools.judge_top_k}}},
        {"frame_count", c.frame_count},
        {"fps", c.fps},
        {"image_size", c.image_size},
        {"frame_size", c.frame_size},
        {"max_repair_iters", c.max_repair_iters},
        {"contact_sheet_frames", c.contact_sheet_frames},
        {"scene_parallelism", c.scene_parallelism},
        {"templates_dir", c.templates_dir},
        {"muxer_command", c.muxer_command},
    };
}

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) invalid("config must be a JSON object");
    RunConfig c;
    if (j.contains("narrative")) {
        const json& n = j.at("narrative");
        const std::string text = n.is_string() ? n.get<std::string>() : get_or<std::string>(n, "text", "");
        try {
            c.narrative = script::Narrative::from_text(text);
        } catch (const std::invalid_argument& e) {
            invalid(e.what());
        }
    }
    c.seed = get_or<std::uint64_t>(j, "seed", 0);
    if (j.contains("providers")) c.providers = bindings_from_json(j.at("providers"));
    if (j.contains("policy")) {
        const json& p = j.at("policy");
        c.policy.max_retries = get_or(p, "max_retries", c.policy.max_retries);
        c.policy.backoff_base = std::chrono::milliseconds(get_or<long long>(p, "backoff_base_ms", c.policy.backoff_base.count()));
        c.policy.rate_limit_requests = get_or(p, "rate_limit_requests", c.policy.rate_limit_requests);
        c.policy.rate_limit_window =
            std::chrono::milliseconds(get_or<long long>(p, "rate_limit_window_ms", c.policy.rate_limit_window.count()));
        c.policy.timeout = std::chrono::milliseconds(get_or<long long>(p, "timeout_ms", c.policy.timeout.count()));
    }
    if (j.contains("pools")) {
        const json& p = j.at("pools");
        c.pools.images = get_or(p, "images", c.pools.images);
        c.pools.videos = get_or(p, "videos", c.pools.videos);
        c.pools.judge_top_k = get_or(p, "judge_top_k", c.pools.judge_top_k);
    }
    c.frame_count = get_or(j, "frame_count", c.frame_count);
    c.fps = get_or(j, "fps", c.fps);
    c.image_size = get_or(j, "image_size", c.image_size);
    c.frame_size = get_or(j, "frame_size", c.frame_size);
    c.max_repair_iters = get_or(j, "max_repair_iters", c.max_repair_iters);
    c.contact_sheet_frames = get_or(j, "contact_sheet_frames", c.contact_sheet_frames);
    c.scene_parallelism = get_or(j, "scene_parallelism", c.scene_parallelism);
    c.templates_dir = get_or<std::string>(j, "templates_dir", "");
    c.muxer_command = get_or<std::string>(j, "muxer_command", "");
    return c;
}

std::string config_digest(const RunConfig& config) { return sha256_hex(to_json(config).dump()); }

prompt::TemplateSet load_templates(const RunConfig& config) {
    if (config.templates_dir.empty()) return {};
    if (!std::filesystem::is_directory(config.templates_dir))
        invalid("templates_dir '" + config.templates_dir + "' is not a directory");
    return prompt::TemplateSet::with_overrides(config.templates_dir);
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

ProviderSet make_providers(const RunConfig& config, const prompt::TemplateSet& templates, const EnvLookup& env) {
    const ProviderBindings& b = config.providers;
    ProviderSet p;
    if (b.chat.kind == "mock") {
        mock::MockChatOptions opt;
        opt.scene_count = b.chat.options.value("scene_count", opt.scene_count);
        opt.flaw_first_script = b.chat.options.value("flaw_first_script", opt.flaw_first_script);
        p.chat = std::make_shared<mock::MockChat>(templates, opt);
    } else {
        p.chat = std::make_shared<remote::RemoteChat>(make_client(config, b.chat, env),
                                                      b.chat.options.value("max_attachments", 16));
    }
    if (b.image.kind == "mock") {
        p.image = std::make_shared<mock::MockImageProvider>(config.image_size);
    } else {
        const bool url = b.image.options.value("reference_mode", "data") == "url";
        p.image = std::make_shared<remote::RemoteImageProvider>(
            make_client(config, b.image, env), url ? remote::ReferenceMode::Url : remote::ReferenceMode::Data,
            b.image.options.value("reference_url_prefix", ""));
    }
    if (b.video.kind == "mock") p.video = std::make_shared<mock::MockVideoProvider>();
    else p.video = std::make_shared<remote::RemoteVideoProvider>(make_client(config, b.video, env));
    if (b.segmenter.kind == "mock") p.segmenter = std::make_shared<mock::MockSegmenter>();
    else p.segmenter = std::make_shared<remote::RemoteSegmenter>(make_client(config, b.segmenter, env));
    if (b.embedder.kind == "mock") p.embedder = std::make_shared<mock::ToyEmbedder>();
    else p.embedder = std::make_shared<remote::RemoteEmbedder>(make_client(config, b.embedder, env));
    return p;
}

}  // namespace animforge
