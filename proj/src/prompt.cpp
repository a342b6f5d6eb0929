#include "animforge/prompt.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "animforge/error.hpp"
#include "animforge/text.hpp"

namespace animforge::prompt {

// Generated from resources/templates at configure time.
std::string_view builtin_template_text(std::string_view stem);

namespace {

bool is_slot_char(char c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '#';
}

// Length of the "{name}" pattern at body[pos], or 0 when there is none.
std::size_t slot_at(std::string_view body, std::size_t pos, std::string_view& name) noexcept {
    if (body[pos] != '{') return 0;
    std::size_t i = pos + 1;
    while (i < body.size() && is_slot_char(body[i])) ++i;
    if (i == pos + 1 || i >= body.size() || body[i] != '}') return 0;
    name = body.substr(pos + 1, i - pos - 1);
    return i - pos + 1;
}

struct Token {
    bool is_slot;
    std::string_view text;  // literal text or slot name
};

std::vector<Token> tokenize(std::string_view body) {
    std::vector<Token> out;
    std::size_t lit_start = 0;
    for (std::size_t i = 0; i < body.size();) {
        std::string_view name;
        if (const std::size_t len = slot_at(body, i, name)) {
            if (i > lit_start) out.push_back({false, body.substr(lit_start, i - lit_start)});
            out.push_back({true, name});
            i += len;
            lit_start = i;
        } else {
            ++i;
        }
    }
    if (lit_start < body.size()) out.push_back({false, body.substr(lit_start)});
    return out;
}

std::string strip_trailing_newline(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

[[noreturn]] void schema(const std::string& field, const std::string& reason) {
    throw PromptError(PromptErrc::SchemaViolation, "parameter JSON: " + field + " " + reason, field);
}

template <class E>
E parse_enum(const nlohmann::json& camera, const char* key, std::initializer_list<std::pair<const char*, E>> allowed) {
    const std::string field = std::string("option.camera.") + key;
    if (!camera.contains(key) || camera.at(key).is_null()) return E{};
    const auto& v = camera.at(key);
    if (!v.is_string()) schema(field, "must be a string or null");
    const auto s = v.get<std::string>();
    for (const auto& [word, value] : allowed)
        if (s == word) return value;
    schema(field, "has unsupported value '" + s + "'");
}

const char* zoom_word(Zoom z) { return z == Zoom::In ? "in" : "out"; }
const char* pan_word(Pan p) { return p == Pan::Left ? "left" : "right"; }
const char* tilt_word(Tilt t) { return t == Tilt::Up ? "up" : "down"; }
const char* rotate_word(Rotate r) { return r == Rotate::Cw ? "cw" : "ccw"; }

// End of the balanced JSON object starting at text[start], or npos.
std::size_t object_end(std::string_view text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i;
    }
    return std::string_view::npos;
}

bool contains_icase(std::string_view hay, std::string_view needle) {
    return text::to_lower_ascii(hay).find(text::to_lower_ascii(needle)) != std::string::npos;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(TemplateId id) noexcept {
    switch (id) {
        case TemplateId::Refine: return "refine";
        case TemplateId::ExtractProfiles: return "extract_profiles";
        case TemplateId::GenerateScenes: return "generate_scenes";
        case TemplateId::Verify: return "verify";
        case TemplateId::ImagePrompts: return "image_prompts";
        case TemplateId::ImageJudge: return "image_judge";
        case TemplateId::ConsistencyCheck: return "consistency_check";
        case TemplateId::VideoPrompts: return "video_prompts";
        case TemplateId::ParamPredict: return "param_predict";
        case TemplateId::VideoJudge: return "video_judge";
    }
    return "?";
}

std::optional<TemplateId> template_from_string(std::string_view name) noexcept {
    for (TemplateId id : kAllTemplates)
        if (to_string(id) == name) return id;
    return std::nullopt;
}

const std::set<std::string>& declared_slots(TemplateId id) {
    static const std::map<TemplateId, std::set<std::string>> table = {
        {TemplateId::Refine, {"Narrative"}},
        {TemplateId::ExtractProfiles, {"Story"}},
        {TemplateId::GenerateScenes, {"Story", "Profiles"}},
        {TemplateId::Verify, {"Story", "Script", "Issues"}},
        {TemplateId::ImagePrompts, {"Description", "Profiles", "RenameRule"}},
        {TemplateId::ImageJudge, {"Description", "Count"}},
        {TemplateId::ConsistencyCheck, {"Description", "References"}},
        {TemplateId::VideoPrompts, {"Description", "Character"}},
        {TemplateId::ParamPredict, {"Description", "Prompt"}},
        {TemplateId::VideoJudge, {"Description", "Count"}},
    };
    return table.at(id);
}

PromptTemplate::PromptTemplate(TemplateId id, std::string body) : id_(id), body_(std::move(body)) {
    const auto& declared = declared_slots(id_);
    for (const auto& name : find_slots(body_)) {
        if (!declared.contains(name))
            throw PromptError(PromptErrc::UndeclaredSlot,
                              "template '" + std::string(to_string(id_)) + "' uses undeclared slot {" + name + "}", name);
    }
}

std::vector<std::string> find_slots(std::string_view body) {
    std::vector<std::string> out;
    for (const Token& t : tokenize(body)) {
        if (t.is_slot && std::find(out.begin(), out.end(), t.text) == out.end()) out.emplace_back(t.text);
    }
    return out;
}

std::string render(const PromptTemplate& tpl, const SlotMap& slots) {
    const auto& declared = tpl.slots();
    for (const auto& [name, value] : slots) {
        if (!declared.contains(name))
            throw PromptError(PromptErrc::UnknownSlot, "template '" + std::string(to_string(tpl.id())) +
                                                           "' has no slot {" + name + "}", name);
        if (value.empty()) throw PromptError(PromptErrc::EmptySlotValue, "slot {" + name + "} has an empty value", name);
    }
    std::string out;
    out.reserve(tpl.body().size() + 256);
    for (const Token& t : tokenize(tpl.body())) {
        if (!t.is_slot) {
            out += t.text;
            continue;
        }
        const auto it = slots.find(std::string(t.text));
        if (it == slots.end())
            throw PromptError(PromptErrc::MissingSlot, "missing value for slot {" + std::string(t.text) + "}",
                              std::string(t.text));
        out += it->second;
    }
    return out;
}

std::optional<SlotMap> match_template(const PromptTemplate& tpl, std::string_view rendered) {
    const auto tokens = tokenize(tpl.body());
    SlotMap out;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Token& t = tokens[i];
        if (!t.is_slot) {
            if (rendered.substr(pos, t.text.size()) != t.text) return std::nullopt;
            pos += t.text.size();
            continue;
        }
        std::string_view value;
        if (i + 1 == tokens.size()) {
            value = rendered.substr(pos);
            pos = rendered.size();
        } else {
            if (tokens[i + 1].is_slot) return std::nullopt;  // adjacent slots are ambiguous
            const std::string_view next = tokens[i + 1].text;
            const bool last_literal = i + 2 == tokens.size();
            std::size_t at;
            if (last_literal) {
                if (rendered.size() < next.size() || rendered.substr(rendered.size() - next.size()) != next)
                    return std::nullopt;
                at = rendered.size() - next.size();
                if (at < pos) return std::nullopt;
            } else {
                at = rendered.find(next, pos);
                if (at == std::string_view::npos) return std::nullopt;
            }
            value = rendered.substr(pos, at - pos);
            pos = at;
        }
        const std::string name(t.text);
        if (auto it = out.find(name); it != out.end() && it->second != value) return std::nullopt;
        out[name] = std::string(value);
    }
    if (pos != rendered.size()) return std::nullopt;
    return out;
}

TemplateSet::TemplateSet() {
    for (TemplateId id : kAllTemplates) templates_.emplace(id, PromptTemplate(id, std::string(builtin_template_body(id))));
}

TemplateSet TemplateSet::with_overrides(const std::filesystem::path& dir) {
    TemplateSet set;
    for (TemplateId id : kAllTemplates) {
        const auto path = dir / (std::string(to_string(id)) + ".txt");
        if (!std::filesystem::exists(path)) continue;
        std::ifstream in(path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        set.set(PromptTemplate(id, strip_trailing_newline(ss.str())));
    }
    return set;
}

const PromptTemplate& TemplateSet::get(TemplateId id) const { return templates_.at(id); }

void TemplateSet::set(PromptTemplate tpl) {
    const TemplateId id = tpl.id();
    templates_.insert_or_assign(id, std::move(tpl));
}

std::string_view builtin_template_body(TemplateId id) {
    static const std::map<TemplateId, std::string> cache = [] {
        std::map<TemplateId, std::string> m;
        for (TemplateId t : kAllTemplates) m[t] = strip_trailing_newline(std::string(builtin_template_text(to_string(t))));
        return m;
    }();
    return cache.at(id);
}

// ---------------------------------------------------------------------------

JudgeVerdict parse_judge_verdict(std::string_view reply, int pool_size) {
    if (pool_size < 1) throw std::invalid_argument("parse_judge_verdict: pool_size must be >= 1");
    static const std::regex pattern(R"(the\s+answer\s+is\s*:?\s*(?:image|video)\s*#?\s*(\d+))", std::regex::icase);
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(reply.begin(), reply.end(), m, pattern))
        throw PromptError(PromptErrc::NoVerdictFound, "reply has no 'The answer is image <k>' verdict");
    const auto digits = std::string_view(&*m[1].first, static_cast<std::size_t>(m[1].length()));
    long long k = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec != std::errc{} || k < 1 || k > pool_size)
        throw PromptError(PromptErrc::IndexOutOfRange,
                          "verdict image " + std::string(digits) + " outside 1.." + std::to_string(pool_size));
    JudgeVerdict v;
    v.chosen_index = static_cast<int>(k);
    std::string_view rest = reply.substr(static_cast<std::size_t>(m[0].second - reply.begin()));
    const std::size_t skip = rest.find_first_not_of(" \t\r\n.,;:!)'\"");
    v.analysis = skip == std::string_view::npos ? std::string{} : std::string(text::trim(rest.substr(skip)));
    return v;
}

RepairVerdict parse_repair_verdict(std::string_view reply) {
    if (reply.find(kNoProblemSentinel) != std::string_view::npos) return NoProblem{};
    return NeedsRevision{std::string(reply)};
}

GenerationParams parse_params(std::string_view reply) {
    nlohmann::json root;
    bool found = false;
    for (std::size_t start = reply.find('{'); start != std::string_view::npos; start = reply.find('{', start + 1)) {
        const std::size_t end = object_end(reply, start);
        if (end == std::string_view::npos) continue;
        root = nlohmann::json::parse(reply.substr(start, end - start + 1), nullptr, false);
        if (!root.is_discarded() && root.is_object()) {
            found = true;
            break;
        }
    }
    if (!found) throw PromptError(PromptErrc::NoJsonFound, "reply contains no JSON object");

    GenerationParams p;
    if (root.contains("description") && !root.at("description").is_null()) {
        if (!root.at("description").is_string()) schema("description", "must be a string");
        p.description = root.at("description").get<std::string>();
    }
    if (!root.contains("option") || !root.at("option").is_object()) schema("option", "must be an object");
    const auto& option = root.at("option");
    if (!option.contains("parameters") || !option.at("parameters").is_object())
        schema("option.parameters", "must be an object");
    const auto& params = option.at("parameters");

    if (!params.contains("motion")) schema("option.parameters.motion", "is required");
    const auto& motion = params.at("motion");
    if (motion.is_number_integer()) {
        const auto m = motion.get<long long>();
        if (m < kMotionMin || m > kMotionMax) schema("option.parameters.motion", "must lie in 0..4");
        p.motion = static_cast<int>(m);
    } else if (motion.is_number_float()) {
        const double m = motion.get<double>();
        if (!std::isfinite(m) || m != std::floor(m)) schema("option.parameters.motion", "must be an integer");
        if (m < kMotionMin || m > kMotionMax) schema("option.parameters.motion", "must lie in 0..4");
        p.motion = static_cast<int>(m);
    } else {
        schema("option.parameters.motion", "must be an integer");
    }

    if (!params.contains("guidanceScale")) schema("option.parameters.guidanceScale", "is required");
    const auto& gs = params.at("guidanceScale");
    if (!gs.is_number()) schema("option.parameters.guidanceScale", "must be a number");
    p.guidance_scale = gs.get<double>();
    if (!std::isfinite(p.guidance_scale) || p.guidance_scale <= 0.0 || p.guidance_scale > kGuidanceMax)
        schema("option.parameters.guidanceScale", "must lie in (0, 100]");

    if (params.contains("negativePrompt") && !params.at("negativePrompt").is_null()) {
        if (!params.at("negativePrompt").is_string()) schema("option.parameters.negativePrompt", "must be a string");
        p.negative_prompt = params.at("negativePrompt").get<std::string>();
    }

    if (option.contains("camera") && !option.at("camera").is_null()) {
        const auto& cam = option.at("camera");
        if (!cam.is_object()) schema("option.camera", "must be an object or null");
        p.camera.zoom = parse_enum<Zoom>(cam, "zoom", {{"in", Zoom::In}, {"out", Zoom::Out}});
        p.camera.pan = parse_enum<Pan>(cam, "pan", {{"left", Pan::Left}, {"right", Pan::Right}});
        p.camera.tilt = parse_enum<Tilt>(cam, "tilt", {{"up", Tilt::Up}, {"down", Tilt::Down}});
        p.camera.rotate = parse_enum<Rotate>(cam, "rotate", {{"cw", Rotate::Cw}, {"ccw", Rotate::Ccw}});
    }
    return p;
}

nlohmann::json to_json(const GenerationParams& p) {
    auto word = [](bool none, const char* w) { return none ? nlohmann::json() : nlohmann::json(w); };
    nlohmann::json camera = {
        {"zoom", word(p.camera.zoom == Zoom::None, zoom_word(p.camera.zoom))},
        {"pan", word(p.camera.pan == Pan::None, pan_word(p.camera.pan))},
        {"tilt", word(p.camera.tilt == Tilt::None, tilt_word(p.camera.tilt))},
        {"rotate", word(p.camera.rotate == Rotate::None, rotate_word(p.camera.rotate))},
    };
    return {
        {"description", p.description},
        {"option",
         {{"parameters",
           {{"motion", p.motion}, {"guidanceScale", p.guidance_scale}, {"negativePrompt", p.negative_prompt}}},
          {"camera", camera}}},
    };
}

std::string serialize_params(const GenerationParams& params) { return to_json(params).dump(2); }

ConsistencyVerdict parse_consistency_verdict(std::string_view reply) {
    static const std::regex finding(
        R"(^\W*inconsistent\s*:\s*(.*?)\s*(?:\(\s*observed\s+hue\s*([0-9]+(?:\.[0-9]+)?)\s*\))?\s*\.?\s*$)",
        std::regex::icase);
    ConsistencyVerdict v;
    for (std::string_view line : text::lines(reply)) {
        const std::string l(text::trim(line));
        std::smatch m;
        if (!std::regex_match(l, m, finding)) continue;
        ConsistencyFinding f;
        f.character = std::string(text::trim(m[1].str()));
        if (m[2].matched) f.observed_hue = std::stod(m[2].str());
        v.findings.push_back(std::move(f));
    }
    v.passed = v.findings.empty() && contains_icase(reply, kConsistentSentinel);
    return v;
}

}  // namespace animforge::prompt
