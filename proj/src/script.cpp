#include "animforge/script.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include "animforge/digest.hpp"
#include "animforge/error.hpp"
#include "animforge/text.hpp"

namespace animforge::script {

namespace {

using text::trim;

bool has_any(std::string_view s, std::string_view chars) { return s.find_first_of(chars) != std::string_view::npos; }

// Returns the content of the bracket group starting at s[pos] and advances pos
// past the closing bracket. Nested groups are kept verbatim.
std::string_view take_group(std::string_view s, std::size_t& pos) {
    int depth = 0;
    for (std::size_t i = pos; i < s.size(); ++i) {
        if (s[i] == '[') {
            ++depth;
        } else if (s[i] == ']') {
            if (--depth == 0) {
                const std::string_view inner = s.substr(pos + 1, i - pos - 1);
                pos = i + 1;
                return inner;
            }
        }
    }
    throw ScriptError(ScriptErrc::MalformedSceneLine, "unbalanced brackets in scene line");
}

void skip_space(std::string_view s, std::size_t& pos) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
}

// "- ", "* ", "• " and "12. " / "12) " list markers some models prepend.
std::string_view strip_list_marker(std::string_view line) {
    if (line.starts_with("- ") || line.starts_with("* ")) return trim(line.substr(2));
    if (line.starts_with("\xE2\x80\xA2 ")) return trim(line.substr(4));
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i + 1 < line.size() && (line[i] == '.' || line[i] == ')') && line[i + 1] == ' ')
        return trim(line.substr(i + 2));
    return line;
}

CharacterProfile parse_character_line(std::string_view line) {
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos)
        throw ScriptError(ScriptErrc::MalformedProfileLine, "character line lacks ':' : " + std::string(line));
    const std::string_view name = trim(line.substr(0, colon));
    if (name.empty()) throw ScriptError(ScriptErrc::MalformedProfileLine, "character line has an empty name");
    return {text::nfc(name), std::string(trim(line.substr(colon + 1)))};
}

SettingProfile parse_setting_line(std::string_view line) {
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos)
        throw ScriptError(ScriptErrc::MalformedProfileLine, "setting line lacks ':' : " + std::string(line));
    const std::string_view head = trim(line.substr(0, colon));
    const std::size_t open = head.rfind('(');
    if (open == std::string_view::npos || head.back() != ')')
        throw ScriptError(ScriptErrc::MalformedProfileLine,
                          "setting line must read 'Name (Indoor/Outdoor): ...' : " + std::string(line));
    const std::string_view name = trim(head.substr(0, open));
    const std::string placement = text::to_lower_ascii(trim(head.substr(open + 1, head.size() - open - 2)));
    if (name.empty()) throw ScriptError(ScriptErrc::MalformedProfileLine, "setting line has an empty name");
    SettingProfile p;
    p.name = text::nfc(name);
    if (placement == "indoor") {
        p.placement = Placement::Indoor;
    } else if (placement == "outdoor") {
        p.placement = Placement::Outdoor;
    } else {
        throw ScriptError(ScriptErrc::MalformedProfileLine, "setting placement must be Indoor or Outdoor: " + placement);
    }
    p.description = std::string(trim(line.substr(colon + 1)));
    return p;
}

std::string_view placement_word(Placement p) { return p == Placement::Indoor ? "Indoor" : "Outdoor"; }

}  // namespace

// ---------------------------------------------------------------------------

Narrative Narrative::from_text(std::string text) {
    if (trim(text).empty()) throw std::invalid_argument("narrative text is empty");
    Narrative n;
    n.id = "narr-" + sha256_hex(text).substr(0, 12);
    n.text = std::move(text);
    return n;
}

RefinedStory RefinedStory::from_text(std::string text, std::string source) {
    RefinedStory s;
    s.word_count = text::word_count(text);
    s.text = std::move(text);
    s.source = std::move(source);
    return s;
}

const CharacterProfile* Script::find_character(std::string_view name) const {
    const std::string key = text::nfc(name);
    for (const auto& c : characters)
        if (text::nfc(c.name) == key) return &c;
    return nullptr;
}

const SettingProfile* Script::find_setting(std::string_view name) const {
    const std::string key = text::nfc(name);
    for (const auto& s : settings)
        if (text::nfc(s.name) == key) return &s;
    return nullptr;
}

std::size_t ValidationReport::count(ViolationKind kind) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; }));
}

std::string ValidationReport::summary() const {
    if (violations.empty()) return "none";
    std::string out;
    for (const auto& v : violations) {
        if (!out.empty()) out += '\n';
        out += "- ";
        if (v.scene_index) out += "scene " + std::to_string(*v.scene_index + 1) + ": ";
        out += std::string(to_string(v.kind)) + ": " + v.detail;
    }
    return out;
}

std::string_view to_string(ViolationKind kind) noexcept {
    switch (kind) {
        case ViolationKind::UnknownCharacter: return "UnknownCharacter";
        case ViolationKind::UnknownSetting: return "UnknownSetting";
        case ViolationKind::TerminologyMismatch: return "TerminologyMismatch";
        case ViolationKind::MissingCharacter: return "MissingCharacter";
        case ViolationKind::DuplicateProfile: return "DuplicateProfile";
    }
    return "?";
}

std::string_view to_string(Placement p) noexcept { return p == Placement::Indoor ? "indoor" : "outdoor"; }

// ---------------------------------------------------------------------------

SceneSpec parse_scene_line(std::string_view line) {
    const std::string_view s = trim(line);
    std::size_t pos = 0;
    if (s.empty() || s[0] != '[')
        throw ScriptError(ScriptErrc::MalformedSceneLine, "scene line must start with '[': " + std::string(s));
    const std::string_view group1 = take_group(s, pos);
    skip_space(s, pos);
    if (pos >= s.size() || s[pos] != '[')
        throw ScriptError(ScriptErrc::MalformedSceneLine, "scene line needs a second [Setting] group");
    const std::string_view group2 = take_group(s, pos);
    skip_space(s, pos);
    if (pos >= s.size() || s[pos] != ':')
        throw ScriptError(ScriptErrc::MalformedSceneLine, "scene line lacks ':' after the setting group");

    SceneSpec scene;
    if (trim(group1).empty()) throw ScriptError(ScriptErrc::EmptyField, "scene has an empty character list");
    for (std::string_view part : text::split(group1, ',')) {
        const std::string_view name = trim(part);
        if (name.empty()) throw ScriptError(ScriptErrc::EmptyField, "scene character list has an empty name");
        std::string normalized = text::nfc(name);
        if (std::find(scene.characters.begin(), scene.characters.end(), normalized) != scene.characters.end())
            throw ScriptError(ScriptErrc::MalformedSceneLine, "scene lists character twice: " + normalized);
        scene.characters.push_back(std::move(normalized));
    }
    scene.setting = text::nfc(trim(group2));
    if (scene.setting.empty()) throw ScriptError(ScriptErrc::EmptyField, "scene has an empty setting");
    scene.description = std::string(trim(s.substr(pos + 1)));
    if (scene.description.empty()) throw ScriptError(ScriptErrc::EmptyField, "scene has an empty description");
    return scene;
}

std::string serialize_scene_line(const SceneSpec& scene) {
    return "[" + text::join(scene.characters, ", ") + "][" + scene.setting + "]: " + scene.description;
}

bool is_well_formed(const SceneSpec& scene) {
    if (scene.characters.empty()) return false;
    std::set<std::string> seen;
    for (const auto& c : scene.characters) {
        if (c.empty() || trim(c) != c || has_any(c, "[],\n\r") || !text::is_nfc(c)) return false;
        if (!seen.insert(c).second) return false;
    }
    const auto& st = scene.setting;
    if (st.empty() || trim(st) != st || has_any(st, "[]\n\r") || !text::is_nfc(st)) return false;
    const auto& d = scene.description;
    return !d.empty() && trim(d) == d && !has_any(d, "\n\r");
}

// ---------------------------------------------------------------------------

namespace {

struct SectionsSeen {
    bool characters = false;
    bool settings = false;
    bool scenes = false;
};

Script parse_sections(std::string_view document, SectionsSeen& seen) {
    enum class Section { None, Characters, Settings, Scenes, Other };
    Section section = Section::None;
    Script out;

    for (std::string_view raw : text::lines(document)) {
        const std::string_view line = trim(raw);
        if (line.empty()) continue;
        if (line.starts_with("##")) {
            const std::string header = text::to_lower_ascii(trim(line.substr(line.find_first_not_of('#'))));
            if (header == "characters") {
                section = Section::Characters;
                seen.characters = true;
            } else if (header == "settings") {
                section = Section::Settings;
                seen.settings = true;
            } else if (header == "scenes") {
                section = Section::Scenes;
                seen.scenes = true;
            } else {
                section = Section::Other;
            }
            continue;
        }
        const std::string_view body = strip_list_marker(line);
        switch (section) {
            case Section::None:
            case Section::Other:
                break;
            case Section::Characters:
                out.characters.push_back(parse_character_line(body));
                break;
            case Section::Settings:
                out.settings.push_back(parse_setting_line(body));
                break;
            case Section::Scenes: {
                const std::size_t index = out.scenes.size();
                try {
                    SceneSpec scene = parse_scene_line(body);
                    scene.index = index;
                    out.scenes.push_back(std::move(scene));
                } catch (const ScriptError& e) {
                    throw ScriptError(e.code(), "scene " + std::to_string(index + 1) + ": " + e.what(), index);
                }
                break;
            }
        }
    }
    return out;
}

void require(bool seen, const char* header) {
    if (!seen) throw ScriptError(ScriptErrc::MissingSection, std::string("document has no '## ") + header + "' section");
}

}  // namespace

Script parse_script(std::string_view document) {
    SectionsSeen seen;
    Script out = parse_sections(document, seen);
    require(seen.characters, "Characters");
    require(seen.settings, "Settings");
    require(seen.scenes, "Scenes");
    return out;
}

Script parse_profiles(std::string_view document) {
    SectionsSeen seen;
    Script out = parse_sections(document, seen);
    require(seen.characters, "Characters");
    require(seen.settings, "Settings");
    out.scenes.clear();
    return out;
}

std::vector<SceneSpec> parse_scenes(std::string_view document) {
    SectionsSeen seen;
    Script out = parse_sections(document, seen);
    require(seen.scenes, "Scenes");
    return std::move(out.scenes);
}

std::string serialize_profiles(const Script& script) {
    std::string out = "## Characters\n";
    for (const auto& c : script.characters) out += c.name + ": " + c.description + "\n";
    out += "\n## Settings\n";
    for (const auto& s : script.settings)
        out += s.name + " (" + std::string(placement_word(s.placement)) + "): " + s.description + "\n";
    return out;
}

std::string serialize_script(const Script& script) {
    std::string out = serialize_profiles(script);
    out += "\n## Scenes\n";
    for (const auto& sc : script.scenes) out += serialize_scene_line(sc) + "\n";
    return out;
}

ValidationReport validate_script(const Script& script) {
    ValidationReport report;
    std::vector<std::string> char_names;
    std::vector<std::string> setting_names;

    for (const auto& c : script.characters) {
        std::string n = text::nfc(trim(c.name));
        if (std::find(char_names.begin(), char_names.end(), n) != char_names.end()) {
            report.violations.push_back({std::nullopt, ViolationKind::DuplicateProfile, "character '" + n + "' defined twice"});
        } else {
            char_names.push_back(std::move(n));
        }
    }
    for (const auto& s : script.settings) {
        std::string n = text::nfc(trim(s.name));
        if (std::find(setting_names.begin(), setting_names.end(), n) != setting_names.end()) {
            report.violations.push_back({std::nullopt, ViolationKind::DuplicateProfile, "setting '" + n + "' defined twice"});
        } else {
            setting_names.push_back(std::move(n));
        }
    }

    auto resolve = [](const std::vector<std::string>& known, const std::string& ref) -> std::optional<std::string> {
        // nullopt: exact match; "" : no match at all; otherwise the case-insensitive twin.
        if (std::find(known.begin(), known.end(), ref) != known.end()) return std::nullopt;
        for (const auto& k : known)
            if (text::equals_casefold(k, ref)) return k;
        return std::string{};
    };

    for (std::size_t i = 0; i < script.scenes.size(); ++i) {
        const SceneSpec& scene = script.scenes[i];
        for (const auto& raw : scene.characters) {
            const std::string ref = text::nfc(trim(raw));
            if (auto twin = resolve(char_names, ref)) {
                if (twin->empty()) {
                    report.violations.push_back({i, ViolationKind::UnknownCharacter, "character '" + ref + "' is not listed"});
                } else {
                    report.violations.push_back(
                        {i, ViolationKind::TerminologyMismatch, "character '" + ref + "' should be written '" + *twin + "'"});
                }
            }
        }
        const std::string ref = text::nfc(trim(scene.setting));
        if (auto twin = resolve(setting_names, ref)) {
            if (twin->empty()) {
                report.violations.push_back({i, ViolationKind::UnknownSetting, "setting '" + ref + "' is not listed"});
            } else {
                report.violations.push_back(
                    {i, ViolationKind::TerminologyMismatch, "setting '" + ref + "' should be written '" + *twin + "'"});
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const Script& script) {
    nlohmann::json j;
    j["characters"] = nlohmann::json::array();
    for (const auto& c : script.characters) j["characters"].push_back({{"name", c.name}, {"description", c.description}});
    j["settings"] = nlohmann::json::array();
    for (const auto& s : script.settings)
        j["settings"].push_back(
            {{"name", s.name}, {"placement", std::string(to_string(s.placement))}, {"description", s.description}});
    j["scenes"] = nlohmann::json::array();
    for (const auto& sc : script.scenes)
        j["scenes"].push_back({{"index", sc.index},
                               {"characters", sc.characters},
                               {"setting", sc.setting},
                               {"description", sc.description}});
    return j;
}

Script script_from_json(const nlohmann::json& j) {
    try {
        Script s;
        for (const auto& c : j.at("characters"))
            s.characters.push_back({c.at("name").get<std::string>(), c.at("description").get<std::string>()});
        for (const auto& st : j.at("settings")) {
            const auto placement = st.at("placement").get<std::string>();
            if (placement != "indoor" && placement != "outdoor")
                throw ScriptError(ScriptErrc::InvalidDocument, "placement must be 'indoor' or 'outdoor'");
            s.settings.push_back({st.at("name").get<std::string>(),
                                  placement == "indoor" ? Placement::Indoor : Placement::Outdoor,
                                  st.at("description").get<std::string>()});
        }
        for (const auto& sc : j.at("scenes")) {
            SceneSpec spec;
            spec.index = sc.at("index").get<std::size_t>();
            spec.characters = sc.at("characters").get<std::vector<std::string>>();
            spec.setting = sc.at("setting").get<std::string>();
            spec.description = sc.at("description").get<std::string>();
            s.scenes.push_back(std::move(spec));
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ScriptError(ScriptErrc::InvalidDocument, std::string("script json: ") + e.what());
    }
}

nlohmann::json to_json(const ValidationReport& report) {
    nlohmann::json j;
    j["violations"] = nlohmann::json::array();
    for (const auto& v : report.violations) {
        j["violations"].push_back({{"scene_index", v.scene_index ? nlohmann::json(*v.scene_index) : nlohmann::json()},
                                   {"kind", std::string(to_string(v.kind))},
                                   {"detail", v.detail}});
    }
    j["ok"] = report.ok();
    return j;
}

}  // namespace animforge::script
