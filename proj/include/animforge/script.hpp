#pragma once

// Director's script model: narratives, character/setting profiles, scene lines
// of the form "[A, B][Setting]: description", and the cross-reference validator.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace animforge::script {

struct Narrative {
    std::string id;
    std::string text;

    // Derives a stable id from the text. Throws std::invalid_argument on blank text.
    static Narrative from_text(std::string text);
};

struct RefinedStory {
    std::string text;
    std::size_t word_count = 0;
    std::string source;  // Narrative id

    static RefinedStory from_text(std::string text, std::string source);
};

enum class Placement { Indoor, Outdoor };

struct CharacterProfile {
    std::string name;
    std::string description;
    bool operator==(const CharacterProfile&) const = default;
};

struct SettingProfile {
    std::string name;
    Placement placement = Placement::Outdoor;
    std::string description;
    bool operator==(const SettingProfile&) const = default;
};

struct SceneSpec {
    std::size_t index = 0;
    std::vector<std::string> characters;
    std::string setting;
    std::string description;
    bool operator==(const SceneSpec&) const = default;
};

// May be held unvalidated; validate_script decides whether references resolve.
struct Script {
    std::vector<CharacterProfile> characters;
    std::vector<SettingProfile> settings;
    std::vector<SceneSpec> scenes;

    const CharacterProfile* find_character(std::string_view name) const;
    const SettingProfile* find_setting(std::string_view name) const;
    bool operator==(const Script&) const = default;
};

enum class ViolationKind { UnknownCharacter, UnknownSetting, TerminologyMismatch, MissingCharacter, DuplicateProfile };

struct Violation {
    std::optional<std::size_t> scene_index;  // empty for profile-level problems
    ViolationKind kind;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const noexcept { return violations.empty(); }
    std::size_t count(ViolationKind kind) const noexcept;
    std::string summary() const;  // one line per violation, "none" when clean
};

std::string_view to_string(ViolationKind kind) noexcept;
std::string_view to_string(Placement p) noexcept;

SceneSpec parse_scene_line(std::string_view line);
std::string serialize_scene_line(const SceneSpec& scene);

// True when serialize/parse round-trips the scene: trimmed NFC names without
// brackets or commas, no duplicates, single-line trimmed description.
bool is_well_formed(const SceneSpec& scene);

// Parses the "## Characters / ## Settings / ## Scenes" document. Does not
// check cross references.
Script parse_script(std::string_view document);
std::string serialize_script(const Script& script);

// Partial documents exchanged between the extraction and scene-writing steps.
Script parse_profiles(std::string_view document);  // Characters + Settings, scenes left empty
std::vector<SceneSpec> parse_scenes(std::string_view document);
std::string serialize_profiles(const Script& script);

ValidationReport validate_script(const Script& script);

nlohmann::json to_json(const Script& script);
Script script_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ValidationReport& report);

}  // namespace animforge::script
