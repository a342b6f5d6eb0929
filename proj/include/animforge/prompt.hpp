#pragma once

// Instruction templates and parsers for the chat model's structured replies.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace animforge::prompt {

enum class TemplateId {
    Refine,
    ExtractProfiles,
    GenerateScenes,
    Verify,
    ImagePrompts,
    ImageJudge,
    ConsistencyCheck,
    VideoPrompts,
    ParamPredict,
    VideoJudge,
};

inline constexpr std::array kAllTemplates = {
    TemplateId::Refine,       TemplateId::ExtractProfiles,  TemplateId::GenerateScenes, TemplateId::Verify,
    TemplateId::ImagePrompts, TemplateId::ImageJudge,       TemplateId::ConsistencyCheck,
    TemplateId::VideoPrompts, TemplateId::ParamPredict,     TemplateId::VideoJudge,
};

// File stem / routing tag, e.g. "image_judge".
std::string_view to_string(TemplateId id) noexcept;
std::optional<TemplateId> template_from_string(std::string_view name) noexcept;
const std::set<std::string>& declared_slots(TemplateId id);

using SlotMap = std::map<std::string, std::string>;

class PromptTemplate {
public:
    // Throws PromptError(UndeclaredSlot) when the body uses a slot the id does not declare.
    PromptTemplate(TemplateId id, std::string body);

    TemplateId id() const noexcept { return id_; }
    const std::string& body() const noexcept { return body_; }
    const std::set<std::string>& slots() const { return declared_slots(id_); }

private:
    TemplateId id_;
    std::string body_;
};

// Slot names referenced by "{name}" patterns, in order of first appearance.
std::vector<std::string> find_slots(std::string_view body);

std::string render(const PromptTemplate& tpl, const SlotMap& slots);

// Inverse of render for one template: recovers slot values from a rendered
// prompt by matching the literal text between slots. Used by the mock chat.
std::optional<SlotMap> match_template(const PromptTemplate& tpl, std::string_view rendered);

// The shipped template bodies plus optional per-file overrides from a directory
// holding "<id>.txt" files.
class TemplateSet {
public:
    TemplateSet();
    static TemplateSet with_overrides(const std::filesystem::path& dir);

    const PromptTemplate& get(TemplateId id) const;
    void set(PromptTemplate tpl);

private:
    std::map<TemplateId, PromptTemplate> templates_;
};

std::string_view builtin_template_body(TemplateId id);

// ---------------------------------------------------------------------------

struct JudgeVerdict {
    int chosen_index = 1;  // 1-based
    std::string analysis;
};

JudgeVerdict parse_judge_verdict(std::string_view reply, int pool_size);

struct NoProblem {};
struct NeedsRevision {
    std::string revised_text;
};
using RepairVerdict = std::variant<NoProblem, NeedsRevision>;

inline constexpr std::string_view kNoProblemSentinel = "No problem found.";
RepairVerdict parse_repair_verdict(std::string_view reply);

enum class Zoom { None, In, Out };
enum class Pan { None, Left, Right };
enum class Tilt { None, Up, Down };
enum class Rotate { None, Cw, Ccw };

struct CameraMove {
    Zoom zoom = Zoom::None;
    Pan pan = Pan::None;
    Tilt tilt = Tilt::None;
    Rotate rotate = Rotate::None;
    bool operator==(const CameraMove&) const = default;
};

inline constexpr int kMotionMin = 0;
inline constexpr int kMotionMax = 4;
inline constexpr double kGuidanceMax = 100.0;

struct GenerationParams {
    std::string description;
    int motion = 2;
    double guidance_scale = 12.0;
    std::string negative_prompt;
    CameraMove camera;
    bool operator==(const GenerationParams&) const = default;
};

GenerationParams parse_params(std::string_view reply);
nlohmann::json to_json(const GenerationParams& params);
std::string serialize_params(const GenerationParams& params);

// Character consistency verdicts. Anything that is not an explicit pass counts
// as a failure; names and hues are extracted when the reply offers them.
struct ConsistencyFinding {
    std::string character;
    std::optional<double> observed_hue;
};

struct ConsistencyVerdict {
    bool passed = false;
    std::vector<ConsistencyFinding> findings;
};

inline constexpr std::string_view kConsistentSentinel = "All characters are consistent.";
ConsistencyVerdict parse_consistency_verdict(std::string_view reply);

}  // namespace animforge::prompt
