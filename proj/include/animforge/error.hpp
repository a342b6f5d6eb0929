#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace animforge {

// Root of every declared domain error. Anything else escaping the library is a bug.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ScriptErrc { MalformedSceneLine, EmptyField, MissingSection, MalformedProfileLine, InvalidDocument };

class ScriptError : public Error {
public:
    ScriptError(ScriptErrc code, const std::string& what, std::optional<std::size_t> scene_index = std::nullopt)
        : Error(what), code_(code), scene_index_(scene_index) {}

    ScriptErrc code() const noexcept { return code_; }
    std::optional<std::size_t> scene_index() const noexcept { return scene_index_; }

private:
    ScriptErrc code_;
    std::optional<std::size_t> scene_index_;
};

enum class PromptErrc {
    MissingSlot,
    UnknownSlot,
    EmptySlotValue,
    UndeclaredSlot,
    NoVerdictFound,
    IndexOutOfRange,
    NoJsonFound,
    SchemaViolation,
};

class PromptError : public Error {
public:
    PromptError(PromptErrc code, const std::string& what, std::string field = {})
        : Error(what), code_(code), field_(std::move(field)) {}

    PromptErrc code() const noexcept { return code_; }
    // Slot name for slot errors, JSON field path for SchemaViolation.
    const std::string& field() const noexcept { return field_; }

private:
    PromptErrc code_;
    std::string field_;
};

enum class ProviderErrc { Transient, Permanent, RateLimited };

class ProviderError : public Error {
public:
    ProviderError(ProviderErrc code, const std::string& what) : Error(what), code_(code) {}
    ProviderErrc code() const noexcept { return code_; }

private:
    ProviderErrc code_;
};

enum class MetricsErrc { ImageTooSmall, NoSubjectFound, ClipTooShort, InvalidInput };

class MetricsError : public Error {
public:
    MetricsError(MetricsErrc code, const std::string& what) : Error(what), code_(code) {}
    MetricsErrc code() const noexcept { return code_; }

private:
    MetricsErrc code_;
};

enum class CurationErrc { ScoresMissing, JudgeFailed, PoolTooLarge, EmptyPool };

class CurationError : public Error {
public:
    CurationError(CurationErrc code, const std::string& what) : Error(what), code_(code) {}
    CurationErrc code() const noexcept { return code_; }

private:
    CurationErrc code_;
};

enum class PipelineErrc {
    StageFailed,
    ConfigInvalid,
    CorruptWorkspace,
    ConfigMismatch,
    WorkspaceNotEmpty,
    RefinementFailed,
    ScriptUnrepairable,
    Interrupted,
};

class PipelineError : public Error {
public:
    PipelineError(PipelineErrc code, const std::string& what, std::string stage = {})
        : Error(what), code_(code), stage_(std::move(stage)) {}

    PipelineErrc code() const noexcept { return code_; }
    const std::string& stage() const noexcept { return stage_; }

private:
    PipelineErrc code_;
    std::string stage_;
};

std::string_view to_string(ScriptErrc c) noexcept;
std::string_view to_string(PromptErrc c) noexcept;
std::string_view to_string(ProviderErrc c) noexcept;
std::string_view to_string(MetricsErrc c) noexcept;
std::string_view to_string(CurationErrc c) noexcept;
std::string_view to_string(PipelineErrc c) noexcept;

}  // namespace animforge
