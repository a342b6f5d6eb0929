#include "animforge/error.hpp"

namespace animforge {

std::string_view to_string(ScriptErrc c) noexcept {
    switch (c) {
        case ScriptErrc::MalformedSceneLine: return "MalformedSceneLine";
        case ScriptErrc::EmptyField: return "EmptyField";
        case ScriptErrc::MissingSection: return "MissingSection";
        case ScriptErrc::MalformedProfileLine: return "MalformedProfileLine";
        case ScriptErrc::InvalidDocument: return "InvalidDocument";
    }
    return "?";
}

std::string_view to_string(PromptErrc c) noexcept {
    switch (c) {
        case PromptErrc::MissingSlot: return "MissingSlot";
        case PromptErrc::UnknownSlot: return "UnknownSlot";
        case PromptErrc::EmptySlotValue: return "EmptySlotValue";
        case PromptErrc::UndeclaredSlot: return "UndeclaredSlot";
        case PromptErrc::NoVerdictFound: return "NoVerdictFound";
        case PromptErrc::IndexOutOfRange: return "IndexOutOfRange";
        case PromptErrc::NoJsonFound: return "NoJsonFound";
        case PromptErrc::SchemaViolation: return "SchemaViolation";
    }
    return "?";
}

std::string_view to_string(ProviderErrc c) noexcept {
    switch (c) {
        case ProviderErrc::Transient: return "Transient";
        case ProviderErrc::Permanent: return "Permanent";
        case ProviderErrc::RateLimited: return "RateLimited";
    }
    return "?";
}

std::string_view to_string(MetricsErrc c) noexcept {
    switch (c) {
        case MetricsErrc::ImageTooSmall: return "ImageTooSmall";
        case MetricsErrc::NoSubjectFound: return "NoSubjectFound";
        case MetricsErrc::ClipTooShort: return "ClipTooShort";
        case MetricsErrc::InvalidInput: return "InvalidInput";
    }
    return "?";
}

std::string_view to_string(CurationErrc c) noexcept {
    switch (c) {
        case CurationErrc::ScoresMissing: return "ScoresMissing";
        case CurationErrc::JudgeFailed: return "JudgeFailed";
        case CurationErrc::PoolTooLarge: return "PoolTooLarge";
        case CurationErrc::EmptyPool: return "EmptyPool";
    }
    return "?";
}

std::string_view to_string(PipelineErrc c) noexcept {
    switch (c) {
        case PipelineErrc::StageFailed: return "StageFailed";
        case PipelineErrc::ConfigInvalid: return "ConfigInvalid";
        case PipelineErrc::CorruptWorkspace: return "CorruptWorkspace";
        case PipelineErrc::ConfigMismatch: return "ConfigMismatch";
        case PipelineErrc::WorkspaceNotEmpty: return "WorkspaceNotEmpty";
        case PipelineErrc::RefinementFailed: return "RefinementFailed";
        case PipelineErrc::ScriptUnrepairable: return "ScriptUnrepairable";
        case PipelineErrc::Interrupted: return "Interrupted";
    }
    return "?";
}

}  // namespace animforge
