#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "animforge/error.hpp"
#include "animforge/prompt.hpp"

namespace corpus {

struct JudgeCase {
    std::string reply;
    int pool;
    std::optional<int> expected;  // empty: an error is expected
    animforge::PromptErrc error = animforge::PromptErrc::NoVerdictFound;
};

// 20 replies: valid, out-of-range and verdict-free.
std::vector<JudgeCase> judge_cases();

// 50 parameter replies that each break exactly one schema rule.
std::vector<std::string> schema_violations();

animforge::prompt::GenerationParams random_params(std::mt19937_64& rng);

}  // namespace corpus
