#pragma once

#include <string>
#include <string_view>

namespace taskbench {

struct ParsedResponse {
    std::string think_text;
    std::string answer_text;
    bool format_ok = false;
};

/// Extracts the first <think>...</think> <answer>...</answer> pair.
/// A missing "<think>" opener is tolerated because the prompt pre-fills it.
/// Never fails; format_ok is false when the answer block is absent or empty.
ParsedResponse parse_response(std::string_view text);

/// "<think> THOUGHTS </think> <answer> ANSWER </answer>"
std::string format_response(std::string_view think, std::string_view answer);

}  // namespace taskbench
