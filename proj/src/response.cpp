#include "taskbench/response.hpp"

#include <cctype>

namespace taskbench {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

}  // namespace

ParsedResponse parse_response(std::string_view text) {
    ParsedResponse out;
    const std::size_t think_close = text.find(kThinkClose);
    if (think_close == std::string_view::npos) return out;

    std::size_t think_begin = 0;
    const std::size_t think_open = text.substr(0, think_close).find(kThinkOpen);
    if (think_open != std::string_view::npos) think_begin = think_open + kThinkOpen.size();
    out.think_text = std::string(trim(text.substr(think_begin, think_close - think_begin)));

    const std::size_t after_think = think_close + kThinkClose.size();
    const std::size_t answer_open = text.find(kAnswerOpen, after_think);
    if (answer_open == std::string_view::npos) return out;
    const std::size_t answer_begin = answer_open + kAnswerOpen.size();
    const std::size_t answer_close = text.find(kAnswerClose, answer_begin);
    if (answer_close == std::string_view::npos) return out;

    std::string_view answer = text.substr(answer_begin, answer_close - answer_begin);
    // A nested opener means the first block never closed properly.
    if (answer.find(kAnswerOpen) != std::string_view::npos) return out;
    out.answer_text = std::string(trim(answer));
    out.format_ok = !out.answer_text.empty();
    return out;
}

std::string format_response(std::string_view think, std::string_view answer) {
    std::string out = "<think> ";
    if (!think.empty()) {
        out += think;
        out += ' ';
    }
    out += "</think> <answer> ";
    out += answer;
    out += " </answer>";
    return out;
}

}  // namespace taskbench
