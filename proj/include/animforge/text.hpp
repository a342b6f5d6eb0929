#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace animforge::text {

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string_view> split(std::string_view s, char sep);
std::vector<std::string_view> lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string to_lower_ascii(std::string_view s);
bool starts_with_icase(std::string_view s, std::string_view prefix) noexcept;

// Unicode NFC via ICU; ASCII input is returned unchanged without touching ICU.
std::string nfc(std::string_view s);
bool is_nfc(std::string_view s);

// Full Unicode case-folded equality.
bool equals_casefold(std::string_view a, std::string_view b);

std::size_t word_count(std::string_view s) noexcept;

}  // namespace animforge::text
