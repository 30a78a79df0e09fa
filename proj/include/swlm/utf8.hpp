#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace swlm::utf8 {

bool is_valid(std::string_view text);

// Throws DataError on malformed input.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view text);
std::string encode(char32_t cp);

// Code points of `text`, each re-encoded as its own UTF-8 string.
std::vector<std::string> split_chars(std::string_view text);

// Lowercases ASCII letters only; other code points pass through.
std::u32string ascii_lower(std::u32string_view text);

}  // namespace swlm::utf8
