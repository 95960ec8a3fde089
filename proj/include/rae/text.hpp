#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rae {

// NFC-normalizes, trims, and collapses internal whitespace runs to a single
// ASCII space. Case is preserved.
std::string normalize_label(std::string_view raw);

// Trims and collapses ASCII/Unicode whitespace runs to one space; no NFC.
std::string collapse_whitespace(std::string_view text);

// Unicode lowercase of collapse_whitespace(text).
std::string fold_for_match(std::string_view text);

std::vector<std::string> split_whitespace(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace rae
