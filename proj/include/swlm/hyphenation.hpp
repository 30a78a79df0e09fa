#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace swlm {

// Liang's pattern hyphenation, used here as an approximate syllabifier.
//
// A pattern such as "hy3ph" is stored as its letters ("hyph") plus one
// weight per inter-letter gap (0,0,3,0,0). To hyphenate, the word is
// wrapped in boundary dots, every pattern occurrence is overlaid, and the
// maximum weight per gap wins; odd maxima mark a permissible break.
class HyphenationPatterns {
 public:
  HyphenationPatterns() = default;

  // Accepts both TeX pattern files (\patterns{...}, \hyphenation{...},
  // `%` comments) and the hunspell/OpenOffice `.dic` layout (charset line,
  // LEFTHYPHENMIN/RIGHTHYPHENMIN keywords, one pattern per line).
  static HyphenationPatterns parse(std::string_view text);
  static HyphenationPatterns load(const std::filesystem::path& path);

  void add_pattern(std::string_view pattern);
  // `as-so-ciate` style exception; breaks exactly at the hyphens.
  void add_exception(std::string_view hyphenated);

  std::size_t left_min() const { return left_min_; }
  std::size_t right_min() const { return right_min_; }
  void set_minima(std::size_t left, std::size_t right);

  std::size_t pattern_count() const { return patterns_.size(); }

  // Break positions, as counts of code points preceding each break.
  std::vector<std::size_t> break_points(std::string_view word) const;

  // Pieces concatenate back to `word`. Unhyphenatable words come back whole.
  std::vector<std::string> syllabify(std::string_view word) const;

 private:
  std::unordered_map<std::u32string, std::vector<std::uint8_t>> patterns_;
  std::unordered_map<std::u32string, std::vector<std::size_t>> exceptions_;
  std::size_t max_pattern_len_ = 0;
  std::size_t left_min_ = 2;
  std::size_t right_min_ = 3;
};

}  // namespace swlm
