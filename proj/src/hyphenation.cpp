#include "swlm/hyphenation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "swlm/error.hpp"
#include "swlm/utf8.hpp"

namespace swlm {

namespace {

bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

std::vector<std::string> whitespace_split(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// Contents of `\name{ ... }` groups, comments already stripped.
std::vector<std::string> tex_group(const std::string& text, std::string_view name) {
  std::vector<std::string> out;
  const std::string key = "\\" + std::string(name);
  for (std::size_t pos = text.find(key); pos != std::string::npos;
       pos = text.find(key, pos + key.size())) {
    const auto open = text.find('{', pos);
    const auto close = text.find('}', open);
    if (open == std::string::npos || close == std::string::npos) {
      throw DataError("unterminated \\" + std::string(name) + " group in pattern file");
    }
    for (auto& tok : whitespace_split(std::string_view(text).substr(open + 1, close - open - 1))) {
      out.push_back(std::move(tok));
    }
  }
  return out;
}

}  // namespace

HyphenationPatterns HyphenationPatterns::parse(std::string_view text) {
  HyphenationPatterns hp;
  if (!utf8::is_valid(text)) throw DataError("pattern file is not valid UTF-8");

  if (text.find("\\patterns") != std::string_view::npos) {
    std::string stripped;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      if (const auto pct = line.find('%'); pct != std::string::npos) line.erase(pct);
      stripped += line + '\n';
    }
    for (const auto& p : tex_group(stripped, "patterns")) hp.add_pattern(p);
    for (const auto& e : tex_group(stripped, "hyphenation")) hp.add_exception(e);
    return hp;
  }

  std::istringstream in{std::string(text)};
  std::string line;
  bool first = true;
  std::size_t left = hp.left_min_, right = hp.right_min_;
  while (std::getline(in, line)) {
    const auto fields = whitespace_split(line);
    if (fields.empty() || fields[0][0] == '%' || fields[0][0] == '#') {
      first = false;
      continue;
    }
    const std::string& head = fields[0];
    const bool keyword = std::all_of(head.begin(), head.end(), [](unsigned char c) {
      return std::isupper(c) || std::isdigit(c) || c == '-' || c == '_';
    }) && std::any_of(head.begin(), head.end(), [](unsigned char c) { return std::isupper(c); });
    if (first && keyword) {  // charset declaration
      first = false;
      continue;
    }
    first = false;
    if (keyword) {
      if (fields.size() >= 2 && head == "LEFTHYPHENMIN") left = std::stoul(fields[1]);
      if (fields.size() >= 2 && head == "RIGHTHYPHENMIN") right = std::stoul(fields[1]);
      continue;
    }
    // Non-standard hunspell replacement patterns are not supported.
    if (head.find('/') != std::string::npos) continue;
    hp.add_pattern(head);
  }
  hp.set_minima(left, right);
  return hp;
}

HyphenationPatterns HyphenationPatterns::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open pattern file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void HyphenationPatterns::set_minima(std::size_t left, std::size_t right) {
  if (left < 1 || right < 1) throw DataError("hyphenation minima must be at least 1");
  left_min_ = left;
  right_min_ = right;
}

void HyphenationPatterns::add_pattern(std::string_view pattern) {
  const std::u32string cps = utf8::decode(pattern);
  std::u32string letters;
  std::vector<std::uint8_t> weights(1, 0);
  for (char32_t c : cps) {
    if (is_digit(c)) {
      weights.back() = static_cast<std::uint8_t>(c - U'0');
    } else {
      letters.push_back(c);
      weights.push_back(0);
    }
  }
  if (letters.empty()) throw DataError("pattern without letters: " + std::string(pattern));
  max_pattern_len_ = std::max(max_pattern_len_, letters.size());
  patterns_[utf8::ascii_lower(letters)] = std::move(weights);
}

void HyphenationPatterns::add_exception(std::string_view hyphenated) {
  std::u32string letters;
  std::vector<std::size_t> breaks;
  for (char32_t c : utf8::decode(hyphenated)) {
    if (c == U'-') {
      breaks.push_back(letters.size());
    } else {
      letters.push_back(c);
    }
  }
  exceptions_[utf8::ascii_lower(letters)] = std::move(breaks);
}

std::vector<std::size_t> HyphenationPatterns::break_points(std::string_view word) const {
  const std::u32string lower = utf8::ascii_lower(utf8::decode(word));
  const std::size_t n = lower.size();
  std::vector<std::size_t> out;
  if (n < left_min_ + right_min_) return out;

  const auto allowed = [&](std::size_t k) { return k >= left_min_ && n - k >= right_min_; };

  if (const auto it = exceptions_.find(lower); it != exceptions_.end()) {
    for (auto k : it->second) {
      if (allowed(k)) out.push_back(k);
    }
    return out;
  }

  const std::u32string dotted = U"." + lower + U".";
  // weights[g] is the gap before dotted[g]
  std::vector<std::uint8_t> weights(dotted.size() + 1, 0);
  for (std::size_t i = 0; i < dotted.size(); ++i) {
    const std::size_t max_len = std::min(max_pattern_len_, dotted.size() - i);
    for (std::size_t len = 1; len <= max_len; ++len) {
      const auto it = patterns_.find(dotted.substr(i, len));
      if (it == patterns_.end()) continue;
      const auto& w = it->second;
      for (std::size_t g = 0; g < w.size(); ++g) {
        weights[i + g] = std::max(weights[i + g], w[g]);
      }
    }
  }
  // A break after k word letters sits at gap k+1 of the dotted word.
  for (std::size_t k = 1; k < n; ++k) {
    if (weights[k + 1] % 2 == 1 && allowed(k)) out.push_back(k);
  }
  return out;
}

std::vector<std::string> HyphenationPatterns::syllabify(std::string_view word) const {
  const std::u32string cps = utf8::decode(word);
  std::vector<std::string> pieces;
  std::size_t start = 0;
  for (auto k : break_points(word)) {
    pieces.push_back(utf8::encode(std::u32string_view(cps).substr(start, k - start)));
    start = k;
  }
  pieces.push_back(utf8::encode(std::u32string_view(cps).substr(start)));
  return pieces;
}

}  // namespace swlm
