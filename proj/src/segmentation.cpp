#include "swlm/segmentation.hpp"

#include <algorithm>

#include "swlm/error.hpp"
#include "swlm/utf8.hpp"

namespace swlm {

std::string_view unit_kind_name(UnitKind kind) {
  switch (kind) {
    case UnitKind::Char:
      return "char";
    case UnitKind::Syllable:
      return "syl";
    case UnitKind::Morph:
      return "morph";
  }
  return "?";
}

UnitKind parse_unit_kind(std::string_view name) {
  if (name == "char") return UnitKind::Char;
  if (name == "syl" || name == "syllable") return UnitKind::Syllable;
  if (name == "morph") return UnitKind::Morph;
  throw UsageError("unknown unit kind '" + std::string(name) + "'");
}

SubwordVocabulary::SubwordVocabulary(UnitKind kind, std::vector<std::string> units)
    : kind_(kind), units_(std::move(units)) {
  for (std::size_t i = 0; i < units_.size(); ++i) {
    if (!ids_.emplace(units_[i], i).second) {
      throw DataError("duplicate subword unit '" + units_[i] + "'");
    }
  }
  const auto need = [&](std::string_view u) {
    const auto id = find(u);
    if (!id) throw DataError("subword vocabulary lacks '" + std::string(u) + "'");
    return *id;
  };
  pad_ = need(kPadUnit);
  unk_ = need(kUnkToken);
  eos_ = need(kEosToken);
  if (kind_ == UnitKind::Char) {
    bow_ = need(kBowUnit);
    eow_ = need(kEowUnit);
  }
}

std::optional<std::size_t> SubwordVocabulary::find(std::string_view unit) const {
  const auto it = ids_.find(std::string(unit));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t SubwordVocabulary::bow_index() const {
  if (kind_ != UnitKind::Char) throw UsageError("only character vocabularies have <bow>");
  return bow_;
}

std::size_t SubwordVocabulary::eow_index() const {
  if (kind_ != UnitKind::Char) throw UsageError("only character vocabularies have <eow>");
  return eow_;
}

std::size_t Segmentation::max_units() const {
  std::size_t m = 0;
  for (const auto& u : units) m = std::max(m, u.size());
  return m;
}

std::vector<std::string> CharSegmenter::split(std::string_view word) const {
  return utf8::split_chars(word);
}

std::vector<std::string> Syllabifier::split(std::string_view word) const {
  return patterns_.syllabify(word);
}

std::vector<std::string> MorphSegmenter::split(std::string_view word) const {
  return model_.segment(word).morphs;
}

TableSegmenter::TableSegmenter(UnitKind kind,
                               std::map<std::string, std::vector<std::string>> table,
                               std::shared_ptr<const Segmenter> fallback)
    : kind_(kind), table_(std::move(table)), fallback_(std::move(fallback)) {}

std::vector<std::string> TableSegmenter::split(std::string_view word) const {
  if (const auto it = table_.find(std::string(word)); it != table_.end()) return it->second;
  if (fallback_) return fallback_->split(word);
  return {std::string(word)};
}

namespace {

bool is_special_word(std::string_view w) { return w == kUnkToken || w == kEosToken; }

std::vector<std::string> checked_split(const Segmenter& segmenter, std::string_view word) {
  auto pieces = segmenter.split(word);
  if (pieces.empty()) throw DataError("segmenter produced no units for '" + std::string(word) + "'");
  std::string joined;
  for (const auto& p : pieces) joined += p;
  if (joined != word) {
    throw DataError("segmentation of '" + std::string(word) + "' does not concatenate back");
  }
  return pieces;
}

}  // namespace

SubwordInventory build_subword_vocab(const Vocabulary& vocab, const Segmenter& segmenter) {
  const UnitKind kind = segmenter.kind();
  std::vector<std::vector<std::string>> pieces(vocab.size());
  std::unordered_map<std::string, std::size_t> freq;
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    const auto& word = vocab.word(w);
    if (is_special_word(word)) continue;
    if (word.empty()) throw DataError("empty word in vocabulary");
    pieces[w] = checked_split(segmenter, word);
    const std::size_t weight = std::max<std::size_t>(vocab.frequency(w), 1);
    for (const auto& p : pieces[w]) freq[p] += weight;
  }

  std::vector<std::string> units{std::string(kPadUnit)};
  if (kind == UnitKind::Char) {
    units.emplace_back(kBowUnit);
    units.emplace_back(kEowUnit);
  }
  units.emplace_back(kUnkToken);
  units.emplace_back(kEosToken);
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [u, c] : freq) {
    if (std::find(units.begin(), units.end(), u) == units.end()) ranked.emplace_back(u, c);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (auto& [u, c] : ranked) units.push_back(u);

  SubwordInventory inv{SubwordVocabulary(kind, std::move(units)), {}};
  inv.segmentation.units.resize(vocab.size());
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    const auto& word = vocab.word(w);
    if (word == kUnkToken) {
      inv.segmentation.units[w] = {inv.vocab.unk_index()};
    } else if (word == kEosToken) {
      inv.segmentation.units[w] = {inv.vocab.eos_index()};
    } else {
      for (const auto& p : pieces[w]) inv.segmentation.units[w].push_back(*inv.vocab.find(p));
    }
  }
  return inv;
}

std::optional<std::vector<std::size_t>> map_units(const SubwordVocabulary& subwords,
                                                  const Segmenter& segmenter,
                                                  std::string_view word) {
  if (word == kUnkToken) return std::vector<std::size_t>{subwords.unk_index()};
  if (word == kEosToken) return std::vector<std::size_t>{subwords.eos_index()};
  if (word.empty()) return std::nullopt;
  std::vector<std::size_t> out;
  for (const auto& p : checked_split(segmenter, word)) {
    const auto id = subwords.find(p);
    if (!id || p == kPadUnit || p == kBowUnit || p == kEowUnit) return std::nullopt;
    out.push_back(*id);
  }
  return out;
}

std::vector<std::size_t> char_sequence(std::span<const std::size_t> chars,
                                       const SubwordVocabulary& subwords, std::size_t max_len) {
  if (max_len < 3) throw UsageError("char sequence length must be at least 3");
  std::vector<std::size_t> out;
  out.reserve(max_len);
  out.push_back(subwords.bow_index());
  const std::size_t keep = std::min(chars.size(), max_len - 2);
  out.insert(out.end(), chars.begin(), chars.begin() + static_cast<std::ptrdiff_t>(keep));
  out.push_back(subwords.eow_index());
  out.resize(max_len, subwords.pad_index());
  return out;
}

std::vector<std::size_t> char_sequence(std::string_view word, const SubwordVocabulary& subwords,
                                       std::size_t max_len) {
  std::vector<std::size_t> ids;
  for (const auto& c : utf8::split_chars(word)) {
    const auto id = subwords.find(c);
    ids.push_back(id ? *id : subwords.unk_index());
  }
  return char_sequence(ids, subwords, max_len);
}

std::map<std::string, std::size_t> word_frequency_table(const Vocabulary& vocab) {
  std::map<std::string, std::size_t> out;
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    const auto& word = vocab.word(w);
    if (is_special_word(word)) continue;
    out[word] = std::max<std::size_t>(vocab.frequency(w), 1);
  }
  return out;
}

}  // namespace swlm
