#include "swlm/morph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "swlm/error.hpp"
#include "swlm/random.hpp"
#include "swlm/utf8.hpp"

namespace swlm {

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

std::size_t cp_length(std::string_view s) { return utf8::decode(s).size(); }

}  // namespace

// Mutating helpers live here so MorphModel's public surface stays read-only.
class MorphTrainer {
 public:
  explicit MorphTrainer(MorphModel& m) : m_(m) {}

  void adjust(const std::string& morph, std::int64_t delta) {
    auto it = m_.counts_.find(morph);
    const double before = it == m_.counts_.end() ? 0.0 : static_cast<double>(it->second);
    const double after = before + static_cast<double>(delta);
    if (after < 0.0) throw std::logic_error("negative morph count for '" + morph + "'");
    m_.n_log_n_ += xlogx(after) - xlogx(before);
    m_.tokens_ += static_cast<double>(delta);
    const std::size_t len = cp_length(morph);
    if (before == 0.0 && after > 0.0) {
      m_.lexicon_chars_ += len + 1;
      m_.counts_[morph] = static_cast<std::size_t>(after);
      m_.max_morph_len_ = std::max(m_.max_morph_len_, len);
    } else if (after == 0.0) {
      m_.lexicon_chars_ -= len + 1;
      m_.counts_.erase(it);
    } else {
      it->second = static_cast<std::size_t>(after);
    }
  }

  std::vector<std::string> resplit(const std::u32string& s, std::int64_t count) {
    const std::string whole = utf8::encode(s);
    adjust(whole, count);
    double best = m_.total_cost();
    adjust(whole, -count);
    std::size_t best_k = 0;
    for (std::size_t k = 1; k < s.size(); ++k) {
      const std::string left = utf8::encode(s.substr(0, k));
      const std::string right = utf8::encode(s.substr(k));
      adjust(left, count);
      adjust(right, count);
      const double cost = m_.total_cost();
      if (cost < best - 1e-9) {
        best = cost;
        best_k = k;
      }
      adjust(left, -count);
      adjust(right, -count);
    }
    if (best_k == 0) {
      adjust(whole, count);
      return {whole};
    }
    auto out = resplit(s.substr(0, best_k), count);
    auto tail = resplit(s.substr(best_k), count);
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
  }

 private:
  MorphModel& m_;
};

MorphModel MorphModel::train(const std::map<std::string, std::size_t>& word_counts,
                             const MorphTrainingOptions& options) {
  if (word_counts.empty()) throw DataError("morph training needs a nonempty word list");
  MorphModel model;
  MorphTrainer trainer(model);

  std::set<char32_t> alphabet;
  std::vector<std::pair<std::u32string, std::int64_t>> words;
  for (const auto& [w, c] : word_counts) {
    if (w.empty() || c == 0) continue;
    auto cps = utf8::decode(w);
    alphabet.insert(cps.begin(), cps.end());
    words.emplace_back(std::move(cps), static_cast<std::int64_t>(c));
  }
  if (words.empty()) throw DataError("morph training needs a nonempty word list");
  model.alphabet_size_ = alphabet.size();

  for (const auto& [w, c] : words) {
    const std::string s = utf8::encode(w);
    trainer.adjust(s, c);
    model.analyses_[s] = {s};
  }
  model.history_.push_back(model.total_cost());

  Rng rng(options.seed);
  std::vector<std::size_t> order(words.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t pass = 0; pass < options.max_passes; ++pass) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    for (auto idx : order) {
      const auto& [w, c] = words[idx];
      const std::string key = utf8::encode(w);
      auto& analysis = model.analyses_[key];
      const double before = model.total_cost();
      const auto old = analysis;
      for (const auto& m : old) trainer.adjust(m, -c);
      auto fresh = trainer.resplit(w, c);
      if (model.total_cost() > before + 1e-9) {
        for (const auto& m : fresh) trainer.adjust(m, -c);
        for (const auto& m : old) trainer.adjust(m, c);
        fresh = old;
      }
      analysis = std::move(fresh);
    }
    const double cost = model.total_cost();
    const double prev = model.history_.back();
    model.history_.push_back(cost);
    if (prev - cost < options.min_improvement) break;
  }
  return model;
}

double MorphModel::corpus_cost() const { return xlogx(tokens_) - n_log_n_; }

double MorphModel::lexicon_chars_cost(std::size_t chars) const {
  return static_cast<double>(chars) * std::log(static_cast<double>(alphabet_size_) + 1.0);
}

double MorphModel::lexicon_cost() const { return lexicon_chars_cost(lexicon_chars_); }

const std::vector<std::string>* MorphModel::training_analysis(const std::string& word) const {
  const auto it = analyses_.find(word);
  return it == analyses_.end() ? nullptr : &it->second;
}

MorphSplit MorphModel::segment(std::string_view word) const {
  if (word.empty()) throw DataError("cannot segment an empty word");
  const std::u32string cps = utf8::decode(word);
  const std::size_t n = cps.size();
  const double log_n = std::log(std::max(tokens_, 1.0));
  // Fallback pieces cost more than any in-lexicon morph.
  const double novel_cost = log_n + lexicon_chars_cost(2) + 1.0;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> best(n + 1, kInf);
  std::vector<std::size_t> back(n + 1, 0);
  std::vector<bool> novel(n + 1, false);
  best[0] = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t lo = j > max_morph_len_ ? j - max_morph_len_ : 0;
    for (std::size_t i = lo; i < j; ++i) {
      if (best[i] == kInf) continue;
      const auto it = counts_.find(utf8::encode(std::u32string_view(cps).substr(i, j - i)));
      if (it == counts_.end()) continue;
      const double cost = best[i] + log_n - std::log(static_cast<double>(it->second));
      if (cost < best[j]) {
        best[j] = cost;
        back[j] = i;
        novel[j] = false;
      }
    }
    const bool char_is_morph = counts_.count(utf8::encode(cps[j - 1])) != 0;
    if (!char_is_morph && best[j - 1] + novel_cost < best[j]) {
      best[j] = best[j - 1] + novel_cost;
      back[j] = j - 1;
      novel[j] = true;
    }
  }

  MorphSplit out;
  std::vector<std::string> rev;
  for (std::size_t j = n; j > 0; j = back[j]) {
    rev.push_back(utf8::encode(std::u32string_view(cps).substr(back[j], j - back[j])));
    out.contains_novel_unit = out.contains_novel_unit || novel[j];
  }
  out.morphs.assign(rev.rbegin(), rev.rend());
  return out;
}

void MorphModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write morph model " + path.string());
  out << "#swlm-morph alphabet=" << alphabet_size_ << '\n';
  std::vector<std::pair<std::string, std::size_t>> entries(counts_.begin(), counts_.end());
  std::sort(entries.begin(), entries.end());
  for (const auto& [m, c] : entries) out << m << '\t' << c << '\n';
}

MorphModel MorphModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open morph model " + path.string());
  MorphModel model;
  MorphTrainer trainer(model);
  std::string line;
  if (!std::getline(in, line) || line.rfind("#swlm-morph alphabet=", 0) != 0) {
    throw DataError(path.string() + ": not a morph model file");
  }
  model.alphabet_size_ = std::stoul(line.substr(line.find('=') + 1));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(path.string() + ": malformed line");
    trainer.adjust(line.substr(0, tab), std::stoll(line.substr(tab + 1)));
  }
  return model;
}

std::map<std::string, std::vector<std::string>> load_segmentation_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open segmentation file " + path.string());
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (!utf8::is_valid(line)) throw DataError(where + ": invalid UTF-8");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(where + ": expected word<TAB>units");
    const std::string word = line.substr(0, tab);
    std::istringstream units(line.substr(tab + 1));
    std::vector<std::string> pieces;
    std::string u, joined;
    while (units >> u) {
      joined += u;
      pieces.push_back(u);
    }
    if (pieces.empty() || joined != word) {
      throw DataError(where + ": units do not concatenate to '" + word + "'");
    }
    out[word] = std::move(pieces);
  }
  return out;
}

void write_segmentation_file(const std::filesystem::path& path,
                             const std::map<std::string, std::vector<std::string>>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write segmentation file " + path.string());
  for (const auto& [word, units] : entries) {
    out << word << '\t';
    for (std::size_t i = 0; i < units.size(); ++i) out << (i ? " " : "") << units[i];
    out << '\n';
  }
}

}  // namespace swlm
