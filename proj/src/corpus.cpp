#include "swlm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "swlm/error.hpp"
#include "swlm/utf8.hpp"

namespace swlm {

std::string_view split_name(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Valid:
      return "valid";
    case Split::Test:
      return "test";
  }
  return "?";
}

Vocabulary Vocabulary::build(std::span<const std::string> tokens, std::size_t min_count) {
  if (tokens.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : tokens) ++counts[t];

  std::size_t unk_count = counts[std::string(kUnkToken)];
  counts[std::string(kEosToken)];  // ensure present
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, c] : counts) {
    if (w == kUnkToken) continue;
    if (w == kEosToken || c >= min_count) {
      kept.emplace_back(w, c);
    } else {
      unk_count += c;
    }
  }
  kept.emplace_back(std::string(kUnkToken), unk_count);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  Vocabulary v;
  for (auto& [w, c] : kept) {
    v.words_.push_back(w);
    v.freqs_.push_back(c);
  }
  v.index();
  return v;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words,
                                  std::vector<std::size_t> frequencies) {
  if (!frequencies.empty() && frequencies.size() != words.size()) {
    throw DataError("vocabulary frequency list does not match word list");
  }
  frequencies.resize(words.size(), 0);
  for (auto special : {kUnkToken, kEosToken}) {
    if (std::find(words.begin(), words.end(), special) == words.end()) {
      words.emplace_back(special);
      frequencies.push_back(0);
    }
  }
  Vocabulary v;
  v.words_ = std::move(words);
  v.freqs_ = std::move(frequencies);
  v.index();
  return v;
}

void Vocabulary::index() {
  ids_.clear();
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!ids_.emplace(words_[i], i).second) {
      throw DataError("duplicate vocabulary entry '" + words_[i] + "'");
    }
  }
  unk_ = ids_.at(std::string(kUnkToken));
  eos_ = ids_.at(std::string(kEosToken));
}

std::optional<std::size_t> Vocabulary::find(std::string_view word) const {
  const auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::index_of(std::string_view word) const {
  return find(word).value_or(unk_);
}

const std::string& Vocabulary::word(std::size_t index) const {
  if (index >= words_.size()) throw DataError("word index out of range");
  return words_[index];
}

std::size_t Vocabulary::frequency(std::size_t index) const { return freqs_.at(index); }

void Vocabulary::write(std::ostream& out) const {
  for (std::size_t i = 0; i < words_.size(); ++i) out << words_[i] << '\t' << freqs_[i] << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::vector<std::string> words;
  std::vector<std::size_t> freqs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    words.push_back(line.substr(0, tab));
    freqs.push_back(tab == std::string::npos ? 0 : std::stoull(line.substr(tab + 1)));
  }
  return from_words(std::move(words), std::move(freqs));
}

std::vector<std::string> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!utf8::is_valid(line)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": invalid UTF-8");
    }
    std::istringstream words(line);
    std::string w;
    bool any = false;
    while (words >> w) {
      tokens.push_back(w);
      any = true;
    }
    if (any) tokens.emplace_back(kEosToken);
  }
  if (tokens.empty()) throw DataError("empty corpus: " + path.string());
  return tokens;
}

std::filesystem::path split_path(const std::filesystem::path& dir, Split split) {
  const std::string name(split_name(split));
  for (const auto& candidate :
       {name + ".txt", "ptb." + name + ".txt", "wiki." + name + ".tokens", name + ".tokens"}) {
    const auto p = dir / candidate;
    if (std::filesystem::exists(p)) return p;
  }
  throw DataError("no " + name + " split found in " + dir.string());
}

std::vector<std::string> load_split(const std::filesystem::path& dir, Split split) {
  return load_corpus(split_path(dir, split));
}

EncodedStream encode(const Vocabulary& vocab, std::span<const std::string> tokens) {
  EncodedStream s;
  s.tokens.reserve(tokens.size());
  for (const auto& t : tokens) s.tokens.push_back(vocab.index_of(t));
  return s;
}

std::vector<std::string> decode(const Vocabulary& vocab, const EncodedStream& stream) {
  std::vector<std::string> out;
  out.reserve(stream.tokens.size());
  for (auto id : stream.tokens) out.push_back(vocab.word(id));
  return out;
}

namespace {

std::vector<BatchView> make_batches(const EncodedStream& stream, std::size_t batch_size,
                                    std::size_t steps, bool keep_tail) {
  if (batch_size == 0) throw UsageError("batch_size must be positive");
  if (steps == 0) throw UsageError("steps must be positive");
  const std::size_t n = stream.tokens.size();
  const std::size_t lane_len = n > 0 ? (n - 1) / batch_size : 0;
  const std::size_t full = lane_len / steps;
  const std::size_t tail = keep_tail ? lane_len % steps : 0;
  if (full == 0 && tail == 0) {
    throw DataError("stream of " + std::to_string(n) + " tokens is too short for batch_size " +
                    std::to_string(batch_size) + " and " + std::to_string(steps) + " steps");
  }
  std::vector<BatchView> out;
  const auto window = [&](std::size_t start, std::size_t len) {
    BatchView v;
    v.batch_size = batch_size;
    v.steps = len;
    v.inputs.resize(batch_size * len);
    v.targets.resize(batch_size * len);
    for (std::size_t b = 0; b < batch_size; ++b) {
      const std::size_t base = b * lane_len + start;
      for (std::size_t t = 0; t < len; ++t) {
        v.inputs[b * len + t] = stream.tokens[base + t];
        v.targets[b * len + t] = stream.tokens[base + t + 1];
      }
    }
    out.push_back(std::move(v));
  };
  for (std::size_t i = 0; i < full; ++i) window(i * steps, steps);
  if (tail > 0) window(full * steps, tail);
  return out;
}

}  // namespace

std::vector<BatchView> batchify(const EncodedStream& stream, std::size_t batch_size,
                                std::size_t steps) {
  return make_batches(stream, batch_size, steps, false);
}

std::vector<BatchView> eval_batches(const EncodedStream& stream, std::size_t batch_size,
                                    std::size_t steps) {
  return make_batches(stream, batch_size, steps, true);
}

CorpusStats corpus_stats(const EncodedStream& stream, const Vocabulary& vocab) {
  CorpusStats s;
  s.tokens = stream.tokens.size();
  std::vector<bool> seen(vocab.size(), false);
  for (auto id : stream.tokens) {
    if (id >= seen.size()) throw DataError("token index outside vocabulary");
    if (!seen[id]) {
      seen[id] = true;
      ++s.types;
    }
  }
  s.ttr = s.tokens == 0 ? 0.0 : static_cast<double>(s.types) / static_cast<double>(s.tokens);
  return s;
}

double unigram_perplexity(const EncodedStream& train, const EncodedStream& eval,
                          std::size_t vocab_size) {
  if (eval.tokens.empty()) throw DataError("unigram perplexity of an empty stream");
  std::vector<double> counts(vocab_size, 1.0);
  for (auto id : train.tokens) counts.at(id) += 1.0;
  const double total = static_cast<double>(train.tokens.size() + vocab_size);
  double nll = 0.0;
  for (auto id : eval.tokens) nll -= std::log(counts.at(id) / total);
  return std::exp(nll / static_cast<double>(eval.tokens.size()));
}

}  // namespace swlm
