#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace swlm {

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEosToken = "<eos>";

enum class Split { Train, Valid, Test };

std::string_view split_name(Split split);

// Bidirectional word <-> index map over a dense index range. `<unk>` and
// `<eos>` are always present. Construction order is descending training
// frequency with lexicographic tie-break.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary build(std::span<const std::string> tokens, std::size_t min_count = 1);

  // Keeps the given order. Adds missing `<unk>`/`<eos>` at the end.
  static Vocabulary from_words(std::vector<std::string> words,
                               std::vector<std::size_t> frequencies = {});

  std::size_t size() const { return words_.size(); }
  std::optional<std::size_t> find(std::string_view word) const;
  // Out-of-vocabulary words map to unk().
  std::size_t index_of(std::string_view word) const;
  const std::string& word(std::size_t index) const;
  const std::vector<std::string>& words() const { return words_; }
  std::size_t frequency(std::size_t index) const;
  const std::vector<std::size_t>& frequencies() const { return freqs_; }

  std::size_t unk() const { return unk_; }
  std::size_t eos() const { return eos_; }

  // One `token<TAB>frequency` line per entry, in index order.
  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);

 private:
  void index();

  std::vector<std::string> words_;
  std::vector<std::size_t> freqs_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::size_t unk_ = 0;
  std::size_t eos_ = 0;
};

struct EncodedStream {
  std::vector<std::size_t> tokens;
  std::size_t token_count() const { return tokens.size(); }
};

// Whitespace-tokenized text, one sentence per line; `<eos>` appended per
// non-empty line. Throws DataError for missing, empty or non-UTF-8 files.
std::vector<std::string> load_corpus(const std::filesystem::path& path);

// Locates the split file inside a data directory. Accepted names:
// `train.txt`, `ptb.train.txt`, `wiki.train.tokens` (likewise valid/test).
std::filesystem::path split_path(const std::filesystem::path& dir, Split split);
std::vector<std::string> load_split(const std::filesystem::path& dir, Split split);

EncodedStream encode(const Vocabulary& vocab, std::span<const std::string> tokens);
std::vector<std::string> decode(const Vocabulary& vocab, const EncodedStream& stream);

// One truncated-BPTT window. Inputs and targets are row-major
// [batch_size x steps]; targets are the inputs shifted one position ahead.
struct BatchView {
  std::size_t batch_size = 0;
  std::size_t steps = 0;
  std::vector<std::size_t> inputs;
  std::vector<std::size_t> targets;

  std::size_t input(std::size_t lane, std::size_t t) const { return inputs[lane * steps + t]; }
  std::size_t target(std::size_t lane, std::size_t t) const { return targets[lane * steps + t]; }
};

// Contiguous LM batching. The stream is cut into batch_size lanes of
// (n-1)/batch_size input/target pairs each; every window holds `steps`
// consecutive pairs per lane, and the trailing partial window is dropped.
std::vector<BatchView> batchify(const EncodedStream& stream, std::size_t batch_size,
                                std::size_t steps);

// Same lane layout, but keeps the final shorter window so every lane token
// is scored. Used for evaluation.
std::vector<BatchView> eval_batches(const EncodedStream& stream, std::size_t batch_size,
                                    std::size_t steps);

struct CorpusStats {
  std::size_t tokens = 0;
  std::size_t types = 0;
  double ttr = 0.0;
};

// `types` counts the distinct word indices that occur in the stream.
CorpusStats corpus_stats(const EncodedStream& stream, const Vocabulary& vocab);

// Maximum-likelihood unigram model with add-one smoothing over the
// vocabulary, estimated on `train` and scored on `eval`.
double unigram_perplexity(const EncodedStream& train, const EncodedStream& eval,
                          std::size_t vocab_size);

}  // namespace swlm
