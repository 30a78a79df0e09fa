// Generates the bundled synthetic grammar corpus: sentences over regular
// noun/verb/adjective stems with number agreement, tense and -ing/-ly/-er
// derivations, so word types share morphs. Output is PTB-style: lowercase,
// whitespace tokenized, one sentence per line.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "swlm/random.hpp"

namespace {

const std::vector<std::string> kNouns = {
    "dog",    "cat",     "bird",    "tree",    "house",  "river",   "stone",  "farmer",
    "teacher", "girl",   "boy",     "king",    "queen",  "doctor",  "student", "flower",
    "garden", "window",  "door",    "table",   "chair",  "road",    "market", "city",
    "village", "horse",  "cow",     "lamb",    "friend", "worker",  "painter", "singer",
    "player", "hunter",  "baker",   "builder", "writer", "reader",  "driver", "keeper"};

const std::vector<std::string> kVerbs = {
    "walk",  "talk",  "jump",  "play",   "work",  "call",   "help",   "open",  "watch",
    "clean", "cook",  "paint", "push",   "pull",  "kick",   "climb",  "visit", "follow",
    "answer", "want", "need",  "start",  "finish", "wash",  "fill",   "ask",   "show",
    "turn",  "touch", "reach", "mark",   "lift",  "count",  "order",  "pack",  "park",
    "test",  "melt",  "roll",  "greet"};

const std::vector<std::string> kAdjectives = {"small", "old",  "young", "quick", "slow",
                                              "dark",  "bright", "cold", "warm",  "soft",
                                              "hard",  "tall", "short", "kind",  "green"};

const std::vector<std::string> kPrepositions = {"near", "under", "over", "behind", "with"};

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  std::vector<std::string> sentence() {
    std::vector<std::string> out;
    clause(out);
    if (rng_.bernoulli(0.15)) {
      out.push_back("and");
      clause(out);
    }
    return out;
  }

 private:
  // Zipf(1) over list positions.
  const std::string& pick(const std::vector<std::string>& list) {
    double z = 0.0;
    for (std::size_t i = 0; i < list.size(); ++i) z += 1.0 / static_cast<double>(i + 1);
    double u = rng_.uniform() * z;
    for (std::size_t i = 0; i < list.size(); ++i) {
      u -= 1.0 / static_cast<double>(i + 1);
      if (u <= 0.0) return list[i];
    }
    return list.back();
  }

  void noun_phrase(std::vector<std::string>& out, bool plural) {
    static const std::vector<std::string> sg = {"the", "a", "every", "this"};
    static const std::vector<std::string> pl = {"the", "some", "these", "those"};
    out.push_back(plural ? pl[rng_.below(pl.size())] : sg[rng_.below(sg.size())]);
    if (rng_.bernoulli(0.35)) out.push_back(pick(kAdjectives));
    out.push_back(pick(kNouns) + (plural ? "s" : ""));
    if (rng_.bernoulli(0.15)) {
      out.push_back(kPrepositions[rng_.below(kPrepositions.size())]);
      noun_phrase(out, rng_.bernoulli(0.5));
    }
  }

  void clause(std::vector<std::string>& out) {
    const bool plural = rng_.bernoulli(0.4);
    noun_phrase(out, plural);
    const std::string& verb = pick(kVerbs);
    const double form = rng_.uniform();
    if (form < 0.4) {
      out.push_back(plural ? verb : verb + "s");
    } else if (form < 0.7) {
      out.push_back(verb + (verb.back() == 'e' ? "d" : "ed"));
    } else {
      out.push_back(plural ? "are" : "is");
      out.push_back(verb + "ing");
    }
    const double tail = rng_.uniform();
    if (tail < 0.7) {
      noun_phrase(out, rng_.bernoulli(0.4));
    } else if (tail < 0.85) {
      out.push_back(pick(kAdjectives) + "ly");
    }
  }

  swlm::Rng rng_;
};

void write_split(const std::filesystem::path& path, Generator& gen, std::size_t tokens) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::size_t count = 0;
  while (count < tokens) {
    const auto s = gen.sentence();
    for (std::size_t i = 0; i < s.size(); ++i) out << (i ? " " : "") << s[i];
    out << '\n';
    count += s.size() + 1;  // + <eos>
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic grammar corpus"};
  std::string dir = "data/synthetic";
  std::uint64_t seed = 20240601;
  std::size_t train = 50000, valid = 5000, test = 5000;
  app.add_option("--out", dir, "Output directory");
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--train-tokens", train, "Training tokens (including <eos>)");
  app.add_option("--valid-tokens", valid, "Validation tokens");
  app.add_option("--test-tokens", test, "Test tokens");
  CLI11_PARSE(app, argc, argv);
  try {
    std::filesystem::create_directories(dir);
    Generator gen(seed);
    write_split(std::filesystem::path(dir) / "train.txt", gen, train);
    write_split(std::filesystem::path(dir) / "valid.txt", gen, valid);
    write_split(std::filesystem::path(dir) / "test.txt", gen, test);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
