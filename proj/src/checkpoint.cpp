#include "swlm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "swlm/error.hpp"

namespace swlm {

namespace {

constexpr const char* kMagic = "swlm-checkpoint";
constexpr int kFormatVersion = 1;

using json = nlohmann::json;

void write_floats(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float v : values) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      char b[4];
      for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
      out.write(b, 4);
    }
  }
}

void read_floats(std::istream& in, std::span<float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (auto& v : values) {
      unsigned char b[4];
      in.read(reinterpret_cast<char*>(b), 4);
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[i]) << (8 * i);
      v = std::bit_cast<float>(bits);
    }
  }
  if (!in) throw DataError("checkpoint truncated while reading parameters");
}

}  // namespace

ModelShape model_shape(const Vocabulary& vocab, const SubwordVocabulary* subwords) {
  ModelShape shape;
  shape.vocab_size = vocab.size();
  if (subwords) {
    shape.subword_size = subwords->size();
    shape.pad = subwords->pad_index();
    if (subwords->kind() == UnitKind::Char) {
      shape.bow = subwords->bow_index();
      shape.eow = subwords->eow_index();
    }
  }
  return shape;
}

LanguageModel<float> build_model(const ModelBundle& bundle) {
  const ModelConfig mc = ModelConfig::from_config(bundle.config);
  const SubwordVocabulary* sw = bundle.subwords ? &*bundle.subwords : nullptr;
  if (mc.kind() != EmbedderKind::Word && !sw) {
    throw DataError("subword model without a subword vocabulary");
  }
  return LanguageModel<float>(mc, model_shape(bundle.vocab, sw), bundle.segmentation);
}

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle,
                     const LanguageModel<float>& model) {
  json h;
  h["format_version"] = kFormatVersion;
  h["config"] = bundle.config.entries();
  h["vocab"]["words"] = bundle.vocab.words();
  h["vocab"]["frequencies"] = bundle.vocab.frequencies();
  if (bundle.subwords) {
    h["subwords"]["kind"] = std::string(unit_kind_name(bundle.subwords->kind()));
    h["subwords"]["units"] = bundle.subwords->units();
  }
  h["segmentation"] = bundle.segmentation.units;
  json slots = json::array();
  for (const auto& s : model.params().slots()) {
    slots.push_back({{"name", s.name},
                     {"rows", s.storage->rows},
                     {"cols", s.storage->cols},
                     {"storage", s.storage->id}});
  }
  h["slots"] = slots;
  json storages = json::array();
  for (const auto* s : model.params().storages()) {
    storages.push_back({{"id", s->id}, {"rows", s->rows}, {"cols", s->cols}});
  }
  h["storages"] = storages;

  const std::string header = h.dump();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
    out << kMagic << "\n" << header.size() << "\n" << header;
    for (const auto* s : model.params().storages()) write_floats(out, s->value.values());
    if (!out) throw DataError("failed writing checkpoint '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::string magic, size_line;
  std::getline(in, magic);
  if (magic != kMagic) throw DataError("'" + path.string() + "' is not a checkpoint");
  std::getline(in, size_line);
  std::size_t header_size = 0;
  try {
    header_size = std::stoull(size_line);
  } catch (const std::exception&) {
    throw DataError("checkpoint header length is malformed");
  }
  std::string header(header_size, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw DataError("checkpoint header truncated");

  json h;
  try {
    h = json::parse(header);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  try {
    if (h.at("format_version").get<int>() != kFormatVersion) {
      throw DataError("unsupported checkpoint format version");
    }
    ModelBundle bundle;
    for (const auto& [k, v] : h.at("config").items()) bundle.config.set(k, v.get<std::string>());
    bundle.vocab = Vocabulary::from_words(h.at("vocab").at("words").get<std::vector<std::string>>(),
                                          h.at("vocab").at("frequencies").get<std::vector<std::size_t>>());
    if (h.contains("subwords")) {
      bundle.subwords = SubwordVocabulary(
          parse_unit_kind(h["subwords"].at("kind").get<std::string>()),
          h["subwords"].at("units").get<std::vector<std::string>>());
    }
    bundle.segmentation.units = h.at("segmentation").get<std::vector<std::vector<std::size_t>>>();

    LanguageModel<float> model = build_model(bundle);
    auto& reg = model.params();

    // Slot shapes and the sharing pattern must match what the config rebuilds.
    const auto& slots = h.at("slots");
    if (slots.size() != reg.slots().size()) throw DataError("checkpoint slot count mismatch");
    std::map<std::size_t, std::size_t> file_to_model;
    for (const auto& s : slots) {
      const auto name = s.at("name").get<std::string>();
      if (!reg.contains(name)) throw DataError("checkpoint slot '" + name + "' unknown to model");
      const auto& st = reg.at(name);
      if (st.rows != s.at("rows").get<std::size_t>() || st.cols != s.at("cols").get<std::size_t>()) {
        throw DataError("checkpoint slot '" + name + "' has a different shape");
      }
      const auto fid = s.at("storage").get<std::size_t>();
      auto [it, inserted] = file_to_model.emplace(fid, st.id);
      if (!inserted && it->second != st.id) {
        throw DataError("checkpoint tying map disagrees with the model at '" + name + "'");
      }
    }
    if (file_to_model.size() != reg.storages().size()) {
      throw DataError("checkpoint tying map disagrees with the model");
    }
    std::map<std::size_t, ParamStorage<float>*> by_id;
    for (auto* s : reg.storages()) by_id[s->id] = s;
    for (const auto& s : h.at("storages")) {
      auto* st = by_id.at(file_to_model.at(s.at("id").get<std::size_t>()));
      read_floats(in, st->value.values());
    }
    if (in.peek() != std::char_traits<char>::eof()) {
      throw DataError("checkpoint has trailing bytes");
    }
    reg.bump_version();
    return {std::move(bundle), std::move(model)};
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header is incomplete: ") + e.what());
  }
}

}  // namespace swlm
