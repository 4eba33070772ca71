#include "bytener/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace bytener {

namespace {

using nlohmann::json;

constexpr int kVersion = 1;

json dims_to_json(const NetworkDims& d) {
  return {{"byte_dim", d.byte_dim},       {"bpe_dim", d.bpe_dim},
          {"conv_layers", d.conv_layers}, {"conv_filters", d.conv_filters},
          {"conv_width", d.conv_width},   {"conv_stride", d.conv_stride},
          {"blstm_units", d.blstm_units}, {"hidden_units", d.hidden_units}};
}

NetworkDims dims_from_json(const json& j) {
  NetworkDims d;
  d.byte_dim = j.at("byte_dim").get<size_t>();
  d.bpe_dim = j.at("bpe_dim").get<size_t>();
  d.conv_layers = j.at("conv_layers").get<size_t>();
  d.conv_filters = j.at("conv_filters").get<size_t>();
  d.conv_width = j.at("conv_width").get<size_t>();
  d.conv_stride = j.at("conv_stride").get<size_t>();
  d.blstm_units = j.at("blstm_units").get<size_t>();
  d.hidden_units = j.at("hidden_units").get<size_t>();
  return d;
}

json features_to_json(const FeatureConfig& f) {
  return {{"use_byte_ids", f.use_byte_ids},
          {"use_bpe_ids", f.use_bpe_ids},
          {"use_pretrained_bpe", f.use_pretrained_bpe},
          {"use_pretrained_word", f.use_pretrained_word},
          {"byte_dropout_rate", f.byte_dropout_rate}};
}

FeatureConfig features_from_json(const json& j) {
  FeatureConfig f;
  f.use_byte_ids = j.at("use_byte_ids").get<bool>();
  f.use_bpe_ids = j.at("use_bpe_ids").get<bool>();
  f.use_pretrained_bpe = j.at("use_pretrained_bpe").get<bool>();
  f.use_pretrained_word = j.at("use_pretrained_word").get<bool>();
  f.byte_dropout_rate = j.at("byte_dropout_rate").get<double>();
  return f;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const ModelParams<float>& params = ckpt.params;
  if (params.features.needs_codebook() && !ckpt.codebook)
    throw std::invalid_argument("checkpoint needs the codebook");
  if (params.features.use_pretrained_word && !ckpt.word_vocab)
    throw std::invalid_argument("checkpoint needs the word vocabulary");

  json header;
  header["format"] = "bytener-checkpoint";
  header["version"] = kVersion;
  header["dims"] = dims_to_json(params.dims);
  header["features"] = features_to_json(params.features);
  header["labels"] = params.labels;
  header["window_len"] = params.window_len;
  header["window_stride"] = params.window_stride;
  header["bpe_vocab_size"] = params.bpe_vocab_size;
  header["word_vocab_size"] = params.word_vocab_size;
  header["pre_bpe_dim"] = params.pre_bpe_dim;
  header["pre_word_dim"] = params.pre_word_dim;

  if (ckpt.codebook) {
    json merges = json::array();
    for (const auto& [a, b] : ckpt.codebook->merges())
      merges.push_back(a.display() + " " + b.display());
    json vocab = json::array();
    for (const auto& sym : ckpt.codebook->vocab()) vocab.push_back(sym.display());
    header["bpe_merges"] = std::move(merges);
    header["bpe_vocab"] = std::move(vocab);
  }
  if (ckpt.word_vocab) header["word_tokens"] = ckpt.word_vocab->tokens();

  header["tensors"] = json::array();
  params.for_each_param([&](const std::string& name, const float*, size_t n) {
    header["tensors"].push_back({{"name", name}, {"size", n}});
  });

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << header.dump() << "\n";
  params.for_each_param([&](const std::string&, const float* d, size_t n) {
    out.write(reinterpret_cast<const char*>(d),
              static_cast<std::streamsize>(n * sizeof(float)));
  });
  if (!out) throw DataError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty checkpoint");

  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(path + ": bad checkpoint header: " + e.what());
  }
  if (header.value("format", "") != "bytener-checkpoint")
    throw DataError(path + ": not a checkpoint file");
  if (header.value("version", -1) != kVersion)
    throw DataError(path + ": unsupported checkpoint version");

  Checkpoint ckpt;
  ModelParams<float>& params = ckpt.params;
  params.dims = dims_from_json(header.at("dims"));
  params.features = features_from_json(header.at("features"));
  params.labels = header.at("labels").get<std::vector<std::string>>();
  params.window_len = header.at("window_len").get<size_t>();
  params.window_stride = header.at("window_stride").get<size_t>();
  params.bpe_vocab_size = header.at("bpe_vocab_size").get<size_t>();
  params.word_vocab_size = header.at("word_vocab_size").get<size_t>();
  params.pre_bpe_dim = header.at("pre_bpe_dim").get<size_t>();
  params.pre_word_dim = header.at("pre_word_dim").get<size_t>();
  allocate_tensors(params);

  if (params.features.needs_codebook()) {
    if (!header.contains("bpe_merges") || !header.contains("bpe_vocab"))
      throw DataError(path + ": checkpoint missing BPE codebook");
    std::vector<std::pair<BpeSymbol, BpeSymbol>> merges;
    for (const auto& m : header.at("bpe_merges")) {
      const std::string s = m.get<std::string>();
      const auto space = s.find(' ');
      if (space == std::string::npos)
        throw DataError(path + ": bad stored merge '" + s + "'");
      merges.emplace_back(BpeSymbol::parse(s.substr(0, space)),
                          BpeSymbol::parse(s.substr(space + 1)));
    }
    ckpt.codebook = Codebook::from_parts(
        std::move(merges),
        header.at("bpe_vocab").get<std::vector<std::string>>());
    if (ckpt.codebook->vocab_size() != params.bpe_vocab_size)
      throw DataError(path + ": stored codebook size mismatch");
  }
  if (params.features.use_pretrained_word) {
    if (!header.contains("word_tokens"))
      throw DataError(path + ": checkpoint missing word vocabulary");
    ckpt.word_vocab =
        WordVocab(header.at("word_tokens").get<std::vector<std::string>>());
    if (ckpt.word_vocab->size() != params.word_vocab_size)
      throw DataError(path + ": stored word vocab size mismatch");
  }

  size_t idx = 0;
  const auto& manifest = header.at("tensors");
  params.for_each_param([&](const std::string& name, float* d, size_t n) {
    if (idx >= manifest.size())
      throw DataError(path + ": tensor manifest too short");
    const auto& entry = manifest[idx++];
    if (entry.at("name").get<std::string>() != name ||
        entry.at("size").get<size_t>() != n)
      throw DataError(path + ": tensor mismatch for " + name);
    in.read(reinterpret_cast<char*>(d),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw DataError(path + ": truncated tensor data at " + name);
  });
  if (idx != manifest.size())
    throw DataError(path + ": tensor manifest too long");
  return ckpt;
}

}  // namespace bytener
