#include "bytener/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace bytener {

namespace {

using nlohmann::json;

class Section {
public:
  Section(const json& j, std::string name, const std::string& where)
      : j_(j), name_(std::move(name)), where_(where) {
    if (!j.is_object())
      throw DataError(where_ + ": section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw DataError(where_ + ": bad value for key '" + name_ + "." + key +
                      "'");
    }
  }

  json sub(const char* key) {
    known_.insert(key);
    return j_.contains(key) ? j_.at(key) : json::object();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!known_.count(it.key()))
        throw DataError(where_ + ": unknown config key '" +
                        (name_.empty() ? it.key() : name_ + "." + it.key()) +
                        "'");
    }
  }

private:
  const json& j_;
  std::string name_;
  const std::string& where_;
  std::set<std::string> known_;
};

}  // namespace

RunConfig parse_run_config(const std::string& json_text,
                           const std::string& where) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(where + ": malformed JSON: " + e.what());
  }
  RunConfig cfg;
  Section top(root, "", where);

  {
    json sj = top.sub("train");
    Section s(sj, "train", where);
    s.get("lr", cfg.train.lr);
    s.get("optimizer", cfg.train.optimizer);
    s.get("batch_size", cfg.train.batch_size);
    s.get("epochs", cfg.train.epochs);
    s.get("dropout", cfg.train.dropout);
    s.get("byte_dropout", cfg.train.byte_dropout);
    s.get("init_range", cfg.train.init_range);
    s.get("seed", cfg.train.seed);
    s.get("grad_clip", cfg.train.grad_clip);
    s.get("freeze_pretrained", cfg.train.freeze_pretrained);
    s.get("threads", cfg.train.threads);
    s.get("keep_best_dev", cfg.train.keep_best_dev);
    s.get("early_stop_f1", cfg.train.early_stop_f1);
    s.finish();
    if (cfg.train.optimizer != "adam")
      throw DataError(where + ": unsupported optimizer '" +
                      cfg.train.optimizer + "'");
  }
  {
    json sj = top.sub("window");
    Section s(sj, "window", where);
    s.get("window_len", cfg.window.window_len);
    s.get("stride", cfg.window.stride);
    s.finish();
    if (cfg.window.stride == 0 || cfg.window.stride > cfg.window.window_len)
      throw DataError(where + ": stride must be in (0, window_len]");
  }
  {
    json sj = top.sub("features");
    Section s(sj, "features", where);
    s.get("use_byte_ids", cfg.features.use_byte_ids);
    s.get("use_bpe_ids", cfg.features.use_bpe_ids);
    s.get("use_pretrained_bpe", cfg.features.use_pretrained_bpe);
    s.get("use_pretrained_word", cfg.features.use_pretrained_word);
    s.get("byte_dropout_rate", cfg.features.byte_dropout_rate);
    s.finish();
    if (!cfg.features.any_enabled())
      throw DataError(where + ": no feature lanes enabled");
  }
  {
    json sj = top.sub("dims");
    Section s(sj, "dims", where);
    s.get("byte_dim", cfg.dims.byte_dim);
    s.get("bpe_dim", cfg.dims.bpe_dim);
    s.get("conv_layers", cfg.dims.conv_layers);
    s.get("conv_filters", cfg.dims.conv_filters);
    s.get("conv_width", cfg.dims.conv_width);
    s.get("conv_stride", cfg.dims.conv_stride);
    s.get("blstm_units", cfg.dims.blstm_units);
    s.get("hidden_units", cfg.dims.hidden_units);
    s.finish();
  }
  {
    json sj = top.sub("skipgram");
    Section s(sj, "skipgram", where);
    s.get("dim", cfg.skipgram.dim);
    s.get("window", cfg.skipgram.window);
    s.get("epochs", cfg.skipgram.epochs);
    s.get("negatives", cfg.skipgram.negatives);
    s.get("initial_lr", cfg.skipgram.initial_lr);
    s.get("seed", cfg.skipgram.seed);
    s.finish();
  }
  {
    json sj = top.sub("paths");
    Section s(sj, "paths", where);
    s.get("train_data", cfg.paths.train_data);
    s.get("dev_data", cfg.paths.dev_data);
    s.get("test_data", cfg.paths.test_data);
    s.get("codebook", cfg.paths.codebook);
    s.get("bpe_embeddings", cfg.paths.bpe_embeddings);
    s.get("word_embeddings", cfg.paths.word_embeddings);
    s.get("checkpoint", cfg.paths.checkpoint);
    s.get("report", cfg.paths.report);
    s.get("predictions", cfg.paths.predictions);
    s.finish();
  }
  top.get("dev_fraction", cfg.dev_fraction);
  top.get("data_format", cfg.data_format);
  top.get("bpe_embedding_dim", cfg.bpe_embedding_dim);
  top.get("word_embedding_dim", cfg.word_embedding_dim);
  top.finish();
  if (cfg.data_format != "jsonl" && cfg.data_format != "iob")
    throw DataError(where + ": data_format must be 'jsonl' or 'iob'");
  if (!(cfg.dev_fraction > 0.0 && cfg.dev_fraction < 1.0))
    throw DataError(where + ": dev_fraction must be in (0, 1)");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["train"] = {{"lr", cfg.train.lr},
                {"optimizer", cfg.train.optimizer},
                {"batch_size", cfg.train.batch_size},
                {"epochs", cfg.train.epochs},
                {"dropout", cfg.train.dropout},
                {"byte_dropout", cfg.train.byte_dropout},
                {"init_range", cfg.train.init_range},
                {"seed", cfg.train.seed},
                {"grad_clip", cfg.train.grad_clip},
                {"freeze_pretrained", cfg.train.freeze_pretrained},
                {"threads", cfg.train.threads},
                {"keep_best_dev", cfg.train.keep_best_dev},
                {"early_stop_f1", cfg.train.early_stop_f1}};
  j["window"] = {{"window_len", cfg.window.window_len},
                 {"stride", cfg.window.stride}};
  j["features"] = {{"use_byte_ids", cfg.features.use_byte_ids},
                   {"use_bpe_ids", cfg.features.use_bpe_ids},
                   {"use_pretrained_bpe", cfg.features.use_pretrained_bpe},
                   {"use_pretrained_word", cfg.features.use_pretrained_word},
                   {"byte_dropout_rate", cfg.features.byte_dropout_rate}};
  j["dims"] = {{"byte_dim", cfg.dims.byte_dim},
               {"bpe_dim", cfg.dims.bpe_dim},
               {"conv_layers", cfg.dims.conv_layers},
               {"conv_filters", cfg.dims.conv_filters},
               {"conv_width", cfg.dims.conv_width},
               {"conv_stride", cfg.dims.conv_stride},
               {"blstm_units", cfg.dims.blstm_units},
               {"hidden_units", cfg.dims.hidden_units}};
  j["skipgram"] = {{"dim", cfg.skipgram.dim},
                   {"window", cfg.skipgram.window},
                   {"epochs", cfg.skipgram.epochs},
                   {"negatives", cfg.skipgram.negatives},
                   {"initial_lr", cfg.skipgram.initial_lr},
                   {"seed", cfg.skipgram.seed}};
  j["paths"] = {{"train_data", cfg.paths.train_data},
                {"dev_data", cfg.paths.dev_data},
                {"test_data", cfg.paths.test_data},
                {"codebook", cfg.paths.codebook},
                {"bpe_embeddings", cfg.paths.bpe_embeddings},
                {"word_embeddings", cfg.paths.word_embeddings},
                {"checkpoint", cfg.paths.checkpoint},
                {"report", cfg.paths.report},
                {"predictions", cfg.paths.predictions}};
  j["dev_fraction"] = cfg.dev_fraction;
  j["data_format"] = cfg.data_format;
  j["bpe_embedding_dim"] = cfg.bpe_embedding_dim;
  j["word_embedding_dim"] = cfg.word_embedding_dim;
  return j.dump(2);
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << run_config_to_json(cfg) << "\n";
  if (!out) throw DataError("write failed for " + path);
}

}  // namespace bytener
