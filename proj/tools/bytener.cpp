// Command-line front end for the byte-level NER pipeline: BPE codebook
// training, skip-gram embedding training, tagger training, prediction, and
// span-level evaluation.

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bytener/checkpoint.hpp"
#include "bytener/config.hpp"
#include "bytener/corpus.hpp"
#include "bytener/eval.hpp"
#include "bytener/network.hpp"

namespace {

using namespace bytener;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Dataset load_dataset(const std::string& path, const std::string& format) {
  if (format == "iob") {
    IobLoadReport report;
    Dataset ds = load_token_iob_dataset(path, &report);
    if (report.repaired_tags)
      std::cerr << "note: repaired " << report.repaired_tags
                << " orphan I- tags in " << path << "\n";
    return ds;
  }
  return load_byte_offset_dataset(path);
}

int cmd_bpe_train(const std::string& corpus_path, size_t merges,
                  const std::string& out_path) {
  WordFreqs freqs = count_word_frequencies(read_file(corpus_path));
  if (freqs.empty()) throw DataError(corpus_path + ": no words in corpus");
  Codebook book = learn_codebook(freqs, merges);
  save_codebook(book, out_path);
  std::cout << "wrote " << book.num_merges() << " merges ("
            << book.vocab_size() << " vocab entries) to " << out_path << "\n";
  return 0;
}

int cmd_embed_train(const std::string& corpus_path,
                    const std::string& codebook_path, const SkipgramConfig& cfg,
                    const std::string& out_path) {
  const Codebook book = load_codebook(codebook_path);
  const std::string corpus = read_file(corpus_path);

  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < corpus.size()) {
    const auto c = static_cast<unsigned char>(corpus[i]);
    if (c == 0x20 || c == 0x09 || c == 0x0A || c == 0x0D) {
      ++i;
      continue;
    }
    size_t start = i;
    while (i < corpus.size()) {
      const auto b = static_cast<unsigned char>(corpus[i]);
      if (b == 0x20 || b == 0x09 || b == 0x0A || b == 0x0D) break;
      ++i;
    }
    for (auto& sub : segment_word(book, {corpus.data() + start, i - start}))
      tokens.push_back(std::move(sub));
  }

  EmbeddingTable table = train_skipgram(tokens, cfg);
  save_word2vec_text(table, out_path);
  std::cout << "wrote " << table.tokens.size() << " " << table.dim
            << "-dim vectors to " << out_path << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  if (cfg.paths.train_data.empty())
    throw DataError("config: paths.train_data is required");
  if (cfg.paths.checkpoint.empty())
    throw DataError("config: paths.checkpoint is required");

  Dataset train_docs = load_dataset(cfg.paths.train_data, cfg.data_format);
  Dataset dev_docs;
  if (!cfg.paths.dev_data.empty()) {
    dev_docs = load_dataset(cfg.paths.dev_data, cfg.data_format);
  } else {
    std::tie(train_docs, dev_docs) =
        split_train_dev(train_docs, cfg.dev_fraction, cfg.train.seed);
  }

  std::set<std::string> labels(train_docs.label_set.begin(),
                               train_docs.label_set.end());
  labels.insert(dev_docs.label_set.begin(), dev_docs.label_set.end());
  const TagScheme scheme({labels.begin(), labels.end()});

  Checkpoint ckpt;
  EmbeddingTable pre_bpe, pre_word;
  if (cfg.features.needs_codebook()) {
    if (cfg.paths.codebook.empty())
      throw DataError("config: BPE features need paths.codebook");
    ckpt.codebook = load_codebook(cfg.paths.codebook);
  }
  if (cfg.features.use_pretrained_bpe) {
    if (cfg.paths.bpe_embeddings.empty())
      throw DataError("config: pretrained BPE lane needs paths.bpe_embeddings");
    pre_bpe = load_word2vec_text(cfg.paths.bpe_embeddings);
    if (pre_bpe.dim != cfg.bpe_embedding_dim)
      std::cerr << "note: BPE embeddings are " << pre_bpe.dim
                << "-dim (config expects " << cfg.bpe_embedding_dim << ")\n";
  }
  if (cfg.features.use_pretrained_word) {
    if (cfg.paths.word_embeddings.empty())
      throw DataError(
          "config: pretrained word lane needs paths.word_embeddings");
    pre_word = load_word2vec_text(cfg.paths.word_embeddings);
    if (pre_word.dim != cfg.word_embedding_dim)
      std::cerr << "note: word embeddings are " << pre_word.dim
                << "-dim (config expects " << cfg.word_embedding_dim << ")\n";
    ckpt.word_vocab = WordVocab(pre_word);
  }

  WindowReport wreport;
  std::vector<Sample> train_windows;
  for (const auto& doc : train_docs.documents) {
    auto windows = extract_training_windows(doc, cfg.window, scheme, &wreport);
    train_windows.insert(train_windows.end(),
                         std::make_move_iterator(windows.begin()),
                         std::make_move_iterator(windows.end()));
  }
  if (wreport.skipped_long_entities)
    std::cerr << "warning: skipped " << wreport.skipped_long_entities
              << " entities longer than the window\n";
  std::cout << "training on " << train_windows.size() << " windows from "
            << train_docs.documents.size() << " documents; dev has "
            << dev_docs.documents.size() << " documents\n";

  ModelInit init;
  init.dims = cfg.dims;
  init.features = cfg.features;
  init.labels = scheme.labels();
  init.window_len = cfg.window.window_len;
  init.window_stride = cfg.window.stride;
  init.codebook = ckpt.codebook_ptr();
  init.word_vocab = ckpt.word_vocab_ptr();
  init.pre_bpe = cfg.features.use_pretrained_bpe ? &pre_bpe : nullptr;
  init.pre_word = cfg.features.use_pretrained_word ? &pre_word : nullptr;
  init.init_range = cfg.train.init_range;
  init.seed = cfg.train.seed;

  TrainConfig tcfg = cfg.train;
  tcfg.byte_dropout = cfg.features.byte_dropout_rate;

  auto result =
      train(train_windows, dev_docs, tcfg, cfg.features, cfg.window,
            init_params<float>(init), ckpt.codebook_ptr(), ckpt.word_vocab_ptr());

  ckpt.params = std::move(result.params);
  save_checkpoint(ckpt, cfg.paths.checkpoint);
  save_run_config(cfg, cfg.paths.checkpoint + ".config.json");

  nlohmann::json log;
  log["epochs"] = nlohmann::json::array();
  for (const auto& e : result.log)
    log["epochs"].push_back({{"epoch", e.epoch},
                             {"mean_loss", e.mean_loss},
                             {"dev_f1", e.dev_f1}});
  log["best_epoch"] = result.best_epoch;
  log["best_dev_f1"] = result.best_dev_f1;
  {
    std::ofstream out(cfg.paths.checkpoint + ".log.json");
    out << log.dump(2) << "\n";
  }

  std::cout << "wrote checkpoint to " << cfg.paths.checkpoint
            << " (best dev F1 " << result.best_dev_f1 << " at epoch "
            << result.best_epoch << ")\n";
  return 0;
}

int cmd_predict(const std::string& checkpoint_path,
                const std::string& input_path, const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Dataset input = load_byte_offset_dataset(input_path);

  WindowConfig wcfg;
  wcfg.window_len = ckpt.params.window_len;
  wcfg.stride = ckpt.params.window_stride;

  const auto preds = predict(ckpt.params, input, wcfg, ckpt.codebook_ptr(),
                             ckpt.word_vocab_ptr());
  write_predictions(input, preds, out_path);
  size_t total = 0;
  for (const auto& p : preds) total += p.spans.size();
  std::cout << "wrote " << total << " spans for " << preds.size()
            << " documents to " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& gold_path, const std::string& pred_path,
             const std::string& out_path) {
  const Dataset gold = load_byte_offset_dataset(gold_path);
  const Dataset pred = load_byte_offset_dataset(pred_path);
  const EvalReport report = score(gold_of(gold), gold_of(pred));
  std::cout << report.to_table();
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write " + out_path);
    out << report.to_json() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"byte-level NER pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  bool deterministic = false;
  app.add_option("--config", config_path, "JSON run configuration")
      ->envname("BYTENER_CONFIG");
  app.add_option("--seed", seed, "override the run seed")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_flag("--deterministic", deterministic,
               "force sequential reductions (single thread)");

  // bpe-train
  auto* bpe = app.add_subcommand("bpe-train", "learn a BPE merge codebook");
  std::string bpe_corpus, bpe_out;
  size_t bpe_merges = 5000;
  bpe->add_option("--corpus", bpe_corpus, "plain-text corpus")->required();
  bpe->add_option("--merges", bpe_merges, "number of merge operations");
  bpe->add_option("--out", bpe_out, "codebook output path")->required();

  // embed-train
  auto* embed =
      app.add_subcommand("embed-train", "train skip-gram BPE embeddings");
  std::string embed_corpus, embed_codebook, embed_out;
  SkipgramConfig sg;
  embed->add_option("--corpus", embed_corpus, "plain-text corpus")->required();
  embed->add_option("--codebook", embed_codebook, "BPE codebook")->required();
  embed->add_option("--dim", sg.dim, "embedding dimension");
  embed->add_option("--window", sg.window, "context window in tokens");
  embed->add_option("--epochs", sg.epochs, "training iterations");
  embed->add_option("--negatives", sg.negatives, "negative samples per pair");
  embed->add_option("--out", embed_out, "word2vec-format output")->required();

  // train
  auto* tr = app.add_subcommand("train", "train the byte tagger");
  std::string tr_train_data, tr_dev_data, tr_checkpoint;
  size_t tr_epochs = 0;
  size_t tr_threads = 0;
  tr->add_option("--train-data", tr_train_data, "override paths.train_data");
  tr->add_option("--dev-data", tr_dev_data, "override paths.dev_data");
  tr->add_option("--checkpoint", tr_checkpoint, "override paths.checkpoint");
  tr->add_option("--epochs", tr_epochs, "override train.epochs");
  tr->add_option("--threads", tr_threads, "override train.threads");

  // predict
  auto* pr = app.add_subcommand("predict", "tag documents with a checkpoint");
  std::string pr_checkpoint, pr_input, pr_out;
  pr->add_option("--checkpoint", pr_checkpoint, "model checkpoint")->required();
  pr->add_option("--input", pr_input, "JSON Lines documents")->required();
  pr->add_option("--out", pr_out, "predictions output path")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "score predictions against gold");
  std::string ev_gold, ev_pred, ev_out;
  ev->add_option("--gold", ev_gold, "gold JSON Lines")->required();
  ev->add_option("--pred", ev_pred, "predicted JSON Lines")->required();
  ev->add_option("--out", ev_out, "JSON report output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    if (bpe->parsed()) return cmd_bpe_train(bpe_corpus, bpe_merges, bpe_out);
    if (embed->parsed()) {
      if (seed_set) sg.seed = seed;
      return cmd_embed_train(embed_corpus, embed_codebook, sg, embed_out);
    }
    if (tr->parsed()) {
      if (config_path.empty())
        throw DataError("train requires --config");
      RunConfig cfg = load_run_config(config_path);
      if (!tr_train_data.empty()) cfg.paths.train_data = tr_train_data;
      if (!tr_dev_data.empty()) cfg.paths.dev_data = tr_dev_data;
      if (!tr_checkpoint.empty()) cfg.paths.checkpoint = tr_checkpoint;
      if (tr_epochs) cfg.train.epochs = tr_epochs;
      if (tr_threads) cfg.train.threads = tr_threads;
      if (seed_set) cfg.train.seed = seed;
      if (deterministic) cfg.train.threads = 1;
      return cmd_train(cfg);
    }
    if (pr->parsed()) return cmd_predict(pr_checkpoint, pr_input, pr_out);
    if (ev->parsed()) return cmd_eval(ev_gold, ev_pred, ev_out);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
