#pragma once

#include <string>

#include "bytener/embedding.hpp"
#include "bytener/network.hpp"

namespace bytener {

// Resolved run configuration. Defaults are the published hyperparameters;
// every training run writes the resolved config next to its outputs.
struct RunConfig {
  TrainConfig train;
  WindowConfig window;
  FeatureConfig features;
  NetworkDims dims;
  SkipgramConfig skipgram;

  struct Paths {
    std::string train_data;
    std::string dev_data;   // optional; dev_fraction split when empty
    std::string test_data;
    std::string codebook;
    std::string bpe_embeddings;
    std::string word_embeddings;
    std::string checkpoint;
    std::string report;
    std::string predictions;
  } paths;

  double dev_fraction = 0.1;
  std::string data_format = "jsonl";  // "jsonl" or "iob"
  size_t bpe_embedding_dim = 100;     // expected pretrained BPE width
  size_t word_embedding_dim = 200;    // expected pretrained word width
};

// Strict parse: any unknown key is an error naming the key.
RunConfig parse_run_config(const std::string& json_text,
                           const std::string& where);
RunConfig load_run_config(const std::string& path);

std::string run_config_to_json(const RunConfig& cfg);
void save_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace bytener
