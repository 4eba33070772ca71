#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bytener/types.hpp"

namespace bytener {

// JSON Lines corpus: one document per line,
//   {"doc_id": str, "text": str, "spans": [{"start": int, "end": int,
//    "type": str}]}
// start/end are byte offsets into the UTF-8 encoding of text.
Dataset load_byte_offset_dataset(const std::string& path);

struct IobLoadReport {
  size_t sentences = 0;
  size_t repaired_tags = 0;  // orphan I- tags repaired to B-
};

// token<TAB>tag lines, blank line between sentences. Each sentence becomes a
// Document whose bytes are the tokens joined by single 0x20 bytes; IOB tags
// become byte-offset spans covering whole tokens (and the joining spaces
// inside multi-token entities). Orphan I- tags are repaired to B- and counted.
Dataset load_token_iob_dataset(const std::string& path,
                               IobLoadReport* report = nullptr);

// Deterministic document-level split; dev gets ceil(fraction * N) documents.
std::pair<Dataset, Dataset> split_train_dev(const Dataset& dataset,
                                            double fraction, uint64_t seed);

// Predicted spans per document, aligned to a dataset by doc_id.
struct DocPrediction {
  std::string doc_id;
  std::vector<EntitySpan> spans;
};

// Writes JSON Lines mirroring the ingestion format (re-loading round-trips).
void write_predictions(const Dataset& dataset,
                       const std::vector<DocPrediction>& predictions,
                       const std::string& path);

}  // namespace bytener
