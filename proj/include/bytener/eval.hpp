#pragma once

#include <map>
#include <string>
#include <vector>

#include "bytener/corpus.hpp"
#include "bytener/types.hpp"

namespace bytener {

struct TypeCounts {
  size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
};

struct EvalReport {
  std::map<std::string, TypeCounts> per_type;
  TypeCounts micro;
  // (gold_type, pred_type) -> count of FP predictions overlapping a gold
  // span of a different type by at least one byte.
  std::map<std::pair<std::string, std::string>, size_t> confusion;

  std::string to_json() const;
  std::string to_table() const;  // fixed-width text table
};

// Exact-match scoring: a prediction is a TP iff an unmatched gold span has
// identical (start, end, type); greedy one-to-one matching in document
// order. Doc id sets must match.
EvalReport score(const std::vector<DocPrediction>& gold,
                 const std::vector<DocPrediction>& pred);

std::map<std::pair<std::string, std::string>, size_t> confusion_by_type(
    const std::vector<DocPrediction>& gold,
    const std::vector<DocPrediction>& pred);

// Convenience: gold spans straight from a dataset.
std::vector<DocPrediction> gold_of(const Dataset& dataset);

}  // namespace bytener
