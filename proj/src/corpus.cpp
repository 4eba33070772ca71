#include "bytener/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "bytener/rng.hpp"
#include "bytener/tags.hpp"

namespace bytener {

namespace {

using nlohmann::json;

std::vector<std::string> collect_label_set(
    const std::vector<Document>& documents) {
  std::set<std::string> types;
  for (const auto& d : documents)
    for (const auto& s : d.spans) types.insert(s.entity_type);
  return {types.begin(), types.end()};
}

void sort_and_check(Document& doc, const std::string& where) {
  std::sort(doc.spans.begin(), doc.spans.end(),
            [](const EntitySpan& a, const EntitySpan& b) {
              return a.start < b.start;
            });
  validate_spans(doc.spans, doc.bytes.size(), where);
}

}  // namespace

Dataset load_byte_offset_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);

  Dataset ds;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(where + ": malformed JSON: " + e.what());
    }
    if (!rec.is_object() || !rec.contains("doc_id") || !rec.contains("text") ||
        !rec.contains("spans"))
      throw DataError(where + ": record must have doc_id, text, spans");

    Document doc;
    try {
      doc.doc_id = rec.at("doc_id").get<std::string>();
      doc.bytes = rec.at("text").get<std::string>();
      for (const auto& s : rec.at("spans")) {
        doc.spans.push_back({s.at("start").get<size_t>(),
                             s.at("end").get<size_t>(),
                             s.at("type").get<std::string>()});
      }
    } catch (const json::exception& e) {
      throw DataError(where + ": malformed record: " + e.what());
    }
    sort_and_check(doc, where);
    ds.documents.push_back(std::move(doc));
  }
  ds.label_set = collect_label_set(ds.documents);
  return ds;
}

Dataset load_token_iob_dataset(const std::string& path,
                               IobLoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);

  Dataset ds;
  IobLoadReport local;
  std::vector<std::pair<std::string, std::string>> sent;  // (token, tag)
  std::string line;
  size_t line_no = 0;

  auto flush_sentence = [&]() {
    if (sent.empty()) return;
    Document doc;
    doc.doc_id = "sent-" + std::to_string(local.sentences);
    ++local.sentences;

    std::vector<size_t> starts(sent.size());
    for (size_t i = 0; i < sent.size(); ++i) {
      if (i > 0) doc.bytes.push_back(' ');
      starts[i] = doc.bytes.size();
      doc.bytes += sent[i].first;
    }

    std::string open_type;
    size_t open_start = 0;
    auto close = [&](size_t end_token) {
      if (!open_type.empty()) {
        doc.spans.push_back({open_start,
                             starts[end_token] + sent[end_token].first.size(),
                             open_type});
        open_type.clear();
      }
    };
    for (size_t i = 0; i < sent.size(); ++i) {
      const std::string& tag = sent[i].second;
      if (tag == "O") {
        if (i > 0) close(i - 1);
        continue;
      }
      const std::string type = tag.substr(2);
      if (tag[0] == 'B') {
        if (i > 0) close(i - 1);
        open_type = type;
        open_start = starts[i];
      } else {  // I-
        if (open_type == type) continue;  // continuation
        if (i > 0) close(i - 1);
        ++local.repaired_tags;  // orphan I- treated as B-
        open_type = type;
        open_start = starts[i];
      }
    }
    if (!sent.empty()) close(sent.size() - 1);
    ds.documents.push_back(std::move(doc));
    sent.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush_sentence();
      continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected token<TAB>tag");
    std::string token = line.substr(0, tab);
    std::string tag = line.substr(tab + 1);
    bool ok = tag == "O" ||
              ((tag.size() > 2) && (tag[0] == 'B' || tag[0] == 'I') &&
               tag[1] == '-');
    if (!ok)
      throw DataError(path + ":" + std::to_string(line_no) + ": bad tag '" +
                      tag + "'");
    sent.emplace_back(std::move(token), std::move(tag));
  }
  flush_sentence();

  ds.label_set = collect_label_set(ds.documents);
  if (report) *report = local;
  return ds;
}

std::pair<Dataset, Dataset> split_train_dev(const Dataset& dataset,
                                            double fraction, uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("fraction must be in (0, 1)");
  const size_t n = dataset.documents.size();
  if (n < 2) throw DataError("need at least 2 documents to split");

  const size_t dev_count =
      static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<bool> in_dev(n, false);
  for (size_t i = 0; i < dev_count; ++i) in_dev[order[i]] = true;

  Dataset train, dev;
  train.label_set = dataset.label_set;
  dev.label_set = dataset.label_set;
  for (size_t i = 0; i < n; ++i)
    (in_dev[i] ? dev : train).documents.push_back(dataset.documents[i]);
  return {std::move(train), std::move(dev)};
}

void write_predictions(const Dataset& dataset,
                       const std::vector<DocPrediction>& predictions,
                       const std::string& path) {
  std::unordered_map<std::string, const std::vector<EntitySpan>*> by_id;
  for (const auto& p : predictions) {
    bool known = false;
    for (const auto& d : dataset.documents)
      if (d.doc_id == p.doc_id) { known = true; break; }
    if (!known) throw DataError("prediction for unknown doc_id " + p.doc_id);
    by_id[p.doc_id] = &p.spans;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& d : dataset.documents) {
    nlohmann::json rec;
    rec["doc_id"] = d.doc_id;
    rec["text"] = d.bytes;
    rec["spans"] = nlohmann::json::array();
    auto it = by_id.find(d.doc_id);
    if (it != by_id.end()) {
      std::vector<EntitySpan> spans = *it->second;
      std::sort(spans.begin(), spans.end());
      for (const auto& s : spans)
        rec["spans"].push_back(
            {{"start", s.start}, {"end", s.end}, {"type", s.entity_type}});
    }
    out << rec.dump() << "\n";
  }
  if (!out) throw DataError("write failed for " + path);
}

}  // namespace bytener
