#include "bytener/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace bytener {

namespace {

void finish(TypeCounts& c) {
  c.precision = (c.tp + c.fp) ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
  c.recall = (c.tp + c.fn) ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
  c.f1 = (c.precision + c.recall > 0.0)
             ? 2.0 * c.precision * c.recall / (c.precision + c.recall)
             : 0.0;
}

const std::vector<EntitySpan>* find_doc(
    const std::vector<DocPrediction>& docs, const std::string& id) {
  for (const auto& d : docs)
    if (d.doc_id == id) return &d.spans;
  return nullptr;
}

void check_doc_ids(const std::vector<DocPrediction>& gold,
                   const std::vector<DocPrediction>& pred) {
  std::set<std::string> g, p;
  for (const auto& d : gold) g.insert(d.doc_id);
  for (const auto& d : pred) p.insert(d.doc_id);
  if (g != p) throw DataError("gold and prediction doc id sets differ");
}

bool overlaps(const EntitySpan& a, const EntitySpan& b) {
  return a.start < b.end && b.start < a.end;
}

}  // namespace

std::vector<DocPrediction> gold_of(const Dataset& dataset) {
  std::vector<DocPrediction> out;
  out.reserve(dataset.documents.size());
  for (const auto& d : dataset.documents) out.push_back({d.doc_id, d.spans});
  return out;
}

EvalReport score(const std::vector<DocPrediction>& gold,
                 const std::vector<DocPrediction>& pred) {
  check_doc_ids(gold, pred);
  EvalReport report;

  for (const auto& gdoc : gold) {
    const auto* pspans = find_doc(pred, gdoc.doc_id);
    std::vector<bool> gold_matched(gdoc.spans.size(), false);

    for (const auto& p : *pspans) {
      bool matched = false;
      for (size_t i = 0; i < gdoc.spans.size(); ++i) {
        if (gold_matched[i]) continue;
        const auto& g = gdoc.spans[i];
        if (g.start == p.start && g.end == p.end &&
            g.entity_type == p.entity_type) {
          gold_matched[i] = true;
          matched = true;
          break;
        }
      }
      if (matched) {
        ++report.per_type[p.entity_type].tp;
      } else {
        ++report.per_type[p.entity_type].fp;
        for (const auto& g : gdoc.spans)
          if (g.entity_type != p.entity_type && overlaps(g, p))
            ++report.confusion[{g.entity_type, p.entity_type}];
      }
    }
    for (size_t i = 0; i < gdoc.spans.size(); ++i)
      if (!gold_matched[i]) ++report.per_type[gdoc.spans[i].entity_type].fn;
  }

  for (auto& [type, counts] : report.per_type) {
    report.micro.tp += counts.tp;
    report.micro.fp += counts.fp;
    report.micro.fn += counts.fn;
    finish(counts);
  }
  finish(report.micro);
  return report;
}

std::map<std::pair<std::string, std::string>, size_t> confusion_by_type(
    const std::vector<DocPrediction>& gold,
    const std::vector<DocPrediction>& pred) {
  return score(gold, pred).confusion;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  auto counts_json = [](const TypeCounts& c) {
    return nlohmann::json{{"tp", c.tp},
                          {"fp", c.fp},
                          {"fn", c.fn},
                          {"precision", c.precision},
                          {"recall", c.recall},
                          {"f1", c.f1}};
  };
  j["per_type"] = nlohmann::json::object();
  for (const auto& [type, counts] : per_type)
    j["per_type"][type] = counts_json(counts);
  j["micro"] = counts_json(micro);
  j["confusion"] = nlohmann::json::array();
  for (const auto& [key, count] : confusion)
    j["confusion"].push_back(
        {{"gold", key.first}, {"pred", key.second}, {"count", count}});
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %8s %8s %8s %9s %9s %9s\n",
                "Entity type", "TP", "FP", "FN", "P", "R", "F1");
  out << line;
  auto row = [&](const std::string& name, const TypeCounts& c) {
    std::snprintf(line, sizeof(line),
                  "%-24s %8zu %8zu %8zu %9.4f %9.4f %9.4f\n", name.c_str(),
                  c.tp, c.fp, c.fn, c.precision, c.recall, c.f1);
    out << line;
  };
  for (const auto& [type, counts] : per_type) row(type, counts);
  row("Total", micro);
  return out.str();
}

}  // namespace bytener
