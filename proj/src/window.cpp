#include "bytener/window.hpp"

#include <algorithm>

namespace bytener {

namespace {

// Span strictly containing the position, if any. Spans are sorted and
// disjoint, so at most one matches.
const EntitySpan* span_strictly_inside(const std::vector<EntitySpan>& spans,
                                       size_t pos) {
  for (const auto& s : spans) {
    if (s.start >= pos) break;
    if (pos < s.end) return &s;
  }
  return nullptr;
}

}  // namespace

std::vector<Sample> extract_training_windows(const Document& doc,
                                             const WindowConfig& cfg,
                                             const TagScheme& scheme,
                                             WindowReport* report) {
  const size_t doc_len = doc.bytes.size();
  std::vector<Sample> out;
  if (doc_len == 0) return out;

  if (report) {
    for (const auto& s : doc.spans)
      if (s.end - s.start > cfg.window_len) ++report->skipped_long_entities;
  }

  bool have_prev = false;
  size_t prev_start = 0, prev_end = 0;

  for (size_t cand = 0; cand < doc_len; cand += cfg.stride) {
    size_t start = cand;
    if (const EntitySpan* s = span_strictly_inside(doc.spans, start))
      start = s->start;

    size_t end = std::min(start + cfg.window_len, doc_len);
    if (const EntitySpan* s = span_strictly_inside(doc.spans, end))
      end = s->start;

    if (end <= start) continue;  // collapsed by an oversize entity
    if (have_prev && prev_start <= start && end <= prev_end) continue;

    Sample sample;
    sample.doc_id = doc.doc_id;
    sample.doc_offset = start;
    sample.bytes = doc.bytes.substr(start, end - start);

    std::vector<EntitySpan> rebased;
    for (const auto& s : doc.spans) {
      if (s.start >= start && s.end <= end)
        rebased.push_back({s.start - start, s.end - start, s.entity_type});
    }
    sample.tags = encode_iobes(end - start, rebased, scheme);

    out.push_back(std::move(sample));
    prev_start = start;
    prev_end = end;
    have_prev = true;
  }
  return out;
}

std::vector<Sample> extract_inference_windows(const Document& doc,
                                              const WindowConfig& cfg) {
  const size_t doc_len = doc.bytes.size();
  std::vector<Sample> out;
  if (doc_len == 0) return out;

  for (size_t start = 0;; start += cfg.stride) {
    const size_t end = std::min(start + cfg.window_len, doc_len);
    Sample sample;
    sample.doc_id = doc.doc_id;
    sample.doc_offset = start;
    sample.bytes = doc.bytes.substr(start, end - start);
    out.push_back(std::move(sample));
    if (end >= doc_len) break;
  }
  return out;
}

TagSequence recombine_window_tags(
    size_t doc_len,
    const std::vector<std::pair<size_t, TagSequence>>& windows) {
  if (windows.empty()) {
    if (doc_len == 0) return {};
    throw std::invalid_argument("recombine: no windows for nonempty document");
  }

  TagSequence out(doc_len, 0);
  const size_t n = windows.size();

  // cut[i] is the first byte owned by window i; cut[n] = doc_len.
  std::vector<size_t> cut(n + 1);
  cut[0] = 0;
  if (windows[0].first != 0)
    throw std::invalid_argument("recombine: coverage gap at byte 0");
  for (size_t i = 1; i < n; ++i) {
    const size_t off = windows[i].first;
    const size_t prev_end = windows[i - 1].first + windows[i - 1].second.size();
    if (off > prev_end)
      throw std::invalid_argument("recombine: coverage gap at byte " +
                                  std::to_string(prev_end));
    cut[i] = off < prev_end ? (off + prev_end) / 2 : off;
  }
  cut[n] = doc_len;
  if (windows[n - 1].first + windows[n - 1].second.size() < doc_len)
    throw std::invalid_argument("recombine: final window ends before doc end");

  for (size_t i = 0; i < n; ++i) {
    const size_t off = windows[i].first;
    for (size_t p = cut[i]; p < cut[i + 1]; ++p)
      out[p] = windows[i].second[p - off];
  }
  return out;
}

}  // namespace bytener
