#include "bytener/tags.hpp"

#include <stdexcept>

namespace bytener {

void validate_spans(const std::vector<EntitySpan>& spans, size_t doc_len,
                    const std::string& where) {
  const EntitySpan* prev = nullptr;
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > doc_len)
      throw DataError(where + ": span out of bounds [" +
                      std::to_string(s.start) + "," + std::to_string(s.end) +
                      ") over " + std::to_string(doc_len) + " bytes");
    if (prev && s.start < prev->end)
      throw DataError(where + ": overlapping spans at byte " +
                      std::to_string(s.start));
    prev = &s;
  }
}

TagScheme::TagScheme(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  tags_.reserve(4 * labels_.size() + 1);
  tags_.push_back("O");
  for (const auto& l : labels_) {
    tags_.push_back("B-" + l);
    tags_.push_back("I-" + l);
    tags_.push_back("E-" + l);
    tags_.push_back("S-" + l);
  }
  for (size_t i = 0; i < tags_.size(); ++i)
    tag_of_[tags_[i]] = static_cast<int>(i);
}

int TagScheme::tag_of(const std::string& name) const {
  auto it = tag_of_.find(name);
  if (it == tag_of_.end())
    throw std::out_of_range("unknown tag: " + name);
  return it->second;
}

int TagScheme::base_of(const std::string& label) const {
  return tag_of("B-" + label);
}

char TagScheme::kind(int id) const {
  if (id == 0) return 'O';
  static const char kinds[4] = {'B', 'I', 'E', 'S'};
  return kinds[(id - 1) % 4];
}

int TagScheme::label_index(int id) const {
  return id == 0 ? -1 : (id - 1) / 4;
}

TagSequence encode_iobes(size_t length, const std::vector<EntitySpan>& spans,
                         const TagScheme& scheme) {
  validate_spans(spans, length, "encode_iobes");
  TagSequence tags(length, 0);
  for (const auto& s : spans) {
    if (s.end - s.start == 1) {
      tags[s.start] = scheme.s_tag(s.entity_type);
    } else {
      tags[s.start] = scheme.b_tag(s.entity_type);
      for (size_t i = s.start + 1; i + 1 < s.end; ++i)
        tags[i] = scheme.i_tag(s.entity_type);
      tags[s.end - 1] = scheme.e_tag(s.entity_type);
    }
  }
  return tags;
}

std::vector<EntitySpan> decode_iobes(const TagSequence& tags,
                                     const TagScheme& scheme) {
  std::vector<EntitySpan> spans;
  int open_label = -1;   // label index of the currently open entity
  size_t open_start = 0;

  auto close = [&](size_t end) {
    if (open_label >= 0) {
      spans.push_back({open_start, end, scheme.labels()[open_label]});
      open_label = -1;
    }
  };

  for (size_t i = 0; i < tags.size(); ++i) {
    const int id = tags[i];
    const char k = scheme.kind(id);
    const int label = scheme.label_index(id);
    switch (k) {
      case 'O':
        close(i);
        break;
      case 'B':
        close(i);
        open_label = label;
        open_start = i;
        break;
      case 'S':
        close(i);
        spans.push_back({i, i + 1, scheme.labels()[label]});
        break;
      case 'I':
        if (open_label != label) {
          close(i);
          open_label = label;
          open_start = i;
        }
        break;
      case 'E':
        if (open_label != label) {
          close(i);
          open_label = label;
          open_start = i;
        }
        close(i + 1);
        break;
    }
  }
  close(tags.size());
  return spans;
}

}  // namespace bytener
