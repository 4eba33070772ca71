#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "bytener/types.hpp"

namespace bytener {

// Per-byte IOBES tag inventory over an ordered label set. Tag 0 is O, then
// B/I/E/S blocks per label, so |tags| = 4 * |labels| + 1 and an all-zero
// prediction is the empty prediction.
class TagScheme {
public:
  TagScheme() = default;
  explicit TagScheme(std::vector<std::string> labels);

  size_t num_tags() const { return tags_.size(); }
  size_t num_labels() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::string>& tags() const { return tags_; }

  const std::string& tag_name(int id) const { return tags_.at(id); }
  int tag_of(const std::string& name) const;

  // Tag ids for a label; label must exist in the scheme.
  int b_tag(const std::string& label) const { return base_of(label) + 0; }
  int i_tag(const std::string& label) const { return base_of(label) + 1; }
  int e_tag(const std::string& label) const { return base_of(label) + 2; }
  int s_tag(const std::string& label) const { return base_of(label) + 3; }

  // Decomposes a tag id: kind in {'O','B','I','E','S'}, label index or -1.
  char kind(int id) const;
  int label_index(int id) const;

  bool operator==(const TagScheme& o) const {
    return labels_ == o.labels_;
  }

private:
  int base_of(const std::string& label) const;

  std::vector<std::string> labels_;
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> tag_of_;
};

using TagSequence = std::vector<int>;

// Spans -> one IOBES tag per byte. Spans must be in bounds, non-overlapping,
// and typed within the scheme.
TagSequence encode_iobes(size_t length, const std::vector<EntitySpan>& spans,
                         const TagScheme& scheme);

// Tags -> spans. Total on arbitrary id sequences from the scheme: well-formed
// runs decode exactly; malformed runs are repaired leniently (an entity opens
// at B/S or at an I/E that does not continue a same-type entity, and closes
// at E, at S, or when the continuation breaks).
std::vector<EntitySpan> decode_iobes(const TagSequence& tags,
                                     const TagScheme& scheme);

}  // namespace bytener
