#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bytener {

// Malformed or inconsistent input data (bad files, out-of-bounds spans,
// mismatched ids). The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values encountered during training. CLI exit code 3.
class DivergenceError : public std::runtime_error {
public:
  explicit DivergenceError(const std::string& what)
      : std::runtime_error(what) {}
};

// Byte-offset entity annotation: [start, end) into the document's raw bytes.
struct EntitySpan {
  size_t start = 0;
  size_t end = 0;
  std::string entity_type;

  bool operator==(const EntitySpan&) const = default;
  auto operator<=>(const EntitySpan&) const = default;
};

struct Document {
  std::string doc_id;
  std::string bytes;  // raw byte sequence; offsets index this directly
  std::vector<EntitySpan> spans;  // sorted by start, non-overlapping

  bool operator==(const Document&) const = default;
};

struct Dataset {
  std::vector<Document> documents;
  std::vector<std::string> label_set;  // lexicographically sorted, unique

  bool operator==(const Dataset&) const = default;
};

// Validates span invariants against a document length; throws DataError
// naming the offending span. `where` prefixes the message for context.
void validate_spans(const std::vector<EntitySpan>& spans, size_t doc_len,
                    const std::string& where);

}  // namespace bytener
