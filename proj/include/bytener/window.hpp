#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bytener/tags.hpp"
#include "bytener/types.hpp"

namespace bytener {

struct WindowConfig {
  size_t window_len = 150;
  size_t stride = 75;
};

// A byte window cut from a document. tags is empty for inference samples.
struct Sample {
  std::string doc_id;
  size_t doc_offset = 0;
  std::string bytes;
  TagSequence tags;
};

struct WindowReport {
  size_t skipped_long_entities = 0;  // entities longer than window_len
};

// Training windows: candidate starts at 0, stride, 2*stride, ...; a start
// strictly inside an entity moves back to the entity start; an end cutting
// an entity is pulled back to that entity's start; windows wholly contained
// in the previously emitted window are dropped. Emitted windows never start
// or end mid-entity and carry gold tags rebased to the window.
std::vector<Sample> extract_training_windows(const Document& doc,
                                             const WindowConfig& cfg,
                                             const TagScheme& scheme,
                                             WindowReport* report = nullptr);

// Inference windows: unconstrained sliding at 0, stride, ...; the final
// window is truncated at the document end; every byte is covered.
std::vector<Sample> extract_inference_windows(const Document& doc,
                                              const WindowConfig& cfg);

// Stitches per-window tags into one document sequence. Consecutive
// overlapping windows are cut at the midpoint of their overlap; each byte
// takes its tag from the window owning its side of the cut.
TagSequence recombine_window_tags(
    size_t doc_len,
    const std::vector<std::pair<size_t, TagSequence>>& windows);

}  // namespace bytener
