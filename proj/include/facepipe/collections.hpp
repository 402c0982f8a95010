#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace facepipe {

// One paired frame of a subject collection.
struct CollectionItem {
  std::string frame_id;
  std::filesystem::path image;      // <frame>.ppm
  std::filesystem::path landmarks;  // <frame>.lmk
  std::optional<std::filesystem::path> skin;  // <frame>.ppm.skin.pgm when present
};

// All frames of one subject, assumed to share identity and texture.
struct Collection {
  std::string id;
  std::vector<CollectionItem> items;
};

struct Dataset {
  std::vector<Collection> collections;
};

// Orphan files found while pairing images with landmark files.
struct ScanReport {
  std::vector<std::string> orphan_images;     // .ppm without .lmk
  std::vector<std::string> orphan_landmarks;  // .lmk without .ppm

  bool clean() const { return orphan_images.empty() && orphan_landmarks.empty(); }
  std::string to_text() const;
};

struct ScanResult {
  Dataset dataset;
  ScanReport report;
};

// Walks root/<collection_id>/<frame>.ppm + <frame>.lmk. Collections and
// items come back sorted by name so results are reproducible regardless of
// filesystem order. Subdirectories inside a collection (e.g. gt/) are
// ignored. Throws if the root holds no collections or a collection has no
// complete pair.
ScanResult scan_dataset(const std::filesystem::path& root);

struct BatchEntry {
  int collection_index = 0;
  std::vector<int> item_indices;
};

// Samples n_collections distinct collections, then n_per_collection items
// from each, without replacement, wrapping around when a collection is
// smaller than the request. Deterministic for a fixed seed.
std::vector<BatchEntry> sample_batch(const Dataset& dataset, std::uint64_t seed,
                                     int n_collections, int n_per_collection);

}  // namespace facepipe
