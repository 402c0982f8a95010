#include "facepipe/collections.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "facepipe/rng.hpp"

namespace facepipe {

namespace fs = std::filesystem;

std::string ScanReport::to_text() const {
  std::string out;
  out += "orphan_images " + std::to_string(orphan_images.size()) + "\n";
  for (const auto& s : orphan_images) out += "  " + s + "\n";
  out += "orphan_landmarks " + std::to_string(orphan_landmarks.size()) + "\n";
  for (const auto& s : orphan_landmarks) out += "  " + s + "\n";
  return out;
}

ScanResult scan_dataset(const fs::path& root) {
  if (!fs::is_directory(root))
    throw std::runtime_error("scan_dataset: not a directory: " + root.string());

  std::vector<fs::path> collection_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) collection_dirs.push_back(entry.path());
  std::sort(collection_dirs.begin(), collection_dirs.end());
  if (collection_dirs.empty())
    throw std::runtime_error("scan_dataset: no collections under " + root.string());

  ScanResult result;
  for (const auto& dir : collection_dirs) {
    std::map<std::string, bool> images;     // frame id -> seen
    std::map<std::string, bool> landmarks;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const fs::path& p = entry.path();
      if (p.extension() == ".ppm")
        images[p.stem().string()] = true;
      else if (p.extension() == ".lmk")
        landmarks[p.stem().string()] = true;
    }
    Collection col;
    col.id = dir.filename().string();
    for (const auto& [frame, _] : images) {
      if (!landmarks.count(frame)) {
        result.report.orphan_images.push_back((dir / (frame + ".ppm")).string());
        continue;
      }
      CollectionItem item;
      item.frame_id = frame;
      item.image = dir / (frame + ".ppm");
      item.landmarks = dir / (frame + ".lmk");
      fs::path skin = dir / (frame + ".ppm.skin.pgm");
      if (fs::exists(skin)) item.skin = skin;
      col.items.push_back(std::move(item));
    }
    for (const auto& [frame, _] : landmarks)
      if (!images.count(frame))
        result.report.orphan_landmarks.push_back((dir / (frame + ".lmk")).string());
    if (col.items.empty())
      throw std::runtime_error("scan_dataset: collection '" + col.id +
                               "' has no complete image/landmark pair");
    result.dataset.collections.push_back(std::move(col));
  }
  return result;
}

std::vector<BatchEntry> sample_batch(const Dataset& dataset, std::uint64_t seed,
                                     int n_collections, int n_per_collection) {
  const int k = static_cast<int>(dataset.collections.size());
  if (k == 0) throw std::invalid_argument("sample_batch: empty dataset");
  if (n_collections < 1 || n_collections > k)
    throw std::invalid_argument("sample_batch: n_collections out of range");
  if (n_per_collection < 1)
    throw std::invalid_argument("sample_batch: n_per_collection must be positive");

  Rng rng(seed);
  // Partial Fisher-Yates over collection indices.
  std::vector<int> order(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) order[static_cast<size_t>(i)] = i;
  for (int i = 0; i < n_collections; ++i)
    std::swap(order[static_cast<size_t>(i)],
              order[static_cast<size_t>(i + rng.below(k - i))]);

  std::vector<BatchEntry> batch;
  for (int i = 0; i < n_collections; ++i) {
    BatchEntry entry;
    entry.collection_index = order[static_cast<size_t>(i)];
    const int m = static_cast<int>(
        dataset.collections[static_cast<size_t>(entry.collection_index)].items.size());
    std::vector<int> items(static_cast<size_t>(m));
    for (int j = 0; j < m; ++j) items[static_cast<size_t>(j)] = j;
    int taken = 0;
    while (taken < n_per_collection) {
      // Draw without replacement; reshuffle and wrap when exhausted.
      const int round = std::min(m, n_per_collection - taken);
      for (int j = 0; j < round; ++j)
        std::swap(items[static_cast<size_t>(j)],
                  items[static_cast<size_t>(j + rng.below(m - j))]);
      entry.item_indices.insert(entry.item_indices.end(), items.begin(), items.begin() + round);
      taken += round;
    }
    batch.push_back(std::move(entry));
  }
  return batch;
}

}  // namespace facepipe
