#pragma once

#include "sharpdepth/depth_map.hpp"
#include "sharpdepth/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sharpdepth::data {

struct Sample {
  ColorImage image;
  DepthMap depth;
  std::string id;
  // Shape outlines; only synthetic samples carry them.
  std::optional<Mask> edges;
};

enum class Background { Ramp, Constant };
enum class ShapeKind { Rectangle, Ellipse };

struct SyntheticSceneConfig {
  std::int64_t height = 64;
  std::int64_t width = 64;
  int min_shapes = 2;
  int max_shapes = 6;
  double min_depth = 1.0;
  double max_depth = 8.0;
  Background background = Background::Ramp;
  std::vector<ShapeKind> shape_kinds{ShapeKind::Rectangle, ShapeKind::Ellipse};
  std::uint64_t seed = 0;

  void validate() const;
};

// Nearest-occluder depth step used by the generator, meters.
inline constexpr double kMinSeparation = 0.3;

// Deterministic given cfg (including cfg.seed).
Sample generate_scene(const SyntheticSceneConfig& cfg, const std::string& id = "scene");

// Seed of the index-th sample of a generated set.
std::uint64_t scene_seed(std::uint64_t base_seed, std::uint64_t index);

// Image is an 8-bit PNG, depth PFM or 16-bit PNG millimeters. Zero or NaN
// depth marks invalid pixels.
Sample load_sample(const std::filesystem::path& image_path, const std::filesystem::path& depth_path);

// One line per sample, "image_path<TAB>depth_path", relative to the root.
inline constexpr const char* kIndexFile = "index.tsv";

struct IndexEntry {
  std::filesystem::path image;
  std::filesystem::path depth;
  std::string id;  // image file stem
};

enum class Split { All, Train, Val };

Split parse_split(const std::string& name);

// 80/20 assignment by FNV-1a hash of the sample id; one in five goes to val.
Split split_of(const std::string& id);

std::vector<IndexEntry> read_index(const std::filesystem::path& root);
void write_index(const std::filesystem::path& root, const std::vector<IndexEntry>& entries);

std::vector<IndexEntry> select_split(const std::vector<IndexEntry>& entries, Split split);

std::vector<Sample> load_dataset(const std::filesystem::path& root, Split split);

// Deterministic mini-batches over an in-memory sample list. The final partial
// batch is emitted.
class BatchIterator {
 public:
  BatchIterator(const std::vector<Sample>& samples, std::size_t batch_size, std::optional<std::uint64_t> shuffle_seed);

  bool done() const { return next_ >= order_.size(); }
  std::vector<const Sample*> next();
  std::size_t batch_count() const;
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const std::vector<Sample>* samples_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t next_ = 0;
};

// Owns the samples loaded from a dataset root.
class DatasetIterator {
 public:
  DatasetIterator(const std::filesystem::path& root, Split split, std::size_t batch_size,
                  std::optional<std::uint64_t> shuffle_seed);
  DatasetIterator(const DatasetIterator&) = delete;
  DatasetIterator& operator=(const DatasetIterator&) = delete;

  bool done() const { return batches_.done(); }
  std::vector<const Sample*> next() { return batches_.next(); }
  const std::vector<Sample>& samples() const { return samples_; }

 private:
  std::vector<Sample> samples_;
  BatchIterator batches_;
};

}  // namespace sharpdepth::data
