#include "sharpdepth/data.hpp"

#include "sharpdepth/errors.hpp"
#include "sharpdepth/io.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace sharpdepth::data {

void SyntheticSceneConfig::validate() const {
  if (height <= 0 || width <= 0 || height % 32 != 0 || width % 32 != 0) {
    throw ConfigError("data size must be positive and divisible by 32");
  }
  if (!(min_depth > 0.0) || !(min_depth < max_depth)) {
    throw ConfigError("data depth range must be positive with min < max");
  }
  if (min_shapes < 0 || max_shapes < min_shapes) throw ConfigError("data shape-count range is invalid");
  if (max_shapes > 0 && shape_kinds.empty()) throw ConfigError("data.shape_kinds must not be empty");
  if (min_depth + kMinSeparation * max_shapes >= max_depth) {
    throw ConfigError("infeasible scene config: depth range [" + std::to_string(min_depth) + ", " +
                      std::to_string(max_depth) + "] cannot separate " + std::to_string(max_shapes) +
                      " shapes by 0.3 m");
  }
}

std::uint64_t scene_seed(std::uint64_t base_seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Sample generate_scene(const SyntheticSceneConfig& cfg, const std::string& id) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const auto rows = cfg.height;
  const auto cols = cfg.width;
  const int n = std::uniform_int_distribution<int>(cfg.min_shapes, cfg.max_shapes)(rng);
  const double bg_lo = cfg.min_depth + kMinSeparation * n;

  Grid depth(rows, cols);
  if (cfg.background == Background::Constant) {
    depth.setConstant(cfg.max_depth);
  } else {
    // Gentle plane: Sobel magnitude 8 * (|a| + |b|) stays below 0.16.
    const double budget = std::min(0.02, (cfg.max_depth - bg_lo) / static_cast<double>(rows + cols));
    const double slope = uniform(0.0, budget);
    const double share = uniform(0.0, 1.0);
    const double a = slope * share * (uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0);
    const double b = slope * (1.0 - share) * (uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0);
    double lo = 0.0;
    double hi = 0.0;
    for (double u : {0.0, static_cast<double>(cols - 1)}) {
      for (double v : {0.0, static_cast<double>(rows - 1)}) {
        lo = std::min(lo, a * u + b * v);
        hi = std::max(hi, a * u + b * v);
      }
    }
    const double offset = uniform(bg_lo - lo, cfg.max_depth - hi);
    for (Eigen::Index v = 0; v < rows; ++v) {
      for (Eigen::Index u = 0; u < cols; ++u) depth(v, u) = offset + a * u + b * v;
    }
  }

  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> label =
      Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(rows, cols);
  const double min_side = static_cast<double>(std::min(rows, cols));
  for (int k = 0; k < n; ++k) {
    const ShapeKind kind = cfg.shape_kinds[std::uniform_int_distribution<std::size_t>(0, cfg.shape_kinds.size() - 1)(rng)];
    const double cu = uniform(0.1, 0.9) * static_cast<double>(cols);
    const double cv = uniform(0.1, 0.9) * static_cast<double>(rows);
    const double hu = uniform(0.1, 0.3) * min_side;
    const double hv = uniform(0.1, 0.3) * min_side;

    Mask footprint = Mask::Constant(rows, cols, false);
    double under = std::numeric_limits<double>::infinity();
    for (Eigen::Index v = 0; v < rows; ++v) {
      for (Eigen::Index u = 0; u < cols; ++u) {
        const double du = (static_cast<double>(u) + 0.5 - cu) / hu;
        const double dv = (static_cast<double>(v) + 0.5 - cv) / hv;
        const bool inside = kind == ShapeKind::Rectangle ? (std::abs(du) <= 1.0 && std::abs(dv) <= 1.0)
                                                         : (du * du + dv * dv <= 1.0);
        if (!inside) continue;
        footprint(v, u) = true;
        under = std::min(under, depth(v, u));
      }
    }
    if (!footprint.any()) continue;
    // Leave room for the shapes still to come.
    const double max_sep = under - cfg.min_depth - kMinSeparation * (n - k - 1);
    const double sep = kMinSeparation + uniform(0.0, 0.5) * (max_sep - kMinSeparation);
    const double d = under - sep;
    depth = footprint.select(d, depth);
    label = footprint.select(k + 1, label);
  }

  // Outline pixels: the near side of every 4-neighbour label change.
  Mask edges = Mask::Constant(rows, cols, false);
  for (Eigen::Index v = 0; v < rows; ++v) {
    for (Eigen::Index u = 0; u < cols; ++u) {
      constexpr int kDu[] = {1, -1, 0, 0};
      constexpr int kDv[] = {0, 0, 1, -1};
      for (int i = 0; i < 4; ++i) {
        const Eigen::Index nu = u + kDu[i];
        const Eigen::Index nv = v + kDv[i];
        if (nu < 0 || nv < 0 || nu >= cols || nv >= rows) continue;
        if (label(nv, nu) != label(v, u) && depth(nv, nu) > depth(v, u)) edges(v, u) = true;
      }
    }
  }

  std::vector<std::array<double, 3>> albedo(static_cast<std::size_t>(n + 1));
  for (auto& c : albedo) c = {uniform(0.2, 1.0), uniform(0.2, 1.0), uniform(0.2, 1.0)};

  Sample s;
  s.id = id;
  s.image.rows = rows;
  s.image.cols = cols;
  s.image.data.resize(static_cast<std::size_t>(3 * rows * cols));
  const double span = cfg.max_depth - cfg.min_depth;
  for (Eigen::Index v = 0; v < rows; ++v) {
    for (Eigen::Index u = 0; u < cols; ++u) {
      const double shade = 1.0 - 0.6 * (depth(v, u) - cfg.min_depth) / span;
      const auto& a = albedo[static_cast<std::size_t>(label(v, u))];
      for (int ch = 0; ch < 3; ++ch) {
        s.image.data[static_cast<std::size_t>((ch * rows + v) * cols + u)] =
            static_cast<float>(std::clamp(a[static_cast<std::size_t>(ch)] * shade, 0.0, 1.0));
      }
    }
  }
  s.depth = DepthMap(std::move(depth));
  s.edges = std::move(edges);
  return s;
}

Sample load_sample(const std::filesystem::path& image_path, const std::filesystem::path& depth_path) {
  Sample s;
  s.image = io::read_color_png(image_path);
  s.depth = io::read_depth(depth_path);
  if (s.image.rows != s.depth.rows() || s.image.cols != s.depth.cols()) {
    throw ShapeError("image " + image_path.string() + " and depth " + depth_path.string() + " differ in size");
  }
  s.id = image_path.stem().string();
  return s;
}

Split parse_split(const std::string& name) {
  if (name == "all") return Split::All;
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  throw ConfigError("unknown split '" + name + "' (expected all, train or val)");
}

Split split_of(const std::string& id) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h % 5 == 0 ? Split::Val : Split::Train;
}

std::vector<IndexEntry> read_index(const std::filesystem::path& root) {
  const auto path = root / kIndexFile;
  std::ifstream in(path);
  if (!in) throw ConfigError("missing index file: " + path.string());
  std::vector<IndexEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected image<TAB>depth");
    }
    IndexEntry e;
    e.image = root / line.substr(0, tab);
    e.depth = root / line.substr(tab + 1);
    e.id = e.image.stem().string();
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_index(const std::filesystem::path& root, const std::vector<IndexEntry>& entries) {
  const auto path = root / kIndexFile;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  // Entries may hold root-relative paths or paths under root.
  const auto rel = [&root](const std::filesystem::path& p) {
    return (p.is_absolute() || p.string().rfind(root.string(), 0) == 0 ? std::filesystem::relative(p, root) : p)
        .generic_string();
  };
  for (const auto& e : entries) out << rel(e.image) << '\t' << rel(e.depth) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<IndexEntry> select_split(const std::vector<IndexEntry>& entries, Split split) {
  if (split == Split::All) return entries;
  std::vector<IndexEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [split](const IndexEntry& e) { return split_of(e.id) == split; });
  return out;
}

std::vector<Sample> load_dataset(const std::filesystem::path& root, Split split) {
  const auto entries = select_split(read_index(root), split);
  if (entries.empty()) throw EmptyInputError("dataset split is empty under " + root.string());
  std::vector<Sample> samples;
  samples.reserve(entries.size());
  for (const auto& e : entries) samples.push_back(load_sample(e.image, e.depth));
  return samples;
}

BatchIterator::BatchIterator(const std::vector<Sample>& samples, std::size_t batch_size,
                             std::optional<std::uint64_t> shuffle_seed)
    : samples_(&samples), batch_size_(batch_size), order_(samples.size()) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(order_.begin(), order_.end(), rng);
  }
}

std::vector<const Sample*> BatchIterator::next() {
  std::vector<const Sample*> batch;
  const std::size_t end = std::min(order_.size(), next_ + batch_size_);
  for (; next_ < end; ++next_) batch.push_back(&(*samples_)[order_[next_]]);
  return batch;
}

std::size_t BatchIterator::batch_count() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

DatasetIterator::DatasetIterator(const std::filesystem::path& root, Split split, std::size_t batch_size,
                                 std::optional<std::uint64_t> shuffle_seed)
    : samples_(load_dataset(root, split)), batches_(samples_, batch_size, shuffle_seed) {}

}  // namespace sharpdepth::data
