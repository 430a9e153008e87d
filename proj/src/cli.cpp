#include "sharpdepth/cli.hpp"

#include "sharpdepth/config.hpp"
#include "sharpdepth/data.hpp"
#include "sharpdepth/errors.hpp"
#include "sharpdepth/geometry.hpp"
#include "sharpdepth/io.hpp"
#include "sharpdepth/pipeline.hpp"
#include "sharpdepth/plot.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

namespace sharpdepth::cli {
namespace fs = std::filesystem;
namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

config::ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) {
    config::ExperimentConfig c;
    c.validate();
    return c;
  }
  return config::load_experiment(path);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string sample_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05zu", i);
  return buf;
}

CameraIntrinsics load_intrinsics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read intrinsics file " + path.string());
  config::Json j;
  try {
    j = config::Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed intrinsics JSON " + path.string() + ": " + e.what());
  }
  CameraIntrinsics k;
  for (auto [key, field] : {std::pair{"fx", &k.fx}, std::pair{"fy", &k.fy}, std::pair{"cx", &k.cx},
                            std::pair{"cy", &k.cy}}) {
    if (!j.contains(key)) throw ConfigError(std::string("intrinsics: missing key '") + key + "'");
    if (!j.at(key).is_number()) throw ConfigError(std::string("intrinsics: key '") + key + "' must be a number");
    *field = j.at(key).get<double>();
  }
  k.check();
  return k;
}

std::optional<std::vector<data::Sample>> try_load(const fs::path& root, data::Split split) {
  try {
    return data::load_dataset(root, split);
  } catch (const EmptyInputError&) {
    return std::nullopt;
  }
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::string out_dir;
  std::size_t count = 10;
  std::optional<std::uint64_t> seed;
};

CommandResult cmd_generate(const GenerateArgs& a, std::ostream& out) {
  auto cfg = load_config(a.config);
  if (a.seed) cfg.data.seed = *a.seed;
  const fs::path root(a.out_dir);
  make_dir(root / "images");
  make_dir(root / "depth");
  make_dir(root / "edges");
  CommandResult r;
  std::vector<data::IndexEntry> entries;
  for (std::size_t i = 0; i < a.count; ++i) {
    const std::string id = sample_name(i);
    auto scene_cfg = cfg.data;
    scene_cfg.seed = data::scene_seed(cfg.data.seed, i);
    const auto s = data::generate_scene(scene_cfg, id);
    data::IndexEntry e{root / "images" / (id + ".png"), root / "depth" / (id + ".pfm"), id};
    io::write_color_png(e.image, s.image);
    io::write_pfm(e.depth, s.depth);
    io::write_mask_png(root / "edges" / (id + ".png"), *s.edges);
    r.artifacts.insert(r.artifacts.end(), {e.image, e.depth, root / "edges" / (id + ".png")});
    entries.push_back(std::move(e));
  }
  data::write_index(root, entries);
  r.artifacts.push_back(root / data::kIndexFile);
  r.summary = "generated " + std::to_string(a.count) + " samples in " + root.string();
  out << r.summary << '\n';
  return r;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data_root;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

CommandResult cmd_train(const TrainArgs& a, std::ostream& out) {
  auto cfg = load_config(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  const fs::path root(a.data_root);
  data::read_index(root);  // reports a missing index before anything else
  const auto train_set = data::load_dataset(root, data::Split::Train);
  const auto val_set = try_load(root, data::Split::Val);

  pipeline::TrainOptions opts;
  opts.edge = cfg.edge;
  if (val_set) opts.val = &*val_set;
  opts.on_epoch = [&out](const pipeline::EpochRecord& rec) {
    out << "epoch " << rec.epoch << " lr " << rec.lr << " train_loss " << rec.train_loss;
    if (rec.val) out << " val_rmse " << rec.val->depth.rmse << " val_d1 " << rec.val->depth.delta1;
    out << '\n';
  };
  auto result = pipeline::train(cfg.train, cfg.model, cfg.loss, train_set, opts);

  const fs::path dir(a.out_dir);
  make_dir(dir);
  CommandResult r;
  result.checkpoint.save(dir / "checkpoint");
  write_text(dir / "history.csv", pipeline::history_csv(result.checkpoint.history));
  plot::write_loss_curve_png(dir / "loss_curve.png", result.step_losses);
  r.artifacts = {dir / "checkpoint", dir / "history.csv", dir / "loss_curve.png"};
  r.summary = "trained " + std::to_string(result.checkpoint.epoch) + " epochs, final train loss " +
              std::to_string(result.checkpoint.history.back().train_loss);
  out << r.summary << '\n';
  return r;
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string config;
  std::string checkpoint;
  std::string data_root;
  std::string thresholds = "0.25,0.5,1.0";
  std::string out;
  std::string split = "all";
  bool predict_identity = false;
  bool save_depth = false;
};

CommandResult cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  auto cfg = load_config(a.config);
  EdgeMetricConfig edge{config::parse_threshold_list(a.thresholds)};
  if (!a.predict_identity && a.checkpoint.empty()) throw ConfigError("--checkpoint is required unless --predict-identity");
  const auto dataset = data::load_dataset(a.data_root, data::parse_split(a.split));

  pipeline::EvalResult result;
  std::optional<pipeline::Checkpoint> ck;
  if (a.predict_identity) {
    result = pipeline::evaluate_identity(dataset, edge);
  } else {
    ck = pipeline::Checkpoint::load(a.checkpoint);
    result = pipeline::evaluate(ck->model, dataset, edge);
  }

  const fs::path dir(a.out);
  make_dir(dir);
  CommandResult r;
  write_text(dir / "metrics.csv", result.aggregate.csv_header() + "\n" + result.aggregate.csv_row() + "\n");
  write_text(dir / "metrics.json", result.aggregate.to_json() + "\n");
  write_text(dir / "per_sample.csv", result.per_sample_csv());
  r.artifacts = {dir / "metrics.csv", dir / "metrics.json", dir / "per_sample.csv"};
  if (a.save_depth) {
    make_dir(dir / "depth");
    for (const auto& s : dataset) {
      const DepthMap pred = ck ? pipeline::predict(ck->model, s) : s.depth;
      const auto path = dir / "depth" / (s.id + ".png");
      plot::write_depth_png(path, pred, cfg.viz.depth_min, cfg.viz.depth_max);
      r.artifacts.push_back(path);
    }
  }
  const auto& d = result.aggregate.depth;
  std::ostringstream os;
  os << "rmse " << d.rmse << " abs_rel " << d.abs_rel << " log10 " << d.log10 << " d1 " << d.delta1 << " d2 "
     << d.delta2 << " d3 " << d.delta3;
  for (const auto& [t, e] : result.aggregate.edge) {
    os << " | t=" << format_threshold(t) << " P " << e.precision << " R " << e.recall << " F1 " << e.f1;
  }
  r.summary = os.str();
  out << r.summary << '\n';
  return r;
}

// --- pointcloud -------------------------------------------------------------

struct PointcloudArgs {
  std::string depth;
  std::string image;
  std::string intrinsics;
  std::string out_ply;
  std::string gt;
  FlyingPixelOptions flying;
};

CommandResult cmd_pointcloud(const PointcloudArgs& a, std::ostream& out) {
  const auto k = load_intrinsics(a.intrinsics);
  const auto depth = io::read_depth(a.depth);
  std::optional<ColorImage> colors;
  if (!a.image.empty()) colors = io::read_color_png(a.image);
  const auto cloud = project_to_point_cloud(depth, k, colors);
  io::write_ply(a.out_ply, cloud);
  CommandResult r;
  r.artifacts = {a.out_ply};
  r.summary = "wrote " + std::to_string(cloud.size()) + " points to " + a.out_ply;
  out << r.summary << '\n';
  if (!a.gt.empty()) {
    const auto gt = io::read_depth(a.gt);
    try {
      const double score = flying_pixel_score(depth, gt, a.flying);
      out << "flying_pixel_score " << score << '\n';
      r.summary += "; flying_pixel_score " + std::to_string(score);
    } catch (const EmptyInputError&) {
      out << "flying_pixel_score n/a (ground truth has no edges)\n";
    }
  }
  return r;
}

// --- ablation ---------------------------------------------------------------

struct AblationArgs {
  std::string config;
  std::string data_root;
  std::string out_dir;
  std::string rows;
  std::optional<std::uint64_t> seed;
};

CommandResult cmd_ablation(const AblationArgs& a, std::ostream& out) {
  auto cfg = load_config(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  const auto rows = a.rows.empty() ? pipeline::ablation_row_names() : split_list(a.rows);
  for (const auto& r : rows) pipeline::ablation_toggles(r);
  const fs::path root(a.data_root);
  data::read_index(root);
  const auto train_set = data::load_dataset(root, data::Split::Train);
  const auto val_set = data::load_dataset(root, data::Split::Val);

  const auto table = pipeline::ablation_suite(cfg.train, cfg.model, cfg.loss, train_set, val_set, cfg.edge, rows);
  const fs::path dir(a.out_dir);
  make_dir(dir);
  CommandResult r;
  for (const auto& row : table) {
    const auto ck_dir = dir / "rows" / row.name;
    row.checkpoint->save(ck_dir);
    r.artifacts.push_back(ck_dir);
  }
  write_text(dir / "ablation.csv", pipeline::ablation_csv(table));
  const std::string text = pipeline::ablation_text_table(table);
  write_text(dir / "ablation.txt", text);
  r.artifacts.push_back(dir / "ablation.csv");
  r.artifacts.push_back(dir / "ablation.txt");
  out << text;
  r.summary = "ablation with " + std::to_string(table.size()) + " rows written to " + dir.string();
  out << r.summary << '\n';
  return r;
}

template <typename Fn>
CommandResult guarded(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return {kNumerical, {}, e.what()};
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return {kIo, {}, e.what()};
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return {kConfig, {}, e.what()};
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return {kInternal, {}, e.what()};
  }
}

}  // namespace

CommandResult run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sharpdepth: boundary-aware monocular depth estimation toolkit", "sharpdepth"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write synthetic sharp-boundary RGB-D samples and an index");
  g->add_option("--config", gen.config, "Experiment config JSON (data section)");
  g->add_option("--out-dir", gen.out_dir, "Output dataset root")->required();
  g->add_option("--count", gen.count, "Number of samples");
  g->add_option("--seed", gen.seed, "Override data.seed");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a depth network");
  t->add_option("--config", tr.config, "Experiment config JSON");
  t->add_option("--data-root", tr.data_root, "Dataset root containing index.tsv")->required();
  t->add_option("--out-dir", tr.out_dir, "Output directory")->required();
  t->add_option("--seed", tr.seed, "Override train.seed");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Compute depth and edge metrics");
  e->add_option("--config", ev.config, "Experiment config JSON (viz section)");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory");
  e->add_option("--data-root", ev.data_root, "Dataset root containing index.tsv")->required();
  e->add_option("--edge-thresholds", ev.thresholds, "Comma-separated Sobel magnitude thresholds");
  e->add_option("--out", ev.out, "Output directory for metrics.csv/json")->required();
  e->add_option("--split", ev.split, "all, train or val");
  e->add_flag("--predict-identity", ev.predict_identity, "Use ground truth as the prediction");
  e->add_flag("--save-depth-png", ev.save_depth, "Write colour-mapped predicted depth per sample");

  PointcloudArgs pc;
  auto* p = app.add_subcommand("pointcloud", "Project a depth map to an ASCII PLY point cloud");
  p->add_option("--depth", pc.depth, "Depth map (.pfm or 16-bit .png millimeters)")->required();
  p->add_option("--image", pc.image, "Optional RGB PNG for point colours");
  p->add_option("--intrinsics", pc.intrinsics, "JSON file with fx, fy, cx, cy")->required();
  p->add_option("--out-ply", pc.out_ply, "Output PLY path")->required();
  p->add_option("--gt", pc.gt, "Ground-truth depth; prints the flying-pixel score");
  p->add_option("--edge-band", pc.flying.edge_band, "Edge band radius in pixels");
  p->add_option("--margin", pc.flying.margin, "Depth margin in meters");
  p->add_option("--edge-threshold", pc.flying.edge_threshold, "GT Sobel magnitude edge threshold");

  AblationArgs ab;
  auto* a = app.add_subcommand("ablation", "Run the five-row module/loss ablation");
  a->add_option("--config", ab.config, "Experiment config JSON");
  a->add_option("--data-root", ab.data_root, "Dataset root containing index.tsv")->required();
  a->add_option("--out-dir", ab.out_dir, "Output directory")->required();
  a->add_option("--rows", ab.rows, "Subset of baseline,bad,bad_su_direct,su_st,full");
  a->add_option("--seed", ab.seed, "Override train.seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& ex) {
    out << app.help();
    return {kOk, {}, "help"};
  } catch (const CLI::CallForAllHelp& ex) {
    out << app.help("", CLI::AppFormatMode::All);
    return {kOk, {}, "help"};
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return {kConfig, {}, ex.what()};
  }

  pipeline::configure_from_environment();
  if (g->parsed()) return guarded([&] { return cmd_generate(gen, out); }, err);
  if (t->parsed()) return guarded([&] { return cmd_train(tr, out); }, err);
  if (e->parsed()) return guarded([&] { return cmd_evaluate(ev, out); }, err);
  if (p->parsed()) return guarded([&] { return cmd_pointcloud(pc, out); }, err);
  return guarded([&] { return cmd_ablation(ab, out); }, err);
}

}  // namespace sharpdepth::cli
