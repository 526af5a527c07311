// canopy: batch front end over the C interface.
//
// Exit codes: 0 success, 1 a stage failed, 2 bad arguments or config.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "canopy/canopy.h"

namespace fs = std::filesystem;

namespace {

constexpr int kStageFailure = 1;
constexpr int kUsageFailure = 2;

struct Failure {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, std::string message) { throw Failure{code, std::move(message)}; }

// Turns a non-OK status into a Failure carrying the library's message.
void check(canopy_status s, int code, const std::string& context) {
  if (s == CANOPY_OK) return;
  fail(code, context + ": " + canopy_last_error());
}
void stage(canopy_status s, const std::string& context) { check(s, kStageFailure, context); }

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<canopy_config, Deleter<canopy_config, canopy_config_free>>;
using Cloud = std::unique_ptr<canopy_cloud, Deleter<canopy_cloud, canopy_cloud_free>>;
using Grid = std::unique_ptr<canopy_grid, Deleter<canopy_grid, canopy_grid_free>>;
using RasterPtr = std::unique_ptr<canopy_raster, Deleter<canopy_raster, canopy_raster_free>>;
using Trees = std::unique_ptr<canopy_trees, Deleter<canopy_trees, canopy_trees_free>>;
using Lists = std::unique_ptr<canopy_index_lists, Deleter<canopy_index_lists, canopy_index_lists_free>>;

struct Options {
  std::string config;
  std::string output;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<std::string> overrides;  // section.field=json

  std::string input;
  std::string second;  // raster for fuse, truth for evaluate
  std::optional<double> cell_size;
  std::optional<double> radius;
  std::optional<double> block_size;
  std::optional<std::size_t> points;
  std::optional<std::size_t> blocks;
  std::optional<std::size_t> fps;
};

void set_field(canopy_config* cfg, const std::string& key, const std::string& json) {
  check(canopy_config_set(cfg, key.c_str(), json.c_str()), kUsageFailure, "config");
}

template <typename T>
void set_field(canopy_config* cfg, const std::string& key, const std::optional<T>& v) {
  if (!v) return;
  char buf[64];
  if constexpr (std::is_floating_point_v<T>) {
    std::snprintf(buf, sizeof buf, "%.17g", *v);
  } else {
    std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(*v));
  }
  set_field(cfg, key, std::string(buf));
}

double get_field(const canopy_config* cfg, const char* key) {
  double v = 0;
  check(canopy_config_get(cfg, key, &v), kUsageFailure, "config");
  return v;
}

// Config file first, then --set overrides, then dedicated flags.
Config load_config(const Options& o) {
  canopy_config* raw = nullptr;
  if (o.config.empty()) {
    check(canopy_config_create(&raw), kUsageFailure, "config");
  } else {
    if (!fs::exists(o.config)) fail(kUsageFailure, "config file not found: " + o.config);
    check(canopy_config_load(o.config.c_str(), &raw), kUsageFailure, "config " + o.config);
  }
  Config cfg(raw);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(kUsageFailure, "--set expects section.field=value, got '" + kv + "'");
    set_field(cfg.get(), kv.substr(0, eq), kv.substr(eq + 1));
  }
  set_field(cfg.get(), "density.cell_size", o.cell_size);
  set_field(cfg.get(), "eval.radius", o.radius);
  set_field(cfg.get(), "sampling.block_size", o.block_size);
  set_field(cfg.get(), "sampling.block_points", o.points);
  set_field(cfg.get(), "sampling.block_count", o.blocks);
  set_field(cfg.get(), "sampling.fps_points", o.fps);
  return cfg;
}

void require_input(const std::string& path) {
  if (path.empty()) fail(kUsageFailure, "no input given");
  if (!fs::exists(path)) fail(kUsageFailure, "input not found: " + path);
}

Cloud read_cloud(const std::string& path) {
  canopy_cloud* c = nullptr;
  stage(canopy_cloud_read(path.c_str(), &c), "reading " + path);
  spdlog::debug("read {} points from {}", canopy_cloud_size(c), path);
  return Cloud(c);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(kStageFailure, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) fail(kStageFailure, "failed writing " + path.string());
}

std::string replace_extension(const std::string& path, const char* ext) {
  return fs::path(path).replace_extension(ext).string();
}

// One tile of a per-file command: reads `input`, writes `output`, returns
// the summary text.
using TileJob = std::string (*)(const canopy_config*, const Options&, const std::string& input,
                                const std::string& output, unsigned threads);

std::string run_detect(const canopy_config* cfg, const Options&, const std::string& in,
                       const std::string& out, unsigned threads) {
  const Cloud cloud = read_cloud(in);
  canopy_trees* raw = nullptr;
  stage(canopy_detect(cloud.get(), cfg, threads, &raw), "detect " + in);
  const Trees trees(raw);
  stage(canopy_trees_write_csv(trees.get(), out.c_str()), "writing trees");
  return "trees=" + std::to_string(canopy_trees_count(trees.get()));
}

std::string run_ground(const canopy_config* cfg, const Options&, const std::string& in,
                       const std::string& out, unsigned threads) {
  const Cloud cloud = read_cloud(in);
  const std::size_t n = canopy_cloud_size(cloud.get());
  std::vector<std::uint8_t> ground(n), outlier(n);
  stage(canopy_ground_filter(cloud.get(), cfg, threads, ground.data(), outlier.data()),
        "ground filter " + in);
  // 1 marks a point removed by this step: ground or noise.
  std::string text;
  text.reserve(2 * n);
  std::size_t g = 0, o = 0;
  for (std::size_t i = 0; i < n; ++i) {
    g += ground[i];
    o += outlier[i];
    text += (ground[i] || outlier[i]) ? "1\n" : "0\n";
  }
  write_text(out, text);
  return "ground=" + std::to_string(g) + " outliers=" + std::to_string(o);
}

std::string run_voxelize(const canopy_config* cfg, const Options&, const std::string& in,
                         const std::string& out, unsigned threads) {
  const Cloud cloud = read_cloud(in);
  canopy_grid* raw = nullptr;
  stage(canopy_voxelize(cloud.get(), cfg, threads, &raw), "voxelize " + in);
  const Grid grid(raw);
  stage(canopy_grid_write(grid.get(), out.c_str()), "writing grid");
  return "occupied=" + std::to_string(canopy_grid_occupied(grid.get())) +
         " dropped=" + std::to_string(canopy_grid_dropped(grid.get()));
}

std::string run_density(const canopy_config* cfg, const Options&, const std::string& in,
                        const std::string& out, unsigned threads) {
  const Cloud cloud = read_cloud(in);
  canopy_raster* raw = nullptr;
  const double cell = get_field(cfg, "density.cell_size");
  stage(canopy_density(cloud.get(), cell, threads, &raw), "density " + in);
  const RasterPtr raster(raw);
  stage(canopy_raster_write_csv(raster.get(), out.c_str()), "writing raster");
  const auto pgm = replace_extension(out, ".pgm");
  stage(canopy_raster_write_pgm(raster.get(), pgm.c_str()), "writing raster");
  return "cells=" + std::to_string(canopy_raster_width(raster.get())) + "x" +
         std::to_string(canopy_raster_height(raster.get()));
}

const char* extension_for(TileJob job) {
  if (job == run_voxelize) return ".svg";
  if (job == run_ground) return ".mask";
  return ".csv";
}

int run_tiles(TileJob job, const Options& o) {
  require_input(o.input);
  if (o.output.empty()) fail(kUsageFailure, "--output is required");
  const Config cfg = load_config(o);

  if (!fs::is_directory(o.input)) {
    std::printf("%s\n", job(cfg.get(), o, o.input, o.output, o.threads).c_str());
    return 0;
  }

  std::vector<fs::path> tiles;
  for (const auto& e : fs::directory_iterator(o.input)) {
    if (e.is_regular_file()) tiles.push_back(e.path());
  }
  std::sort(tiles.begin(), tiles.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  std::error_code ec;
  fs::create_directories(o.output, ec);
  if (!fs::is_directory(o.output)) fail(kStageFailure, "cannot create output directory " + o.output);

  const unsigned workers = std::max(1u, std::min<unsigned>(o.threads, static_cast<unsigned>(tiles.size())));
  const unsigned per_tile = std::max(1u, o.threads / workers);
  std::vector<std::string> lines(tiles.size());
  std::vector<std::optional<Failure>> failures(tiles.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tiles.size(); t = next++) {
      const auto out = (fs::path(o.output) / tiles[t].stem()).string() + extension_for(job);
      try {
        lines[t] = tiles[t].filename().string() + " " + job(cfg.get(), o, tiles[t].string(), out, per_tile);
      } catch (const Failure& f) {
        failures[t] = f;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  int code = 0;
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    if (failures[t]) {
      spdlog::error("{}: {}", tiles[t].filename().string(), failures[t]->message);
      code = std::max(code, failures[t]->code);
    } else {
      std::printf("%s\n", lines[t].c_str());
    }
  }
  return code;
}

int run_evaluate(const Options& o) {
  require_input(o.input);
  require_input(o.second);
  const Config cfg = load_config(o);
  const double radius = get_field(cfg.get(), "eval.radius");

  struct Stems {
    double* xy = nullptr;
    std::size_t n = 0;
    ~Stems() { canopy_buffer_free(xy); }
  } pred, truth;
  stage(canopy_stems_read(o.input.c_str(), &pred.xy, &pred.n), "reading " + o.input);
  stage(canopy_stems_read(o.second.c_str(), &truth.xy, &truth.n), "reading " + o.second);
  canopy_eval_report report{};
  stage(canopy_evaluate_stems(pred.xy, pred.n, truth.xy, truth.n, radius, &report), "evaluate");

  std::size_t needed = 0;
  stage(canopy_report_format(&report, 1, nullptr, 0, &needed), "report");
  std::string csv(needed + 1, '\0');
  stage(canopy_report_format(&report, 1, csv.data(), csv.size(), &needed), "report");
  csv.resize(needed);
  if (!o.output.empty()) write_text(o.output, csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int run_fuse(const Options& o) {
  require_input(o.input);
  require_input(o.second);
  if (o.output.empty()) fail(kUsageFailure, "--output is required");
  const Config cfg = load_config(o);
  const Cloud cloud = read_cloud(o.input);
  canopy_raster* raw = nullptr;
  stage(canopy_raster_read(o.second.c_str(), &raw), "reading " + o.second);
  const RasterPtr raster(raw);
  canopy_cloud* fused = nullptr;
  stage(canopy_fuse_spectral(cloud.get(), raster.get(), &fused), "fuse");
  const Cloud result(fused);
  stage(canopy_cloud_write_text(result.get(), o.output.c_str()), "writing cloud");
  std::printf("points=%zu\n", canopy_cloud_size(result.get()));
  return 0;
}

int run_sample(const Options& o) {
  require_input(o.input);
  if (o.output.empty()) fail(kUsageFailure, "--output is required");
  const Config cfg = load_config(o);
  const double block_size = get_field(cfg.get(), "sampling.block_size");
  const auto points = static_cast<std::size_t>(get_field(cfg.get(), "sampling.block_points"));
  const auto count = static_cast<std::size_t>(get_field(cfg.get(), "sampling.block_count"));
  const auto fps = static_cast<std::size_t>(get_field(cfg.get(), "sampling.fps_points"));

  const Cloud cloud = read_cloud(o.input);
  canopy_index_lists* raw = nullptr;
  stage(canopy_sample_blocks(cloud.get(), block_size, points, count, o.seed, &raw), "sample");
  const Lists lists(raw);

  std::string text;
  std::vector<std::uint32_t> picked;
  const std::size_t n = canopy_index_lists_count(lists.get());
  for (std::size_t b = 0; b < n; ++b) {
    const std::uint32_t* data = nullptr;
    std::size_t len = 0;
    stage(canopy_index_lists_get(lists.get(), b, &data, &len), "sample");
    const std::uint32_t* row = data;
    if (fps > 0) {
      picked.assign(fps, 0);
      stage(canopy_farthest_point_sampling(cloud.get(), data, len, fps, picked.data()),
            "farthest point sampling");
      row = picked.data();
      len = fps;
    }
    for (std::size_t i = 0; i < len; ++i) {
      if (i) text += ' ';
      text += std::to_string(row[i]);
    }
    text += '\n';
  }
  write_text(o.output, text);
  std::printf("blocks=%zu\n", n);
  return 0;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("canopy");
  logger->set_pattern("canopy: %l: %v");
  logger->set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CANOPY_LOG")) {
    const std::string level(env);
    if (level == "error") logger->set_level(spdlog::level::err);
    else if (level == "warn") logger->set_level(spdlog::level::warn);
    else if (level == "info") logger->set_level(spdlog::level::info);
    else if (level == "debug") logger->set_level(spdlog::level::debug);
    else logger->warn("ignoring CANOPY_LOG={}, expected error|warn|info|debug", level);
  }
  spdlog::set_default_logger(logger);
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("-o,--output", o.output, "Output path (directory when the input is one)");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  cmd->add_option("--set", o.overrides, "Override a config field: section.field=value");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  Options o;
  CLI::App app{"Airborne LiDAR tree detection and dataset tools"};
  app.require_subcommand(1);

  auto* detect = app.add_subcommand("detect", "Detect trees; writes a tree CSV");
  auto* ground = app.add_subcommand("ground", "Ground and outlier mask, one 0/1 per point");
  auto* voxelize = app.add_subcommand("voxelize", "Write a sparse voxel grid dump");
  auto* density = app.add_subcommand("density", "Point density raster as CSV and PGM");
  auto* evaluate = app.add_subcommand("evaluate", "Score predicted stems against truth");
  auto* fuse = app.add_subcommand("fuse", "Attach IR-R-G bands from a 3-band raster");
  auto* sample = app.add_subcommand("sample", "Draw training blocks, optionally thinned by FPS");

  for (auto* cmd : {detect, ground, voxelize, density, evaluate, fuse, sample}) add_common(cmd, o);
  for (auto* cmd : {detect, ground, voxelize, density, fuse, sample}) {
    cmd->add_option("input", o.input, "Point cloud (text or LAS) or a directory of tiles")->required();
  }
  density->add_option("--cell-size", o.cell_size, "Cell size in metres");
  evaluate->add_option("predicted", o.input, "Predicted stems CSV")->required();
  evaluate->add_option("truth", o.second, "Ground-truth stems CSV")->required();
  evaluate->add_option("--radius", o.radius, "Match radius in metres");
  fuse->add_option("raster", o.second, "3-band raster CSV")->required();
  sample->add_option("--block-size", o.block_size, "Block side in metres");
  sample->add_option("--points", o.points, "Points per block");
  sample->add_option("--blocks", o.blocks, "Number of blocks (0: by footprint)");
  sample->add_option("--fps", o.fps, "Thin each block to this many points by FPS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageFailure;
  }

  try {
    if (detect->parsed()) return run_tiles(run_detect, o);
    if (ground->parsed()) return run_tiles(run_ground, o);
    if (voxelize->parsed()) return run_tiles(run_voxelize, o);
    if (density->parsed()) return run_tiles(run_density, o);
    if (evaluate->parsed()) return run_evaluate(o);
    if (fuse->parsed()) return run_fuse(o);
    if (sample->parsed()) return run_sample(o);
  } catch (const Failure& f) {
    spdlog::error("{}", f.message);
    return f.code;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kStageFailure;
  }
  return kUsageFailure;
}
