#include "canopy/canopy.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "canopy/cloud_io.hpp"
#include "canopy/error.hpp"
#include "canopy/eval.hpp"
#include "canopy/geom_kernels.hpp"
#include "canopy/ground_filter.hpp"
#include "canopy/run_config.hpp"
#include "canopy/tree_detector.hpp"
#include "canopy/voxel_grid.hpp"
#include "json.hpp"

struct canopy_config {
  canopy::RunConfig value;
};
struct canopy_cloud {
  canopy::PointCloud value;
};
struct canopy_raster {
  canopy::Raster value;
};
struct canopy_grid {
  canopy::SparseVoxelGrid value;
};
struct canopy_trees {
  std::vector<canopy::TreeRegion> value;
};
struct canopy_index_lists {
  std::vector<std::vector<std::uint32_t>> value;
};

namespace {

thread_local std::string g_last_error;

canopy_status status_of(canopy::ErrorKind kind) {
  using canopy::ErrorKind;
  switch (kind) {
    case ErrorKind::Argument: return CANOPY_ERR_ARGUMENT;
    case ErrorKind::Parse: return CANOPY_ERR_PARSE;
    case ErrorKind::Validation: return CANOPY_ERR_VALIDATION;
    case ErrorKind::Format: return CANOPY_ERR_FORMAT;
    case ErrorKind::Truncated: return CANOPY_ERR_TRUNCATED;
    case ErrorKind::Unsupported: return CANOPY_ERR_UNSUPPORTED;
    case ErrorKind::Io: return CANOPY_ERR_IO;
    case ErrorKind::Config: return CANOPY_ERR_CONFIG;
  }
  return CANOPY_ERR_INTERNAL;
}

template <typename Fn>
canopy_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return CANOPY_OK;
  } catch (const canopy::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return CANOPY_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) canopy::throw_argument(what);
}

std::ofstream open_output(const char* path) {
  require(path != nullptr, "null output path");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw canopy::Error(canopy::ErrorKind::Io, std::string("cannot open ") + path + " for writing");
  return out;
}

std::ifstream open_input(const char* path) {
  require(path != nullptr, "null input path");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw canopy::Error(canopy::ErrorKind::Io, std::string("cannot open ") + path);
  return in;
}

void finish(std::ofstream& out, const char* path) {
  out.flush();
  if (!out) throw canopy::Error(canopy::ErrorKind::Io, std::string("failed writing ") + path);
}

canopy_eval_report to_c(const canopy::EvalReport& r) {
  return {r.counts.tp, r.counts.fp, r.counts.fn, r.precision, r.recall, r.f_score};
}

std::vector<canopy::Vec2> to_stems(const double* xy, std::size_t n) {
  require(xy != nullptr || n == 0, "null stem array");
  std::vector<canopy::Vec2> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {xy[2 * i], xy[2 * i + 1]};
  return out;
}

}  // namespace

extern "C" {

const char* canopy_version(void) { return "1.0.0"; }

const char* canopy_last_error(void) { return g_last_error.c_str(); }

const char* canopy_status_string(canopy_status status) {
  switch (status) {
    case CANOPY_OK: return "ok";
    case CANOPY_ERR_ARGUMENT: return "argument error";
    case CANOPY_ERR_PARSE: return "parse error";
    case CANOPY_ERR_VALIDATION: return "validation error";
    case CANOPY_ERR_FORMAT: return "format error";
    case CANOPY_ERR_TRUNCATED: return "truncation error";
    case CANOPY_ERR_UNSUPPORTED: return "unsupported format";
    case CANOPY_ERR_IO: return "i/o error";
    case CANOPY_ERR_CONFIG: return "config error";
    case CANOPY_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

canopy_status canopy_config_create(canopy_config** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new canopy_config{};
  });
}

canopy_status canopy_config_load(const char* path, canopy_config** out) {
  return guarded([&] {
    require(out != nullptr && path != nullptr, "null argument");
    *out = new canopy_config{canopy::RunConfig::load(path)};
  });
}

canopy_status canopy_config_set(canopy_config* config, const char* key, const char* json_value) {
  return guarded([&] {
    require(config && key && json_value, "null argument");
    config->value.set(key, json_value);
  });
}

canopy_status canopy_config_get(const canopy_config* config, const char* key, double* out) {
  return guarded([&] {
    require(config && key && out, "null argument");
    const auto doc = nlohmann::json::parse(config->value.to_json());
    std::string pointer = "/" + std::string(key);
    for (auto& c : pointer) {
      if (c == '.') c = '/';
    }
    const auto ptr = nlohmann::json::json_pointer(pointer);
    if (!doc.contains(ptr) || !doc[ptr].is_number()) {
      throw canopy::Error(canopy::ErrorKind::Config, std::string("no numeric field ") + key);
    }
    *out = doc[ptr].get<double>();
  });
}

void canopy_config_free(canopy_config* config) { delete config; }

canopy_status canopy_cloud_read(const char* path, canopy_cloud** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new canopy_cloud{canopy::read_cloud_file(path)};
  });
}

canopy_status canopy_cloud_write_text(const canopy_cloud* cloud, const char* path) {
  return guarded([&] {
    require(cloud != nullptr, "null cloud");
    auto out = open_output(path);
    canopy::write_text_cloud(cloud->value, out);
    finish(out, path);
  });
}

size_t canopy_cloud_size(const canopy_cloud* cloud) { return cloud ? cloud->value.size() : 0; }

canopy_status canopy_cloud_positions(const canopy_cloud* cloud, double* xyz, size_t capacity) {
  return guarded([&] {
    require(cloud && xyz, "null argument");
    const std::size_t n = std::min(capacity, cloud->value.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = cloud->value.position(i);
      xyz[3 * i] = p.x;
      xyz[3 * i + 1] = p.y;
      xyz[3 * i + 2] = p.z;
    }
  });
}

void canopy_cloud_free(canopy_cloud* cloud) { delete cloud; }

canopy_status canopy_ground_filter(const canopy_cloud* cloud, const canopy_config* config,
                                   unsigned threads, uint8_t* ground, uint8_t* outlier) {
  return guarded([&] {
    require(cloud && config, "null argument");
    const auto& c = cloud->value;
    if (ground) {
      const auto mask = canopy::pmf_ground_mask(c, config->value.pmf);
      for (std::size_t i = 0; i < c.size(); ++i) ground[i] = mask.flags[i] ? 1 : 0;
    }
    if (outlier) {
      const auto mask = canopy::statistical_outlier_mask(c, config->value.sor, threads);
      for (std::size_t i = 0; i < c.size(); ++i) outlier[i] = mask[i] ? 1 : 0;
    }
  });
}

canopy_status canopy_voxelize(const canopy_cloud* cloud, const canopy_config* config,
                              unsigned threads, canopy_grid** out) {
  return guarded([&] {
    require(cloud && config && out, "null argument");
    const auto spec = config->value.grid.resolve(cloud->value);
    *out = new canopy_grid{canopy::voxelize(cloud->value, spec, threads)};
  });
}

size_t canopy_grid_occupied(const canopy_grid* grid) { return grid ? grid->value.occupied_count() : 0; }

uint64_t canopy_grid_dropped(const canopy_grid* grid) { return grid ? grid->value.dropped() : 0; }

size_t canopy_grid_occupancy_bytes(const canopy_grid* grid) {
  return grid ? grid->value.occupancy_bytes() : 0;
}

canopy_status canopy_grid_is_occupied(const canopy_grid* grid, uint32_t i, uint32_t j, uint32_t k,
                                      int* occupied) {
  return guarded([&] {
    require(grid && occupied, "null argument");
    *occupied = grid->value.is_occupied({i, j, k}) ? 1 : 0;
  });
}

canopy_status canopy_grid_write(const canopy_grid* grid, const char* path) {
  return guarded([&] {
    require(grid != nullptr, "null grid");
    auto out = open_output(path);
    grid->value.write(out);
    finish(out, path);
  });
}

canopy_status canopy_grid_read(const char* path, canopy_grid** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    auto in = open_input(path);
    *out = new canopy_grid{canopy::SparseVoxelGrid::read(in)};
  });
}

void canopy_grid_free(canopy_grid* grid) { delete grid; }

canopy_status canopy_density(const canopy_cloud* cloud, double cell_size, unsigned threads,
                             canopy_raster** out) {
  return guarded([&] {
    require(cloud && out, "null argument");
    *out = new canopy_raster{canopy::density_map(cloud->value, cell_size, threads)};
  });
}

canopy_status canopy_raster_read(const char* path, canopy_raster** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    auto in = open_input(path);
    *out = new canopy_raster{canopy::read_raster_csv(in)};
  });
}

canopy_status canopy_raster_write_csv(const canopy_raster* raster, const char* path) {
  return guarded([&] {
    require(raster != nullptr, "null raster");
    auto out = open_output(path);
    canopy::write_raster_csv(raster->value, out);
    finish(out, path);
  });
}

canopy_status canopy_raster_write_pgm(const canopy_raster* raster, const char* path) {
  return guarded([&] {
    require(raster != nullptr, "null raster");
    auto out = open_output(path);
    canopy::write_raster_pgm(raster->value, out);
    finish(out, path);
  });
}

size_t canopy_raster_width(const canopy_raster* r) { return r ? r->value.width() : 0; }
size_t canopy_raster_height(const canopy_raster* r) { return r ? r->value.height() : 0; }
size_t canopy_raster_bands(const canopy_raster* r) { return r ? r->value.band_count() : 0; }

canopy_status canopy_raster_value(const canopy_raster* raster, size_t col, size_t row, size_t band,
                                  double* out) {
  return guarded([&] {
    require(raster && out, "null argument");
    const auto& r = raster->value;
    require(col < r.width() && row < r.height() && band < r.band_count(), "cell out of range");
    *out = r.at(col, row, band);
  });
}

void canopy_raster_free(canopy_raster* raster) { delete raster; }

canopy_status canopy_fuse_spectral(const canopy_cloud* cloud, const canopy_raster* raster,
                                   canopy_cloud** out) {
  return guarded([&] {
    require(cloud && raster && out, "null argument");
    *out = new canopy_cloud{canopy::fuse_spectral(cloud->value, raster->value)};
  });
}

canopy_status canopy_detect(const canopy_cloud* cloud, const canopy_config* config,
                            unsigned threads, canopy_trees** out) {
  return guarded([&] {
    require(cloud && config && out, "null argument");
    const auto& cfg = config->value;
    const auto spec = cfg.grid.resolve(cloud->value);
    *out = new canopy_trees{
        canopy::detect_trees(cloud->value, spec, cfg.pmf, cfg.sor, cfg.detector, threads)};
  });
}

size_t canopy_trees_count(const canopy_trees* trees) { return trees ? trees->value.size() : 0; }

canopy_status canopy_trees_get(const canopy_trees* trees, size_t index, canopy_tree_info* out) {
  return guarded([&] {
    require(trees && out, "null argument");
    require(index < trees->value.size(), "tree index out of range");
    const auto& t = trees->value[index];
    *out = {t.stem.x,          t.stem.y,          t.trunk_box.min.x, t.trunk_box.min.y,
            t.trunk_box.min.z, t.trunk_box.max.x, t.trunk_box.max.y, t.trunk_box.max.z,
            t.size};
  });
}

canopy_status canopy_trees_write_csv(const canopy_trees* trees, const char* path) {
  return guarded([&] {
    require(trees != nullptr, "null trees");
    auto out = open_output(path);
    canopy::write_tree_csv(trees->value, out);
    finish(out, path);
  });
}

void canopy_trees_free(canopy_trees* trees) { delete trees; }

canopy_status canopy_stems_read(const char* path, double** xy, size_t* count) {
  return guarded([&] {
    require(xy && count, "null argument");
    auto in = open_input(path);
    const auto stems = canopy::read_stem_csv(in);
    auto* buf = static_cast<double*>(std::malloc(std::max<std::size_t>(1, stems.size()) * 2 * sizeof(double)));
    if (!buf) throw std::bad_alloc();
    for (std::size_t i = 0; i < stems.size(); ++i) {
      buf[2 * i] = stems[i].x;
      buf[2 * i + 1] = stems[i].y;
    }
    *xy = buf;
    *count = stems.size();
  });
}

void canopy_buffer_free(void* buffer) { std::free(buffer); }

canopy_status canopy_evaluate_stems(const double* predicted_xy, size_t predicted_count,
                                    const double* truth_xy, size_t truth_count, double radius,
                                    canopy_eval_report* out) {
  return guarded([&] {
    require(out != nullptr, "null report");
    const auto pred = to_stems(predicted_xy, predicted_count);
    const auto truth = to_stems(truth_xy, truth_count);
    *out = to_c(canopy::prf(canopy::match_stems(pred, truth, radius).counts));
  });
}

canopy_status canopy_evaluate_masks(const uint8_t* predicted, const uint8_t* truth, size_t count,
                                    canopy_eval_report* out) {
  return guarded([&] {
    require(out != nullptr && ((predicted && truth) || count == 0), "null argument");
    std::vector<bool> p(count), t(count);
    for (std::size_t i = 0; i < count; ++i) {
      p[i] = predicted[i] != 0;
      t[i] = truth[i] != 0;
    }
    *out = to_c(canopy::prf(canopy::mask_eval(p, t)));
  });
}

canopy_status canopy_report_format(const canopy_eval_report* report, int csv, char* buf,
                                   size_t capacity, size_t* needed) {
  return guarded([&] {
    require(report != nullptr, "null report");
    canopy::EvalReport r;
    r.counts = {report->tp, report->fp, report->fn};
    r.precision = report->precision;
    r.recall = report->recall;
    r.f_score = report->f_score;
    std::ostringstream out;
    if (csv) {
      canopy::write_report_csv(r, out);
    } else {
      canopy::write_report_text(r, out);
    }
    const std::string text = out.str();
    if (needed) *needed = text.size();
    if (buf && capacity > 0) {
      const std::size_t n = std::min(capacity - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

canopy_status canopy_sample_blocks(const canopy_cloud* cloud, double block_size,
                                   size_t points_per_block, size_t block_count, uint64_t seed,
                                   canopy_index_lists** out) {
  return guarded([&] {
    require(cloud && out, "null argument");
    if (block_count == 0) block_count = canopy::default_block_count(cloud->value, block_size);
    *out = new canopy_index_lists{
        canopy::sample_blocks(cloud->value, block_size, points_per_block, block_count, seed)};
  });
}

canopy_status canopy_farthest_point_sampling(const canopy_cloud* cloud, const uint32_t* subset,
                                             size_t subset_count, size_t m, uint32_t* out) {
  return guarded([&] {
    require(cloud && out, "null argument");
    require(subset != nullptr || subset_count == 0, "null subset");
    std::vector<canopy::Vec3> points;
    if (subset) {
      points.reserve(subset_count);
      for (std::size_t i = 0; i < subset_count; ++i) {
        require(subset[i] < cloud->value.size(), "subset index out of range");
        points.push_back(cloud->value.position(subset[i]));
      }
    } else {
      points = cloud->value.positions();
    }
    const auto picked = canopy::farthest_point_sampling(points, m, 0);
    for (std::size_t i = 0; i < picked.size(); ++i) out[i] = subset ? subset[picked[i]] : picked[i];
  });
}

size_t canopy_index_lists_count(const canopy_index_lists* lists) {
  return lists ? lists->value.size() : 0;
}

canopy_status canopy_index_lists_get(const canopy_index_lists* lists, size_t index,
                                     const uint32_t** data, size_t* length) {
  return guarded([&] {
    require(lists && data && length, "null argument");
    require(index < lists->value.size(), "list index out of range");
    *data = lists->value[index].data();
    *length = lists->value[index].size();
  });
}

void canopy_index_lists_free(canopy_index_lists* lists) { delete lists; }

}  // extern "C"
