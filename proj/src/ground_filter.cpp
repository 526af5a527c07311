#include "canopy/ground_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "canopy/error.hpp"
#include "canopy/parallel.hpp"
#include "canopy/spatial_index.hpp"

namespace canopy {

void PmfParams::validate() const {
  if (!(cell_size > 0.0)) throw_argument("pmf.cell_size must be > 0");
  if (!(max_distance >= 0.0)) throw_argument("pmf.max_distance must be >= 0");
  if (!(initial_distance >= 0.0)) throw_argument("pmf.initial_distance must be >= 0");
  if (initial_distance > max_distance) {
    throw_argument("pmf.initial_distance must not exceed pmf.max_distance");
  }
  if (!(max_window >= cell_size)) throw_argument("pmf.max_window must be >= pmf.cell_size");
  if (!(slope >= 0.0)) throw_argument("pmf.slope must be >= 0");
  if (window_base < 2) throw_argument("pmf.window_base must be >= 2");
}

void SorParams::validate() const {
  if (k < 1) throw_argument("sor.k must be >= 1");
  if (!(sigma_mult > 0.0)) throw_argument("sor.sigma_mult must be > 0");
}

namespace {

void fill_empty_cells(Raster& surface, const std::vector<bool>& filled) {
  const auto w = static_cast<std::int64_t>(surface.width());
  const auto h = static_cast<std::int64_t>(surface.height());
  const Raster source = surface;
  for (std::int64_t row = 0; row < h; ++row) {
    for (std::int64_t col = 0; col < w; ++col) {
      if (filled[row * w + col]) continue;
      std::int64_t best_d2 = std::numeric_limits<std::int64_t>::max();
      std::int64_t best = -1;
      const std::int64_t max_ring = std::max(w, h);
      for (std::int64_t ring = 1; ring <= max_ring; ++ring) {
        if (best >= 0 && ring * ring > best_d2) break;
        for (std::int64_t dr = -ring; dr <= ring; ++dr) {
          const std::int64_t r = row + dr;
          if (r < 0 || r >= h) continue;
          const bool edge_row = std::abs(dr) == ring;
          for (std::int64_t dc = -ring; dc <= ring; dc += edge_row ? 1 : 2 * ring) {
            const std::int64_t c = col + dc;
            if (c < 0 || c >= w || !filled[r * w + c]) continue;
            const std::int64_t d2 = dr * dr + dc * dc;
            const std::int64_t idx = r * w + c;
            if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
              best_d2 = d2;
              best = idx;
            }
          }
        }
      }
      surface.at(col, row) = source.band(0)[best];
    }
  }
}

// Windowed min or max along rows then columns. A square window is separable,
// and truncation at the edges stays exact because each pass truncates.
Raster window_extreme(const Raster& in, int radius, bool take_min) {
  const std::size_t w = in.width();
  const std::size_t h = in.height();
  const auto pick = [take_min](double a, double b) { return take_min ? std::min(a, b) : std::max(a, b); };
  const auto r = static_cast<std::size_t>(radius);
  Raster rows = in;
  for (std::size_t row = 0; row < h; ++row) {
    for (std::size_t col = 0; col < w; ++col) {
      const std::size_t lo = col >= r ? col - r : 0;
      const std::size_t hi = std::min(w - 1, col + r);
      double v = in.at(lo, row);
      for (std::size_t c = lo + 1; c <= hi; ++c) v = pick(v, in.at(c, row));
      rows.at(col, row) = v;
    }
  }
  Raster out = rows;
  for (std::size_t row = 0; row < h; ++row) {
    const std::size_t lo = row >= r ? row - r : 0;
    const std::size_t hi = std::min(h - 1, row + r);
    for (std::size_t col = 0; col < w; ++col) {
      double v = rows.at(col, lo);
      for (std::size_t rr = lo + 1; rr <= hi; ++rr) v = pick(v, rows.at(col, rr));
      out.at(col, row) = v;
    }
  }
  return out;
}

}  // namespace

Raster grid_min_surface(const PointCloud& cloud, double cell_size) {
  if (cloud.empty()) throw_argument("grid_min_surface needs a non-empty cloud");
  if (!(cell_size > 0.0)) throw_argument("cell_size must be > 0");
  const Box3 box = *cloud.bounds();
  const std::size_t w = cells_spanning(box.max.x - box.min.x, cell_size);
  const std::size_t h = cells_spanning(box.max.y - box.min.y, cell_size);
  Raster surface({box.min.x, box.min.y}, cell_size, w, h, 1,
                 std::numeric_limits<double>::infinity());
  std::vector<bool> filled(w * h, false);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::size_t col = surface.column_of(cloud.x()[i]);
    const std::size_t row = surface.row_of(cloud.y()[i]);
    double& cell = surface.at(col, row);
    cell = std::min(cell, cloud.z()[i]);
    filled[row * w + col] = true;
  }
  if (std::find(filled.begin(), filled.end(), false) != filled.end()) {
    fill_empty_cells(surface, filled);
  }
  return surface;
}

Raster morphological_open(const Raster& surface, int window_radius) {
  if (window_radius < 0) throw_argument("window_radius must be >= 0");
  if (window_radius == 0 || surface.empty()) return surface;
  return window_extreme(window_extreme(surface, window_radius, true), window_radius, false);
}

std::vector<PmfStage> pmf_schedule(const PmfParams& params) {
  params.validate();
  std::vector<PmfStage> stages;
  long radius = 1;
  long previous_side = 0;
  while ((2.0 * static_cast<double>(radius) + 1.0) * params.cell_size <= params.max_window) {
    const long side = 2 * radius + 1;
    double threshold = params.initial_distance;
    if (!stages.empty()) {
      threshold += params.slope * static_cast<double>(side - previous_side) * params.cell_size;
    }
    stages.push_back({static_cast<int>(radius), std::min(threshold, params.max_distance)});
    previous_side = side;
    if (radius > (1L << 24)) break;
    radius *= params.window_base;
  }
  return stages;
}

GroundMask pmf_ground_mask(const PointCloud& cloud, const PmfParams& params) {
  if (cloud.empty()) throw_argument("pmf_ground_mask needs a non-empty cloud");
  const auto stages = pmf_schedule(params);

  Raster surface = grid_min_surface(cloud, params.cell_size);
  std::vector<bool> non_ground_cell(surface.cell_count(), false);
  double final_threshold = params.initial_distance;
  for (const auto& stage : stages) {
    Raster opened = morphological_open(surface, stage.radius);
    const auto before = surface.band(0);
    const auto after = opened.band(0);
    for (std::size_t c = 0; c < before.size(); ++c) {
      if (before[c] - after[c] > stage.threshold) non_ground_cell[c] = true;
    }
    surface = std::move(opened);
    final_threshold = stage.threshold;
  }

  GroundMask mask;
  mask.flags.assign(cloud.size(), false);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::size_t col = surface.column_of(cloud.x()[i]);
    const std::size_t row = surface.row_of(cloud.y()[i]);
    const bool ground = !non_ground_cell[row * surface.width() + col] &&
                        cloud.z()[i] - surface.at(col, row) <= final_threshold;
    mask.flags[i] = ground;
    if (!ground) ++mask.retained_count;
  }
  return mask;
}

std::vector<bool> statistical_outlier_mask(const PointCloud& cloud, const SorParams& params,
                                           unsigned threads) {
  params.validate();
  const auto k = static_cast<std::size_t>(params.k);
  if (cloud.size() <= k) {
    throw_argument("statistical outlier removal needs more than k=" + std::to_string(k) +
                   " points, got " + std::to_string(cloud.size()));
  }
  const auto points = cloud.positions();
  const PointGrid index(points);
  std::vector<double> mean_dist(points.size());
  parallel_chunks(points.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<Neighbor> nn;
    for (std::size_t i = begin; i < end; ++i) {
      index.nearest(points[i], k, nn, static_cast<std::uint32_t>(i));
      double sum = 0.0;
      for (const auto& n : nn) sum += std::sqrt(n.squared_distance);
      mean_dist[i] = sum / static_cast<double>(nn.size());
    }
  });

  // Summing in sorted order keeps the statistic independent of input order.
  std::vector<double> sorted = mean_dist;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  const double mu = sum / n;
  double ss = 0.0;
  for (double v : sorted) ss += (v - mu) * (v - mu);
  const double sigma = std::sqrt(ss / (n - 1.0));
  const double limit = mu + params.sigma_mult * sigma;

  std::vector<bool> outlier(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) outlier[i] = mean_dist[i] > limit;
  return outlier;
}

}  // namespace canopy
