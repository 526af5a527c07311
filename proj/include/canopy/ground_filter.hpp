#pragma once

#include <cstddef>
#include <vector>

#include "canopy/cloud.hpp"

namespace canopy {

/// Progressive morphological filter settings. Window radii grow as
/// window_base^k cells while the full window side (2r+1)*cell_size stays
/// within max_window.
struct PmfParams {
  double cell_size = 1.0;
  double max_window = 40.0;
  double max_distance = 3.5;
  double initial_distance = 0.5;
  double slope = 1.0;
  int window_base = 2;

  void validate() const;
};

struct SorParams {
  int k = 8;
  double sigma_mult = 2.0;

  void validate() const;
};

struct GroundMask {
  std::vector<bool> flags;         // true = ground
  std::size_t retained_count = 0;  // points not flagged
};

/// Per-cell minimum z on a grid anchored at the cloud's minimum x/y. Empty
/// cells take the value of the nearest non-empty cell (Euclidean distance in
/// cell units, ties to the lowest row-major index).
Raster grid_min_surface(const PointCloud& cloud, double cell_size);

/// Grey-scale opening: windowed minimum then windowed maximum over a
/// (2r+1)^2 square, truncated at the raster edges.
Raster morphological_open(const Raster& surface, int window_radius);

/// One stage of the filter schedule.
struct PmfStage {
  int radius = 0;         // cells
  double threshold = 0;   // metres
};
std::vector<PmfStage> pmf_schedule(const PmfParams& params);

GroundMask pmf_ground_mask(const PointCloud& cloud, const PmfParams& params);

/// true = outlier. A point is an outlier when the mean distance to its k
/// nearest neighbours exceeds mean + sigma_mult * stddev of that statistic.
std::vector<bool> statistical_outlier_mask(const PointCloud& cloud, const SorParams& params,
                                           unsigned threads = 1);

}  // namespace canopy
