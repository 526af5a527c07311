#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "canopy/eval.hpp"
#include "canopy/geom_kernels.hpp"
#include "canopy/ground_filter.hpp"
#include "canopy/tree_detector.hpp"
#include "canopy/voxel_grid.hpp"

namespace canopy {

/// Grid placement for detect/voxelize. Without an explicit origin the grid
/// is anchored at the cloud's minimum corner.
struct GridSettings {
  double resolution = 100.0 / 256.0;
  GridDims dims = {256, 256, 256};
  std::optional<Vec3> origin;

  GridSpec resolve(const PointCloud& cloud) const;
};

struct SamplingSettings {
  double block_size = 15.0;
  std::size_t block_points = 4096;
  std::size_t block_count = 0;  // 0: one block per block_size^2 of footprint
  std::size_t fps_points = 0;   // 0: no furthest point sampling
};

/// Everything a CLI run can tune. Loaded from JSON with sections `pmf`,
/// `sor`, `grid`, `detector`, `kernel`, `sampling`, `density`, `eval`; every
/// key is optional and unknown keys are rejected.
struct RunConfig {
  PmfParams pmf;
  SorParams sor;
  GridSettings grid;
  DetectorConfig detector;
  KernelConfig kernel;
  SamplingSettings sampling;
  double density_cell_size = 1.0;
  double eval_radius = kStemMatchRadius;

  /// Throws ErrorKind::Config naming the offending field.
  static RunConfig from_json(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  /// Overrides one field, e.g. set("detector.comp_threshold", "30"). The
  /// value is JSON; the result is revalidated.
  void set(std::string_view dotted_key, std::string_view json_value);

  void validate() const;
  std::string to_json() const;
};

}  // namespace canopy
