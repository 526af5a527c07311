#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "canopy/cloud.hpp"
#include "canopy/ground_filter.hpp"
#include "canopy/voxel_grid.hpp"

namespace canopy {

struct DetectorConfig {
  int ret_thresh = 3;
  int comp_threshold = 20;
  double aspect_limit = 2.0;
  Connectivity connectivity = Connectivity::Edge;

  void validate() const;
};

struct TreeRegion {
  std::vector<VoxelIndex> voxels;  // sorted
  std::size_t size = 0;
  VoxelIndex bbox_min;
  VoxelIndex bbox_max;
  Vec2 stem;      // metres
  Box3 trunk_box; // footprint x [ground elevation, canopy top]
};

/// Voxels whose max_returns is strictly greater than ret_thresh.
std::vector<VoxelIndex> filter_high_return_voxels(const SparseVoxelGrid& grid, int ret_thresh);

/// Maximal connected subsets under the adjacency. Each component is sorted;
/// components are ordered by their smallest member.
std::vector<std::vector<VoxelIndex>> connected_components(std::span<const VoxelIndex> voxels,
                                                          Connectivity connectivity,
                                                          const GridDims& dims);

/// Keeps components with size > comp_threshold whose x/y voxel extents have
/// max(ex/ey, ey/ex) < aspect_limit. The stem is the centre of the footprint.
std::vector<TreeRegion> extract_tree_regions(const std::vector<std::vector<VoxelIndex>>& components,
                                             const SparseVoxelGrid& grid,
                                             const DetectorConfig& config,
                                             double ground_elevation);

/// Full pipeline: ground filter, outlier removal, voxelize the remaining
/// points, threshold returns, label components, extract regions. Trunk boxes
/// start at the median ground z inside each footprint, or the tile-wide
/// median when the footprint holds no ground point.
std::vector<TreeRegion> detect_trees(const PointCloud& cloud, const GridSpec& spec,
                                     const PmfParams& pmf, const SorParams& sor,
                                     const DetectorConfig& config, unsigned threads = 1);

/// CSV `tree_id,stem_x,stem_y,min_x,min_y,max_x,max_y,max_z,size`.
void write_tree_csv(std::span<const TreeRegion> trees, std::ostream& out);

struct WindowExtent {
  VoxelIndex begin;
  GridDims size;

  bool contains(const VoxelIndex& v) const {
    return v.i >= begin.i && v.i < begin.i + size[0] && v.j >= begin.j &&
           v.j < begin.j + size[1] && v.k >= begin.k && v.k < begin.k + size[2];
  }
  friend bool operator==(const WindowExtent&, const WindowExtent&) = default;
};

/// Overlapping windows over x-y at the given strides; the last row and
/// column sit flush against the far boundary. Along z the windows stack
/// without overlap, also flush at the top.
std::vector<WindowExtent> sliding_windows(const GridDims& dims, const GridDims& window,
                                          std::uint32_t stride_x, std::uint32_t stride_y);

struct LabeledWindow {
  WindowExtent extent;
  bool positive = false;
};

class VoteField {
 public:
  VoteField() = default;
  explicit VoteField(const GridDims& dims);

  const GridDims& dims() const { return dims_; }
  std::uint32_t votes(const VoxelIndex& v) const { return votes_[offset(v)]; }
  std::uint32_t positives(const VoxelIndex& v) const { return positives_[offset(v)]; }
  /// positives / votes; absent where no window covers the voxel.
  std::optional<double> confidence(const VoxelIndex& v) const;

  void add(const WindowExtent& window, bool positive);

  /// CSV `i,j,k,votes,positives` over covered voxels, lexicographic order.
  void write_csv(std::ostream& out) const;

 private:
  std::size_t offset(const VoxelIndex& v) const {
    return (std::size_t{v.i} * dims_[1] + v.j) * dims_[2] + v.k;
  }

  GridDims dims_{};
  std::vector<std::uint32_t> votes_;
  std::vector<std::uint32_t> positives_;
};

struct VoteFusion {
  VoteField field;
  std::vector<VoxelIndex> positive;  // sorted
};

/// A voxel is positive when it is covered and positives/votes > threshold.
VoteFusion vote_fusion(std::span<const LabeledWindow> windows, const GridDims& dims,
                       double threshold = 0.4);

}  // namespace canopy
