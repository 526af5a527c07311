#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "canopy/cloud.hpp"
#include "canopy/geometry.hpp"

namespace canopy {

struct VoxelIndex {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t k = 0;

  friend auto operator<=>(const VoxelIndex&, const VoxelIndex&) = default;
};

using GridDims = std::array<std::uint32_t, 3>;

struct GridSpec {
  Vec3 origin;
  double resolution = 100.0 / 256.0;
  GridDims dims = {256, 256, 256};

  /// A square tile of `tile_size` metres split into `cells` voxels per axis.
  static GridSpec tile(const Vec3& origin, double tile_size = 100.0, std::uint32_t cells = 256);

  void validate() const;
  std::uint64_t voxel_count() const {
    return std::uint64_t{dims[0]} * dims[1] * dims[2];
  }
  bool contains(const VoxelIndex& v) const {
    return v.i < dims[0] && v.j < dims[1] && v.k < dims[2];
  }

  /// floor((p - origin) / resolution) per axis. Points exactly on the far
  /// boundary join the last voxel; anything else outside yields nullopt.
  std::optional<VoxelIndex> locate(const Vec3& p) const;

  /// Lexicographic (i, then j, then k) linear key.
  std::uint64_t linear(const VoxelIndex& v) const {
    return (std::uint64_t{v.i} * dims[1] + v.j) * dims[2] + v.k;
  }
  VoxelIndex from_linear(std::uint64_t key) const {
    const auto k = static_cast<std::uint32_t>(key % dims[2]);
    key /= dims[2];
    return {static_cast<std::uint32_t>(key / dims[1]), static_cast<std::uint32_t>(key % dims[1]), k};
  }
  Vec3 voxel_min(const VoxelIndex& v) const {
    return {origin.x + v.i * resolution, origin.y + v.j * resolution, origin.z + v.k * resolution};
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct VoxelPayload {
  std::uint32_t max_returns = 0;
  double mean_intensity = 0.0;
  std::uint32_t point_count = 0;

  friend bool operator==(const VoxelPayload&, const VoxelPayload&) = default;
};

using OccupiedVoxel = std::pair<VoxelIndex, VoxelPayload>;

/// Sparse occupancy grid stored as a 4x4x4-branching bit tree: one 64-bit
/// word per internal node, one bit per child. Level 0 is the root word; the
/// words of level d+1 appear in the order of the set bits of level d. Only
/// occupied subtrees get words. Payloads live in a table sorted by voxel.
class SparseVoxelGrid {
 public:
  SparseVoxelGrid() = default;

  /// `voxels` must be sorted by index with no duplicates.
  SparseVoxelGrid(const GridSpec& spec, std::vector<OccupiedVoxel> voxels,
                  std::uint64_t dropped = 0);

  const GridSpec& spec() const { return spec_; }
  int levels() const { return static_cast<int>(words_.size()); }
  std::span<const std::uint64_t> level_words(int level) const { return words_[level]; }

  /// Walks the bit tree. Throws ErrorKind::Argument outside dims.
  bool is_occupied(const VoxelIndex& v) const;
  const VoxelPayload* payload(const VoxelIndex& v) const;

  /// Every occupied voxel once, in lexicographic order.
  const std::vector<OccupiedVoxel>& occupied_voxels() const { return voxels_; }
  std::size_t occupied_count() const { return voxels_.size(); }

  /// Points that fell outside the grid during voxelize.
  std::uint64_t dropped() const { return dropped_; }

  /// Bytes held by occupancy words across all levels.
  std::size_t occupancy_bytes() const;

  /// Voxels reachable by walking the bit tree, sorted; equals the payload
  /// key set for a well-formed grid.
  std::vector<VoxelIndex> decode_hierarchy() const;

  /// Binary dump: "SVG1", origin (3 f64), resolution (f64), dims (3 u32),
  /// level count (u32), per level a u64 word count and the words, then a
  /// u64 payload count and per payload i, j, k, max_returns, point_count
  /// (u32 each) and mean_intensity (f64). All little-endian.
  void write(std::ostream& out) const;
  static SparseVoxelGrid read(std::istream& in);

  friend bool operator==(const SparseVoxelGrid& a, const SparseVoxelGrid& b) {
    return a.spec_ == b.spec_ && a.words_ == b.words_ && a.voxels_ == b.voxels_;
  }

 private:
  std::uint64_t path_code(const VoxelIndex& v) const;
  void build_hierarchy();

  GridSpec spec_;
  std::vector<std::vector<std::uint64_t>> words_;
  std::vector<std::vector<std::uint32_t>> rank_;  // set bits before each word, per level
  std::vector<OccupiedVoxel> voxels_;
  std::uint64_t dropped_ = 0;
};

/// Levels of the bit tree for the given dims: smallest L with 4^L >= max dim.
int hierarchy_levels(const GridDims& dims);

/// Bins points into voxels. Payload aggregation: max of number_of_returns,
/// mean of intensity, point count. Out-of-grid points are counted, not kept.
SparseVoxelGrid voxelize(const PointCloud& cloud, const GridSpec& spec, unsigned threads = 1);

enum class Connectivity : int { Face = 6, Edge = 18, Corner = 26 };

/// Throws ErrorKind::Argument unless value is 6, 18 or 26.
Connectivity connectivity_from(int value);

/// In-bounds neighbours of v: 6 share a face, 18 a face or edge, 26 any
/// contact. Ordered lexicographically.
std::vector<VoxelIndex> neighbors(const VoxelIndex& v, Connectivity connectivity,
                                  const GridDims& dims);

}  // namespace canopy
