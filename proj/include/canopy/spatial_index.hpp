#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "canopy/geometry.hpp"

namespace canopy {

struct Neighbor {
  std::uint32_t index = 0;
  double squared_distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Uniform-grid index over a fixed point set for exact nearest-neighbour and
/// radius queries. Results are ordered by (distance, index), so equal
/// distances resolve to the lower index.
class PointGrid {
 public:
  /// cell_size <= 0 picks a size giving a few points per occupied cell.
  explicit PointGrid(std::span<const Vec3> points, double cell_size = 0.0);

  /// The k nearest points to `query`, skipping index `exclude` if given.
  /// Returns fewer than k only when the set holds fewer candidates.
  void nearest(const Vec3& query, std::size_t k, std::vector<Neighbor>& out,
               std::optional<std::uint32_t> exclude = std::nullopt) const;

  /// Indices with distance <= radius, ascending.
  void within(const Vec3& query, double radius, std::vector<std::uint32_t>& out) const;

  std::size_t size() const { return points_.size(); }
  double cell_size() const { return cell_; }

 private:
  std::size_t cell_index(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return (static_cast<std::size_t>(k) * ny_ + static_cast<std::size_t>(j)) * nx_ +
           static_cast<std::size_t>(i);
  }
  std::int64_t axis_cell(double v, double origin, std::int64_t n) const;

  std::span<const Vec3> points_;
  Vec3 origin_;
  double cell_ = 1.0;
  std::int64_t nx_ = 1, ny_ = 1, nz_ = 1;
  std::vector<std::uint32_t> cell_start_;  // nx*ny*nz + 1 offsets into order_
  std::vector<std::uint32_t> order_;
};

}  // namespace canopy
