#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "canopy/geometry.hpp"

namespace canopy {

/// Infrared, red and green in [0, 255].
struct Spectral {
  double ir = 0.0;
  double r = 0.0;
  double g = 0.0;

  friend bool operator==(const Spectral&, const Spectral&) = default;
};

struct PointRecord {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;
  std::uint8_t return_number = 1;
  std::uint8_t number_of_returns = 1;
  std::uint8_t classification = 0;
  std::optional<Spectral> spectral;

  Vec3 position() const { return {x, y, z}; }

  friend bool operator==(const PointRecord&, const PointRecord&) = default;
};

/// Throws ErrorKind::Validation when return_number is 0, exceeds
/// number_of_returns, or intensity/spectral values are out of range.
void validate(const PointRecord& record);

/// Columnar LiDAR point storage. Spectral bands are a cloud-wide property:
/// either every point carries them or none does.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(bool has_spectral) : has_spectral_(has_spectral) {}

  /// Appends after validation. A record whose spectral presence disagrees
  /// with the cloud's is rejected.
  void append(const PointRecord& record);
  void reserve(std::size_t n);

  std::size_t size() const { return x_.size(); }
  bool empty() const { return x_.empty(); }
  bool has_spectral() const { return has_spectral_; }

  /// Absent for an empty cloud.
  const std::optional<Box3>& bounds() const { return bounds_; }

  PointRecord record(std::size_t i) const;
  Vec3 position(std::size_t i) const { return {x_[i], y_[i], z_[i]}; }

  std::span<const double> x() const { return x_; }
  std::span<const double> y() const { return y_; }
  std::span<const double> z() const { return z_; }
  std::span<const double> intensity() const { return intensity_; }
  std::span<const std::uint8_t> return_number() const { return return_number_; }
  std::span<const std::uint8_t> number_of_returns() const { return number_of_returns_; }
  std::span<const std::uint8_t> classification() const { return classification_; }

  std::vector<Vec3> positions() const;

  /// Copy holding only the points whose flag is false.
  PointCloud without(const std::vector<bool>& drop) const;
  PointCloud subset(std::span<const std::uint32_t> indices) const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  bool has_spectral_ = false;
  std::vector<double> x_, y_, z_, intensity_;
  std::vector<std::uint8_t> return_number_, number_of_returns_, classification_;
  std::vector<double> ir_, red_, green_;
  std::optional<Box3> bounds_;
};

/// Regular 2D grid of one or more bands. Cell (col, row) spans
/// [origin.x + col*cell_size, origin.x + (col+1)*cell_size) and likewise in y;
/// row 0 is the minimum-y row.
class Raster {
 public:
  Raster() = default;
  Raster(Vec2 origin, double cell_size, std::size_t width, std::size_t height,
         std::size_t bands = 1, double fill = 0.0);

  Vec2 origin() const { return origin_; }
  double cell_size() const { return cell_size_; }
  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t band_count() const { return bands_; }
  std::size_t cell_count() const { return width_ * height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  double& at(std::size_t col, std::size_t row, std::size_t band = 0) {
    return values_[(band * height_ + row) * width_ + col];
  }
  double at(std::size_t col, std::size_t row, std::size_t band = 0) const {
    return values_[(band * height_ + row) * width_ + col];
  }

  std::span<double> band(std::size_t b) { return {values_.data() + b * cell_count(), cell_count()}; }
  std::span<const double> band(std::size_t b) const {
    return {values_.data() + b * cell_count(), cell_count()};
  }
  std::span<const double> values() const { return values_; }

  /// Half-open cell lookup; coordinates on or past the maximum edge fall into
  /// the last column/row, those below the minimum into the first.
  std::size_t column_of(double x) const;
  std::size_t row_of(double y) const;

  Vec2 cell_center(std::size_t col, std::size_t row) const {
    return {origin_.x + (static_cast<double>(col) + 0.5) * cell_size_,
            origin_.y + (static_cast<double>(row) + 0.5) * cell_size_};
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  Vec2 origin_;
  double cell_size_ = 1.0;
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t bands_ = 1;
  std::vector<double> values_;
};

/// Number of half-open cells of `cell_size` needed to tile `extent` (at least 1).
std::size_t cells_spanning(double extent, double cell_size);

/// Half-open cell index of `offset` within `count` cells, clamped to the grid.
std::size_t clamped_cell(double offset, double cell_size, std::size_t count);

}  // namespace canopy
