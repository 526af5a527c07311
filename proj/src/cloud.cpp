#include "canopy/cloud.hpp"

#include <cmath>
#include <string>

#include "canopy/error.hpp"

namespace canopy {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Argument: return "argument error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Truncated: return "truncation error";
    case ErrorKind::Unsupported: return "unsupported format";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Config: return "config error";
  }
  return "error";
}

void validate(const PointRecord& r) {
  if (!std::isfinite(r.x) || !std::isfinite(r.y) || !std::isfinite(r.z)) {
    throw Error(ErrorKind::Validation, "non-finite coordinate");
  }
  if (!(r.intensity >= 0.0) || !std::isfinite(r.intensity)) {
    throw Error(ErrorKind::Validation, "intensity must be a finite non-negative value");
  }
  if (r.return_number < 1 || r.number_of_returns < 1) {
    throw Error(ErrorKind::Validation, "return_number and number_of_returns must be >= 1");
  }
  if (r.return_number > r.number_of_returns) {
    throw Error(ErrorKind::Validation, "return_number " + std::to_string(r.return_number) +
                                           " exceeds number_of_returns " +
                                           std::to_string(r.number_of_returns));
  }
  if (r.spectral) {
    for (double v : {r.spectral->ir, r.spectral->r, r.spectral->g}) {
      if (!(v >= 0.0 && v <= 255.0)) {
        throw Error(ErrorKind::Validation, "spectral band value outside [0, 255]");
      }
    }
  }
}

void PointCloud::append(const PointRecord& r) {
  validate(r);
  if (r.spectral.has_value() != has_spectral_) {
    throw Error(ErrorKind::Validation, has_spectral_ ? "point lacks spectral bands"
                                                     : "cloud has no spectral bands");
  }
  x_.push_back(r.x);
  y_.push_back(r.y);
  z_.push_back(r.z);
  intensity_.push_back(r.intensity);
  return_number_.push_back(r.return_number);
  number_of_returns_.push_back(r.number_of_returns);
  classification_.push_back(r.classification);
  if (has_spectral_) {
    ir_.push_back(r.spectral->ir);
    red_.push_back(r.spectral->r);
    green_.push_back(r.spectral->g);
  }
  if (bounds_) {
    bounds_->expand(r.position());
  } else {
    bounds_ = Box3::around(r.position());
  }
}

void PointCloud::reserve(std::size_t n) {
  x_.reserve(n);
  y_.reserve(n);
  z_.reserve(n);
  intensity_.reserve(n);
  return_number_.reserve(n);
  number_of_returns_.reserve(n);
  classification_.reserve(n);
  if (has_spectral_) {
    ir_.reserve(n);
    red_.reserve(n);
    green_.reserve(n);
  }
}

PointRecord PointCloud::record(std::size_t i) const {
  PointRecord r;
  r.x = x_[i];
  r.y = y_[i];
  r.z = z_[i];
  r.intensity = intensity_[i];
  r.return_number = return_number_[i];
  r.number_of_returns = number_of_returns_[i];
  r.classification = classification_[i];
  if (has_spectral_) r.spectral = Spectral{ir_[i], red_[i], green_[i]};
  return r;
}

std::vector<Vec3> PointCloud::positions() const {
  std::vector<Vec3> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = position(i);
  return out;
}

PointCloud PointCloud::without(const std::vector<bool>& drop) const {
  if (drop.size() != size()) throw_argument("mask length does not match point count");
  PointCloud out(has_spectral_);
  for (std::size_t i = 0; i < size(); ++i) {
    if (!drop[i]) out.append(record(i));
  }
  return out;
}

PointCloud PointCloud::subset(std::span<const std::uint32_t> indices) const {
  PointCloud out(has_spectral_);
  out.reserve(indices.size());
  for (std::uint32_t i : indices) {
    if (i >= size()) throw_argument("subset index out of range");
    out.append(record(i));
  }
  return out;
}

Raster::Raster(Vec2 origin, double cell_size, std::size_t width, std::size_t height,
               std::size_t bands, double fill)
    : origin_(origin), cell_size_(cell_size), width_(width), height_(height), bands_(bands) {
  if (!(cell_size > 0.0)) throw_argument("raster cell_size must be > 0");
  if (bands == 0) throw_argument("raster needs at least one band");
  values_.assign(width * height * bands, fill);
}

std::size_t cells_spanning(double extent, double cell_size) {
  if (!(extent > 0.0)) return 1;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(extent / cell_size)));
}

std::size_t clamped_cell(double offset, double cell_size, std::size_t count) {
  if (count == 0) return 0;
  const double f = std::floor(offset / cell_size);
  if (f < 0.0) return 0;
  if (f >= static_cast<double>(count)) return count - 1;
  return static_cast<std::size_t>(f);
}

std::size_t Raster::column_of(double x) const { return clamped_cell(x - origin_.x, cell_size_, width_); }

std::size_t Raster::row_of(double y) const { return clamped_cell(y - origin_.y, cell_size_, height_); }

}  // namespace canopy
