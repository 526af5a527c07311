#pragma once

#include <filesystem>
#include <iosfwd>

#include "canopy/cloud.hpp"

namespace canopy {

/// Whitespace-separated text cloud. First line is the header
/// `x y z intensity return_number number_of_returns classification [ir r g]`.
PointCloud read_text_cloud(std::istream& in);

/// Coordinates with 6 decimals, return counts and class as integers,
/// intensity and spectral bands in shortest round-trip form.
void write_text_cloud(const PointCloud& cloud, std::ostream& out);

/// Uncompressed little-endian LAS 1.2, point record formats 0 to 3.
PointCloud read_las(std::istream& in);

/// Dispatches on the first four bytes: "LASF" selects LAS, anything else text.
PointCloud read_cloud_file(const std::filesystem::path& path);
void write_text_cloud_file(const PointCloud& cloud, const std::filesystem::path& path);

/// Assigns IR-R-G to each point by bilinear interpolation between the four
/// surrounding cell centres of a 3-band raster. Queries outside the raster
/// clamp to the edge cells.
PointCloud fuse_spectral(const PointCloud& cloud, const Raster& raster);

/// Single-band point density in points per square metre, anchored at the
/// cloud's minimum x/y. An empty cloud yields a 0x0 raster.
Raster density_map(const PointCloud& cloud, double cell_size, unsigned threads = 1);

/// Raster text form: one `# raster origin_x origin_y cell_size width height bands`
/// line, then `bands * height` comma-separated rows of `width` values.
void write_raster_csv(const Raster& raster, std::ostream& out);
Raster read_raster_csv(std::istream& in);

/// Plain PGM (P2), band 0 scaled linearly onto 0..65535, north-up. The
/// scale is recorded in a `# scale min=<v> max=<v>` comment.
void write_raster_pgm(const Raster& raster, std::ostream& out);

}  // namespace canopy
