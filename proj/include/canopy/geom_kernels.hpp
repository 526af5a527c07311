#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "canopy/cloud.hpp"
#include "canopy/geometry.hpp"

namespace canopy {

/// Sampling/grouping settings of one set-abstraction level: N_l centroids,
/// ball radius r, K points per group, d coordinate and C feature channels.
struct KernelConfig {
  std::size_t n_centroids = 1024;
  double radius = 1.5;
  std::size_t group_size = 32;
  std::size_t coord_dim = 3;
  std::size_t feature_dim = 3;

  void validate(std::size_t point_count) const;
};

/// Greedy max-min selection. Element 0 is start_index; each further index
/// maximises the distance to the nearest already-selected point, ties to the
/// lowest index.
std::vector<std::uint32_t> farthest_point_sampling(std::span<const Vec3> points, std::size_t m,
                                                   std::uint32_t start_index = 0);

/// Per centroid: indices within `radius` in ascending order, truncated to K.
/// Short groups are padded with their first index; a centroid with nothing in
/// range gets an empty group.
std::vector<std::vector<std::uint32_t>> ball_query(std::span<const Vec3> points,
                                                   std::span<const Vec3> centroids, double radius,
                                                   std::size_t group_size, unsigned threads = 1);

inline constexpr double kIdwEpsilon = 1e-8;

/// Inverse-distance weighted mean over the k nearest sources. `features` is
/// row-major (sources x feature_dim); the result is (queries x feature_dim).
std::vector<double> idw_interpolate(std::span<const Vec3> sources, std::span<const double> features,
                                    std::size_t feature_dim, std::span<const Vec3> queries,
                                    std::size_t k = 3, unsigned threads = 1);

/// `block_count` square footprints of side block_size placed uniformly in
/// the cloud's x-y bounds, each yielding n_points indices of points inside
/// it (with replacement only when the block holds fewer). Deterministic in
/// the seed. A block_size exceeding the cloud in both axes gives one block.
std::vector<std::vector<std::uint32_t>> sample_blocks(const PointCloud& cloud, double block_size,
                                                      std::size_t n_points,
                                                      std::size_t block_count,
                                                      std::uint64_t seed);

/// One block per block_size^2 of x-y footprint, rounded up, at least 1.
std::size_t default_block_count(const PointCloud& cloud, double block_size);

/// w_c = max_i(S_i) / S_c.
std::vector<double> class_weights(std::span<const std::uint64_t> counts);

/// w_c * (-o_c + log sum_j exp(o_j)), evaluated with the maximum logit
/// factored out.
double weighted_cross_entropy(std::span<const double> logits, std::size_t target,
                              std::span<const double> weights);

/// Dense (channels x depth x height x width) volume.
struct Volume {
  std::size_t channels = 0, depth = 0, height = 0, width = 0;
  std::vector<double> data;

  Volume() = default;
  Volume(std::size_t c, std::size_t d, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), depth(d), height(h), width(w), data(c * d * h * w, fill) {}

  double& at(std::size_t c, std::size_t z, std::size_t y, std::size_t x) {
    return data[((c * depth + z) * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t z, std::size_t y, std::size_t x) const {
    return data[((c * depth + z) * height + y) * width + x];
  }
};

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::array<std::size_t, 3> kernel = {1, 1, 1};  // depth, height, width
  std::size_t stride = 1;
  /// (out x in x kd x kh x kw), row-major.
  std::vector<double> weights;

  double weight(std::size_t n, std::size_t m, std::size_t a, std::size_t b, std::size_t c) const {
    return weights[(((n * in_channels + m) * kernel[0] + a) * kernel[1] + b) * kernel[2] + c];
  }
};

/// Valid (unpadded) strided 3D cross-correlation summed over input channels.
Volume conv3d_forward(const Volume& input, const ConvSpec& spec);

}  // namespace canopy
