#include "canopy/geom_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "canopy/error.hpp"
#include "canopy/parallel.hpp"
#include "canopy/spatial_index.hpp"

namespace canopy {
namespace {

// Explicit conversions keep sampling identical across standard libraries;
// only the mt19937_64 engine itself is pinned by the standard.
double unit_real(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

}  // namespace

void KernelConfig::validate(std::size_t point_count) const {
  if (n_centroids > point_count) {
    throw_argument("kernel.n_centroids (" + std::to_string(n_centroids) +
                   ") exceeds point count " + std::to_string(point_count));
  }
  if (group_size < 1) throw_argument("kernel.group_size must be >= 1");
  if (!(radius > 0.0)) throw_argument("kernel.radius must be > 0");
  if (coord_dim != 3) throw_argument("kernel.coord_dim must be 3");
}

std::vector<std::uint32_t> farthest_point_sampling(std::span<const Vec3> points, std::size_t m,
                                                   std::uint32_t start_index) {
  if (m < 1) throw_argument("farthest_point_sampling needs m >= 1");
  if (m > points.size()) {
    throw_argument("cannot sample " + std::to_string(m) + " of " + std::to_string(points.size()) +
                   " points");
  }
  if (start_index >= points.size()) throw_argument("start_index out of range");

  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  std::vector<std::uint32_t> selected;
  selected.reserve(m);
  std::uint32_t current = start_index;
  selected.push_back(current);
  while (selected.size() < m) {
    const Vec3 anchor = points[current];
    std::uint32_t best = 0;
    double best_d = -1.0;
    for (std::uint32_t i = 0; i < points.size(); ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], anchor));
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    current = best;
    selected.push_back(current);
  }
  return selected;
}

std::vector<std::vector<std::uint32_t>> ball_query(std::span<const Vec3> points,
                                                   std::span<const Vec3> centroids, double radius,
                                                   std::size_t group_size, unsigned threads) {
  if (!(radius > 0.0)) throw_argument("ball_query radius must be > 0");
  if (group_size < 1) throw_argument("ball_query group size must be >= 1");
  const PointGrid index(points);
  std::vector<std::vector<std::uint32_t>> groups(centroids.size());
  parallel_chunks(centroids.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> hits;
    for (std::size_t c = begin; c < end; ++c) {
      index.within(centroids[c], radius, hits);
      if (hits.empty()) continue;
      auto& g = groups[c];
      g.assign(hits.begin(), hits.begin() + std::min(hits.size(), group_size));
      g.resize(group_size, hits.front());
    }
  });
  return groups;
}

std::vector<double> idw_interpolate(std::span<const Vec3> sources, std::span<const double> features,
                                    std::size_t feature_dim, std::span<const Vec3> queries,
                                    std::size_t k, unsigned threads) {
  if (k < 1) throw_argument("idw needs k >= 1");
  if (sources.size() < k) {
    throw_argument("idw needs at least k=" + std::to_string(k) + " sources, got " +
                   std::to_string(sources.size()));
  }
  if (feature_dim < 1 || features.size() != sources.size() * feature_dim) {
    throw_argument("feature array must hold sources x feature_dim values");
  }
  const PointGrid index(sources);
  std::vector<double> out(queries.size() * feature_dim, 0.0);
  parallel_chunks(queries.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<Neighbor> nn;
    for (std::size_t q = begin; q < end; ++q) {
      index.nearest(queries[q], k, nn);
      double* dst = out.data() + q * feature_dim;
      if (std::sqrt(nn.front().squared_distance) < kIdwEpsilon) {
        const double* src = features.data() + std::size_t{nn.front().index} * feature_dim;
        std::copy(src, src + feature_dim, dst);
        continue;
      }
      double total = 0.0;
      for (const auto& n : nn) {
        const double w = 1.0 / std::max(std::sqrt(n.squared_distance), kIdwEpsilon);
        total += w;
        const double* src = features.data() + std::size_t{n.index} * feature_dim;
        for (std::size_t f = 0; f < feature_dim; ++f) dst[f] += w * src[f];
      }
      for (std::size_t f = 0; f < feature_dim; ++f) dst[f] /= total;
    }
  });
  return out;
}

std::vector<std::vector<std::uint32_t>> sample_blocks(const PointCloud& cloud, double block_size,
                                                      std::size_t n_points,
                                                      std::size_t block_count,
                                                      std::uint64_t seed) {
  if (cloud.empty()) throw_argument("sample_blocks needs a non-empty cloud");
  if (!(block_size > 0.0)) throw_argument("block_size must be > 0");
  if (n_points < 1) throw_argument("n_points must be >= 1");
  const Box3 box = *cloud.bounds();
  const Vec3 ext = box.extent();
  const bool single = block_size > ext.x && block_size > ext.y;
  if (single) block_count = 1;

  std::mt19937_64 rng(seed);
  const auto xs = cloud.x();
  const auto ys = cloud.y();
  std::vector<std::vector<std::uint32_t>> blocks;
  std::vector<std::uint32_t> inside;
  constexpr int kAttempts = 64;
  for (std::size_t b = 0; b < block_count; ++b) {
    inside.clear();
    for (int attempt = 0; attempt < kAttempts && inside.empty(); ++attempt) {
      const double x0 = box.min.x + std::max(0.0, ext.x - block_size) * unit_real(rng);
      const double y0 = box.min.y + std::max(0.0, ext.y - block_size) * unit_real(rng);
      for (std::uint32_t i = 0; i < cloud.size(); ++i) {
        if (xs[i] >= x0 && xs[i] <= x0 + block_size && ys[i] >= y0 && ys[i] <= y0 + block_size) {
          inside.push_back(i);
        }
      }
    }
    if (inside.empty()) continue;

    std::vector<std::uint32_t> picked;
    picked.reserve(n_points);
    if (inside.size() >= n_points) {
      // Partial Fisher-Yates: first n_points of a uniform shuffle.
      for (std::size_t i = 0; i < n_points; ++i) {
        const std::size_t j = i + below(rng, inside.size() - i);
        std::swap(inside[i], inside[j]);
        picked.push_back(inside[i]);
      }
    } else {
      for (std::size_t i = 0; i < n_points; ++i) picked.push_back(inside[below(rng, inside.size())]);
    }
    blocks.push_back(std::move(picked));
  }
  return blocks;
}

std::size_t default_block_count(const PointCloud& cloud, double block_size) {
  if (!(block_size > 0.0)) throw_argument("block_size must be > 0");
  if (cloud.empty()) return 1;
  const Vec3 ext = cloud.bounds()->extent();
  const double blocks = std::ceil(ext.x * ext.y / (block_size * block_size));
  return std::max<std::size_t>(1, static_cast<std::size_t>(blocks));
}

std::vector<double> class_weights(std::span<const std::uint64_t> counts) {
  if (counts.size() < 2) throw_argument("class_weights needs at least 2 classes");
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw_argument("class " + std::to_string(c) + " has zero samples");
  }
  const double largest = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
  std::vector<double> w(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) w[c] = largest / static_cast<double>(counts[c]);
  return w;
}

double weighted_cross_entropy(std::span<const double> logits, std::size_t target,
                              std::span<const double> weights) {
  if (logits.empty()) throw_argument("no logits");
  if (weights.size() != logits.size()) throw_argument("weights and logits differ in length");
  if (target >= logits.size()) throw_argument("target class out of range");
  for (double o : logits) {
    if (!std::isfinite(o)) throw_argument("non-finite logit");
  }
  const auto top = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  const double m = logits[top];
  double rest = 0.0;  // sum over j != top of exp(o_j - m)
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (j != top) rest += std::exp(logits[j] - m);
  }
  return weights[target] * ((m - logits[target]) + std::log1p(rest));
}

Volume conv3d_forward(const Volume& input, const ConvSpec& spec) {
  if (spec.in_channels < 1 || spec.out_channels < 1) throw_argument("channel counts must be >= 1");
  if (spec.stride < 1) throw_argument("stride must be >= 1");
  if (input.channels != spec.in_channels) {
    throw_argument("input has " + std::to_string(input.channels) + " channels, kernel expects " +
                   std::to_string(spec.in_channels));
  }
  const auto [kd, kh, kw] = spec.kernel;
  if (kd < 1 || kh < 1 || kw < 1) throw_argument("kernel dims must be >= 1");
  if (kd > input.depth || kh > input.height || kw > input.width) {
    throw_argument("kernel larger than input");
  }
  if (spec.weights.size() != spec.out_channels * spec.in_channels * kd * kh * kw) {
    throw_argument("weight count does not match kernel geometry");
  }
  const std::size_t s = spec.stride;
  const std::size_t od = (input.depth - kd) / s + 1;
  const std::size_t oh = (input.height - kh) / s + 1;
  const std::size_t ow = (input.width - kw) / s + 1;
  Volume out(spec.out_channels, od, oh, ow);

  // Accumulate one kernel tap at a time across the whole output plane.
  for (std::size_t n = 0; n < spec.out_channels; ++n) {
    for (std::size_t m = 0; m < spec.in_channels; ++m) {
      for (std::size_t a = 0; a < kd; ++a) {
        for (std::size_t b = 0; b < kh; ++b) {
          for (std::size_t c = 0; c < kw; ++c) {
            const double w = spec.weight(n, m, a, b, c);
            if (w == 0.0) continue;
            for (std::size_t z = 0; z < od; ++z) {
              for (std::size_t y = 0; y < oh; ++y) {
                const double* row = &input.data[((m * input.depth + z * s + a) * input.height + y * s + b) *
                                                    input.width + c];
                double* dst = &out.at(n, z, y, 0);
                for (std::size_t x = 0; x < ow; ++x) dst[x] += w * row[x * s];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace canopy
