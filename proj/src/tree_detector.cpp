#include "canopy/tree_detector.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_map>

#include "canopy/error.hpp"

namespace canopy {

void DetectorConfig::validate() const {
  if (ret_thresh < 0) throw_argument("detector.ret_thresh must be >= 0");
  if (comp_threshold < 1) throw_argument("detector.comp_threshold must be >= 1");
  if (!(aspect_limit > 1.0)) throw_argument("detector.aspect_limit must be > 1");
  connectivity_from(static_cast<int>(connectivity));
}

std::vector<VoxelIndex> filter_high_return_voxels(const SparseVoxelGrid& grid, int ret_thresh) {
  std::vector<VoxelIndex> out;
  for (const auto& [v, p] : grid.occupied_voxels()) {
    if (static_cast<std::int64_t>(p.max_returns) > ret_thresh) out.push_back(v);
  }
  return out;
}

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0u); }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // The smaller root wins so labels stay independent of union order.
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

double median_of(std::vector<double> values) {
  const std::size_t n = values.size();
  std::sort(values.begin(), values.end());
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void put_number(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 3);
  out.write(buf, ptr - buf);
}

}  // namespace

std::vector<std::vector<VoxelIndex>> connected_components(std::span<const VoxelIndex> voxels,
                                                          Connectivity connectivity,
                                                          const GridDims& dims) {
  std::vector<VoxelIndex> sorted(voxels.begin(), voxels.end());
  for (const auto& v : sorted) {
    if (v.i >= dims[0] || v.j >= dims[1] || v.k >= dims[2]) {
      throw_argument("voxel (" + std::to_string(v.i) + "," + std::to_string(v.j) + "," +
                     std::to_string(v.k) + ") outside grid dims");
    }
  }
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  const auto key = [&](const VoxelIndex& v) {
    return (std::uint64_t{v.i} * dims[1] + v.j) * dims[2] + v.k;
  };
  std::unordered_map<std::uint64_t, std::uint32_t> slot;
  slot.reserve(sorted.size() * 2);
  for (std::uint32_t n = 0; n < sorted.size(); ++n) slot.emplace(key(sorted[n]), n);

  DisjointSet sets(sorted.size());
  for (std::uint32_t n = 0; n < sorted.size(); ++n) {
    for (const auto& nb : neighbors(sorted[n], connectivity, dims)) {
      if (!(sorted[n] < nb)) continue;  // each pair once
      if (auto it = slot.find(key(nb)); it != slot.end()) sets.unite(n, it->second);
    }
  }

  std::vector<std::vector<VoxelIndex>> components;
  std::unordered_map<std::uint32_t, std::size_t> label;
  for (std::uint32_t n = 0; n < sorted.size(); ++n) {
    const std::uint32_t root = sets.find(n);
    auto [it, fresh] = label.emplace(root, components.size());
    if (fresh) components.emplace_back();
    components[it->second].push_back(sorted[n]);
  }
  return components;
}

std::vector<TreeRegion> extract_tree_regions(const std::vector<std::vector<VoxelIndex>>& components,
                                             const SparseVoxelGrid& grid,
                                             const DetectorConfig& config,
                                             double ground_elevation) {
  config.validate();
  const GridSpec& spec = grid.spec();
  std::vector<TreeRegion> regions;
  for (const auto& component : components) {
    if (component.size() <= static_cast<std::size_t>(config.comp_threshold)) continue;
    VoxelIndex lo = component.front();
    VoxelIndex hi = component.front();
    for (const auto& v : component) {
      lo = {std::min(lo.i, v.i), std::min(lo.j, v.j), std::min(lo.k, v.k)};
      hi = {std::max(hi.i, v.i), std::max(hi.j, v.j), std::max(hi.k, v.k)};
    }
    const double ex = static_cast<double>(hi.i - lo.i + 1);
    const double ey = static_cast<double>(hi.j - lo.j + 1);
    if (std::max(ex / ey, ey / ex) >= config.aspect_limit) continue;

    TreeRegion region;
    region.voxels = component;
    std::sort(region.voxels.begin(), region.voxels.end());
    region.size = component.size();
    region.bbox_min = lo;
    region.bbox_max = hi;
    const Vec3 min_corner = spec.voxel_min(lo);
    const Vec3 max_corner = spec.voxel_min({hi.i + 1, hi.j + 1, hi.k + 1});
    region.stem = {0.5 * (min_corner.x + max_corner.x), 0.5 * (min_corner.y + max_corner.y)};
    region.trunk_box = {{min_corner.x, min_corner.y, ground_elevation},
                        {max_corner.x, max_corner.y, max_corner.z}};
    regions.push_back(std::move(region));
  }
  return regions;
}

std::vector<TreeRegion> detect_trees(const PointCloud& cloud, const GridSpec& spec,
                                     const PmfParams& pmf, const SorParams& sor,
                                     const DetectorConfig& config, unsigned threads) {
  if (cloud.empty()) throw_argument("detect_trees needs a non-empty cloud");
  config.validate();
  spec.validate();
  const GroundMask ground = pmf_ground_mask(cloud, pmf);
  const std::vector<bool> outlier = statistical_outlier_mask(cloud, sor, threads);

  std::vector<bool> drop(cloud.size());
  std::vector<Vec3> ground_points;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    drop[i] = ground.flags[i] || outlier[i];
    if (ground.flags[i] && !outlier[i]) ground_points.push_back(cloud.position(i));
  }
  const PointCloud remaining = cloud.without(drop);
  if (remaining.empty()) return {};

  const SparseVoxelGrid grid = voxelize(remaining, spec, threads);
  const auto high = filter_high_return_voxels(grid, config.ret_thresh);
  const auto components = connected_components(high, config.connectivity, spec.dims);

  std::vector<double> all_z;
  all_z.reserve(ground_points.size());
  for (const auto& p : ground_points) all_z.push_back(p.z);
  const double tile_ground = all_z.empty() ? spec.origin.z : median_of(all_z);

  auto regions = extract_tree_regions(components, grid, config, tile_ground);
  for (auto& region : regions) {
    std::vector<double> local;
    const Box3& box = region.trunk_box;
    for (const auto& p : ground_points) {
      if (p.x >= box.min.x && p.x < box.max.x && p.y >= box.min.y && p.y < box.max.y) {
        local.push_back(p.z);
      }
    }
    if (!local.empty()) region.trunk_box.min.z = median_of(std::move(local));
  }
  return regions;
}

void write_tree_csv(std::span<const TreeRegion> trees, std::ostream& out) {
  out << "tree_id,stem_x,stem_y,min_x,min_y,max_x,max_y,max_z,size\n";
  std::size_t id = 1;
  for (const auto& t : trees) {
    out << id++ << ',';
    for (double v : {t.stem.x, t.stem.y, t.trunk_box.min.x, t.trunk_box.min.y, t.trunk_box.max.x,
                     t.trunk_box.max.y, t.trunk_box.max.z}) {
      put_number(out, v);
      out << ',';
    }
    out << t.size << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing tree CSV");
}

std::vector<WindowExtent> sliding_windows(const GridDims& dims, const GridDims& window,
                                          std::uint32_t stride_x, std::uint32_t stride_y) {
  if (stride_x == 0 || stride_y == 0) throw_argument("window strides must be >= 1");
  for (int a = 0; a < 3; ++a) {
    if (window[a] == 0) throw_argument("window dims must be > 0");
    if (window[a] > dims[a]) {
      throw_argument("window (" + std::to_string(window[0]) + "," + std::to_string(window[1]) +
                     "," + std::to_string(window[2]) + ") larger than grid dims");
    }
  }
  const auto starts = [](std::uint32_t dim, std::uint32_t size, std::uint32_t stride) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t s = 0; s + size <= dim; s += stride) out.push_back(s);
    if (out.back() + size < dim) out.push_back(dim - size);
    return out;
  };
  const auto xs = starts(dims[0], window[0], stride_x);
  const auto ys = starts(dims[1], window[1], stride_y);
  const auto zs = starts(dims[2], window[2], window[2]);
  std::vector<WindowExtent> out;
  out.reserve(xs.size() * ys.size() * zs.size());
  for (auto x : xs)
    for (auto y : ys)
      for (auto z : zs) out.push_back({{x, y, z}, window});
  return out;
}

VoteField::VoteField(const GridDims& dims) : dims_(dims) {
  const std::size_t n = std::size_t{dims[0]} * dims[1] * dims[2];
  votes_.assign(n, 0);
  positives_.assign(n, 0);
}

std::optional<double> VoteField::confidence(const VoxelIndex& v) const {
  const auto total = votes(v);
  if (total == 0) return std::nullopt;
  return static_cast<double>(positives(v)) / static_cast<double>(total);
}

void VoteField::add(const WindowExtent& w, bool positive) {
  for (int a = 0; a < 3; ++a) {
    const std::uint32_t begin = a == 0 ? w.begin.i : a == 1 ? w.begin.j : w.begin.k;
    if (std::uint64_t{begin} + w.size[a] > dims_[a]) throw_argument("window extends past grid dims");
  }
  for (std::uint32_t i = w.begin.i; i < w.begin.i + w.size[0]; ++i) {
    for (std::uint32_t j = w.begin.j; j < w.begin.j + w.size[1]; ++j) {
      const std::size_t row = (std::size_t{i} * dims_[1] + j) * dims_[2];
      for (std::uint32_t k = w.begin.k; k < w.begin.k + w.size[2]; ++k) {
        ++votes_[row + k];
        if (positive) ++positives_[row + k];
      }
    }
  }
}

void VoteField::write_csv(std::ostream& out) const {
  out << "i,j,k,votes,positives\n";
  for (std::uint32_t i = 0; i < dims_[0]; ++i)
    for (std::uint32_t j = 0; j < dims_[1]; ++j)
      for (std::uint32_t k = 0; k < dims_[2]; ++k) {
        const VoxelIndex v{i, j, k};
        if (votes(v) == 0) continue;
        out << i << ',' << j << ',' << k << ',' << votes(v) << ',' << positives(v) << '\n';
      }
}

VoteFusion vote_fusion(std::span<const LabeledWindow> windows, const GridDims& dims,
                       double threshold) {
  VoteFusion result{VoteField(dims), {}};
  for (const auto& w : windows) result.field.add(w.extent, w.positive);
  for (std::uint32_t i = 0; i < dims[0]; ++i)
    for (std::uint32_t j = 0; j < dims[1]; ++j)
      for (std::uint32_t k = 0; k < dims[2]; ++k) {
        const VoxelIndex v{i, j, k};
        const auto c = result.field.confidence(v);
        if (c && *c > threshold) result.positive.push_back(v);
      }
  return result;
}

}  // namespace canopy
