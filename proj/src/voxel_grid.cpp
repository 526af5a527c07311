#include "canopy/voxel_grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "canopy/error.hpp"
#include "canopy/parallel.hpp"

namespace canopy {
namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error(ErrorKind::Truncated, "voxel grid dump ends early");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

constexpr std::uint64_t kNoVoxel = ~std::uint64_t{0};

}  // namespace

GridSpec GridSpec::tile(const Vec3& origin, double tile_size, std::uint32_t cells) {
  GridSpec spec;
  spec.origin = origin;
  spec.resolution = tile_size / static_cast<double>(cells);
  spec.dims = {cells, cells, cells};
  spec.validate();
  return spec;
}

void GridSpec::validate() const {
  if (!(resolution > 0.0) || !std::isfinite(resolution)) throw_argument("grid.resolution must be > 0");
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) throw_argument("grid.dims must all be > 0");
  if (hierarchy_levels(dims) > 10) throw_argument("grid.dims too large (max 4^10 per axis)");
}

std::optional<VoxelIndex> GridSpec::locate(const Vec3& p) const {
  std::uint32_t idx[3];
  const double coords[3] = {p.x - origin.x, p.y - origin.y, p.z - origin.z};
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor(coords[a] / resolution);
    if (f < 0.0) return std::nullopt;
    if (f >= static_cast<double>(dims[a])) {
      // Far boundary belongs to the last voxel.
      if (coords[a] == static_cast<double>(dims[a]) * resolution) {
        idx[a] = dims[a] - 1;
        continue;
      }
      return std::nullopt;
    }
    idx[a] = static_cast<std::uint32_t>(f);
  }
  return VoxelIndex{idx[0], idx[1], idx[2]};
}

int hierarchy_levels(const GridDims& dims) {
  const std::uint64_t longest = std::max({dims[0], dims[1], dims[2]});
  int levels = 1;
  while ((std::uint64_t{1} << (2 * levels)) < longest) ++levels;
  return levels;
}

SparseVoxelGrid::SparseVoxelGrid(const GridSpec& spec, std::vector<OccupiedVoxel> voxels,
                                 std::uint64_t dropped)
    : spec_(spec), voxels_(std::move(voxels)), dropped_(dropped) {
  spec_.validate();
  for (std::size_t n = 0; n < voxels_.size(); ++n) {
    if (!spec_.contains(voxels_[n].first)) throw_argument("voxel outside grid dims");
    if (n > 0 && !(voxels_[n - 1].first < voxels_[n].first)) {
      throw_argument("voxels must be sorted and unique");
    }
  }
  build_hierarchy();
}

std::uint64_t SparseVoxelGrid::path_code(const VoxelIndex& v) const {
  const int levels = hierarchy_levels(spec_.dims);
  std::uint64_t code = 0;
  for (int d = 0; d < levels; ++d) {
    const int shift = 2 * (levels - 1 - d);
    const std::uint64_t digit = ((v.i >> shift) & 3u) | (((v.j >> shift) & 3u) << 2) |
                                (((v.k >> shift) & 3u) << 4);
    code = (code << 6) | digit;
  }
  return code;
}

void SparseVoxelGrid::build_hierarchy() {
  const int levels = hierarchy_levels(spec_.dims);
  std::vector<std::uint64_t> codes;
  codes.reserve(voxels_.size());
  for (const auto& [v, p] : voxels_) codes.push_back(path_code(v));
  std::sort(codes.begin(), codes.end());

  words_.assign(levels, {});
  words_[0].push_back(0);
  for (int d = 0; d < levels; ++d) {
    auto& level = words_[d];
    const int below = 6 * (levels - 1 - d);
    std::uint64_t current_prefix = kNoVoxel;
    for (std::uint64_t code : codes) {
      const std::uint64_t prefix = d == 0 ? 0 : code >> (below + 6);
      const unsigned bit = static_cast<unsigned>((code >> below) & 63u);
      if (d > 0 && prefix != current_prefix) {
        level.push_back(0);
        current_prefix = prefix;
      }
      level.back() |= std::uint64_t{1} << bit;
    }
  }

  rank_.assign(levels, {});
  for (int d = 0; d < levels; ++d) {
    std::uint32_t running = 0;
    rank_[d].reserve(words_[d].size());
    for (std::uint64_t w : words_[d]) {
      rank_[d].push_back(running);
      running += static_cast<std::uint32_t>(std::popcount(w));
    }
  }
}

bool SparseVoxelGrid::is_occupied(const VoxelIndex& v) const {
  if (!spec_.contains(v)) {
    throw_argument("voxel (" + std::to_string(v.i) + "," + std::to_string(v.j) + "," +
                   std::to_string(v.k) + ") outside grid dims");
  }
  const int levels = this->levels();
  const std::uint64_t code = path_code(v);
  std::size_t pos = 0;
  for (int d = 0; d < levels; ++d) {
    const std::uint64_t word = words_[d][pos];
    const unsigned bit = static_cast<unsigned>((code >> (6 * (levels - 1 - d))) & 63u);
    if (!((word >> bit) & 1u)) return false;
    if (d + 1 == levels) return true;
    const std::uint64_t lower = bit == 0 ? 0 : word & ((std::uint64_t{1} << bit) - 1);
    pos = rank_[d][pos] + static_cast<std::size_t>(std::popcount(lower));
  }
  return false;
}

const VoxelPayload* SparseVoxelGrid::payload(const VoxelIndex& v) const {
  const auto it = std::lower_bound(voxels_.begin(), voxels_.end(), v,
                                   [](const OccupiedVoxel& a, const VoxelIndex& b) { return a.first < b; });
  if (it == voxels_.end() || it->first != v) return nullptr;
  return &it->second;
}

std::size_t SparseVoxelGrid::occupancy_bytes() const {
  std::size_t words = 0;
  for (const auto& level : words_) words += level.size();
  return words * sizeof(std::uint64_t);
}

std::vector<VoxelIndex> SparseVoxelGrid::decode_hierarchy() const {
  const int levels = this->levels();
  std::vector<VoxelIndex> out;
  if (levels == 0) return out;
  // Breadth-first: each level's words pair up with the set bits of the level above.
  std::vector<std::uint64_t> prefixes = {0};
  for (int d = 0; d < levels; ++d) {
    if (prefixes.size() != words_[d].size()) {
      throw Error(ErrorKind::Format, "bit tree level " + std::to_string(d) + " is inconsistent");
    }
    std::vector<std::uint64_t> next;
    for (std::size_t w = 0; w < words_[d].size(); ++w) {
      std::uint64_t word = words_[d][w];
      while (word) {
        const int bit = std::countr_zero(word);
        word &= word - 1;
        next.push_back((prefixes[w] << 6) | static_cast<std::uint64_t>(bit));
      }
    }
    prefixes = std::move(next);
  }
  out.reserve(prefixes.size());
  for (std::uint64_t code : prefixes) {
    VoxelIndex v;
    for (int d = 0; d < levels; ++d) {
      const int shift = 2 * (levels - 1 - d);
      const auto digit = static_cast<std::uint32_t>((code >> (6 * (levels - 1 - d))) & 63u);
      v.i |= (digit & 3u) << shift;
      v.j |= ((digit >> 2) & 3u) << shift;
      v.k |= ((digit >> 4) & 3u) << shift;
    }
    out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void SparseVoxelGrid::write(std::ostream& out) const {
  out.write("SVG1", 4);
  put_le(out, spec_.origin.x);
  put_le(out, spec_.origin.y);
  put_le(out, spec_.origin.z);
  put_le(out, spec_.resolution);
  for (std::uint32_t d : spec_.dims) put_le(out, d);
  put_le(out, static_cast<std::uint32_t>(words_.size()));
  for (const auto& level : words_) {
    put_le(out, static_cast<std::uint64_t>(level.size()));
    for (std::uint64_t w : level) put_le(out, w);
  }
  put_le(out, static_cast<std::uint64_t>(voxels_.size()));
  for (const auto& [v, p] : voxels_) {
    put_le(out, v.i);
    put_le(out, v.j);
    put_le(out, v.k);
    put_le(out, p.max_returns);
    put_le(out, p.point_count);
    put_le(out, p.mean_intensity);
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing voxel grid");
}

SparseVoxelGrid SparseVoxelGrid::read(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, "SVG1", 4) != 0) {
    throw Error(ErrorKind::Format, "missing SVG1 signature");
  }
  GridSpec spec;
  spec.origin.x = get_le<double>(in);
  spec.origin.y = get_le<double>(in);
  spec.origin.z = get_le<double>(in);
  spec.resolution = get_le<double>(in);
  for (auto& d : spec.dims) d = get_le<std::uint32_t>(in);
  spec.validate();
  const auto level_count = get_le<std::uint32_t>(in);
  std::vector<std::vector<std::uint64_t>> words(level_count);
  for (auto& level : words) {
    const auto n = get_le<std::uint64_t>(in);
    if (n > (std::uint64_t{1} << 40)) throw Error(ErrorKind::Format, "implausible word count");
    level.resize(n);
    for (auto& w : level) w = get_le<std::uint64_t>(in);
  }
  const auto count = get_le<std::uint64_t>(in);
  if (count > spec.voxel_count()) throw Error(ErrorKind::Format, "more payloads than voxels");
  std::vector<OccupiedVoxel> voxels(count);
  for (auto& [v, p] : voxels) {
    v.i = get_le<std::uint32_t>(in);
    v.j = get_le<std::uint32_t>(in);
    v.k = get_le<std::uint32_t>(in);
    p.max_returns = get_le<std::uint32_t>(in);
    p.point_count = get_le<std::uint32_t>(in);
    p.mean_intensity = get_le<double>(in);
  }
  SparseVoxelGrid grid(spec, std::move(voxels));
  if (grid.words_ != words) {
    throw Error(ErrorKind::Format, "stored bit tree disagrees with the payload table");
  }
  return grid;
}

SparseVoxelGrid voxelize(const PointCloud& cloud, const GridSpec& spec, unsigned threads) {
  spec.validate();
  const std::size_t n = cloud.size();
  std::vector<std::uint64_t> keys(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto v = spec.locate(cloud.position(i));
    keys[i] = v ? spec.linear(*v) : kNoVoxel;
  });

  std::vector<std::pair<std::uint64_t, std::uint32_t>> order;
  order.reserve(n);
  std::uint64_t dropped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (keys[i] == kNoVoxel) {
      ++dropped;
    } else {
      order.emplace_back(keys[i], static_cast<std::uint32_t>(i));
    }
  }
  // Sorting by (voxel, point index) fixes the intensity summation order.
  std::sort(order.begin(), order.end());

  const auto returns = cloud.number_of_returns();
  const auto intensity = cloud.intensity();
  std::vector<OccupiedVoxel> voxels;
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a;
    VoxelPayload p;
    double sum = 0.0;
    while (b < order.size() && order[b].first == order[a].first) {
      const std::uint32_t idx = order[b].second;
      p.max_returns = std::max<std::uint32_t>(p.max_returns, returns[idx]);
      sum += intensity[idx];
      ++p.point_count;
      ++b;
    }
    p.mean_intensity = sum / static_cast<double>(p.point_count);
    voxels.emplace_back(spec.from_linear(order[a].first), p);
    a = b;
  }
  return SparseVoxelGrid(spec, std::move(voxels), dropped);
}

Connectivity connectivity_from(int value) {
  switch (value) {
    case 6: return Connectivity::Face;
    case 18: return Connectivity::Edge;
    case 26: return Connectivity::Corner;
    default: throw_argument("connectivity must be 6, 18 or 26, got " + std::to_string(value));
  }
}

std::vector<VoxelIndex> neighbors(const VoxelIndex& v, Connectivity connectivity,
                                  const GridDims& dims) {
  if (v.i >= dims[0] || v.j >= dims[1] || v.k >= dims[2]) throw_argument("voxel outside grid dims");
  const int max_nonzero = connectivity == Connectivity::Face ? 1 : connectivity == Connectivity::Edge ? 2 : 3;
  std::vector<VoxelIndex> out;
  out.reserve(26);
  for (int di = -1; di <= 1; ++di) {
    for (int dj = -1; dj <= 1; ++dj) {
      for (int dk = -1; dk <= 1; ++dk) {
        const int nonzero = (di != 0) + (dj != 0) + (dk != 0);
        if (nonzero == 0 || nonzero > max_nonzero) continue;
        const std::int64_t i = std::int64_t{v.i} + di;
        const std::int64_t j = std::int64_t{v.j} + dj;
        const std::int64_t k = std::int64_t{v.k} + dk;
        if (i < 0 || j < 0 || k < 0 || i >= dims[0] || j >= dims[1] || k >= dims[2]) continue;
        out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                       static_cast<std::uint32_t>(k)});
      }
    }
  }
  return out;
}

}  // namespace canopy
