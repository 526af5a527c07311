#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "canopy/error.hpp"
#include "canopy/voxel_grid.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace canopy;

namespace {

PointRecord pt(double x, double y, double z, int nret = 1, double intensity = 0) {
  return {x, y, z, intensity, 1, static_cast<std::uint8_t>(nret), 0, {}};
}

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::uniform_int_distribution<int> r(1, 7);
  std::uniform_int_distribution<int> in(0, 65535);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.append(pt(u(rng), u(rng), u(rng), r(rng), in(rng)));
  return c;
}

void check_against_dense(const SparseVoxelGrid& g, const PointCloud& c) {
  const auto d = oracle::dense_voxelize(c, g.spec());
  CHECK(g.dropped() == d.dropped);
  std::size_t occupied = 0;
  const auto& dims = g.spec().dims;
  for (std::uint32_t i = 0; i < dims[0]; ++i)
    for (std::uint32_t j = 0; j < dims[1]; ++j)
      for (std::uint32_t k = 0; k < dims[2]; ++k) {
        const auto s = d.at(i, j, k);
        const bool occ = d.count[s] > 0;
        occupied += occ;
        if (g.is_occupied({i, j, k}) != occ) {
          FAIL("occupancy mismatch");
        }
        if (!occ) continue;
        const auto* p = g.payload({i, j, k});
        REQUIRE(p != nullptr);
        CHECK(p->point_count == d.count[s]);
        CHECK(p->max_returns == d.max_returns[s]);
        CHECK(oracle::close_rel(p->mean_intensity, d.intensity_sum[s] / d.count[s]));
      }
  CHECK(g.occupied_count() == occupied);
  CHECK(d.dropped + std::accumulate(d.count.begin(), d.count.end(), std::uint64_t{0}) == c.size());
}

}  // namespace

TEST_CASE("tile of 100 m at 256 cells index arithmetic") {
  const auto spec = GridSpec::tile({0, 0, 0});
  CHECK(spec.resolution == 0.390625);
  CHECK(hierarchy_levels(spec.dims) == 4);
  const auto v = spec.locate({50, 50, 10});
  REQUIRE(v.has_value());
  CHECK(*v == VoxelIndex{128, 128, 25});
  CHECK(spec.locate({100, 100, 100}) == VoxelIndex{255, 255, 255});
  CHECK_FALSE(spec.locate({100.001, 5, 5}).has_value());
  CHECK_FALSE(spec.locate({-0.001, 5, 5}).has_value());
}

TEST_CASE("single point and aggregation") {
  PointCloud one;
  one.append(pt(0, 0, 0));
  const auto spec = GridSpec::tile({0, 0, 0});
  const auto g = voxelize(one, spec);
  CHECK(g.is_occupied({0, 0, 0}));
  CHECK_FALSE(g.is_occupied({1, 0, 0}));
  CHECK(g.occupied_count() == 1);
  CHECK_THROWS_AS(g.is_occupied({256, 0, 0}), Error);

  PointCloud two;
  two.append(pt(0.1, 0.1, 0.1, 2, 10));
  two.append(pt(0.2, 0.2, 0.2, 5, 30));
  const auto g2 = voxelize(two, spec);
  REQUIRE(g2.occupied_count() == 1);
  const auto& [v, p] = g2.occupied_voxels().front();
  CHECK(v == VoxelIndex{0, 0, 0});
  CHECK(p.max_returns == 5);
  CHECK(p.point_count == 2);
  CHECK(p.mean_intensity == 20.0);

  const SparseVoxelGrid empty(spec, {});
  CHECK(empty.occupied_voxels().empty());
  CHECK(empty.decode_hierarchy().empty());
}

TEST_CASE("three voxels enumerate sorted") {
  PointCloud c;
  c.append(pt(5, 0.1, 0.1));
  c.append(pt(0.1, 5, 0.1));
  c.append(pt(0.1, 0.1, 5));
  const auto g = voxelize(c, GridSpec::tile({0, 0, 0}));
  const auto& occ = g.occupied_voxels();
  REQUIRE(occ.size() == 3);
  CHECK(std::is_sorted(occ.begin(), occ.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; }));
}

TEST_CASE("random cloud equals dense oracle, odd dims") {
  std::mt19937_64 rng(21);
  GridSpec spec;
  spec.origin = {-1, -2, -3};
  spec.resolution = 0.7;
  spec.dims = {23, 17, 40};
  const auto c = random_cloud(rng, 10000, -4, 26);
  for (unsigned t : {1u, 4u}) {
    const auto g = voxelize(c, spec, t);
    check_against_dense(g, c);
    CHECK(g.decode_hierarchy().size() == g.occupied_count());
  }
}

TEST_CASE("hierarchy consistency and sparsity bound") {
  std::mt19937_64 rng(22);
  const auto spec = GridSpec::tile({0, 0, 0}, 100, 256);
  const auto c = random_cloud(rng, 5000, 0, 100);
  const auto g = voxelize(c, spec);
  // Rebuild parent words from the leaf level upward.
  for (int level = g.levels() - 1; level > 0; --level) {
    const auto child = g.level_words(level);
    const auto parent = g.level_words(level - 1);
    std::size_t set = 0;
    for (auto w : parent) set += static_cast<std::size_t>(__builtin_popcountll(w));
    CHECK(set == child.size());
    for (auto w : child) CHECK(w != 0);
  }
  CHECK(g.level_words(0).size() == 1);
  std::vector<VoxelIndex> keys;
  for (const auto& [v, p] : g.occupied_voxels()) keys.push_back(v);
  CHECK(g.decode_hierarchy() == keys);
  CHECK(g.occupancy_bytes() * 8 <= g.occupied_count() * g.levels() * 64 + 64);
}

TEST_CASE("permutation invariance") {
  std::mt19937_64 rng(23);
  GridSpec spec;
  spec.resolution = 1.0;
  spec.dims = {8, 8, 8};
  const auto c = random_cloud(rng, 3000, 0, 8);
  std::vector<std::uint32_t> perm(c.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto a = voxelize(c, spec, 1);
  const auto b = voxelize(c.subset(perm), spec, 3);
  REQUIRE(a.occupied_count() == b.occupied_count());
  for (std::size_t i = 0; i < a.occupied_count(); ++i) {
    const auto& [va, pa] = a.occupied_voxels()[i];
    const auto& [vb, pb] = b.occupied_voxels()[i];
    CHECK(va == vb);
    CHECK(pa.max_returns == pb.max_returns);
    CHECK(pa.point_count == pb.point_count);
    CHECK(oracle::close_rel(pa.mean_intensity, pb.mean_intensity));
  }
}

TEST_CASE("dump round trip") {
  std::mt19937_64 rng(24);
  GridSpec spec;
  spec.origin = {10, 20, 30};
  spec.resolution = 0.5;
  spec.dims = {30, 20, 10};
  const auto g = voxelize(random_cloud(rng, 500, 10, 25), spec);
  std::stringstream buf;
  g.write(buf);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "SVG1");
  std::istringstream in(bytes);
  CHECK(SparseVoxelGrid::read(in) == g);

  std::istringstream cut(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(SparseVoxelGrid::read(cut), Error);
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream wrong(bad);
  CHECK_THROWS_AS(SparseVoxelGrid::read(wrong), Error);
}

TEST_CASE("neighbors") {
  const GridDims dims{10, 10, 10};
  CHECK(neighbors({5, 5, 5}, Connectivity::Face, dims).size() == 6);
  CHECK(neighbors({5, 5, 5}, Connectivity::Edge, dims).size() == 18);
  CHECK(neighbors({5, 5, 5}, Connectivity::Corner, dims).size() == 26);
  CHECK(neighbors({0, 0, 0}, Connectivity::Face, dims).size() == 3);
  CHECK_THROWS_AS(neighbors({10, 0, 0}, Connectivity::Face, dims), Error);
  CHECK_THROWS_AS(connectivity_from(8), Error);

  std::mt19937_64 rng(25);
  for (int t = 0; t < 20; ++t) {
    const VoxelIndex v{static_cast<std::uint32_t>(1 + rng() % 8), static_cast<std::uint32_t>(1 + rng() % 8),
                       static_cast<std::uint32_t>(1 + rng() % 8)};
    std::vector<VoxelIndex> shell;
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj)
        for (int dk = -1; dk <= 1; ++dk)
          if (di || dj || dk) shell.push_back({v.i + di, v.j + dj, v.k + dk});
    CHECK(neighbors(v, Connectivity::Corner, dims) == shell);
  }
}
