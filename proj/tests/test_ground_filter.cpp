#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "canopy/error.hpp"
#include "canopy/ground_filter.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace canopy;

namespace {

PointRecord at(double x, double y, double z) { return {x, y, z, 0, 1, 1, 0, {}}; }

Raster from_values(const std::vector<double>& v, std::size_t w, std::size_t h) {
  Raster r({0, 0}, 1.0, w, h);
  for (std::size_t row = 0; row < h; ++row)
    for (std::size_t col = 0; col < w; ++col) r.at(col, row) = v[row * w + col];
  return r;
}

std::vector<double> to_values(const Raster& r) { return {r.values().begin(), r.values().end()}; }

// Jittered plane over [0, size)^2 with `per_cell` points per square metre,
// skipping the rectangle [hole_lo, hole_hi)^2.
PointCloud plane(std::mt19937_64& rng, double size, double slope, double hole_lo = 0,
                 double hole_hi = 0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud c;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double x = i + u(rng), y = j + u(rng);
      if (x >= hole_lo && x < hole_hi && y >= hole_lo && y < hole_hi) continue;
      c.append(at(x, y, slope * x + 0.02 * u(rng)));
    }
  return c;
}

// O(n^2) kNN mean distance, sample standard deviation.
std::vector<bool> brute_sor(const PointCloud& c, std::size_t k, double mult) {
  const std::size_t n = c.size();
  std::vector<double> stat(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) d.push_back(distance(c.position(i), c.position(j)));
    std::sort(d.begin(), d.end());
    stat[i] = std::accumulate(d.begin(), d.begin() + k, 0.0) / k;
  }
  const double mean = std::accumulate(stat.begin(), stat.end(), 0.0) / n;
  double ss = 0;
  for (double s : stat) ss += (s - mean) * (s - mean);
  const double cut = mean + mult * std::sqrt(ss / (n - 1));
  std::vector<bool> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = stat[i] > cut;
  return out;
}

}  // namespace

TEST_CASE("min surface examples") {
  PointCloud flat;
  for (int i = 0; i < 20; ++i) flat.append(at(i * 0.5, (i % 5) * 1.1, 5.0));
  const auto surface = grid_min_surface(flat, 1.0);
  for (double v : surface.values()) CHECK(v == 5.0);

  PointCloud pair;
  pair.append(at(0.2, 0.2, 7));
  pair.append(at(0.7, 0.4, 2));
  CHECK(grid_min_surface(pair, 1.0).at(0, 0) == 2.0);
  CHECK_THROWS_AS(grid_min_surface(PointCloud{}, 1.0), Error);
}

TEST_CASE("min surface matches brute force with nearest fill") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_real_distribution<double> u(0.0, 12.0 + trial);
    PointCloud c;
    const int n = 5 + trial * 3;
    for (int i = 0; i < n; ++i) c.append(at(u(rng), u(rng), u(rng)));
    const double cell = 0.5 + (trial % 4) * 0.5;
    std::size_t w, h;
    const auto ref = oracle::min_surface(c, cell, w, h);
    const auto got = grid_min_surface(c, cell);
    REQUIRE(got.width() == w);
    REQUIRE(got.height() == h);
    CHECK(to_values(got) == ref);
  }
}

TEST_CASE("opening examples") {
  std::vector<double> flat(49, 1.0);
  flat[24] = 11.0;
  const auto spike = from_values(flat, 7, 7);
  CHECK(morphological_open(spike, 0) == spike);
  const auto opened = morphological_open(spike, 1);
  CHECK(opened.at(3, 3) == 1.0);
  const auto constant = from_values(std::vector<double>(30, 4.0), 6, 5);
  for (int r : {1, 2, 7}) CHECK(morphological_open(constant, r) == constant);
}

TEST_CASE("opening equals exhaustive scan and is anti-extensive") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t w = 1 + rng() % 17, h = 1 + rng() % 13;
    std::vector<double> v(w * h);
    for (auto& x : v) x = u(rng);
    const int r = static_cast<int>(rng() % 5);
    const auto got = to_values(morphological_open(from_values(v, w, h), r));
    CHECK(got == oracle::opening(v, w, h, r));
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(got[i] <= v[i]);
  }
}

TEST_CASE("schedule") {
  PmfParams p;
  const auto s = pmf_schedule(p);
  REQUIRE(s.size() == 5);
  const int radii[] = {1, 2, 4, 8, 16};
  for (int i = 0; i < 5; ++i) CHECK(s[i].radius == radii[i]);
  CHECK(s[0].threshold == p.initial_distance);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i].threshold <= p.max_distance);
  CHECK(s.back().threshold == p.max_distance);

  PmfParams bad;
  bad.initial_distance = 4;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = PmfParams{};
  bad.max_window = 0.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("flat plane is all ground") {
  std::mt19937_64 rng(1);
  const auto c = plane(rng, 30, 0.0);
  const auto m = pmf_ground_mask(c, PmfParams{});
  CHECK(m.flags.size() == c.size());
  CHECK(std::all_of(m.flags.begin(), m.flags.end(), [](bool b) { return b; }));
  CHECK(m.retained_count == 0);
}

TEST_CASE("box on a plane") {
  std::mt19937_64 rng(2);
  auto c = plane(rng, 60, 0.0, 25, 35);
  const std::size_t plane_n = c.size();
  std::uniform_real_distribution<double> u(25.0, 35.0);
  for (int i = 0; i < 400; ++i) c.append(at(u(rng), u(rng), 5.0));
  PmfParams p;
  p.cell_size = 1;
  p.max_window = 40;
  p.max_distance = 3.5;
  const auto m = pmf_ground_mask(c, p);
  std::size_t ground_plane = 0;
  for (std::size_t i = 0; i < plane_n; ++i) ground_plane += m.flags[i];
  for (std::size_t i = plane_n; i < c.size(); ++i) CHECK_FALSE(m.flags[i]);
  CHECK(static_cast<double>(ground_plane) >= 0.99 * static_cast<double>(plane_n));
  CHECK(m.retained_count == c.size() - std::count(m.flags.begin(), m.flags.end(), true));
}

TEST_CASE("tilted plane stays ground with slope allowance") {
  std::mt19937_64 rng(3);
  const auto c = plane(rng, 50, 0.05);
  PmfParams p;
  p.slope = 0.1;
  const auto m = pmf_ground_mask(c, p);
  CHECK(std::all_of(m.flags.begin(), m.flags.end(), [](bool b) { return b; }));
}

TEST_CASE("ground mask is translation invariant") {
  std::mt19937_64 rng(4);
  // Coordinates on a 1/64 lattice so translation is exact.
  PointCloud a, b;
  std::uniform_int_distribution<int> u(0, 40 * 64);
  for (int i = 0; i < 3000; ++i) {
    const double x = u(rng) / 64.0, y = u(rng) / 64.0;
    const bool bump = x > 10 && x < 16 && y > 10 && y < 16;
    const double z = bump ? 6.0 : (u(rng) % 8) / 64.0;
    a.append(at(x, y, z));
    b.append(at(x + 1024.0, y - 512.0, z + 37.5));
  }
  CHECK(pmf_ground_mask(a, PmfParams{}).flags == pmf_ground_mask(b, PmfParams{}).flags);
}

TEST_CASE("outlier removal on a lattice") {
  PointCloud c;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 5; ++k) c.append(at(i, j, k));
  SorParams p;
  const auto clean = statistical_outlier_mask(c, p);
  // Direct evaluation: corners average 1.372 m to their 8 neighbours against
  // a cut of 1.301 m, so exactly the 8 corners exceed mean + 2 sd.
  CHECK(clean == brute_sor(c, 8, 2.0));
  CHECK(std::count(clean.begin(), clean.end(), true) == 8);
  CHECK(clean[0]);
  CHECK(clean[124]);

  c.append(at(102, 2, 2));
  const auto m = statistical_outlier_mask(c, p, 2);
  CHECK(m == brute_sor(c, 8, 2.0));
  CHECK(std::count(m.begin(), m.end(), true) == 1);
  CHECK(m.back());

  PointCloud nine;
  for (int i = 0; i < 9; ++i) nine.append(at(i, 0, 0));
  SorParams k9;
  k9.k = 9;
  CHECK_THROWS_AS(statistical_outlier_mask(nine, k9), Error);
}

TEST_CASE("outlier mask is permutation equivariant and thread independent") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<PointRecord> recs;
  for (int i = 0; i < 800; ++i) recs.push_back(at(g(rng), g(rng), g(rng)));
  for (int i = 0; i < 10; ++i) recs.push_back(at(8 + g(rng), 8 * g(rng), 0));
  PointCloud c;
  for (const auto& r : recs) c.append(r);
  const auto base = statistical_outlier_mask(c, SorParams{}, 1);
  CHECK(statistical_outlier_mask(c, SorParams{}, 4) == base);

  std::vector<std::uint32_t> perm(recs.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto shuffled = c.subset(perm);
  const auto m = statistical_outlier_mask(shuffled, SorParams{}, 3);
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(m[i] == base[perm[i]]);
}
