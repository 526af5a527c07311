#include "canopy/spatial_index.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "canopy/error.hpp"

namespace canopy {
namespace {

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.squared_distance < b.squared_distance ||
         (a.squared_distance == b.squared_distance && a.index < b.index);
}

}  // namespace

PointGrid::PointGrid(std::span<const Vec3> points, double cell_size) : points_(points) {
  if (points.size() >= UINT32_MAX) throw_argument("point set too large for index");
  if (points.empty()) {
    cell_start_.assign(2, 0);
    return;
  }
  Box3 box = Box3::around(points[0]);
  for (const auto& p : points) box.expand(p);
  origin_ = box.min;
  const Vec3 ext = box.extent();
  const double n = static_cast<double>(points.size());

  const auto dims_for = [&](double c) {
    return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor(ext.x / c)) + 1,
                                       static_cast<std::int64_t>(std::floor(ext.y / c)) + 1,
                                       static_cast<std::int64_t>(std::floor(ext.z / c)) + 1};
  };
  if (cell_size > 0.0) {
    cell_ = cell_size;
  } else {
    const double longest = std::max({ext.x, ext.y, ext.z});
    cell_ = longest > 0.0 ? std::max(std::cbrt(std::max(ext.x, 1e-9) * std::max(ext.y, 1e-9) *
                                               std::max(ext.z, 1e-9) / n),
                                     longest * 1e-6)
                          : 1.0;
  }
  const double budget = 4.0 * n + 64.0;
  while (true) {
    const auto d = dims_for(cell_);
    if (static_cast<double>(d[0]) * static_cast<double>(d[1]) * static_cast<double>(d[2]) <= budget)
      break;
    cell_ *= 1.25;
  }
  const auto d = dims_for(cell_);
  nx_ = d[0];
  ny_ = d[1];
  nz_ = d[2];

  const std::size_t cells = static_cast<std::size_t>(nx_ * ny_ * nz_);
  std::vector<std::uint32_t> cell_of(points.size());
  cell_start_.assign(cells + 1, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    const auto c = cell_index(axis_cell(p.x, origin_.x, nx_), axis_cell(p.y, origin_.y, ny_),
                              axis_cell(p.z, origin_.z, nz_));
    cell_of[i] = static_cast<std::uint32_t>(c);
    ++cell_start_[c + 1];
  }
  for (std::size_t c = 0; c < cells; ++c) cell_start_[c + 1] += cell_start_[c];
  order_.resize(points.size());
  std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    order_[fill[cell_of[i]]++] = static_cast<std::uint32_t>(i);
  }
}

std::int64_t PointGrid::axis_cell(double v, double origin, std::int64_t n) const {
  const double f = std::floor((v - origin) / cell_);
  if (f < 0.0) return 0;
  if (f >= static_cast<double>(n)) return n - 1;
  return static_cast<std::int64_t>(f);
}

void PointGrid::nearest(const Vec3& q, std::size_t k, std::vector<Neighbor>& out,
                        std::optional<std::uint32_t> exclude) const {
  out.clear();
  if (k == 0 || points_.empty()) return;
  const std::int64_t ci = axis_cell(q.x, origin_.x, nx_);
  const std::int64_t cj = axis_cell(q.y, origin_.y, ny_);
  const std::int64_t ck = axis_cell(q.z, origin_.z, nz_);
  // Distance from the query to the outside of its own (clamped) cell block
  // lower-bounds anything in shell s+1 by s * cell_ only when the query lies
  // inside the grid; outside queries fall back to exhausting the shells.
  const bool inside = q.x >= origin_.x && q.y >= origin_.y && q.z >= origin_.z &&
                      q.x <= origin_.x + nx_ * cell_ && q.y <= origin_.y + ny_ * cell_ &&
                      q.z <= origin_.z + nz_ * cell_;
  const std::int64_t max_shell = std::max({ci, nx_ - 1 - ci, cj, ny_ - 1 - cj, ck, nz_ - 1 - ck});

  const auto visit = [&](std::int64_t i, std::int64_t j, std::int64_t kk) {
    const auto c = cell_index(i, j, kk);
    for (auto it = cell_start_[c]; it < cell_start_[c + 1]; ++it) {
      const std::uint32_t idx = order_[it];
      if (exclude && *exclude == idx) continue;
      const Neighbor nb{idx, squared_distance(q, points_[idx])};
      if (out.size() < k) {
        out.push_back(nb);
        std::push_heap(out.begin(), out.end(), closer);
      } else if (closer(nb, out.front())) {
        std::pop_heap(out.begin(), out.end(), closer);
        out.back() = nb;
        std::push_heap(out.begin(), out.end(), closer);
      }
    }
  };

  for (std::int64_t s = 0; s <= max_shell; ++s) {
    for (std::int64_t dk = -s; dk <= s; ++dk) {
      const std::int64_t kk = ck + dk;
      if (kk < 0 || kk >= nz_) continue;
      for (std::int64_t dj = -s; dj <= s; ++dj) {
        const std::int64_t j = cj + dj;
        if (j < 0 || j >= ny_) continue;
        const bool face = std::abs(dk) == s || std::abs(dj) == s;
        for (std::int64_t di = -s; di <= s; di += (face ? 1 : 2 * s)) {
          const std::int64_t i = ci + di;
          if (i >= 0 && i < nx_) visit(i, j, kk);
          if (s == 0) break;
        }
      }
    }
    if (inside && out.size() == k) {
      const double reach = static_cast<double>(s) * cell_;
      if (out.front().squared_distance < reach * reach) break;
    }
  }
  std::sort_heap(out.begin(), out.end(), closer);
}

void PointGrid::within(const Vec3& q, double radius, std::vector<std::uint32_t>& out) const {
  out.clear();
  if (points_.empty() || radius < 0.0) return;
  const double r2 = radius * radius;
  const auto lo_i = axis_cell(q.x - radius, origin_.x, nx_), hi_i = axis_cell(q.x + radius, origin_.x, nx_);
  const auto lo_j = axis_cell(q.y - radius, origin_.y, ny_), hi_j = axis_cell(q.y + radius, origin_.y, ny_);
  const auto lo_k = axis_cell(q.z - radius, origin_.z, nz_), hi_k = axis_cell(q.z + radius, origin_.z, nz_);
  for (auto k = lo_k; k <= hi_k; ++k)
    for (auto j = lo_j; j <= hi_j; ++j)
      for (auto i = lo_i; i <= hi_i; ++i) {
        const auto c = cell_index(i, j, k);
        for (auto it = cell_start_[c]; it < cell_start_[c + 1]; ++it) {
          const std::uint32_t idx = order_[it];
          if (squared_distance(q, points_[idx]) <= r2) out.push_back(idx);
        }
      }
  std::sort(out.begin(), out.end());
}

}  // namespace canopy
