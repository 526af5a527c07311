#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "canopy/geometry.hpp"

namespace canopy {

struct EvalCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  EvalCounts& operator+=(const EvalCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const EvalCounts&, const EvalCounts&) = default;
};

struct EvalReport {
  EvalCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
};

/// precision = tp/(tp+fp), recall = tp/(tp+fn), F = 2pr/(p+r); a ratio with
/// a zero denominator is 0.
EvalReport prf(const EvalCounts& counts);

inline constexpr double kStemMatchRadius = 1.5;

struct StemMatch {
  std::size_t predicted = 0;
  std::size_t truth = 0;
  double distance = 0.0;
};

struct StemMatching {
  EvalCounts counts;
  std::vector<StemMatch> pairs;  // in acceptance order
};

/// One-to-one greedy matching: all pairs within `radius` are taken in
/// ascending distance (ties by predicted then truth index) and accepted when
/// both ends are still free.
StemMatching match_stems(std::span<const Vec2> predicted, std::span<const Vec2> truth,
                         double radius = kStemMatchRadius);

/// Element-wise tallies; true negatives are not counted.
EvalCounts mask_eval(const std::vector<bool>& predicted, const std::vector<bool>& truth);

/// `tp,fp,fn,precision,recall,f_score` header and one row.
void write_report_csv(const EvalReport& report, std::ostream& out);
void write_report_text(const EvalReport& report, std::ostream& out);

/// Reads stem locations from a CSV whose header names either
/// `stem_x`/`stem_y` or `x`/`y` columns.
std::vector<Vec2> read_stem_csv(std::istream& in);

}  // namespace canopy
