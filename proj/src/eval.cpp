#include "canopy/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "canopy/error.hpp"

namespace canopy {
namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = line.find(',');
    auto field = line.substr(0, comma);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r' || field.back() == '\t'))
      field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

EvalReport prf(const EvalCounts& c) {
  EvalReport r;
  r.counts = c;
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  const double sum = r.precision + r.recall;
  r.f_score = sum > 0.0 ? 2.0 * (r.recall * r.precision) / sum : 0.0;
  return r;
}

StemMatching match_stems(std::span<const Vec2> predicted, std::span<const Vec2> truth,
                         double radius) {
  if (!(radius > 0.0)) throw_argument("match radius must be > 0");
  std::vector<StemMatch> candidates;
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double d = distance(predicted[p], truth[t]);
      if (d <= radius) candidates.push_back({p, t, d});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const StemMatch& a, const StemMatch& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.predicted != b.predicted) return a.predicted < b.predicted;
    return a.truth < b.truth;
  });
  std::vector<bool> used_p(predicted.size(), false), used_t(truth.size(), false);
  StemMatching result;
  for (const auto& c : candidates) {
    if (used_p[c.predicted] || used_t[c.truth]) continue;
    used_p[c.predicted] = used_t[c.truth] = true;
    result.pairs.push_back(c);
  }
  result.counts.tp = result.pairs.size();
  result.counts.fp = predicted.size() - result.pairs.size();
  result.counts.fn = truth.size() - result.pairs.size();
  return result;
}

EvalCounts mask_eval(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (predicted.size() != truth.size()) {
    throw_argument("mask lengths differ: " + std::to_string(predicted.size()) + " vs " +
                   std::to_string(truth.size()));
  }
  EvalCounts c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] && truth[i]) {
      ++c.tp;
    } else if (predicted[i]) {
      ++c.fp;
    } else if (truth[i]) {
      ++c.fn;
    }
  }
  return c;
}

void write_report_csv(const EvalReport& r, std::ostream& out) {
  char line[160];
  std::snprintf(line, sizeof line, "%llu,%llu,%llu,%.4f,%.4f,%.4f\n",
                static_cast<unsigned long long>(r.counts.tp),
                static_cast<unsigned long long>(r.counts.fp),
                static_cast<unsigned long long>(r.counts.fn), r.precision, r.recall, r.f_score);
  out << "tp,fp,fn,precision,recall,f_score\n" << line;
}

void write_report_text(const EvalReport& r, std::ostream& out) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "true positives : %8llu\nfalse positives: %8llu\nfalse negatives: %8llu\n"
                "precision      : %8.4f\nrecall         : %8.4f\nF-score        : %8.4f\n",
                static_cast<unsigned long long>(r.counts.tp),
                static_cast<unsigned long long>(r.counts.fp),
                static_cast<unsigned long long>(r.counts.fn), r.precision, r.recall, r.f_score);
  out << buf;
}

std::vector<Vec2> read_stem_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "line 1: missing CSV header");
  const auto header = split_csv(line);
  std::size_t xcol = header.size(), ycol = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "stem_x" || (header[c] == "x" && xcol == header.size())) xcol = c;
    if (header[c] == "stem_y" || (header[c] == "y" && ycol == header.size())) ycol = c;
  }
  if (xcol == header.size() || ycol == header.size()) {
    throw Error(ErrorKind::Parse, "line 1: header needs stem_x,stem_y or x,y columns");
  }
  std::vector<Vec2> stems;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " fields");
    }
    Vec2 p;
    for (auto [col, dst] : {std::pair{xcol, &p.x}, std::pair{ycol, &p.y}}) {
      const auto f = fields[col];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), *dst);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": non-numeric '" +
                                          std::string(f) + "'");
      }
    }
    stems.push_back(p);
  }
  return stems;
}

}  // namespace canopy
