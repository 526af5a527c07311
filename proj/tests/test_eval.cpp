#include <random>
#include <sstream>

#include "canopy/error.hpp"
#include "canopy/eval.hpp"
#include "doctest.h"

using namespace canopy;

TEST_CASE("prf on reported counts") {
  const auto a = prf({469, 56, 66});
  CHECK(a.precision == doctest::Approx(0.8933).epsilon(5e-4 / 0.8933));
  CHECK(a.recall == doctest::Approx(0.8766).epsilon(5e-4 / 0.8766));
  CHECK(std::fabs(a.f_score - 0.8849) <= 5e-4);
  const auto b = prf({178, 45, 135});
  CHECK(std::fabs(b.precision - 0.7982) <= 5e-4);
  CHECK(std::fabs(b.recall - 0.5687) <= 5e-4);
  CHECK(std::fabs(b.f_score - 0.6642) <= 5e-4);
  const auto z = prf({0, 0, 0});
  CHECK(z.precision == 0);
  CHECK(z.recall == 0);
  CHECK(z.f_score == 0);
  CHECK(prf({0, 3, 4}).f_score == 0);
}

TEST_CASE("prf properties") {
  std::mt19937_64 rng(61);
  for (int t = 0; t < 500; ++t) {
    const EvalCounts c{rng() % 50, rng() % 50, rng() % 50};
    const auto r = prf(c);
    const auto up = prf({c.tp + 1, c.fp, c.fn});
    CHECK(up.precision >= r.precision);
    CHECK(up.recall >= r.recall);
    CHECK(up.f_score >= r.f_score);
    if (r.precision > 0 && r.recall > 0) {
      CHECK(r.f_score <= std::max(r.precision, r.recall) + 1e-15);
      CHECK(r.f_score >= std::min(r.precision, r.recall) - 1e-15);
    }
  }
}

TEST_CASE("stem matching examples") {
  const std::vector<Vec2> truth{{0, 0}};
  const std::vector<Vec2> near{{1.4, 0}};
  CHECK(match_stems(near, truth).counts == EvalCounts{1, 0, 0});
  const std::vector<Vec2> far{{1.6, 0}};
  CHECK(match_stems(far, truth).counts == EvalCounts{0, 1, 1});
  const std::vector<Vec2> two{{0.9, 0}, {0, 0.5}};
  const auto m = match_stems(two, truth);
  CHECK(m.counts == EvalCounts{1, 1, 0});
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].predicted == 1);
  const std::vector<Vec2> none;
  CHECK(match_stems(two, none).counts == EvalCounts{0, 2, 0});
}

TEST_CASE("stem matching properties") {
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> u(0, 20);
  for (int t = 0; t < 200; ++t) {
    std::vector<Vec2> p(rng() % 15), q(rng() % 15);
    for (auto& v : p) v = {u(rng), u(rng)};
    for (auto& v : q) v = {u(rng), u(rng)};
    const auto a = match_stems(p, q);
    const auto b = match_stems(q, p);
    CHECK(a.counts.tp + a.counts.fp == p.size());
    CHECK(a.counts.tp + a.counts.fn == q.size());
    CHECK(b.counts.tp == a.counts.tp);
    CHECK(b.counts.fp == a.counts.fn);
    CHECK(b.counts.fn == a.counts.fp);
    for (const auto& pair : a.pairs) CHECK(pair.distance <= kStemMatchRadius);
  }
}

TEST_CASE("mask tallies") {
  std::vector<bool> m{true, false, true, true};
  CHECK(mask_eval(m, m) == EvalCounts{3, 0, 0});
  std::vector<bool> none(10, false), seven(10, false);
  for (int i = 0; i < 7; ++i) seven[i] = true;
  CHECK(mask_eval(none, seven) == EvalCounts{0, 0, 7});
  CHECK_THROWS_AS(mask_eval(none, m), Error);

  std::mt19937_64 rng(63);
  std::vector<bool> p(10000), q(10000);
  EvalCounts want;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = rng() & 1;
    q[i] = rng() & 1;
    want.tp += p[i] && q[i];
    want.fp += p[i] && !q[i];
    want.fn += !p[i] && q[i];
  }
  CHECK(mask_eval(p, q) == want);
}

TEST_CASE("report output and stem csv") {
  std::ostringstream csv;
  write_report_csv(prf({469, 56, 66}), csv);
  CHECK(csv.str() == "tp,fp,fn,precision,recall,f_score\n469,56,66,0.8933,0.8766,0.8849\n");
  std::ostringstream text;
  write_report_text(prf({1, 0, 0}), text);
  CHECK(text.str().find("precision") != std::string::npos);

  std::istringstream a("tree_id,stem_x,stem_y,size\n1,2.5,3.5,10\n");
  CHECK(read_stem_csv(a) == std::vector<Vec2>{{2.5, 3.5}});
  std::istringstream b("x,y\n1,2\n3,4\n");
  CHECK(read_stem_csv(b).size() == 2);
  std::istringstream c("a,b\n1,2\n");
  CHECK_THROWS_AS(read_stem_csv(c), Error);
}
