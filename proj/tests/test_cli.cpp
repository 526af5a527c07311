// Drives the built `canopy` binary through std::system.

#include <sys/wait.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "canopy/cloud_io.hpp"
#include "canopy/geom_kernels.hpp"
#include "doctest.h"
#include "support/oracles.hpp"
#include "support/scene.hpp"

namespace fs = std::filesystem;
using namespace canopy;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "canopy_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::string& args) {
  const std::string o = path("stdout.txt"), e = path("stderr.txt");
  const std::string cmd = std::string(CANOPY_CLI) + " " + args + " >" + o + " 2>" + e;
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

void save(const PointCloud& c, const std::string& name) { write_text_cloud_file(c, path(name)); }

void save_text(const std::string& name, const std::string& text) {
  std::ofstream(path(name), std::ios::binary) << text;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

const scene::Scene& three_trees() {
  static const scene::Scene s = [] {
    std::vector<scene::TreeSpec> trees{{{25, 30}, 3.0, 2.5, 10.0},
                                       {{70, 25}, 2.5, 2.0, 9.0},
                                       {{45, 75}, 3.5, 3.0, 11.0}};
    auto sc = scene::generate_with_trees(7, trees);
    save(sc.cloud, "scene.txt");
    return sc;
  }();
  return s;
}

PointCloud plane(double size, double box_height) {
  PointCloud c;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double x = i + u(rng), y = j + u(rng);
      const bool in_box = x >= 15 && x < 25 && y >= 15 && y < 25;
      if (box_height > 0 && in_box) {
        for (int k = 0; k < 4; ++k) c.append({i + u(rng), j + u(rng), box_height, 0, 1, 1, 0, {}});
      } else {
        c.append({x, y, 0.01 * u(rng), 0, 1, 1, 0, {}});
      }
    }
  return c;
}

}  // namespace

TEST_CASE("detect") {
  three_trees();
  const auto r = cli("detect " + path("scene.txt") + " -o " + path("trees.csv"));
  CHECK(r.code == 0);
  CHECK(r.out == "trees=3\n");
  const auto rows = lines_of(slurp(path("trees.csv")));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "tree_id,stem_x,stem_y,min_x,min_y,max_x,max_y,max_z,size");

  const auto missing = cli("detect " + path("nope.txt") + " -o " + path("t.csv"));
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.txt") != std::string::npos);

  save_text("bad.json", R"({"detector": {"ret_thresh": -1}})");
  const auto bad = cli("detect " + path("scene.txt") + " --config " + path("bad.json") + " -o " + path("t.csv"));
  CHECK(bad.code == 2);
  CHECK(bad.err.find("ret_thresh") != std::string::npos);

  const auto flag = cli("detect " + path("scene.txt") + " --set detector.aspect_limit=0.5 -o " + path("t.csv"));
  CHECK(flag.code == 2);
  CHECK(flag.err.find("aspect_limit") != std::string::npos);

  save_text("garbage.txt", "x y z intensity return_number number_of_returns classification\n1 2\n");
  const auto parse = cli("detect " + path("garbage.txt") + " -o " + path("t.csv"));
  CHECK(parse.code == 1);
  CHECK(parse.err.find("line 2") != std::string::npos);

  CHECK(cli("detect").code == 2);
  CHECK(cli("frobnicate x").code == 2);
  CHECK(cli("--help").code == 0);
}

TEST_CASE("ground") {
  save(plane(30, 0), "flat.txt");
  auto r = cli("ground " + path("flat.txt") + " -o " + path("flat.mask"));
  CHECK(r.code == 0);
  for (const auto& l : lines_of(slurp(path("flat.mask")))) CHECK(l == "1");

  const auto boxed = plane(40, 5.0);
  save(boxed, "box.txt");
  r = cli("ground " + path("box.txt") + " -o " + path("box.mask"));
  CHECK(r.code == 0);
  const auto mask = lines_of(slurp(path("box.mask")));
  REQUIRE(mask.size() == boxed.size());
  for (std::size_t i = 0; i < boxed.size(); ++i) {
    if (boxed.z()[i] > 1) CHECK(mask[i] == "0");
  }
  CHECK(cli("ground " + path("flat.txt") + " -o /nonexistent-dir/mask.txt").code == 1);
}

TEST_CASE("voxelize") {
  PointCloud one;
  one.append({1, 1, 1, 0, 1, 1, 0, {}});
  save(one, "one.txt");
  auto r = cli("voxelize " + path("one.txt") + " -o " + path("one.svg"));
  CHECK(r.code == 0);
  CHECK(r.out == "occupied=1 dropped=0\n");

  PointCloud two = one;
  two.append({150, 1, 1, 0, 1, 1, 0, {}});
  save(two, "two.txt");
  r = cli("voxelize " + path("two.txt") + " --set grid.origin=[0,0,0] -o " + path("two.svg"));
  CHECK(r.out == "occupied=1 dropped=1\n");

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 100);
  PointCloud rc;
  for (int i = 0; i < 20000; ++i) rc.append({u(rng), u(rng), u(rng) / 5, 0, 1, 1, 0, {}});
  save(rc, "random.txt");
  r = cli("voxelize " + path("random.txt") + " --threads 3 -o " + path("random.svg"));
  const auto d = oracle::dense_voxelize(rc, GridSpec::tile(rc.bounds()->min));
  std::size_t occupied = 0;
  for (auto n : d.count) occupied += n > 0;
  CHECK(r.out == "occupied=" + std::to_string(occupied) + " dropped=0\n");
}

TEST_CASE("density") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 10);
  PointCloud c;
  for (int i = 0; i < 10000; ++i) c.append({u(rng), u(rng), 0, 0, 1, 1, 0, {}});
  save(c, "dense.txt");
  const auto r = cli("density " + path("dense.txt") + " --cell-size 1 -o " + path("dense.csv"));
  CHECK(r.code == 0);
  std::ifstream in(path("dense.csv"));
  const auto raster = read_raster_csv(in);
  std::size_t w, h;
  const auto ref = oracle::density(c, 1.0, w, h);
  REQUIRE(raster.width() == w);
  for (std::size_t row = 0; row < h; ++row)
    for (std::size_t col = 0; col < w; ++col) CHECK(raster.at(col, row) == ref[row * w + col]);
  CHECK(slurp(path("dense.pgm")).rfind("P2\n# scale", 0) == 0);
  CHECK(cli("density " + path("dense.txt") + " --cell-size 0 -o " + path("z.csv")).code == 2);
}

TEST_CASE("evaluate") {
  // 469 matched pairs, 56 stray predictions and 66 missed trees.
  std::string pred = "stem_x,stem_y\n", truth = "stem_x,stem_y\n";
  for (int i = 0; i < 469; ++i) {
    const double x = (i % 30) * 10.0, y = (i / 30) * 10.0;
    truth += std::to_string(x) + "," + std::to_string(y) + "\n";
    pred += std::to_string(x + 0.5) + "," + std::to_string(y) + "\n";
  }
  for (int i = 0; i < 56; ++i) pred += std::to_string(1000.0 + 10 * i) + ",0\n";
  for (int i = 0; i < 66; ++i) truth += std::to_string(-1000.0 - 10 * i) + ",0\n";
  save_text("pred.csv", pred);
  save_text("truth.csv", truth);
  auto r = cli("evaluate " + path("pred.csv") + " " + path("truth.csv"));
  CHECK(r.code == 0);
  CHECK(r.out == "tp,fp,fn,precision,recall,f_score\n469,56,66,0.8933,0.8766,0.8849\n");

  save_text("empty.csv", "stem_x,stem_y\n");
  r = cli("evaluate " + path("pred.csv") + " " + path("empty.csv"));
  CHECK(r.out.find("\n0,525,0,") != std::string::npos);
  CHECK(cli("evaluate " + path("pred.csv") + " " + path("truth.csv") + " --radius 0").code == 2);
}

TEST_CASE("fuse") {
  save_text("rgb.csv",
            "# raster 0 0 1 2 1 3\n"
            "100,200\n10,20\n1,2\n");
  PointCloud c;
  c.append({0.5, 0.5, 0, 5, 1, 1, 0, {}});
  c.append({1.0, 0.5, 0, 5, 1, 1, 0, {}});
  save(c, "pts.txt");
  const auto r = cli("fuse " + path("pts.txt") + " " + path("rgb.csv") + " -o " + path("fused.txt"));
  CHECK(r.code == 0);
  std::ifstream in(path("fused.txt"));
  const auto f = read_text_cloud(in);
  REQUIRE(f.size() == 2);
  CHECK(f.record(0).spectral == Spectral{100, 10, 1});
  CHECK(f.record(1).spectral == Spectral{150, 15, 1.5});
  CHECK(cli("fuse " + path("pts.txt") + " " + path("nope.csv") + " -o " + path("f.txt")).code == 2);
}

TEST_CASE("sample") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 40);
  PointCloud c;
  for (int i = 0; i < 8000; ++i) c.append({u(rng), u(rng), u(rng) / 4, 0, 1, 1, 0, {}});
  save(c, "sample.txt");
  const std::string base = "sample " + path("sample.txt") + " --block-size 15 --points 256 --blocks 4 --seed 9";
  auto r = cli(base + " -o " + path("s1.txt"));
  CHECK(r.code == 0);
  CHECK(r.out == "blocks=4\n");
  CHECK(cli(base + " -o " + path("s2.txt")).code == 0);
  CHECK(slurp(path("s1.txt")) == slurp(path("s2.txt")));
  CHECK(cli("sample " + path("sample.txt") + " --block-size 15 --points 256 --blocks 4 --seed 10 -o " +
            path("s3.txt")).code == 0);
  CHECK(slurp(path("s1.txt")) != slurp(path("s3.txt")));

  const auto blocks = sample_blocks(c, 15, 256, 4, 9);
  const auto rows = lines_of(slurp(path("s1.txt")));
  REQUIRE(rows.size() == 4);
  for (std::size_t b = 0; b < 4; ++b) {
    std::istringstream in(rows[b]);
    std::vector<std::uint32_t> idx;
    for (std::uint32_t v; in >> v;) idx.push_back(v);
    CHECK(idx == blocks[b]);
  }

  r = cli(base + " --fps 16 -o " + path("fps.txt"));
  CHECK(r.code == 0);
  const auto fps_rows = lines_of(slurp(path("fps.txt")));
  REQUIRE(fps_rows.size() == 4);
  for (std::size_t b = 0; b < 4; ++b) {
    std::vector<Vec3> pts;
    for (auto i : blocks[b]) pts.push_back(c.position(i));
    std::string want;
    for (auto k : oracle::greedy_fps(pts, 16, 0)) {
      if (!want.empty()) want += ' ';
      want += std::to_string(blocks[b][k]);
    }
    CHECK(fps_rows[b] == want);
  }
}

TEST_CASE("tile directory") {
  fs::create_directories(workdir() / "tiles");
  save(three_trees().cloud, "tiles/b_scene.txt");
  save(plane(30, 0), "tiles/a_flat.txt");
  const auto r = cli("detect " + path("tiles") + " --threads 2 -o " + path("tiles_out"));
  CHECK(r.code == 0);
  CHECK(r.out == "a_flat.txt trees=0\nb_scene.txt trees=3\n");
  CHECK(fs::exists(workdir() / "tiles_out" / "b_scene.csv"));
}
