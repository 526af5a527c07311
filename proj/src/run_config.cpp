#include "canopy/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "canopy/error.hpp"
#include "json.hpp"

namespace canopy {
namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& what) { throw Error(ErrorKind::Config, what); }

class Section {
 public:
  Section(const json& node, std::string name) : node_(node), name_(std::move(name)) {
    if (!node_.is_object()) config_fail(name_ + " must be an object");
  }

  void check_keys(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [key, value] : node_.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        config_fail("unknown key " + field(key));
      }
    }
  }

  template <typename T>
  void read(std::string_view key, T& dst) const {
    const auto it = node_.find(std::string(key));
    if (it == node_.end()) return;
    if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) config_fail(field(key) + " must be a number");
      dst = it->template get<T>();
    } else {
      if (!it->is_number_integer()) config_fail(field(key) + " must be an integer");
      const auto v = it->template get<std::int64_t>();
      if constexpr (std::is_unsigned_v<T>) {
        if (v < 0) config_fail(field(key) + " must be >= 0");
      }
      if (v < static_cast<std::int64_t>(std::numeric_limits<T>::min()) ||
          (v > 0 && static_cast<std::uint64_t>(v) > std::numeric_limits<T>::max())) {
        config_fail(field(key) + " is out of range");
      }
      dst = static_cast<T>(v);
    }
  }

  template <typename T>
  void read_triple(std::string_view key, T& a, T& b, T& c) const {
    const auto it = node_.find(std::string(key));
    if (it == node_.end()) return;
    if (!it->is_array() || it->size() != 3) config_fail(field(key) + " must be a 3-element array");
    T* dst[3] = {&a, &b, &c};
    for (std::size_t n = 0; n < 3; ++n) {
      const auto& v = (*it)[n];
      if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) config_fail(field(key) + " must hold numbers");
        *dst[n] = v.template get<T>();
      } else {
        if (!v.is_number_integer() || v.template get<std::int64_t>() <= 0 ||
            v.template get<std::int64_t>() > std::numeric_limits<T>::max()) {
          config_fail(field(key) + " must hold positive integers");
        }
        *dst[n] = static_cast<T>(v.template get<std::int64_t>());
      }
    }
  }

  bool has(std::string_view key) const { return node_.contains(std::string(key)); }
  std::string field(std::string_view key) const { return name_ + "." + std::string(key); }

 private:
  const json& node_;
  std::string name_;
};

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    config_fail(std::string("config is not valid JSON: ") + e.what());
  }
}

void apply_json(RunConfig& cfg, const json& root) {
  if (!root.is_object()) config_fail("config root must be an object");
  for (const auto& [key, value] : root.items()) {
    static constexpr std::string_view kSections[] = {"pmf",      "sor",     "grid",    "detector",
                                                     "kernel",   "sampling", "density", "eval"};
    if (std::find(std::begin(kSections), std::end(kSections), key) == std::end(kSections)) {
      config_fail("unknown key " + key);
    }
  }
  if (root.contains("pmf")) {
    Section s(root["pmf"], "pmf");
    s.check_keys({"cell_size", "max_window", "max_distance", "initial_distance", "slope", "window_base"});
    s.read("cell_size", cfg.pmf.cell_size);
    s.read("max_window", cfg.pmf.max_window);
    s.read("max_distance", cfg.pmf.max_distance);
    s.read("initial_distance", cfg.pmf.initial_distance);
    s.read("slope", cfg.pmf.slope);
    s.read("window_base", cfg.pmf.window_base);
  }
  if (root.contains("sor")) {
    Section s(root["sor"], "sor");
    s.check_keys({"k", "sigma_mult"});
    s.read("k", cfg.sor.k);
    s.read("sigma_mult", cfg.sor.sigma_mult);
  }
  if (root.contains("grid")) {
    Section s(root["grid"], "grid");
    s.check_keys({"resolution", "dims", "origin"});
    s.read("resolution", cfg.grid.resolution);
    s.read_triple("dims", cfg.grid.dims[0], cfg.grid.dims[1], cfg.grid.dims[2]);
    if (s.has("origin")) {
      if (root["grid"]["origin"].is_null()) {
        cfg.grid.origin.reset();
      } else {
        Vec3 o;
        s.read_triple("origin", o.x, o.y, o.z);
        cfg.grid.origin = o;
      }
    }
  }
  if (root.contains("detector")) {
    Section s(root["detector"], "detector");
    s.check_keys({"ret_thresh", "comp_threshold", "aspect_limit", "connectivity"});
    s.read("ret_thresh", cfg.detector.ret_thresh);
    s.read("comp_threshold", cfg.detector.comp_threshold);
    s.read("aspect_limit", cfg.detector.aspect_limit);
    int connectivity = static_cast<int>(cfg.detector.connectivity);
    s.read("connectivity", connectivity);
    if (connectivity != 6 && connectivity != 18 && connectivity != 26) {
      config_fail("detector.connectivity must be 6, 18 or 26");
    }
    cfg.detector.connectivity = static_cast<Connectivity>(connectivity);
  }
  if (root.contains("kernel")) {
    Section s(root["kernel"], "kernel");
    s.check_keys({"n_centroids", "radius", "group_size", "coord_dim", "feature_dim"});
    s.read("n_centroids", cfg.kernel.n_centroids);
    s.read("radius", cfg.kernel.radius);
    s.read("group_size", cfg.kernel.group_size);
    s.read("coord_dim", cfg.kernel.coord_dim);
    s.read("feature_dim", cfg.kernel.feature_dim);
  }
  if (root.contains("sampling")) {
    Section s(root["sampling"], "sampling");
    s.check_keys({"block_size", "block_points", "block_count", "fps_points"});
    s.read("block_size", cfg.sampling.block_size);
    s.read("block_points", cfg.sampling.block_points);
    s.read("block_count", cfg.sampling.block_count);
    s.read("fps_points", cfg.sampling.fps_points);
  }
  if (root.contains("density")) {
    Section s(root["density"], "density");
    s.check_keys({"cell_size"});
    s.read("cell_size", cfg.density_cell_size);
  }
  if (root.contains("eval")) {
    Section s(root["eval"], "eval");
    s.check_keys({"radius"});
    s.read("radius", cfg.eval_radius);
  }
  cfg.validate();
}

}  // namespace

GridSpec GridSettings::resolve(const PointCloud& cloud) const {
  GridSpec spec;
  spec.resolution = resolution;
  spec.dims = dims;
  if (origin) {
    spec.origin = *origin;
  } else if (cloud.bounds()) {
    spec.origin = cloud.bounds()->min;
  }
  spec.validate();
  return spec;
}

void RunConfig::validate() const {
  try {
    pmf.validate();
    sor.validate();
    detector.validate();
    GridSpec spec;
    spec.resolution = grid.resolution;
    spec.dims = grid.dims;
    spec.validate();
  } catch (const Error& e) {
    config_fail(e.what());
  }
  if (kernel.group_size < 1) config_fail("kernel.group_size must be >= 1");
  if (!(kernel.radius > 0.0)) config_fail("kernel.radius must be > 0");
  if (kernel.coord_dim != 3) config_fail("kernel.coord_dim must be 3");
  if (!(sampling.block_size > 0.0)) config_fail("sampling.block_size must be > 0");
  if (sampling.block_points < 1) config_fail("sampling.block_points must be >= 1");
  if (!(density_cell_size > 0.0)) config_fail("density.cell_size must be > 0");
  if (!(eval_radius > 0.0)) config_fail("eval.radius must be > 0");
}

RunConfig RunConfig::from_json(std::string_view text) {
  RunConfig cfg;
  apply_json(cfg, parse_json(text));
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_fail("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

void RunConfig::set(std::string_view dotted_key, std::string_view json_value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == dotted_key.size()) {
    config_fail("override key must look like section.field, got '" + std::string(dotted_key) + "'");
  }
  json value = parse_json(json_value);
  json patch = json::object();
  patch[std::string(dotted_key.substr(0, dot))][std::string(dotted_key.substr(dot + 1))] = value;
  RunConfig next = *this;
  apply_json(next, patch);
  *this = next;
}

std::string RunConfig::to_json() const {
  json j;
  j["pmf"] = {{"cell_size", pmf.cell_size},         {"max_window", pmf.max_window},
              {"max_distance", pmf.max_distance},   {"initial_distance", pmf.initial_distance},
              {"slope", pmf.slope},                 {"window_base", pmf.window_base}};
  j["sor"] = {{"k", sor.k}, {"sigma_mult", sor.sigma_mult}};
  j["grid"] = {{"resolution", grid.resolution}, {"dims", grid.dims}};
  j["grid"]["origin"] = grid.origin ? json::array({grid.origin->x, grid.origin->y, grid.origin->z})
                                    : json(nullptr);
  j["detector"] = {{"ret_thresh", detector.ret_thresh},
                   {"comp_threshold", detector.comp_threshold},
                   {"aspect_limit", detector.aspect_limit},
                   {"connectivity", static_cast<int>(detector.connectivity)}};
  j["kernel"] = {{"n_centroids", kernel.n_centroids}, {"radius", kernel.radius},
                 {"group_size", kernel.group_size},   {"coord_dim", kernel.coord_dim},
                 {"feature_dim", kernel.feature_dim}};
  j["sampling"] = {{"block_size", sampling.block_size},
                   {"block_points", sampling.block_points},
                   {"block_count", sampling.block_count},
                   {"fps_points", sampling.fps_points}};
  j["density"] = {{"cell_size", density_cell_size}};
  j["eval"] = {{"radius", eval_radius}};
  return j.dump(2);
}

}  // namespace canopy
