#include "canopy/cloud_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "canopy/error.hpp"
#include "canopy/parallel.hpp"

namespace canopy {
namespace {

constexpr std::array<std::string_view, 7> kBaseColumns = {
    "x", "y", "z", "intensity", "return_number", "number_of_returns", "classification"};
constexpr std::array<std::string_view, 3> kSpectralColumns = {"ir", "r", "g"};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + what);
}

double parse_real(std::string_view tok, std::size_t line_no, std::string_view column) {
  double v = 0.0;
  // from_chars rejects a leading '+', accept it for hand-written files.
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    parse_fail(line_no, "non-numeric value '" + std::string(tok) + "' in column " +
                            std::string(column));
  }
  return v;
}

std::uint8_t parse_small_int(std::string_view tok, std::size_t line_no, std::string_view column) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    parse_fail(line_no, "non-integer value '" + std::string(tok) + "' in column " +
                            std::string(column));
  }
  if (v < 0 || v > 255) {
    parse_fail(line_no, "value " + std::to_string(v) + " out of range in column " +
                            std::string(column));
  }
  return static_cast<std::uint8_t>(v);
}

void put_shortest(std::ostream& out, double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.write(buf.data(), ptr - buf.data());
}

void put_fixed6(std::ostream& out, double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, 6);
  if (ec != std::errc()) throw Error(ErrorKind::Io, "coordinate too large to format");
  out.write(buf.data(), ptr - buf.data());
}

// Little-endian field access into a byte buffer, independent of host order.
template <typename T>
T le_read(const std::vector<unsigned char>& buf, std::size_t offset) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                     std::uint8_t>>>;
  U v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<U>(buf[offset + i]) << (8 * i);
  return std::bit_cast<T>(v);
}

}  // namespace

PointCloud read_text_cloud(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "line 1: missing header");
  ++line_no;
  const auto header = split_ws(line);
  bool spectral = false;
  const auto header_is = [&](std::size_t n) {
    if (header.size() != n) return false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string_view want = i < 7 ? kBaseColumns[i] : kSpectralColumns[i - 7];
      if (header[i] != want) return false;
    }
    return true;
  };
  if (header_is(10)) {
    spectral = true;
  } else if (!header_is(7)) {
    parse_fail(1, "header must be 'x y z intensity return_number number_of_returns "
                  "classification [ir r g]'");
  }
  const std::size_t columns = header.size();

  PointCloud cloud(spectral);
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != columns) {
      parse_fail(line_no, "expected " + std::to_string(columns) + " columns, found " +
                              std::to_string(tok.size()));
    }
    PointRecord r;
    r.x = parse_real(tok[0], line_no, "x");
    r.y = parse_real(tok[1], line_no, "y");
    r.z = parse_real(tok[2], line_no, "z");
    r.intensity = parse_real(tok[3], line_no, "intensity");
    r.return_number = parse_small_int(tok[4], line_no, "return_number");
    r.number_of_returns = parse_small_int(tok[5], line_no, "number_of_returns");
    r.classification = parse_small_int(tok[6], line_no, "classification");
    if (spectral) {
      r.spectral = Spectral{parse_real(tok[7], line_no, "ir"), parse_real(tok[8], line_no, "r"),
                            parse_real(tok[9], line_no, "g")};
    }
    try {
      cloud.append(r);
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cloud;
}

void write_text_cloud(const PointCloud& cloud, std::ostream& out) {
  out << "x y z intensity return_number number_of_returns classification";
  if (cloud.has_spectral()) out << " ir r g";
  out << '\n';
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const PointRecord r = cloud.record(i);
    put_fixed6(out, r.x);
    out << ' ';
    put_fixed6(out, r.y);
    out << ' ';
    put_fixed6(out, r.z);
    out << ' ';
    put_shortest(out, r.intensity);
    out << ' ' << int(r.return_number) << ' ' << int(r.number_of_returns) << ' '
        << int(r.classification);
    if (r.spectral) {
      out << ' ';
      put_shortest(out, r.spectral->ir);
      out << ' ';
      put_shortest(out, r.spectral->r);
      out << ' ';
      put_shortest(out, r.spectral->g);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing text cloud");
}

PointCloud read_las(std::istream& in) {
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
  constexpr std::size_t kHeaderSize = 227;
  if (buf.size() < 4 || std::memcmp(buf.data(), "LASF", 4) != 0) {
    throw Error(ErrorKind::Format, "missing LASF signature");
  }
  if (buf.size() < kHeaderSize) throw Error(ErrorKind::Truncated, "LAS header truncated");

  const auto major = le_read<std::uint8_t>(buf, 24);
  const auto minor = le_read<std::uint8_t>(buf, 25);
  if (major != 1 || minor > 2) {
    throw Error(ErrorKind::Unsupported, "LAS version " + std::to_string(major) + "." +
                                            std::to_string(minor) + " not supported (1.0-1.2)");
  }
  const auto point_offset = le_read<std::uint32_t>(buf, 96);
  const auto format = le_read<std::uint8_t>(buf, 104);
  const auto record_length = le_read<std::uint16_t>(buf, 105);
  const auto count = le_read<std::uint32_t>(buf, 107);
  const double scale[3] = {le_read<double>(buf, 131), le_read<double>(buf, 139),
                           le_read<double>(buf, 147)};
  const double offset[3] = {le_read<double>(buf, 155), le_read<double>(buf, 163),
                            le_read<double>(buf, 171)};

  if (format & 0x80) throw Error(ErrorKind::Unsupported, "compressed LAS is not supported");
  constexpr std::array<std::uint16_t, 4> kMinLength = {20, 28, 26, 34};
  if (format > 3) {
    throw Error(ErrorKind::Unsupported,
                "point data record format " + std::to_string(format) + " not supported (0-3)");
  }
  if (record_length < kMinLength[format]) {
    throw Error(ErrorKind::Format, "record length " + std::to_string(record_length) +
                                       " too short for format " + std::to_string(format));
  }
  const std::uint64_t needed =
      std::uint64_t{point_offset} + std::uint64_t{count} * std::uint64_t{record_length};
  if (point_offset < kHeaderSize || needed > buf.size()) {
    throw Error(ErrorKind::Truncated, "header declares " + std::to_string(count) +
                                          " points but the file holds " +
                                          std::to_string(buf.size() > point_offset
                                                             ? (buf.size() - point_offset) /
                                                                   record_length
                                                             : 0));
  }

  PointCloud cloud;
  cloud.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t base = point_offset + std::size_t{i} * record_length;
    PointRecord r;
    r.x = static_cast<double>(le_read<std::int32_t>(buf, base + 0)) * scale[0] + offset[0];
    r.y = static_cast<double>(le_read<std::int32_t>(buf, base + 4)) * scale[1] + offset[1];
    r.z = static_cast<double>(le_read<std::int32_t>(buf, base + 8)) * scale[2] + offset[2];
    r.intensity = le_read<std::uint16_t>(buf, base + 12);
    const auto flags = le_read<std::uint8_t>(buf, base + 14);
    r.return_number = flags & 0x07;
    r.number_of_returns = (flags >> 3) & 0x07;
    r.classification = le_read<std::uint8_t>(buf, base + 15) & 0x1f;
    try {
      cloud.append(r);
    } catch (const Error& e) {
      throw Error(e.kind(), "LAS record " + std::to_string(i) + ": " + e.what());
    }
  }
  return cloud;
}

PointCloud read_cloud_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  const bool las = in.gcount() == 4 && std::memcmp(magic, "LASF", 4) == 0;
  in.clear();
  in.seekg(0);
  return las ? read_las(in) : read_text_cloud(in);
}

void write_text_cloud_file(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  write_text_cloud(cloud, out);
}

PointCloud fuse_spectral(const PointCloud& cloud, const Raster& raster) {
  if (raster.band_count() != 3) {
    throw_argument("spectral raster must have exactly 3 bands, found " +
                   std::to_string(raster.band_count()));
  }
  if (raster.empty()) throw_argument("spectral raster is empty");

  const auto sample_axis = [&](double coord, double origin, std::size_t n) {
    double f = (coord - origin) / raster.cell_size() - 0.5;
    f = std::clamp(f, 0.0, static_cast<double>(n - 1));
    const auto lo = std::min(static_cast<std::size_t>(std::floor(f)), n - 1);
    const auto hi = std::min(lo + 1, n - 1);
    return std::tuple{lo, hi, f - static_cast<double>(lo)};
  };

  PointCloud out(true);
  out.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    PointRecord r = cloud.record(i);
    const auto [c0, c1, tx] = sample_axis(r.x, raster.origin().x, raster.width());
    const auto [r0, r1, ty] = sample_axis(r.y, raster.origin().y, raster.height());
    std::array<double, 3> v{};
    for (std::size_t b = 0; b < 3; ++b) {
      const double bottom = raster.at(c0, r0, b) * (1.0 - tx) + raster.at(c1, r0, b) * tx;
      const double top = raster.at(c0, r1, b) * (1.0 - tx) + raster.at(c1, r1, b) * tx;
      v[b] = bottom * (1.0 - ty) + top * ty;
    }
    r.spectral = Spectral{v[0], v[1], v[2]};
    out.append(r);
  }
  return out;
}

Raster density_map(const PointCloud& cloud, double cell_size, unsigned threads) {
  if (!(cell_size > 0.0)) throw_argument("cell_size must be > 0");
  if (cloud.empty()) return {};
  const Box3 box = *cloud.bounds();
  const std::size_t w = cells_spanning(box.max.x - box.min.x, cell_size);
  const std::size_t h = cells_spanning(box.max.y - box.min.y, cell_size);
  Raster raster({box.min.x, box.min.y}, cell_size, w, h);

  const auto xs = cloud.x();
  const auto ys = cloud.y();
  const std::size_t chunks = std::max<unsigned>(1, threads);
  std::vector<std::vector<std::uint64_t>> partial(chunks);
  parallel_chunks(cloud.size(), threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    auto& counts = partial[c];
    counts.assign(w * h, 0);
    for (std::size_t i = begin; i < end; ++i) {
      counts[raster.row_of(ys[i]) * w + raster.column_of(xs[i])] += 1;
    }
  });
  const double area = cell_size * cell_size;
  auto values = raster.band(0);
  for (std::size_t cell = 0; cell < w * h; ++cell) {
    std::uint64_t n = 0;
    for (const auto& counts : partial) {
      if (!counts.empty()) n += counts[cell];
    }
    values[cell] = static_cast<double>(n) / area;
  }
  return raster;
}

void write_raster_csv(const Raster& raster, std::ostream& out) {
  out << "# raster ";
  put_shortest(out, raster.origin().x);
  out << ' ';
  put_shortest(out, raster.origin().y);
  out << ' ';
  put_shortest(out, raster.cell_size());
  out << ' ' << raster.width() << ' ' << raster.height() << ' ' << raster.band_count() << '\n';
  for (std::size_t b = 0; b < raster.band_count(); ++b) {
    for (std::size_t row = 0; row < raster.height(); ++row) {
      for (std::size_t col = 0; col < raster.width(); ++col) {
        if (col) out << ',';
        put_shortest(out, raster.at(col, row, b));
      }
      out << '\n';
    }
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing raster");
}

Raster read_raster_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "line 1: missing raster header");
  std::istringstream header(line);
  std::string hash, tag;
  double ox = 0, oy = 0, cs = 0;
  std::size_t w = 0, h = 0, bands = 0;
  if (!(header >> hash >> tag >> ox >> oy >> cs >> w >> h >> bands) || hash != "#" ||
      tag != "raster") {
    throw Error(ErrorKind::Parse,
                "line 1: expected '# raster origin_x origin_y cell_size width height bands'");
  }
  if (!(cs > 0.0) || bands == 0) throw Error(ErrorKind::Parse, "line 1: invalid raster geometry");
  Raster raster({ox, oy}, cs, w, h, bands);
  std::size_t line_no = 1;
  for (std::size_t b = 0; b < bands; ++b) {
    for (std::size_t row = 0; row < h; ++row) {
      if (!std::getline(in, line)) {
        throw Error(ErrorKind::Truncated, "raster ends after line " + std::to_string(line_no));
      }
      ++line_no;
      std::string_view rest(line);
      while (!rest.empty() && (rest.back() == '\r' || rest.back() == ' ')) rest.remove_suffix(1);
      std::size_t col = 0;
      while (true) {
        const auto comma = rest.find(',');
        const auto tok = rest.substr(0, comma);
        if (col >= w) parse_fail(line_no, "more than " + std::to_string(w) + " values");
        raster.at(col++, row, b) = parse_real(tok, line_no, "value");
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      if (col != w) {
        parse_fail(line_no, "expected " + std::to_string(w) + " values, found " +
                                std::to_string(col));
      }
    }
  }
  return raster;
}

void write_raster_pgm(const Raster& raster, std::ostream& out) {
  const auto values = raster.empty() ? std::span<const double>{} : raster.band(0);
  double lo = 0.0, hi = 0.0;
  if (!values.empty()) {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
  }
  out << "P2\n# scale min=";
  put_shortest(out, lo);
  out << " max=";
  put_shortest(out, hi);
  out << " levels=65535\n" << raster.width() << ' ' << raster.height() << "\n65535\n";
  const double span = hi - lo;
  for (std::size_t r = raster.height(); r-- > 0;) {
    for (std::size_t col = 0; col < raster.width(); ++col) {
      const double v = raster.at(col, r);
      const long level = span > 0.0 ? std::lround((v - lo) / span * 65535.0) : 0;
      if (col) out << ' ';
      out << level;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing PGM");
}

}  // namespace canopy
