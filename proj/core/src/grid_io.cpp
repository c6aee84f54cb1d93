#include "semicorr/grid_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>

#include "semicorr/error.hpp"

namespace semicorr {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return __builtin_bswap64(v);
}

void write_le_doubles(std::ofstream& out, std::span<const double> data) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  } else {
    for (double v : data) {
      std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), 8);
    }
  }
}

std::vector<double> interleave(const Eigen::MatrixXcd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()) * 2);
  // Row-major order: x node slowest.
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out[k++] = m(i, j).real();
      out[k++] = m(i, j).imag();
    }
  return out;
}

Eigen::MatrixXcd deinterleave(const std::vector<double>& d, Eigen::Index rows, Eigen::Index cols) {
  if (d.size() != static_cast<std::size_t>(rows * cols * 2)) throw InvalidArgument("grid file payload size mismatch");
  Eigen::MatrixXcd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j, k += 2) m(i, j) = cplx(d[k], d[k + 1]);
  return m;
}

void require_kind(const nlohmann::json& h, const char* kind) {
  if (h.value("kind", "") != kind) throw InvalidArgument(std::string("grid file does not hold a ") + kind);
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path);
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_grid_file(const std::string& path, nlohmann::json header, std::span<const double> data) {
  header["format"] = "semicorr-grid";
  header["version"] = 1;
  header["count"] = data.size();
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  out.write(kGridMagic, 8);
  const std::uint64_t len = to_le(text.size());
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_le_doubles(out, data);
  if (!out) throw Error("write failed: " + path);
}

GridFile read_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kGridMagic, 8) != 0) throw InvalidArgument(path + ": not a semicorr grid file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  len = to_le(len);
  if (!in || len > (1u << 26)) throw InvalidArgument(path + ": corrupt header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  GridFile f;
  try {
    f.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(path + ": bad header: " + e.what());
  }
  const auto count = f.header.at("count").get<std::size_t>();
  f.data.resize(count);
  in.read(reinterpret_cast<char*>(f.data.data()), static_cast<std::streamsize>(count * 8));
  if (!in) throw InvalidArgument(path + ": truncated payload");
  if constexpr (std::endian::native != std::endian::little)
    for (double& v : f.data) v = std::bit_cast<double>(to_le(std::bit_cast<std::uint64_t>(v)));
  return f;
}

nlohmann::json context_header(const PhaseSpaceContext& ctx) {
  return {{"dim", ctx.dim()}, {"n", ctx.n()}, {"length", ctx.grid.length}, {"epsilon", ctx.epsilon}};
}

PhaseSpaceContext context_from_header(const nlohmann::json& h) {
  return PhaseSpaceContext(h.at("dim").get<int>(), h.at("n").get<int>(), h.at("length").get<double>(),
                           h.at("epsilon").get<double>());
}

void save_grid_function(const std::string& path, const GridFunction& u) {
  auto h = context_header(u.ctx);
  h["kind"] = "grid_function";
  h["dtype"] = "complex128";
  h["shape"] = {u.values.size()};
  const Eigen::MatrixXcd m = u.values;
  write_grid_file(path, h, interleave(m));
}

GridFunction load_grid_function(const std::string& path) {
  const auto f = read_grid_file(path);
  require_kind(f.header, "grid_function");
  const auto ctx = context_from_header(f.header);
  const auto sz = static_cast<Eigen::Index>(ctx.size());
  return GridFunction(ctx, deinterleave(f.data, sz, 1).col(0));
}

void save_symbol(const std::string& path, const Symbol& s) {
  auto h = context_header(s.ctx);
  h["kind"] = "symbol";
  h["dtype"] = "complex128";
  h["shape"] = {s.values.rows(), s.values.cols()};
  h["layout"] = "x-major, xi in FFT order";
  write_grid_file(path, h, interleave(s.values));
}

Symbol load_symbol(const std::string& path) {
  const auto f = read_grid_file(path);
  require_kind(f.header, "symbol");
  const auto ctx = context_from_header(f.header);
  const auto sz = static_cast<Eigen::Index>(ctx.size());
  return Symbol(ctx, deinterleave(f.data, sz, sz));
}

void save_wigner(const std::string& path, const WignerFunction& w) {
  auto h = context_header(w.ctx);
  h["kind"] = "wigner";
  h["dtype"] = "float64";
  h["shape"] = {w.values.rows(), w.values.cols()};
  h["layout"] = "x-major, xi in FFT order";
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = w.values;
  write_grid_file(path, h, std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())));
}

WignerFunction load_wigner(const std::string& path) {
  const auto f = read_grid_file(path);
  require_kind(f.header, "wigner");
  const auto ctx = context_from_header(f.header);
  const auto sz = static_cast<Eigen::Index>(ctx.size());
  if (f.data.size() != static_cast<std::size_t>(sz * sz)) throw InvalidArgument("wigner payload size mismatch");
  WignerFunction w{ctx, Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                            f.data.data(), sz, sz)};
  return w;
}

void write_csv(const std::string& path, const GridFunction& u) {
  auto out = open_csv(path);
  out << "x0" << (u.ctx.dim() == 2 ? ",x1" : "") << ",re,im\n";
  for (Eigen::Index j = 0; j < u.values.size(); ++j) {
    const auto x = u.ctx.grid.position(static_cast<std::size_t>(j));
    out << format_double(x[0]);
    if (u.ctx.dim() == 2) out << ',' << format_double(x[1]);
    out << ',' << format_double(u.values(j).real()) << ',' << format_double(u.values(j).imag()) << '\n';
  }
}

namespace {
// xi slots of a 1-D context sorted ascending.
std::vector<Eigen::Index> sorted_slots(const PhaseSpaceContext& ctx) {
  if (ctx.dim() != 1) throw InvalidArgument("CSV slices are 1-D only");
  const int n = ctx.n();
  std::vector<Eigen::Index> s(n);
  for (int i = 0; i < n; ++i) s[i] = (i + n / 2) % n;
  return s;
}
}  // namespace

void write_csv_x_slice(const std::string& path, const Symbol& s, std::size_t x_node) {
  const auto slots = sorted_slots(s.ctx);
  auto out = open_csv(path);
  out << "xi,re,im\n";
  for (auto m : slots)
    out << format_double(s.ctx.xi(static_cast<int>(m))) << ',' << format_double(s.values(x_node, m).real()) << ','
        << format_double(s.values(x_node, m).imag()) << '\n';
}

void write_csv_xi_slice(const std::string& path, const Symbol& s, std::size_t xi_slot) {
  sorted_slots(s.ctx);
  auto out = open_csv(path);
  out << "x,re,im\n";
  for (Eigen::Index j = 0; j < s.values.rows(); ++j)
    out << format_double(s.ctx.grid.coord(static_cast<int>(j))) << ',' << format_double(s.values(j, xi_slot).real())
        << ',' << format_double(s.values(j, xi_slot).imag()) << '\n';
}

void write_csv_x_slice(const std::string& path, const WignerFunction& w, std::size_t x_node) {
  const auto slots = sorted_slots(w.ctx);
  auto out = open_csv(path);
  out << "xi,value\n";
  for (auto m : slots)
    out << format_double(w.ctx.xi(static_cast<int>(m))) << ',' << format_double(w.values(x_node, m)) << '\n';
}

}  // namespace semicorr
