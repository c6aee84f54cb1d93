#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "semicorr/checksum.hpp"
#include "semicorr/error.hpp"
#include "semicorr/grid_io.hpp"
#include "semicorr/phase_space.hpp"

using namespace semicorr;
namespace fs = std::filesystem;

namespace {
fs::path tmp(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "semicorr_io_test";
  fs::create_directories(dir);
  return dir / name;
}
}  // namespace

TEST(GridContainer, SymbolRoundTripIsBitExact) {
  const PhaseSpaceContext c(1, 32, 2.0, 0.0625);
  const Symbol s = Symbol::sample(c, [](const Eigen::Vector2d& x, const Eigen::Vector2d& xi) {
    return cplx(std::sin(x[0]) + xi[0] / 3.0, 1e-300 * x[0]);
  });
  const auto p = tmp("sym.bin").string();
  save_symbol(p, s);
  const Symbol back = load_symbol(p);
  EXPECT_EQ(back.ctx, c);
  EXPECT_TRUE((back.values.array() == s.values.array()).all());
}

TEST(GridContainer, GridFunctionAndWignerRoundTrip) {
  const PhaseSpaceContext c(2, 8, 1.0, 0.125);
  GridFunction u(c);
  for (Eigen::Index i = 0; i < u.values.size(); ++i) u.values(i) = cplx(i * 0.25, -1.0 / (i + 1));
  const auto p = tmp("u.bin").string();
  save_grid_function(p, u);
  const auto back = load_grid_function(p);
  EXPECT_TRUE((back.values.array() == u.values.array()).all());

  const auto w = wigner(u);
  const auto pw = tmp("w.bin").string();
  save_wigner(pw, w);
  const auto wb = load_wigner(pw);
  EXPECT_TRUE((wb.values.array() == w.values.array()).all());
  EXPECT_THROW(load_symbol(pw), InvalidArgument);
}

TEST(GridContainer, HeaderLayout) {
  const PhaseSpaceContext c(1, 8, 1.0, 0.125);
  const auto p = tmp("u1.bin").string();
  save_grid_function(p, GridFunction(c));
  std::ifstream in(p, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  EXPECT_EQ(std::string(magic, 8), "SCGRID01");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  std::string text(len, '\0');
  in.read(text.data(), len);
  const auto h = nlohmann::json::parse(text);
  EXPECT_EQ(h["dim"], 1);
  EXPECT_EQ(h["n"], 8);
  EXPECT_EQ(h["dtype"], "complex128");
  EXPECT_EQ(fs::file_size(p), 16 + len + 8 * 16);
}

TEST(GridContainer, RejectsGarbage) {
  const auto p = tmp("junk.bin").string();
  {
    std::ofstream out(p, std::ios::binary);
    out << "not a grid file at all";
  }
  EXPECT_THROW(read_grid_file(p), InvalidArgument);
  EXPECT_THROW(read_grid_file(tmp("missing.bin").string()), InvalidArgument);
}

TEST(GridContainer, CsvSliceIsSortedInXi) {
  const PhaseSpaceContext c(1, 8, 1.0, 0.125);
  const Symbol s = Symbol::sample(c, [](auto&, const Eigen::Vector2d& xi) { return xi[0]; });
  const auto p = tmp("slice.csv").string();
  write_csv_x_slice(p, s, 0);
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "xi,re,im");
  double prev = -1e300;
  int rows = 0;
  while (std::getline(in, line)) {
    const double v = std::stod(line.substr(0, line.find(',')));
    EXPECT_GT(v, prev);
    prev = v;
    ++rows;
  }
  EXPECT_EQ(rows, 8);
}

TEST(Checksum, KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const auto p = tmp("abc.txt").string();
  {
    std::ofstream out(p, std::ios::binary);
    out << "abc";
  }
  EXPECT_EQ(sha256_file(p), sha256_hex("abc"));
}
