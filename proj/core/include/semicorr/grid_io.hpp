#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semicorr/grid.hpp"

namespace semicorr {

// Flat binary container:
//   8 bytes  magic "SCGRID01"
//   8 bytes  header length (uint64, little-endian)
//   header   UTF-8 JSON (dims, length, epsilon, dtype, shape, kind, ...)
//   data     raw little-endian float64, complex stored as (re, im) pairs
inline constexpr char kGridMagic[8] = {'S', 'C', 'G', 'R', 'I', 'D', '0', '1'};

struct GridFile {
  nlohmann::json header;
  std::vector<double> data;  // complex payloads are interleaved
};

void write_grid_file(const std::string& path, nlohmann::json header, std::span<const double> data);
GridFile read_grid_file(const std::string& path);

nlohmann::json context_header(const PhaseSpaceContext& ctx);
PhaseSpaceContext context_from_header(const nlohmann::json& h);

void save_grid_function(const std::string& path, const GridFunction& u);
GridFunction load_grid_function(const std::string& path);
void save_symbol(const std::string& path, const Symbol& s);
Symbol load_symbol(const std::string& path);
void save_wigner(const std::string& path, const WignerFunction& w);
WignerFunction load_wigner(const std::string& path);

// 1-D CSV exports: x,re,im for functions; one row (fixed x node) or one
// column (fixed xi slot, written in ascending xi) of a phase-space array.
void write_csv(const std::string& path, const GridFunction& u);
void write_csv_x_slice(const std::string& path, const Symbol& s, std::size_t x_node);
void write_csv_xi_slice(const std::string& path, const Symbol& s, std::size_t xi_slot);
void write_csv_x_slice(const std::string& path, const WignerFunction& w, std::size_t x_node);

// Shortest round-trip decimal for doubles; stable across runs.
std::string format_double(double v);

}  // namespace semicorr
