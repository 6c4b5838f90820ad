#pragma once

#include <string>

#include "rrecon/grid.hpp"

namespace rrecon {

// GRD1 container: one '\n'-terminated JSON text header line followed by the
// raw payload, row-major (time, lat, lon) little-endian IEEE-754 float32.
// Values are widened to float64 in memory. Latitudes are normalized to
// ascending on read; the header records the original order.
//
// Header fields: magic "GRD1", variable, units, time {kind, start, count}
// or {kind, list}, lat/lon {start, step, count}, dtype "f32le", missing
// flag, lat_order, domain.
void write_grid_file(const GridField& field, const std::string& path);
GridField read_grid_file(const std::string& path);

// Single 2-D layer stored as a one-entry GRD1 file with a placeholder date.
void write_layer_file(const Field2& layer, const Grid& grid, const std::string& variable,
                      const std::string& units, const std::string& path);
Field2 read_layer_file(const std::string& path, Grid* grid_out = nullptr);

// FNV-1a 64 content hash, hex string; used for artifact manifests.
std::string file_hash(const std::string& path);

} // namespace rrecon
