#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "l2h/grid.hpp"

namespace l2h {

// 8-bit RGB PNG of a class map using the scheme colours; UNLABELED and
// nodata render black.
void write_class_png(const std::filesystem::path& path, const RasterGrid& classes, const ClassScheme& scheme);

// {"classes":[{"id":1,"name":"TR","rgb":[r,g,b]},...]}
std::string legend_json(const ClassScheme& scheme);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace l2h
