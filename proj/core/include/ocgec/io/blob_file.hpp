#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

// Artifact container shared by .tmod, .lgr and .gae files: one line of JSON
// (the header, terminated by '\n') followed by little-endian float64 values.
// The header records the value count under "blob_values".
namespace ocgec::io {

struct BlobFile {
  nlohmann::json header;
  std::vector<double> values;
  std::size_t header_bytes = 0;
};

std::string encode_blob(nlohmann::json header, std::span<const double> values);
/// Throws FormatError on a missing/corrupt header or a blob of the wrong length.
BlobFile decode_blob(std::string_view bytes);

void write_blob_file(const std::filesystem::path& path, nlohmann::json header,
                     std::span<const double> values);
BlobFile read_blob_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace ocgec::io
