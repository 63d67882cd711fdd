#include "ocgec/io/blob_file.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ocgec/error.hpp"

namespace ocgec::io {
namespace {

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return out;
  }
}

}  // namespace

std::string encode_blob(nlohmann::json header, std::span<const double> values) {
  header["blob_values"] = values.size();
  std::string out = header.dump();
  out.push_back('\n');
  const std::size_t offset = out.size();
  out.resize(offset + 8 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(out.data() + offset + 8 * i, &bits, 8);
  }
  return out;
}

BlobFile decode_blob(std::string_view bytes) {
  const std::size_t newline = bytes.find('\n');
  if (newline == std::string_view::npos) throw FormatError("artifact header is not terminated");
  BlobFile file;
  try {
    file.header = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("artifact header is not valid JSON: ") + e.what());
  }
  if (!file.header.is_object() || !file.header.contains("blob_values") ||
      !file.header["blob_values"].is_number_unsigned()) {
    throw FormatError("artifact header lacks blob_values");
  }
  file.header_bytes = newline + 1;
  const auto count = file.header["blob_values"].get<std::size_t>();
  const std::size_t blob_bytes = bytes.size() - file.header_bytes;
  if (blob_bytes != 8 * count) {
    throw FormatError("artifact blob holds " + std::to_string(blob_bytes) + " bytes, expected " +
                      std::to_string(8 * count));
  }
  file.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes.data() + file.header_bytes + 8 * i, 8);
    file.values[i] = std::bit_cast<double>(to_little_endian(bits));
  }
  return file;
}

void write_blob_file(const std::filesystem::path& path, nlohmann::json header,
                     std::span<const double> values) {
  write_text_file(path, encode_blob(std::move(header), values));
}

BlobFile read_blob_file(const std::filesystem::path& path) {
  try {
    return decode_blob(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return std::move(buffer).str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " into place");
  }
}

}  // namespace ocgec::io
