#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rainfill/volume.hpp"

namespace rainfill {

inline constexpr int kGridFormatVersion = 1;

/// Ordered `key = value` header lines; keys may repeat.
struct Header {
    std::vector<std::pair<std::string, std::string>> entries;

    void set(const std::string& key, std::string value);
    void add(const std::string& key, std::string value) { entries.emplace_back(key, std::move(value)); }
    bool has(const std::string& key) const;
    /// Throws DataError when missing.
    const std::string& get(const std::string& key) const;
    std::vector<std::string> get_all(const std::string& key) const;

    std::string serialize() const;
    static Header parse(const std::string& text);
};

/// `<base>.hdr` beside `<base>.bin`.
std::filesystem::path header_path(const std::filesystem::path& base);
std::filesystem::path payload_path(const std::filesystem::path& base);

/// Writes both files through temporaries renamed into place.
void write_container(const std::filesystem::path& base, const Header& header, std::span<const uint8_t> payload);
std::pair<Header, std::vector<uint8_t>> read_container(const std::filesystem::path& base);

void append_f32le(std::vector<uint8_t>& out, std::span<const double> values);
void append_f64le(std::vector<uint8_t>& out, std::span<const double> values);
std::vector<double> decode_f32le(std::span<const uint8_t> bytes);
std::vector<double> decode_f64le(std::span<const uint8_t> bytes);

/// (channels, L, H, W) float32 payload with named channels.
struct GridFile {
    GridSpec grid;
    std::vector<std::string> channels;
    std::vector<float> data;
    std::string units = "normalized";
    uint64_t seed = 0;

    int64_t channel_count() const { return static_cast<int64_t>(channels.size()); }
    /// Throws DataError when absent.
    int64_t channel_index(const std::string& name) const;
    FieldVolume field(const std::string& name) const;
    void add_field(const std::string& name, const FieldVolume& f);
};

void write_grid(const std::filesystem::path& base, const GridFile& file);
/// Throws DataError on a malformed header, wrong dtype or a payload whose
/// length disagrees with the header dims.
GridFile read_grid(const std::filesystem::path& base);

}  // namespace rainfill
