#include "rainfill/gridfile.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rainfill/errors.hpp"

namespace rainfill {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "payload encoding assumes a little-endian host");

void Header::set(const std::string& key, std::string value) {
    for (auto& [k, v] : entries) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    add(key, std::move(value));
}

bool Header::has(const std::string& key) const {
    for (const auto& e : entries) {
        if (e.first == key) return true;
    }
    return false;
}

const std::string& Header::get(const std::string& key) const {
    for (const auto& e : entries) {
        if (e.first == key) return e.second;
    }
    throw DataError("header has no '" + key + "' entry");
}

std::vector<std::string> Header::get_all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& e : entries) {
        if (e.first == key) out.push_back(e.second);
    }
    return out;
}

std::string Header::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
            throw std::invalid_argument("header entry '" + k + "' contains a reserved character");
        }
        out += k + " = " + v + "\n";
    }
    return out;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    return out;
}

int64_t parse_int(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw DataError("header field '" + what + "' is not an integer: '" + s + "'");
    }
}

}  // namespace

Header Header::parse(const std::string& text) {
    Header h;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw DataError("header line " + std::to_string(lineno) + " has no '='");
        h.add(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return h;
}

fs::path header_path(const fs::path& base) { return fs::path(base.string() + ".hdr"); }
fs::path payload_path(const fs::path& base) { return fs::path(base.string() + ".bin"); }

namespace {

void write_atomic(const fs::path& path, const void* data, size_t size) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) throw DataError("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, path);
}

std::vector<uint8_t> read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void write_container(const fs::path& base, const Header& header, std::span<const uint8_t> payload) {
    const auto text = header.serialize();
    write_atomic(payload_path(base), payload.data(), payload.size());
    write_atomic(header_path(base), text.data(), text.size());
}

std::pair<Header, std::vector<uint8_t>> read_container(const fs::path& base) {
    const auto text = read_all(header_path(base));
    auto header = Header::parse(std::string(text.begin(), text.end()));
    return {std::move(header), read_all(payload_path(base))};
}

void append_f32le(std::vector<uint8_t>& out, std::span<const double> values) {
    const size_t at = out.size();
    out.resize(at + values.size() * 4);
    for (size_t i = 0; i < values.size(); ++i) {
        const float f = static_cast<float>(values[i]);
        std::memcpy(out.data() + at + 4 * i, &f, 4);
    }
}

void append_f64le(std::vector<uint8_t>& out, std::span<const double> values) {
    const size_t at = out.size();
    out.resize(at + values.size() * 8);
    if (!values.empty()) std::memcpy(out.data() + at, values.data(), values.size() * 8);
}

std::vector<double> decode_f32le(std::span<const uint8_t> bytes) {
    if (bytes.size() % 4 != 0) throw DataError("f32 payload length is not a multiple of 4");
    std::vector<double> out(bytes.size() / 4);
    for (size_t i = 0; i < out.size(); ++i) {
        float f;
        std::memcpy(&f, bytes.data() + 4 * i, 4);
        out[i] = f;
    }
    return out;
}

std::vector<double> decode_f64le(std::span<const uint8_t> bytes) {
    if (bytes.size() % 8 != 0) throw DataError("f64 payload length is not a multiple of 8");
    std::vector<double> out(bytes.size() / 8);
    if (!out.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

int64_t GridFile::channel_index(const std::string& name) const {
    for (size_t i = 0; i < channels.size(); ++i) {
        if (channels[i] == name) return static_cast<int64_t>(i);
    }
    throw DataError("grid file has no channel '" + name + "'");
}

FieldVolume GridFile::field(const std::string& name) const {
    const int64_t c = channel_index(name);
    const auto begin = data.begin() + c * grid.volume();
    return FieldVolume(grid, std::vector<double>(begin, begin + grid.volume()));
}

void GridFile::add_field(const std::string& name, const FieldVolume& f) {
    if (channels.empty()) grid = f.grid;
    if (!(f.grid == grid)) throw std::invalid_argument("add_field: channel '" + name + "' is on a different grid");
    channels.push_back(name);
    for (double v : f.values) data.push_back(static_cast<float>(v));
}

void write_grid(const fs::path& base, const GridFile& file) {
    if (static_cast<int64_t>(file.data.size()) != file.channel_count() * file.grid.volume()) {
        throw std::invalid_argument("write_grid: payload size does not match dims");
    }
    Header h;
    h.add("format", "rainfill-grid");
    h.add("version", std::to_string(kGridFormatVersion));
    h.add("dtype", "f32le");
    h.add("dims", std::to_string(file.channel_count()) + " " + std::to_string(file.grid.frames) + " " +
                      std::to_string(file.grid.rows) + " " + std::to_string(file.grid.cols));
    std::string names;
    for (size_t i = 0; i < file.channels.size(); ++i) names += (i ? "," : "") + file.channels[i];
    h.add("channels", names);
    h.add("missing", "-1");
    h.add("units", file.units);
    h.add("seed", std::to_string(file.seed));
    std::vector<uint8_t> payload(file.data.size() * 4);
    if (!file.data.empty()) std::memcpy(payload.data(), file.data.data(), payload.size());
    write_container(base, h, payload);
}

GridFile read_grid(const fs::path& base) {
    auto [h, payload] = read_container(base);
    if (h.get("format") != "rainfill-grid") throw DataError("'" + base.string() + "' is not a grid file");
    const auto version = parse_int(h.get("version"), "version");
    if (version < 1 || version > kGridFormatVersion) {
        throw DataError("unsupported grid file version " + std::to_string(version));
    }
    if (h.get("dtype") != "f32le") throw DataError("unsupported dtype '" + h.get("dtype") + "'");
    std::vector<int64_t> dims;
    for (const auto& tok : split(h.get("dims"), ' ')) {
        if (!tok.empty()) dims.push_back(parse_int(tok, "dims"));
    }
    if (dims.size() != 4) throw DataError("dims must list channels, L, H and W");
    for (auto d : dims) {
        if (d <= 0) throw DataError("dims must be positive");
    }
    GridFile f;
    f.grid = GridSpec{dims[1], dims[2], dims[3]};
    f.channels = split(h.get("channels"), ',');
    if (static_cast<int64_t>(f.channels.size()) != dims[0]) {
        throw DataError("channel names do not match the channel count in dims");
    }
    if (h.has("units")) f.units = h.get("units");
    if (h.has("seed")) f.seed = static_cast<uint64_t>(parse_int(h.get("seed"), "seed"));
    const auto expected = static_cast<size_t>(dims[0] * f.grid.volume()) * 4;
    if (payload.size() != expected) {
        throw DataError("payload of '" + base.string() + "' holds " + std::to_string(payload.size()) +
                        " bytes, header dims require " + std::to_string(expected));
    }
    f.data.resize(payload.size() / 4);
    std::memcpy(f.data.data(), payload.data(), payload.size());
    return f;
}

}  // namespace rainfill
