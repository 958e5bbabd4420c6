#include "moft/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace moft {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

// Header tokens of a PGM, skipping '#' comments.
std::string next_token(const std::vector<std::uint8_t>& b, std::size_t& pos) {
    while (pos < b.size()) {
        if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else if (std::isspace(b[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    std::string tok;
    while (pos < b.size() && !std::isspace(b[pos])) tok.push_back(static_cast<char>(b[pos++]));
    return tok;
}

} // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor4& t) {
    require_finite(t, "save_tensor");
    const Shape s = t.shape();
    std::vector<std::uint8_t> out;
    out.reserve(24 + 4 * t.size());
    out.insert(out.end(), kTensorMagic, kTensorMagic + 4);
    put_u32(out, kTensorVersion);
    for (std::size_t d : {s.frames, s.height, s.width, s.channels}) {
        if (d > 0xFFFFFFFFu) throw ArgumentError("dimension exceeds u32");
        put_u32(out, static_cast<std::uint32_t>(d));
    }
    auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const float f = static_cast<float>(v[i]);
        if (!std::isfinite(f))
            throw DataError("save_tensor: value at flat index " + std::to_string(i) + " overflows f32");
        put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

Tensor4 decode_tensor(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0)
        throw FormatError("bad magic: expected MFT1");
    if (bytes.size() < 24) throw CorruptFileError("truncated MFT1 header");
    const std::uint32_t version = get_u32(bytes.data() + 4);
    if (version != kTensorVersion) throw FormatError("unsupported MFT1 version " + std::to_string(version));
    Shape s{get_u32(bytes.data() + 8), get_u32(bytes.data() + 12), get_u32(bytes.data() + 16),
            get_u32(bytes.data() + 20)};
    if (s.frames == 0 || s.height == 0 || s.width == 0 || s.channels == 0)
        throw CorruptFileError("MFT1 header has a zero dimension");
    const std::size_t n = s.size();
    if (bytes.size() - 24 != 4 * n)
        throw CorruptFileError("MFT1 payload is " + std::to_string(bytes.size() - 24) + " bytes, header implies " +
                               std::to_string(4 * n));
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float f = std::bit_cast<float>(get_u32(bytes.data() + 24 + 4 * i));
        if (!std::isfinite(f)) throw DataError("MFT1: non-finite value at flat index " + std::to_string(i));
        values[i] = f;
    }
    return Tensor4(s, std::move(values));
}

Tensor4 load_tensor(const std::filesystem::path& path) { return decode_tensor(read_bytes(path)); }

void save_tensor(const Tensor4& t, const std::filesystem::path& path) { write_bytes(path, encode_tensor(t)); }

RegionMask load_mask_pgm(const std::filesystem::path& path, std::size_t frames) {
    const auto b = read_bytes(path);
    std::size_t pos = 0;
    if (next_token(b, pos) != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
    std::size_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoul(next_token(b, pos));
        h = std::stoul(next_token(b, pos));
        maxval = std::stoul(next_token(b, pos));
    } catch (const std::exception&) {
        throw FormatError(path.string() + ": malformed PGM header");
    }
    if (maxval != 255) throw FormatError(path.string() + ": PGM maxval must be 255");
    ++pos; // single whitespace after maxval
    if (w == 0 || h == 0 || b.size() < pos + w * h) throw CorruptFileError(path.string() + ": truncated PGM");
    RegionMask m;
    m.height = h;
    m.width = w;
    m.inside.resize(w * h);
    for (std::size_t i = 0; i < w * h; ++i) m.inside[i] = b[pos + i] > 127 ? 1 : 0;
    for (std::size_t f = 0; f < frames; ++f) m.frame_set.push_back(f);
    return m;
}

void save_mask_pgm(const RegionMask& mask, const std::filesystem::path& path) {
    std::vector<double> v(mask.inside.begin(), mask.inside.end());
    save_map_pgm(v, mask.height, mask.width, path);
}

void save_map_pgm(const std::vector<double>& values, std::size_t height, std::size_t width,
                  const std::filesystem::path& path) {
    if (values.size() != height * width) throw ShapeError("map size does not match dimensions");
    std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    for (double v : values) {
        const double c = std::clamp(v, 0.0, 1.0);
        bytes.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0)));
    }
    write_bytes(path, bytes);
}

void save_map_csv(const std::vector<double>& values, std::size_t height, std::size_t width,
                  const std::filesystem::path& path) {
    if (values.size() != height * width) throw ShapeError("map size does not match dimensions");
    std::ostringstream os;
    os << std::setprecision(9);
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) os << (c ? "," : "") << values[r * width + c];
        os << '\n';
    }
    write_text(path, os.str());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace moft
