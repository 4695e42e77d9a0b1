#pragma once

#include "flowvo/image.hpp"

#include <Eigen/Core>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowvo {

/// Raised on malformed flow/PFM streams; the message names the byte offset of
/// the first offending datum where that is well defined.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

constexpr float kFloMagic = 202021.25f;

inline bool host_little_endian() { return std::endian::native == std::endian::little; }

inline void byte_swap4(unsigned char* p) {
    std::swap(p[0], p[3]);
    std::swap(p[1], p[2]);
}

inline void write_exact(std::ostream& os, const void* data, std::size_t n) {
    os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!os)
        throw FormatError("write failed");
}

inline void read_exact(std::istream& is, void* data, std::size_t n, std::size_t offset,
                       const char* what) {
    is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw FormatError(std::string("truncated ") + what + " at byte offset " +
                          std::to_string(offset));
}

// Little-endian float/int32 scalar I/O; swaps on big-endian hosts.
inline void put_le_f32(std::ostream& os, float v) {
    unsigned char buf[4];
    std::memcpy(buf, &v, 4);
    if (!host_little_endian())
        byte_swap4(buf);
    write_exact(os, buf, 4);
}

inline void put_le_i32(std::ostream& os, std::int32_t v) {
    unsigned char buf[4];
    std::memcpy(buf, &v, 4);
    if (!host_little_endian())
        byte_swap4(buf);
    write_exact(os, buf, 4);
}

inline float get_f32(std::istream& is, std::size_t offset, bool little, const char* what) {
    unsigned char buf[4];
    read_exact(is, buf, 4, offset, what);
    if (little != host_little_endian())
        byte_swap4(buf);
    float v;
    std::memcpy(&v, buf, 4);
    return v;
}

inline std::int32_t get_le_i32(std::istream& is, std::size_t offset, const char* what) {
    unsigned char buf[4];
    read_exact(is, buf, 4, offset, what);
    if (!host_little_endian())
        byte_swap4(buf);
    std::int32_t v;
    std::memcpy(&v, buf, 4);
    return v;
}

} // namespace detail

/// Middlebury .flo: magic float 202021.25, int32 width, int32 height, then
/// row-major interleaved float32 (u, v) pairs. All fields little-endian.
inline void write_flow(const std::string& path, const FlowMap& flow) {
    if (flow.empty())
        throw std::invalid_argument("write_flow: empty flow field");
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw FormatError("write_flow: cannot open " + path);
    detail::put_le_f32(os, detail::kFloMagic);
    detail::put_le_i32(os, static_cast<std::int32_t>(flow.width()));
    detail::put_le_i32(os, static_cast<std::int32_t>(flow.height()));
    for (std::size_t i = 0; i < flow.size(); ++i) {
        detail::put_le_f32(os, static_cast<float>(flow[i].x()));
        detail::put_le_f32(os, static_cast<float>(flow[i].y()));
    }
}

inline FlowMap read_flow(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw FormatError("read_flow: cannot open " + path);
    const float magic = detail::get_f32(is, 0, /*little=*/true, "flo magic");
    if (magic != detail::kFloMagic)
        throw FormatError("read_flow: bad magic at byte offset 0 in " + path);
    const std::int32_t w = detail::get_le_i32(is, 4, "flo width");
    const std::int32_t h = detail::get_le_i32(is, 8, "flo height");
    if (w <= 0 || h <= 0)
        throw FormatError("read_flow: bad dimensions at byte offset 4 in " + path);
    FlowMap flow(h, w);
    std::size_t offset = 12;
    for (std::size_t i = 0; i < flow.size(); ++i) {
        const float u = detail::get_f32(is, offset, true, "flo sample");
        const float v = detail::get_f32(is, offset + 4, true, "flo sample");
        flow[i] = Eigen::Vector2d(u, v);
        offset += 8;
    }
    // A well-formed file ends exactly after the sample block.
    char extra;
    if (is.read(&extra, 1) && is.gcount() == 1)
        throw FormatError("read_flow: trailing bytes at byte offset " + std::to_string(offset) +
                          " in " + path);
    return flow;
}

namespace detail {

inline std::string pfm_token(std::istream& is, std::size_t& offset, const char* what) {
    std::string tok;
    char c;
    while (is.get(c)) {
        ++offset;
        if (c == ' ' || c == '\n' || c == '\r' || c == '\t') {
            if (!tok.empty())
                return tok;
            continue;
        }
        tok.push_back(c);
    }
    throw FormatError(std::string("truncated PFM header reading ") + what + " at byte offset " +
                      std::to_string(offset));
}

} // namespace detail

/// PFM grayscale ("Pf"): header `Pf\n<width> <height>\n<scale>\n` followed by
/// float32 rows stored bottom-to-top. A negative scale marks little-endian
/// data, positive big-endian; we always write -1.0.
inline void write_depth(const std::string& path, const ScalarMap& map) {
    if (map.empty())
        throw std::invalid_argument("write_depth: empty map");
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw FormatError("write_depth: cannot open " + path);
    os << "Pf\n" << map.width() << " " << map.height() << "\n-1.0\n";
    if (!os)
        throw FormatError("write_depth: header write failed");
    for (int r = map.height() - 1; r >= 0; --r)
        for (int c = 0; c < map.width(); ++c)
            detail::put_le_f32(os, static_cast<float>(map(r, c)));
}

inline ScalarMap read_depth(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw FormatError("read_depth: cannot open " + path);
    std::size_t offset = 0;
    const std::string magic = detail::pfm_token(is, offset, "magic");
    if (magic != "Pf")
        throw FormatError("read_depth: bad magic at byte offset 0 in " + path);
    long w = 0, h = 0;
    double scale = 0.0;
    try {
        w = std::stol(detail::pfm_token(is, offset, "width"));
        h = std::stol(detail::pfm_token(is, offset, "height"));
        scale = std::stod(detail::pfm_token(is, offset, "scale"));
    } catch (const std::exception&) {
        throw FormatError("read_depth: malformed header in " + path);
    }
    if (w <= 0 || h <= 0 || scale == 0.0)
        throw FormatError("read_depth: bad header values in " + path);
    const bool little = scale < 0.0;
    ScalarMap map(static_cast<int>(h), static_cast<int>(w));
    for (int r = map.height() - 1; r >= 0; --r)
        for (int c = 0; c < map.width(); ++c) {
            map(r, c) = detail::get_f32(is, offset, little, "PFM sample");
            offset += 4;
        }
    return map;
}

/// PFM color ("PF"): same layout with interleaved float32 RGB triples. Used
/// for three-channel diagnostics such as per-axis pose maps.
inline void write_pfm_color(const std::string& path, const Vec3Map& map) {
    if (map.empty())
        throw std::invalid_argument("write_pfm_color: empty map");
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw FormatError("write_pfm_color: cannot open " + path);
    os << "PF\n" << map.width() << " " << map.height() << "\n-1.0\n";
    if (!os)
        throw FormatError("write_pfm_color: header write failed");
    for (int r = map.height() - 1; r >= 0; --r)
        for (int c = 0; c < map.width(); ++c)
            for (int k = 0; k < 3; ++k)
                detail::put_le_f32(os, static_cast<float>(map(r, c)[k]));
}

inline Vec3Map read_pfm_color(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw FormatError("read_pfm_color: cannot open " + path);
    std::size_t offset = 0;
    const std::string magic = detail::pfm_token(is, offset, "magic");
    if (magic != "PF")
        throw FormatError("read_pfm_color: bad magic at byte offset 0 in " + path);
    long w = 0, h = 0;
    double scale = 0.0;
    try {
        w = std::stol(detail::pfm_token(is, offset, "width"));
        h = std::stol(detail::pfm_token(is, offset, "height"));
        scale = std::stod(detail::pfm_token(is, offset, "scale"));
    } catch (const std::exception&) {
        throw FormatError("read_pfm_color: malformed header in " + path);
    }
    if (w <= 0 || h <= 0 || scale == 0.0)
        throw FormatError("read_pfm_color: bad header values in " + path);
    const bool little = scale < 0.0;
    Vec3Map map(static_cast<int>(h), static_cast<int>(w));
    for (int r = map.height() - 1; r >= 0; --r)
        for (int c = 0; c < map.width(); ++c)
            for (int k = 0; k < 3; ++k) {
                map(r, c)[k] = detail::get_f32(is, offset, little, "PFM sample");
                offset += 4;
            }
    return map;
}

} // namespace flowvo
