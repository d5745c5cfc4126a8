// SPDX-License-Identifier: Apache-2.0

#include "gscart/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gscart/errors.hpp"

namespace gsc {

namespace {

constexpr char kMapMagic[8] = {'G', 'S', 'C', 'M', 'A', 'P', '0', '1'};
constexpr std::uint32_t kDtypeFloat32 = 1;

void put_u32le(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back((char)((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32le(const unsigned char* p)
{
    return (std::uint32_t)p[0] | ((std::uint32_t)p[1] << 8) | ((std::uint32_t)p[2] << 16) |
           ((std::uint32_t)p[3] << 24);
}

} // namespace

SpectrumMap MapTensor::sample(int k) const
{
    if (k < 0 || k >= count)
        throw std::out_of_range("MapTensor::sample: index " + std::to_string(k) + " of " +
                                std::to_string(count));
    SpectrumMap m(rows, cols);
    const float* src = data.data() + (std::size_t)k * rows * cols;
    for (int i = 0; i < m.size(); ++i)
        m[i] = (double)src[i];
    return m;
}

void MapTensor::append(const SpectrumMap& m)
{
    if (count == 0 && rows == 0 && cols == 0) {
        rows = m.rows();
        cols = m.cols();
    }
    if (m.rows() != rows || m.cols() != cols)
        throw std::invalid_argument("MapTensor::append: sample shape mismatch");
    data.reserve(data.size() + (std::size_t)rows * cols);
    for (int i = 0; i < m.size(); ++i)
        data.push_back((float)m[i]);
    ++count;
}

void write_map_tensor(const std::string& path, const MapTensor& tensor)
{
    if (tensor.data.size() != (std::size_t)tensor.count * tensor.rows * tensor.cols)
        throw std::invalid_argument("write_map_tensor: payload size inconsistent with header");

    std::string bytes;
    bytes.reserve(32 + tensor.data.size() * 4);
    bytes.append(kMapMagic, 8);
    put_u32le(bytes, (std::uint32_t)tensor.count);
    put_u32le(bytes, (std::uint32_t)tensor.rows);
    put_u32le(bytes, (std::uint32_t)tensor.cols);
    put_u32le(bytes, kDtypeFloat32);
    bytes.append(8, '\0');
    for (float f : tensor.data) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        put_u32le(bytes, u);
    }
    write_file_bytes(path, bytes);
}

MapTensor read_map_tensor(const std::string& path)
{
    std::string bytes = read_file_bytes(path);
    if (bytes.size() < 32 || std::memcmp(bytes.data(), kMapMagic, 8) != 0)
        throw IoError("not a map tensor file (bad magic): " + path);
    const auto* p = (const unsigned char*)bytes.data();
    MapTensor t;
    t.count = (int)get_u32le(p + 8);
    t.rows = (int)get_u32le(p + 12);
    t.cols = (int)get_u32le(p + 16);
    std::uint32_t dtype = get_u32le(p + 20);
    if (dtype != kDtypeFloat32)
        throw IoError("unsupported dtype tag " + std::to_string(dtype) + " in " + path);
    std::size_t expected = (std::size_t)t.count * t.rows * t.cols;
    if (bytes.size() != 32 + expected * 4)
        throw IoError("truncated map tensor file: " + path);
    t.data.resize(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        std::uint32_t u = get_u32le(p + 32 + i * 4);
        std::memcpy(&t.data[i], &u, 4);
    }
    return t;
}

std::uint32_t crc32(const void* data, std::size_t len)
{
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t n = 0; n < 256; ++n) {
            std::uint32_t c = n;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[n] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xffffffffu;
    const auto* p = (const unsigned char*)data;
    for (std::size_t i = 0; i < len; ++i)
        crc = table[(crc ^ p[i]) & 0xffu] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

std::uint32_t tensor_checksum(const MapTensor& tensor)
{
    // checksum the payload exactly as serialized (LE float32)
    std::string bytes;
    bytes.reserve(tensor.data.size() * 4);
    for (float f : tensor.data) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        put_u32le(bytes, u);
    }
    return crc32(bytes.data(), bytes.size());
}

void write_pgm(const std::string& path, const SpectrumMap& map, double lo, double hi)
{
    if (!(hi > lo))
        throw std::invalid_argument("write_pgm: need hi > lo");
    std::string out = "P5\n" + std::to_string(map.cols()) + " " + std::to_string(map.rows()) +
                      "\n255\n";
    out.reserve(out.size() + (std::size_t)map.size());
    for (int i = 0; i < map.size(); ++i) {
        double v = (map[i] - lo) / (hi - lo);
        int g = (int)std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
        out.push_back((char)(unsigned char)g);
    }
    write_file_bytes(path, out);
}

void write_file_bytes(const std::string& path, const std::string& bytes)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError("cannot open for writing: " + path);
    f.write(bytes.data(), (std::streamsize)bytes.size());
    if (!f)
        throw IoError("write failed: " + path);
}

std::string read_file_bytes(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open for reading: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad())
        throw IoError("read failed: " + path);
    return bytes;
}

void write_text_file(const std::string& path, const std::string& text)
{
    write_file_bytes(path, text);
}

} // namespace gsc
