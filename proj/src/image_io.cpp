#include "tmgan/image_io.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "tmgan/common.hpp"

namespace tmgan {

namespace {

constexpr char kMagic[4] = {'T', 'X', 'I', 'M'};
constexpr std::uint32_t kVersion = 1;
// Fixed header size: magic + version + two dims + two spacings + dtype tag.
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 4 + 4 + 4 + 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}

std::string read_bytes(const std::string& path, std::size_t limit = 0) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "image: cannot open '" + path + "'");
    std::string bytes;
    if (limit == 0) {
        bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    } else {
        bytes.resize(limit);
        f.read(bytes.data(), static_cast<std::streamsize>(limit));
        bytes.resize(static_cast<std::size_t>(f.gcount()));
    }
    return bytes;
}

void parse_header(const std::string& bytes, const std::string& path, std::int64_t& h,
                  std::int64_t& w, double& dy, double& dx, int& elem) {
    require(bytes.size() >= kHeaderBytes, "image: '" + path + "' is too short to hold a header");
    require(bytes.compare(0, 4, kMagic, 4) == 0, "image: '" + path + "' has the wrong magic");
    const std::uint32_t version = get_u32(bytes, 4);
    require(version == kVersion,
            "image: '" + path + "' has unsupported version " + std::to_string(version));
    h = static_cast<std::int64_t>(get_u32(bytes, 8));
    w = static_cast<std::int64_t>(get_u32(bytes, 12));
    require(h >= 1 && w >= 1, "image: '" + path + "' has a zero-sized dimension");
    dy = static_cast<double>(std::bit_cast<float>(get_u32(bytes, 16)));
    dx = static_cast<double>(std::bit_cast<float>(get_u32(bytes, 20)));
    require(std::isfinite(dy) && std::isfinite(dx) && dy > 0.0 && dx > 0.0,
            "image: '" + path + "' has non-positive pixel spacing");
    elem = static_cast<unsigned char>(bytes[24]);
    require(elem == 4 || elem == 8,
            "image: '" + path + "' has unknown element size " + std::to_string(elem));
}

}  // namespace

void write_image(const std::string& path, const ImageData& img, int element_size) {
    require(element_size == 4 || element_size == 8,
            "image: element size must be 4 or 8, got " + std::to_string(element_size));
    require(img.pixels.ndim() == 2, "image: pixels must be 2-D [H,W]");
    require(img.pixels.dim(0) >= 1 && img.pixels.dim(1) >= 1, "image: empty pixel grid");
    require(std::isfinite(img.dy_mm) && std::isfinite(img.dx_mm) && img.dy_mm > 0.0 &&
                img.dx_mm > 0.0,
            "image: pixel spacing must be positive");

    std::string bytes;
    bytes.reserve(kHeaderBytes +
                  static_cast<std::size_t>(img.pixels.size()) * static_cast<std::size_t>(element_size));
    bytes.append(kMagic, 4);
    put_u32(bytes, kVersion);
    put_u32(bytes, static_cast<std::uint32_t>(img.pixels.dim(0)));
    put_u32(bytes, static_cast<std::uint32_t>(img.pixels.dim(1)));
    put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(img.dy_mm)));
    put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(img.dx_mm)));
    bytes.push_back(static_cast<char>(element_size));
    for (std::int64_t i = 0; i < img.pixels.size(); ++i) {
        if (element_size == 8)
            put_u64(bytes, std::bit_cast<std::uint64_t>(img.pixels[i]));
        else
            put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(img.pixels[i])));
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        require(f.good(), "image: cannot open '" + tmp + "' for writing");
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        require(f.good(), "image: short write to '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

ImageData read_image(const std::string& path) {
    const std::string bytes = read_bytes(path);
    std::int64_t h = 0, w = 0;
    int elem = 0;
    ImageData img;
    parse_header(bytes, path, h, w, img.dy_mm, img.dx_mm, elem);

    const std::size_t expected =
        kHeaderBytes + static_cast<std::size_t>(h) * static_cast<std::size_t>(w) *
                           static_cast<std::size_t>(elem);
    require(bytes.size() >= expected, "image: '" + path + "' is truncated");
    require(bytes.size() == expected, "image: '" + path + "' has trailing bytes after the pixels");

    img.pixels = Tensor({static_cast<int>(h), static_cast<int>(w)});
    std::size_t pos = kHeaderBytes;
    for (std::int64_t i = 0; i < img.pixels.size(); ++i) {
        if (elem == 8) {
            img.pixels[i] = std::bit_cast<double>(get_u64(bytes, pos));
            pos += 8;
        } else {
            img.pixels[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, pos)));
            pos += 4;
        }
    }
    return img;
}

int image_element_size(const std::string& path) {
    const std::string bytes = read_bytes(path, kHeaderBytes);
    std::int64_t h = 0, w = 0;
    double dy = 0.0, dx = 0.0;
    int elem = 0;
    parse_header(bytes, path, h, w, dy, dx, elem);
    return elem;
}

}  // namespace tmgan
