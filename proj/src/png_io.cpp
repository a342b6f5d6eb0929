#include "animforge/png_io.hpp"

#include <png.h>
#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace animforge::png {

namespace {

struct ReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
};

void on_error(png_structp, png_const_charp msg) { throw std::runtime_error(std::string("png: ") + msg); }
void on_warning(png_structp, png_const_charp) {}

void write_cb(png_structp p, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
    out->insert(out->end(), data, data + len);
}

void flush_cb(png_structp) {}

void read_cb(png_structp p, png_bytep data, png_size_t len) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(p));
    if (cur->pos + len > cur->bytes.size()) png_error(p, "truncated stream");
    std::memcpy(data, cur->bytes.data() + cur->pos, len);
    cur->pos += len;
}

std::vector<std::uint8_t> encode_raw(int width, int height, int color_type, int channels,
                                     std::span<const std::uint8_t> px) {
    std::vector<std::uint8_t> out;
    png_structp p = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
    if (!p) throw std::runtime_error("png: cannot create write struct");
    png_infop info = png_create_info_struct(p);
    try {
        png_set_write_fn(p, &out, write_cb, flush_cb);
        png_set_IHDR(p, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_set_compression_level(p, Z_BEST_SPEED);
        png_set_filter(p, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
        png_write_info(p, info);
        const std::size_t stride = static_cast<std::size_t>(width) * channels;
        for (int y = 0; y < height; ++y) {
            png_write_row(p, const_cast<png_bytep>(px.data() + stride * y));
        }
        png_write_end(p, nullptr);
    } catch (...) {
        png_destroy_write_struct(&p, &info);
        throw;
    }
    png_destroy_write_struct(&p, &info);
    return out;
}

// Decodes to 8-bit RGB or gray depending on want_gray.
std::vector<std::uint8_t> decode_raw(std::span<const std::uint8_t> bytes, bool want_gray, int& width, int& height) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw std::runtime_error("png: bad signature");
    png_structp p = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
    if (!p) throw std::runtime_error("png: cannot create read struct");
    png_infop info = png_create_info_struct(p);
    ReadCursor cur{bytes, 0};
    std::vector<std::uint8_t> px;
    try {
        png_set_read_fn(p, &cur, read_cb);
        png_read_info(p, info);
        width = static_cast<int>(png_get_image_width(p, info));
        height = static_cast<int>(png_get_image_height(p, info));
        const int ct = png_get_color_type(p, info);
        const int depth = png_get_bit_depth(p, info);
        if (depth == 16) png_set_strip_16(p);
        if (ct == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(p);
        if ((ct == PNG_COLOR_TYPE_GRAY || ct == PNG_COLOR_TYPE_GRAY_ALPHA) && depth < 8) png_set_expand_gray_1_2_4_to_8(p);
        if (png_get_valid(p, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(p);
        if (ct & PNG_COLOR_MASK_ALPHA || png_get_valid(p, info, PNG_INFO_tRNS)) png_set_strip_alpha(p);
        if (want_gray) {
            if (ct & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(p, 1, -1, -1);
        } else if (ct == PNG_COLOR_TYPE_GRAY || ct == PNG_COLOR_TYPE_GRAY_ALPHA) {
            png_set_gray_to_rgb(p);
        }
        png_read_update_info(p, info);
        const std::size_t stride = png_get_rowbytes(p, info);
        const int channels = want_gray ? 1 : 3;
        if (stride != static_cast<std::size_t>(width) * channels) throw std::runtime_error("png: unexpected row layout");
        px.resize(stride * static_cast<std::size_t>(height));
        std::vector<png_bytep> rows(static_cast<std::size_t>(height));
        for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = px.data() + stride * y;
        png_read_image(p, rows.data());
        png_read_end(p, nullptr);
    } catch (...) {
        png_destroy_read_struct(&p, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&p, &info, nullptr);
    return px;
}

}  // namespace

std::vector<std::uint8_t> encode(const Image& image) {
    if (image.empty()) throw std::invalid_argument("png: cannot encode empty image");
    return encode_raw(image.width(), image.height(), PNG_COLOR_TYPE_RGB, 3, image.data());
}

Image decode(std::span<const std::uint8_t> bytes) {
    int w = 0, h = 0;
    auto px = decode_raw(bytes, false, w, h);
    return Image(w, h, std::move(px));
}

std::vector<std::uint8_t> encode_mask(const SegmentationMask& mask) {
    std::vector<std::uint8_t> px(mask.bits.size());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = mask.bits[i] ? 255 : 0;
    return encode_raw(mask.width, mask.height, PNG_COLOR_TYPE_GRAY, 1, px);
}

SegmentationMask decode_mask(std::span<const std::uint8_t> bytes, std::string label) {
    int w = 0, h = 0;
    auto px = decode_raw(bytes, true, w, h);
    for (auto& v : px) v = v >= 128 ? 1 : 0;
    return SegmentationMask::from_bits(std::move(label), w, h, std::move(px));
}

Image read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("png: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode(bytes);
}

void write_file(const std::filesystem::path& path, const Image& image) {
    const auto bytes = encode(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("png: cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace animforge::png
