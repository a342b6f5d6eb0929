#include "animforge/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "animforge/digest.hpp"

namespace animforge {

Image::Image(int width, int height)
    : width_(width), height_(height), px_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) * 3, 0) {
    if (width < 0 || height < 0) throw std::invalid_argument("Image: negative dimensions");
}

Image::Image(int width, int height, std::vector<std::uint8_t> rgb) : width_(width), height_(height), px_(std::move(rgb)) {
    if (width < 0 || height < 0) throw std::invalid_argument("Image: negative dimensions");
    if (px_.size() != static_cast<std::size_t>(width) * height * 3)
        throw std::invalid_argument("Image: buffer length does not match width * height * 3");
}

Image Image::filled(int width, int height, Rgb color) {
    Image img(width, height);
    auto d = img.data();
    for (std::size_t i = 0; i < d.size(); i += 3) {
        d[i] = color.r;
        d[i + 1] = color.g;
        d[i + 2] = color.b;
    }
    return img;
}

std::string Image::content_hash() const {
    Sha256 h;
    h.update(std::to_string(width_) + "x" + std::to_string(height_) + ":");
    h.update(std::span<const std::uint8_t>(px_));
    return h.hex();
}

void FrameSequence::validate() const {
    if (frames.empty()) throw std::invalid_argument("FrameSequence: no frames");
    if (!(fps > 0)) throw std::invalid_argument("FrameSequence: fps must be positive");
    const int w = frames.front().width();
    const int h = frames.front().height();
    for (const auto& f : frames) {
        if (f.width() != w || f.height() != h) throw std::invalid_argument("FrameSequence: frames differ in size");
    }
}

SegmentationMask SegmentationMask::from_bits(std::string label, int width, int height, std::vector<std::uint8_t> bits) {
    if (bits.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("SegmentationMask: bitmap size mismatch");
    SegmentationMask m;
    m.label = std::move(label);
    m.width = width;
    m.height = height;
    for (auto& b : bits) {
        b = b ? 1 : 0;
        m.area += b;
    }
    m.bits = std::move(bits);
    return m;
}

Hsv rgb_to_hsv(Rgb c) noexcept {
    const double r = c.r / 255.0;
    const double g = c.g / 255.0;
    const double b = c.b / 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    Hsv out;
    out.v = mx;
    out.s = mx > 0 ? d / mx : 0.0;
    if (d <= 0) {
        out.h = 0;
    } else if (mx == r) {
        out.h = 60.0 * std::fmod((g - b) / d, 6.0);
    } else if (mx == g) {
        out.h = 60.0 * ((b - r) / d + 2.0);
    } else {
        out.h = 60.0 * ((r - g) / d + 4.0);
    }
    if (out.h < 0) out.h += 360.0;
    if (out.h >= 360.0) out.h -= 360.0;
    return out;
}

Rgb hsv_to_rgb(double h, double s, double v) noexcept {
    h = std::fmod(h, 360.0);
    if (h < 0) h += 360.0;
    s = std::clamp(s, 0.0, 1.0);
    v = std::clamp(v, 0.0, 1.0);
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    const double m = v - c;
    auto to8 = [](double u) { return static_cast<std::uint8_t>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0)); };
    return {to8(r + m), to8(g + m), to8(b + m)};
}

bool is_chromatic(Rgb c) noexcept {
    const Hsv hsv = rgb_to_hsv(c);
    return hsv.s >= kChromaMinSaturation && hsv.v >= kChromaMinValue;
}

double hue_distance(double a, double b) noexcept {
    double d = std::fabs(std::fmod(a - b, 360.0));
    if (d > 180.0) d = 360.0 - d;
    return d;
}

std::optional<int> dominant_hue(const Image& image, const SegmentationMask* mask) {
    std::array<std::size_t, 360> hist{};
    std::size_t total = 0;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (mask && !mask->contains(x, y)) continue;
            const Rgb c = image.at(x, y);
            if (!is_chromatic(c)) continue;
            const int h = static_cast<int>(std::lround(rgb_to_hsv(c).h)) % 360;
            ++hist[static_cast<std::size_t>(h)];
            ++total;
        }
    }
    if (total == 0) return std::nullopt;
    return static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
}

Image crop(const Image& image, int x0, int y0, int width, int height) {
    if (x0 < 0 || y0 < 0 || width < 0 || height < 0 || x0 + width > image.width() || y0 + height > image.height())
        throw std::invalid_argument("crop: rectangle outside image");
    Image out(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) out.set(x, y, image.at(x0 + x, y0 + y));
    }
    return out;
}

Image resize_area(const Image& image, int width, int height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("resize_area: target must be positive");
    if (image.empty()) throw std::invalid_argument("resize_area: empty source");
    if (width == image.width() && height == image.height()) return image;
    Image out(width, height);
    const int sw = image.width();
    const int sh = image.height();
    for (int y = 0; y < height; ++y) {
        const int y0 = static_cast<int>(static_cast<long long>(y) * sh / height);
        const int y1 = std::max(y0 + 1, static_cast<int>(static_cast<long long>(y + 1) * sh / height));
        for (int x = 0; x < width; ++x) {
            const int x0 = static_cast<int>(static_cast<long long>(x) * sw / width);
            const int x1 = std::max(x0 + 1, static_cast<int>(static_cast<long long>(x + 1) * sw / width));
            unsigned long sr = 0, sg = 0, sb = 0, n = 0;
            for (int yy = y0; yy < std::min(y1, sh); ++yy) {
                for (int xx = x0; xx < std::min(x1, sw); ++xx) {
                    const Rgb c = image.at(xx, yy);
                    sr += c.r;
                    sg += c.g;
                    sb += c.b;
                    ++n;
                }
            }
            out.set(x, y, {static_cast<std::uint8_t>((sr + n / 2) / n), static_cast<std::uint8_t>((sg + n / 2) / n),
                           static_cast<std::uint8_t>((sb + n / 2) / n)});
        }
    }
    return out;
}

}  // namespace animforge
