#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace animforge {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    bool operator==(const Rgb&) const = default;
};

// 8-bit interleaved RGB raster. Buffer length is always width * height * 3.
class Image {
public:
    Image() = default;
    Image(int width, int height);
    Image(int width, int height, std::vector<std::uint8_t> rgb);

    static Image filled(int width, int height, Rgb color);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const noexcept { return pixel_count() == 0; }

    std::span<const std::uint8_t> data() const noexcept { return px_; }
    std::span<std::uint8_t> data() noexcept { return px_; }

    Rgb at(int x, int y) const noexcept {
        const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
        return {px_[i], px_[i + 1], px_[i + 2]};
    }
    void set(int x, int y, Rgb c) noexcept {
        const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
        px_[i] = c.r;
        px_[i + 1] = c.g;
        px_[i + 2] = c.b;
    }

    // SHA-256 over "WxH:" followed by the raw buffer.
    std::string content_hash() const;

    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> px_;
};

struct FrameSequence {
    std::vector<Image> frames;
    double fps = 8.0;

    int frame_count() const noexcept { return static_cast<int>(frames.size()); }
    int width() const noexcept { return frames.empty() ? 0 : frames.front().width(); }
    int height() const noexcept { return frames.empty() ? 0 : frames.front().height(); }
    double duration_seconds() const noexcept { return fps > 0 ? frame_count() / fps : 0.0; }

    // Throws std::invalid_argument when empty, non-uniform or fps <= 0.
    void validate() const;
    bool operator==(const FrameSequence&) const = default;
};

struct SegmentationMask {
    std::string label;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // one byte per pixel, 0 or 1
    std::size_t area = 0;

    bool contains(int x, int y) const noexcept {
        return bits[static_cast<std::size_t>(y) * width + x] != 0;
    }
    static SegmentationMask from_bits(std::string label, int width, int height, std::vector<std::uint8_t> bits);
    bool operator==(const SegmentationMask&) const = default;
};

inline constexpr const char* kBackgroundLabel = "background";

// HSV with hue in degrees [0, 360), saturation and value in [0, 1].
struct Hsv {
    double h = 0;
    double s = 0;
    double v = 0;
};

Hsv rgb_to_hsv(Rgb c) noexcept;
Rgb hsv_to_rgb(double h, double s, double v) noexcept;

// Pixels below these thresholds have no meaningful hue and count as neutral.
inline constexpr double kChromaMinSaturation = 0.2;
inline constexpr double kChromaMinValue = 0.1;
bool is_chromatic(Rgb c) noexcept;

// Circular distance between two hues, in degrees [0, 180].
double hue_distance(double a, double b) noexcept;

// Mode of the rounded hue over chromatic pixels (optionally restricted to a mask).
std::optional<int> dominant_hue(const Image& image, const SegmentationMask* mask = nullptr);

Image crop(const Image& image, int x0, int y0, int width, int height);
// Box-filter resample to an exact target size.
Image resize_area(const Image& image, int width, int height);

}  // namespace animforge
