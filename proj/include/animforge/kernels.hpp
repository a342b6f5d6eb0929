#pragma once

// Pixel kernels behind the metrics and the toy embedder.
//
// Every kernel has a plain serial reference and an OpenMP variant with the same
// signature. The parallel variants reduce through per-row partials that are
// summed in row order afterwards, so their output does not depend on the thread
// count. Integer-valued kernels agree bit-exactly with the serial versions;
// floating reductions agree to rounding (the tests pin 1e-9).

#include <array>
#include <cstdint>
#include <vector>

#include "animforge/image.hpp"

namespace animforge::kernels {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> px;  // BT.601 luma, 0..255

    double at(int x, int y) const noexcept { return px[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr int kBlockGrid = 4;  // 4x4 grid of luma means
inline constexpr int kHueBins = 48;   // 7.5 degrees per bin

using BlockMeans = std::array<double, kBlockGrid * kBlockGrid>;
using HueHistogram = std::array<std::uint32_t, kHueBins>;

// Integer luma numerator: 299 R + 587 G + 114 B (so luma = value / 1000).
inline std::uint32_t luma_milli(Rgb c) noexcept { return 299u * c.r + 587u * c.g + 114u * c.b; }
int hue_bin(Rgb c) noexcept;  // -1 for neutral pixels

// Half-open pixel range covered by block i of n along an axis of length len.
// Never empty, even when len < n.
struct Span1D {
    int begin;
    int end;
};
Span1D block_span(int i, int n, int len) noexcept;

namespace serial {
GrayImage to_gray(const Image& image);
// Population variance of the 8-neighbour Laplacian response, replicated borders.
double laplacian_variance(const GrayImage& gray);
Image box_blur(const Image& image, int radius);
BlockMeans block_means(const Image& image);
HueHistogram hue_histogram(const Image& image);
double mean_abs_delta(const Image& a, const Image& b);
}  // namespace serial

namespace parallel {
GrayImage to_gray(const Image& image);
double laplacian_variance(const GrayImage& gray);
Image box_blur(const Image& image, int radius);
BlockMeans block_means(const Image& image);
HueHistogram hue_histogram(const Image& image);
double mean_abs_delta(const Image& a, const Image& b);
}  // namespace parallel

}  // namespace animforge::kernels
