#include "animforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace animforge::kernels {

int hue_bin(Rgb c) noexcept {
    const Hsv hsv = rgb_to_hsv(c);
    if (hsv.s < kChromaMinSaturation || hsv.v < kChromaMinValue) return -1;
    const int bin = static_cast<int>(hsv.h / (360.0 / kHueBins));
    return std::min(bin, kHueBins - 1);
}

Span1D block_span(int i, int n, int len) noexcept {
    int b = static_cast<int>(static_cast<long long>(i) * len / n);
    b = std::min(b, std::max(len - 1, 0));
    const int e = std::max(b + 1, static_cast<int>(static_cast<long long>(i + 1) * len / n));
    return {b, std::min(e, len)};
}

namespace {

inline int clampi(int v, int lo, int hi) noexcept { return v < lo ? lo : (v > hi ? hi : v); }

inline double laplacian_at(const GrayImage& g, int x, int y) noexcept {
    const int w = g.width - 1;
    const int h = g.height - 1;
    double neighbours = 0.0;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            neighbours += g.at(clampi(x + dx, 0, w), clampi(y + dy, 0, h));
        }
    }
    return 8.0 * g.at(x, y) - neighbours;
}

inline Rgb box_at(const Image& img, int x, int y, int radius) noexcept {
    const int w = img.width() - 1;
    const int h = img.height() - 1;
    unsigned sr = 0, sg = 0, sb = 0;
    const unsigned n = static_cast<unsigned>((2 * radius + 1) * (2 * radius + 1));
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            const Rgb c = img.at(clampi(x + dx, 0, w), clampi(y + dy, 0, h));
            sr += c.r;
            sg += c.g;
            sb += c.b;
        }
    }
    return {static_cast<std::uint8_t>((sr + n / 2) / n), static_cast<std::uint8_t>((sg + n / 2) / n),
            static_cast<std::uint8_t>((sb + n / 2) / n)};
}

void require_same_size(const Image& a, const Image& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw std::invalid_argument("mean_abs_delta: images differ in size");
}

BlockMeans means_from_sums(const std::array<std::uint64_t, kBlockGrid * kBlockGrid>& sums,
                           const std::array<std::uint64_t, kBlockGrid * kBlockGrid>& counts) {
    BlockMeans out{};
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = counts[i] ? static_cast<double>(sums[i]) / (1000.0 * 255.0 * static_cast<double>(counts[i])) : 0.0;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
namespace serial {

GrayImage to_gray(const Image& image) {
    GrayImage g{image.width(), image.height(), std::vector<double>(image.pixel_count())};
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            g.px[static_cast<std::size_t>(y) * g.width + x] = luma_milli(image.at(x, y)) / 1000.0;
        }
    }
    return g;
}

double laplacian_variance(const GrayImage& gray) {
    const double n = static_cast<double>(gray.width) * gray.height;
    double sum = 0.0;
    for (int y = 0; y < gray.height; ++y)
        for (int x = 0; x < gray.width; ++x) sum += laplacian_at(gray, x, y);
    const double mean = sum / n;
    double ss = 0.0;
    for (int y = 0; y < gray.height; ++y) {
        for (int x = 0; x < gray.width; ++x) {
            const double d = laplacian_at(gray, x, y) - mean;
            ss += d * d;
        }
    }
    return ss / n;
}

Image box_blur(const Image& image, int radius) {
    if (radius <= 0) return image;
    Image out(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x) out.set(x, y, box_at(image, x, y, radius));
    return out;
}

BlockMeans block_means(const Image& image) {
    std::array<std::uint64_t, kBlockGrid * kBlockGrid> sums{};
    std::array<std::uint64_t, kBlockGrid * kBlockGrid> counts{};
    for (int by = 0; by < kBlockGrid; ++by) {
        const Span1D ys = block_span(by, kBlockGrid, image.height());
        for (int bx = 0; bx < kBlockGrid; ++bx) {
            const Span1D xs = block_span(bx, kBlockGrid, image.width());
            const std::size_t k = static_cast<std::size_t>(by * kBlockGrid + bx);
            for (int y = ys.begin; y < ys.end; ++y) {
                for (int x = xs.begin; x < xs.end; ++x) {
                    sums[k] += luma_milli(image.at(x, y));
                    ++counts[k];
                }
            }
        }
    }
    return means_from_sums(sums, counts);
}

HueHistogram hue_histogram(const Image& image) {
    HueHistogram hist{};
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const int b = hue_bin(image.at(x, y));
            if (b >= 0) ++hist[static_cast<std::size_t>(b)];
        }
    }
    return hist;
}

double mean_abs_delta(const Image& a, const Image& b) {
    require_same_size(a, b);
    const auto da = a.data();
    const auto db = b.data();
    if (da.empty()) return 0.0;
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < da.size(); ++i) total += static_cast<std::uint64_t>(std::abs(int(da[i]) - int(db[i])));
    return static_cast<double>(total) / static_cast<double>(da.size());
}

}  // namespace serial

// ---------------------------------------------------------------------------
namespace parallel {

GrayImage to_gray(const Image& image) {
    GrayImage g{image.width(), image.height(), std::vector<double>(image.pixel_count())};
    const int h = image.height();
    const int w = image.width();
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) g.px[static_cast<std::size_t>(y) * w + x] = luma_milli(image.at(x, y)) / 1000.0;
    }
    return g;
}

double laplacian_variance(const GrayImage& gray) {
    const int h = gray.height;
    const int w = gray.width;
    const double n = static_cast<double>(w) * h;
    std::vector<double> row(static_cast<std::size_t>(h), 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        double s = 0.0;
        for (int x = 0; x < w; ++x) s += laplacian_at(gray, x, y);
        row[static_cast<std::size_t>(y)] = s;
    }
    double sum = 0.0;
    for (double s : row) sum += s;
    const double mean = sum / n;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        double s = 0.0;
        for (int x = 0; x < w; ++x) {
            const double d = laplacian_at(gray, x, y) - mean;
            s += d * d;
        }
        row[static_cast<std::size_t>(y)] = s;
    }
    double ss = 0.0;
    for (double s : row) ss += s;
    return ss / n;
}

Image box_blur(const Image& image, int radius) {
    if (radius <= 0) return image;
    Image out(image.width(), image.height());
    const int h = image.height();
    const int w = image.width();
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.set(x, y, box_at(image, x, y, radius));
    return out;
}

BlockMeans block_means(const Image& image) {
    constexpr int kCells = kBlockGrid * kBlockGrid;
    std::array<std::uint64_t, kCells> sums{};
    std::array<std::uint64_t, kCells> counts{};
#pragma omp parallel for schedule(static)
    for (int k = 0; k < kCells; ++k) {
        const Span1D ys = block_span(k / kBlockGrid, kBlockGrid, image.height());
        const Span1D xs = block_span(k % kBlockGrid, kBlockGrid, image.width());
        std::uint64_t s = 0, c = 0;
        for (int y = ys.begin; y < ys.end; ++y) {
            for (int x = xs.begin; x < xs.end; ++x) {
                s += luma_milli(image.at(x, y));
                ++c;
            }
        }
        sums[static_cast<std::size_t>(k)] = s;
        counts[static_cast<std::size_t>(k)] = c;
    }
    return means_from_sums(sums, counts);
}

HueHistogram hue_histogram(const Image& image) {
    const int h = image.height();
    const int w = image.width();
    std::vector<HueHistogram> rows(static_cast<std::size_t>(h));
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        HueHistogram& r = rows[static_cast<std::size_t>(y)];
        r.fill(0);
        for (int x = 0; x < w; ++x) {
            const int b = hue_bin(image.at(x, y));
            if (b >= 0) ++r[static_cast<std::size_t>(b)];
        }
    }
    HueHistogram hist{};
    for (const auto& r : rows)
        for (std::size_t i = 0; i < hist.size(); ++i) hist[i] += r[i];
    return hist;
}

double mean_abs_delta(const Image& a, const Image& b) {
    require_same_size(a, b);
    const auto da = a.data();
    const auto db = b.data();
    if (da.empty()) return 0.0;
    const long long n = static_cast<long long>(da.size());
    std::uint64_t total = 0;
#pragma omp parallel for schedule(static) reduction(+ : total)
    for (long long i = 0; i < n; ++i) total += static_cast<std::uint64_t>(std::abs(int(da[i]) - int(db[i])));
    return static_cast<double>(total) / static_cast<double>(da.size());
}

}  // namespace parallel

}  // namespace animforge::kernels
