#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "animforge/digest.hpp"
#include "animforge/error.hpp"
#include "animforge/kernels.hpp"
#include "animforge/mock_providers.hpp"
#include "animforge/text.hpp"

namespace animforge::mock {

namespace {

constexpr int kTextureCell = 8;
constexpr double kIdentitySaturation = 0.75;
constexpr double kIdentityValue = 0.9;
constexpr double kSettingSaturation = 0.45;
constexpr double kSettingValue = 0.8;

double unit(std::uint64_t u) noexcept { return static_cast<double>(u >> 11) * 0x1.0p-53; }

std::uint64_t cell_hash(std::uint64_t seed, int x, int y) noexcept {
    return mix64(seed ^ mix64(static_cast<std::uint64_t>(x / kTextureCell) * 0x9E3779B97F4A7C15ull +
                              static_cast<std::uint64_t>(y / kTextureCell)));
}

// Blocky value noise in [0.82, 1].
double texture(std::uint64_t seed, int x, int y) noexcept { return 0.82 + 0.18 * unit(cell_hash(seed, x, y)); }

std::uint8_t backdrop_gray(std::uint64_t seed, int x, int y) noexcept {
    return static_cast<std::uint8_t>(140 + static_cast<int>(30.0 * unit(cell_hash(seed ^ 0xB4C0FFEEull, x, y))));
}

struct Ellipse {
    double cx, cy, rx, ry;
    bool contains(int x, int y) const noexcept {
        const double dx = (x + 0.5 - cx) / rx;
        const double dy = (y + 0.5 - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
    }
};

std::uint64_t candidate_seed(const ImageRequest& r, int ordinal) noexcept {
    return derive_seed(r.seed, "image/" + std::to_string(ordinal) + "/" + std::to_string(fnv1a64(r.prompt)));
}

Image shift_clamped(const Image& src, int dx, int dy) {
    if (dx == 0 && dy == 0) return src;
    Image out(src.width(), src.height());
    const int w = src.width() - 1;
    const int h = src.height() - 1;
    for (int y = 0; y < src.height(); ++y) {
        const int sy = std::clamp(y - dy, 0, h);
        for (int x = 0; x < src.width(); ++x) out.set(x, y, src.at(std::clamp(x - dx, 0, w), sy));
    }
    return out;
}

void add_noise(Image& img, std::uint64_t key, double amplitude) {
    if (amplitude <= 0) return;
    auto d = img.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double r = unit(mix64(key + i * 0xD1B54A32D192ED03ull));
        const int delta = static_cast<int>(std::lround((2.0 * r - 1.0) * amplitude));
        d[i] = static_cast<std::uint8_t>(std::clamp(int(d[i]) + delta, 0, 255));
    }
}

int pixel_hue(Rgb c) noexcept { return static_cast<int>(std::lround(rgb_to_hsv(c).h)) % 360; }

}  // namespace

int name_hue(std::string_view name) {
    return static_cast<int>(fnv1a64(text::nfc(text::trim(name))) % 360);
}

std::string prompt_subject(std::string_view prompt) {
    const auto colon = prompt.find(':');
    return std::string(text::trim(colon == std::string_view::npos ? prompt : prompt.substr(0, colon)));
}

Rgb identity_color(int hue, double value_scale) {
    return hsv_to_rgb(hue, kIdentitySaturation, kIdentityValue * value_scale);
}

std::string_view color_word(int hue) {
    static constexpr std::array<std::pair<int, std::string_view>, 9> table = {{
        {0, "red"}, {30, "orange"}, {60, "yellow"}, {120, "green"}, {180, "cyan"},
        {240, "blue"}, {270, "purple"}, {300, "magenta"}, {360, "red"},
    }};
    std::string_view best = "red";
    double best_d = 1e9;
    for (const auto& [h, word] : table) {
        const double d = hue_distance(hue, h);
        if (d < best_d) {
            best_d = d;
            best = word;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------

MockImageProvider::MockImageProvider(int size) : size_(size) {
    if (size < 8) throw std::invalid_argument("MockImageProvider: size must be >= 8");
}

std::vector<Image> MockImageProvider::generate_images(const ImageRequest& request, int n) {
    request.validate();
    if (n < 1) throw ProviderError(ProviderErrc::Permanent, "generate_images: n must be >= 1");
    std::vector<Image> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out.push_back(request.reference_images.empty() ? render_asset(request, i) : render_scene(request, i));
    return out;
}

Image MockImageProvider::render_asset(const ImageRequest& request, int ordinal) const {
    const std::uint64_t seed = candidate_seed(request, ordinal);
    const int hue = name_hue(prompt_subject(request.prompt));
    // Candidates differ in texture and slightly in framing.
    const double jitter = 0.04 * (unit(mix64(seed ^ 0x51)) - 0.5);
    const Ellipse e{size_ * (0.5 + jitter), size_ * 0.52, size_ * 0.3, size_ * 0.38};
    Image img(size_, size_);
    for (int y = 0; y < size_; ++y) {
        for (int x = 0; x < size_; ++x) {
            if (e.contains(x, y)) {
                img.set(x, y, identity_color(hue, texture(seed, x, y)));
            } else {
                const std::uint8_t g = backdrop_gray(seed, x, y);
                img.set(x, y, {g, g, g});
            }
        }
    }
    return img;
}

Image MockImageProvider::render_scene(const ImageRequest& request, int ordinal) const {
    const std::uint64_t seed = candidate_seed(request, ordinal);
    const auto& refs = request.reference_images;
    const std::optional<int> setting_hue = dominant_hue(refs.back());

    Image img(size_, size_);
    for (int y = 0; y < size_; ++y) {
        for (int x = 0; x < size_; ++x) {
            if (setting_hue) {
                img.set(x, y, hsv_to_rgb(*setting_hue, kSettingSaturation, kSettingValue * texture(seed ^ 0x5E77, x, y)));
            } else {
                const std::uint8_t g = backdrop_gray(seed, x, y);
                img.set(x, y, {g, g, g});
            }
        }
    }

    const int characters = static_cast<int>(refs.size()) - 1;
    for (int c = 0; c < characters; ++c) {
        const std::optional<int> ref_hue = dominant_hue(refs[static_cast<std::size_t>(c)]);
        if (!ref_hue) continue;
        int hue = *ref_hue;
        const std::uint64_t g = mix64(seed ^ (0xC0FFEEull + static_cast<std::uint64_t>(c)));
        if (unit(g) < kGlitchProbability) hue = (hue + 120 + static_cast<int>(mix64(g) % 121)) % 360;
        const double slot = static_cast<double>(size_) / characters;
        const Ellipse e{slot * (c + 0.5), size_ * 0.6, std::min(size_ * 0.18, slot * 0.4), size_ * 0.22};
        for (int y = 0; y < size_; ++y)
            for (int x = 0; x < size_; ++x)
                if (e.contains(x, y)) img.set(x, y, identity_color(hue, texture(seed, x, y)));
    }
    return img;
}

Image MockImageProvider::region_replace(const Image& image, const SegmentationMask& mask, const ImageRequest& request) {
    request.validate();
    if (mask.width != image.width() || mask.height != image.height())
        throw ProviderError(ProviderErrc::Permanent, "region_replace: mask does not match the image size");
    const std::uint64_t seed = candidate_seed(request, 0);
    const int hue = name_hue(prompt_subject(request.prompt));
    Image out = image;
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            if (mask.contains(x, y)) out.set(x, y, identity_color(hue, texture(seed, x, y)));
    return out;
}

// ---------------------------------------------------------------------------

std::vector<FrameSequence> MockVideoProvider::generate_videos(const VideoRequest& request, int n) {
    request.validate();
    if (n < 1) throw ProviderError(ProviderErrc::Permanent, "generate_videos: n must be >= 1");
    const int motion = std::clamp(request.params.motion, prompt::kMotionMin, prompt::kMotionMax);
    std::vector<FrameSequence> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::uint64_t key = derive_seed(request.seed, "video/" + std::to_string(i));
        const double u_speed = unit(mix64(key ^ 1));
        const double u_noise = unit(mix64(key ^ 2));
        const bool blurred = motion > 0 && unit(mix64(key ^ 3)) < 0.3;
        const double speed = motion * (0.5 + u_speed);
        const double amplitude = motion * (1.0 + 3.0 * u_noise);

        int sx = (mix64(key ^ 4) & 1) ? 1 : -1;
        if (request.params.camera.pan == prompt::Pan::Left) sx = -1;
        if (request.params.camera.pan == prompt::Pan::Right) sx = 1;
        int sy = 0;
        if (request.params.camera.tilt == prompt::Tilt::Up) sy = -1;
        if (request.params.camera.tilt == prompt::Tilt::Down) sy = 1;

        FrameSequence clip;
        clip.fps = request.fps;
        clip.frames.reserve(static_cast<std::size_t>(request.frame_count));
        clip.frames.push_back(request.conditioning_image);
        for (int t = 1; t < request.frame_count; ++t) {
            const int off = static_cast<int>(std::lround(speed * t));
            Image f = shift_clamped(request.conditioning_image, sx * off, sy * off / 2);
            add_noise(f, mix64(key ^ (0xF00Dull + static_cast<std::uint64_t>(t))), amplitude);
            if (blurred) f = kernels::serial::box_blur(f, 1);
            clip.frames.push_back(std::move(f));
        }
        out.push_back(std::move(clip));
    }
    return out;
}

// ---------------------------------------------------------------------------

MockSegmenter::MockSegmenter(double min_fraction) : min_fraction_(min_fraction) {}

std::vector<SegmentationMask> MockSegmenter::segment(const Image& image) {
    if (image.empty()) throw ProviderError(ProviderErrc::Permanent, "segment: empty image");
    const int w = image.width();
    const int h = image.height();
    const std::size_t n = image.pixel_count();

    std::vector<int> hue(n);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Rgb c = image.at(x, y);
            hue[static_cast<std::size_t>(y) * w + x] = is_chromatic(c) ? pixel_hue(c) : -1;
        }
    }
    auto joins = [&](std::size_t a, std::size_t b) {
        if (hue[a] < 0 || hue[b] < 0) return hue[a] < 0 && hue[b] < 0;
        return hue_distance(hue[a], hue[b]) <= kHueTolerance;
    };

    // Flood fill in scan order; component ids follow first-pixel order.
    std::vector<int> comp(n, -1);
    std::vector<std::size_t> areas;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < n; ++start) {
        if (comp[start] >= 0) continue;
        const int id = static_cast<int>(areas.size());
        std::size_t area = 0;
        comp[start] = id;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            ++area;
            const int x = static_cast<int>(p % w);
            const int y = static_cast<int>(p / w);
            const std::size_t nb[4] = {x > 0 ? p - 1 : p, x + 1 < w ? p + 1 : p, y > 0 ? p - w : p, y + 1 < h ? p + w : p};
            for (std::size_t q : nb) {
                if (q == p || comp[q] >= 0 || !joins(p, q)) continue;
                comp[q] = id;
                stack.push_back(q);
            }
        }
        areas.push_back(area);
    }

    const int background = static_cast<int>(std::max_element(areas.begin(), areas.end()) - areas.begin());
    const auto min_area = static_cast<std::size_t>(std::max(1.0, std::floor(min_fraction_ * static_cast<double>(n))));
    std::vector<int> mask_of(areas.size(), 0);  // 0 = background mask
    std::vector<std::string> labels = {kBackgroundLabel};
    for (std::size_t c = 0; c < areas.size(); ++c) {
        if (static_cast<int>(c) == background || areas[c] < min_area) continue;
        mask_of[c] = static_cast<int>(labels.size());
        labels.push_back("region_" + std::to_string(labels.size()));
    }

    std::vector<std::vector<std::uint8_t>> bits(labels.size(), std::vector<std::uint8_t>(n, 0));
    for (std::size_t p = 0; p < n; ++p) bits[static_cast<std::size_t>(mask_of[static_cast<std::size_t>(comp[p])])][p] = 1;
    std::vector<SegmentationMask> out;
    out.reserve(labels.size());
    for (std::size_t m = 0; m < labels.size(); ++m)
        out.push_back(SegmentationMask::from_bits(labels[m], w, h, std::move(bits[m])));
    return out;
}

// ---------------------------------------------------------------------------

namespace {

EmbeddingVector normalized(std::vector<double> v) {
    double ss = 0.0;
    for (double x : v) ss += x * x;
    if (ss == 0.0) {
        v.assign(v.size(), 0.0);
        v[0] = 1.0;
        return {std::move(v)};
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (double& x : v) x *= inv;
    return {std::move(v)};
}

template <class BlockFn, class HistFn>
EmbeddingVector embed_with(const Image& image, BlockFn block_means, HistFn hue_histogram) {
    if (image.empty()) throw ProviderError(ProviderErrc::Permanent, "embed_image: empty image");
    std::vector<double> v(ToyEmbedder::kDimension, 0.0);
    const auto blocks = block_means(image);
    std::copy(blocks.begin(), blocks.end(), v.begin());
    const auto hist = hue_histogram(image);
    const double n = static_cast<double>(image.pixel_count());
    for (int b = 0; b < kernels::kHueBins; ++b) v[static_cast<std::size_t>(16 + b)] = hist[static_cast<std::size_t>(b)] / n;
    return normalized(std::move(v));
}

std::optional<int> color_hue(std::string_view word) {
    static constexpr std::array<std::pair<std::string_view, int>, 11> table = {{
        {"red", 0}, {"orange", 30}, {"yellow", 60}, {"green", 120}, {"cyan", 180}, {"blue", 240},
        {"purple", 270}, {"violet", 270}, {"magenta", 300}, {"pink", 300}, {"teal", 180},
    }};
    for (const auto& [w, h] : table)
        if (w == word) return h;
    return std::nullopt;
}

}  // namespace

EmbeddingVector ToyEmbedder::embed_text(std::string_view txt) {
    if (text::trim(txt).empty()) throw ProviderError(ProviderErrc::Permanent, "embed_text: empty text");
    std::vector<double> v(kDimension, 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        if (const auto hue = color_hue(token)) {
            v[static_cast<std::size_t>(16 + static_cast<int>(*hue / (360.0 / kernels::kHueBins)))] += 2.0;
        } else {
            v[fnv1a64(token) % 16] += 1.0;
        }
        token.clear();
    };
    for (char c : txt) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || u >= 0x80) token += static_cast<char>(std::tolower(u));
        else flush();
    }
    flush();
    return normalized(std::move(v));
}

EmbeddingVector ToyEmbedder::embed_image(const Image& image) {
    return embed_with(image, kernels::parallel::block_means, kernels::parallel::hue_histogram);
}

std::vector<EmbeddingVector> ToyEmbedder::embed_images(std::span<const Image> images) {
    std::vector<EmbeddingVector> out(images.size());
    std::exception_ptr failure;
    const long long count = static_cast<long long>(images.size());
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < count; ++i) {
        try {
            out[static_cast<std::size_t>(i)] =
                embed_with(images[static_cast<std::size_t>(i)], kernels::serial::block_means, kernels::serial::hue_histogram);
        } catch (...) {
#pragma omp critical(animforge_embed_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

ProviderSet make_mock_providers(int image_size, prompt::TemplateSet templates, MockChatOptions chat) {
    ProviderSet p;
    p.chat = std::make_shared<MockChat>(std::move(templates), chat);
    p.image = std::make_shared<MockImageProvider>(image_size);
    p.video = std::make_shared<MockVideoProvider>();
    p.segmenter = std::make_shared<MockSegmenter>();
    p.embedder = std::make_shared<ToyEmbedder>();
    return p;
}

}  // namespace animforge::mock
