#pragma once

// Independent reference computations for the tests. Nothing here calls into the
// library's kernels or metrics; it only uses the plain data types.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "animforge/config.hpp"
#include "animforge/image.hpp"
#include "animforge/providers.hpp"
#include "animforge/script.hpp"

namespace oracle {

using animforge::Image;

// Direct 8-neighbour Laplacian, replicated borders, population variance, v/(v+1000).
double laplacian_variance(const Image& img);
double blur_score(const Image& img);

// round(i (n-1)/(k-1)) with halves up, evaluated in long double.
std::vector<int> sheet_indices(int n, int k);

std::uint64_t fnv1a64(const std::string& s);

double cosine(const std::vector<double>& a, const std::vector<double>& b);
// Anchor + previous-frame formula over raw vectors.
double consistency(const std::vector<std::vector<double>>& frames);

// Brute-force reference check of the cross-reference invariants.
bool references_resolve(const animforge::script::Script& s);

double mean_abs_frame_delta(const animforge::FrameSequence& clip);

// Random data.
Image random_image(std::mt19937_64& rng, int w, int h);
Image checkerboard(int w, int h, int cell);
Image box_blur_ref(const Image& img);
std::string random_name(std::mt19937_64& rng);
animforge::script::SceneSpec random_scene(std::mt19937_64& rng, std::size_t index);
animforge::script::Script random_script(std::mt19937_64& rng);

}  // namespace oracle

namespace fixture {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline constexpr const char* kStory =
    "Tom the cat chases Jerry the mouse around the kitchen. Later they rest together in the garden.";

// Mock-provider config at reduced resolution (pool sizes and frame counts at defaults).
animforge::RunConfig small_config(const std::filesystem::path& workspace, std::uint64_t seed = 7,
                                  const std::string& story = kStory);

}  // namespace fixture
