#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "vfsa/rng.hpp"

namespace vfsa {

enum class SamplingStrategy { global, local };

struct SamplerConfig {
    SamplingStrategy strategy = SamplingStrategy::global;
    std::size_t count = 31; // frames to aggregate, key included
    std::uint64_t seed = 0;
};

/// Pick reference frames for a key frame. Global: key plus count-1 distinct
/// uniformly random other frames. Local: a window of count consecutive frames
/// centered on key (extra slot goes left for even counts), shifted inward at
/// the edges.
/// Output is sorted ascending and always contains key.
inline std::vector<std::size_t> sample(std::size_t video_len, std::size_t key,
                                       const SamplerConfig& cfg) {
    if (cfg.count < 1) throw std::invalid_argument("sample: count must be >= 1");
    if (key >= video_len) throw std::invalid_argument("sample: key out of range");
    if (cfg.count >= video_len) {
        std::vector<std::size_t> all(video_len);
        for (std::size_t i = 0; i < video_len; ++i) all[i] = i;
        return all;
    }

    std::vector<std::size_t> out;
    if (cfg.strategy == SamplingStrategy::local) {
        const std::size_t left = cfg.count / 2;
        std::size_t start = key > left ? key - left : 0;
        if (start + cfg.count > video_len) start = video_len - cfg.count;
        for (std::size_t i = 0; i < cfg.count; ++i) out.push_back(start + i);
    } else {
        // partial Fisher-Yates over the indices excluding key
        std::vector<std::size_t> others;
        others.reserve(video_len - 1);
        for (std::size_t i = 0; i < video_len; ++i)
            if (i != key) others.push_back(i);
        Rng rng(mix_seed(cfg.seed, key));
        out.push_back(key);
        for (std::size_t i = 0; i + 1 < cfg.count; ++i) {
            const std::size_t j = i + rng.uniform_index(others.size() - i);
            std::swap(others[i], others[j]);
            out.push_back(others[i]);
        }
        std::sort(out.begin(), out.end());
    }
    return out;
}

} // namespace vfsa
