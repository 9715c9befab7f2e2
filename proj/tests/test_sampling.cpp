#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "vfsa/sampling.hpp"

using vfsa::SamplerConfig;
using vfsa::SamplingStrategy;

TEST_CASE("count of one returns just the key") {
    SamplerConfig cfg{SamplingStrategy::global, 1, 0};
    REQUIRE(vfsa::sample(100, 42, cfg) == std::vector<std::size_t>{42});
    cfg.strategy = SamplingStrategy::local;
    REQUIRE(vfsa::sample(100, 42, cfg) == std::vector<std::size_t>{42});
}

TEST_CASE("local window centered with extra slot on the left") {
    SamplerConfig cfg{SamplingStrategy::local, 4, 0};
    REQUIRE(vfsa::sample(100, 50, cfg) == std::vector<std::size_t>{48, 49, 50, 51});
    cfg.count = 5;
    REQUIRE(vfsa::sample(100, 50, cfg) == std::vector<std::size_t>{48, 49, 50, 51, 52});
}

TEST_CASE("local window shifts inward at video edges") {
    SamplerConfig cfg{SamplingStrategy::local, 5, 0};
    REQUIRE(vfsa::sample(100, 0, cfg) == std::vector<std::size_t>{0, 1, 2, 3, 4});
    REQUIRE(vfsa::sample(100, 99, cfg) == std::vector<std::size_t>{95, 96, 97, 98, 99});
}

TEST_CASE("count exceeding video length clamps to all frames") {
    SamplerConfig cfg{SamplingStrategy::global, 31, 7};
    REQUIRE(vfsa::sample(5, 3, cfg) == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("output contains key, no duplicates, right length") {
    for (auto strategy : {SamplingStrategy::global, SamplingStrategy::local}) {
        vfsa::Rng rng(13);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t len = 1 + rng.uniform_index(60);
            const std::size_t key = rng.uniform_index(len);
            SamplerConfig cfg{strategy, 1 + rng.uniform_index(40),
                              static_cast<std::uint64_t>(trial)};
            auto out = vfsa::sample(len, key, cfg);
            REQUIRE(out.size() == std::min(cfg.count, len));
            REQUIRE(std::set<std::size_t>(out.begin(), out.end()).size() == out.size());
            REQUIRE(std::find(out.begin(), out.end(), key) != out.end());
            REQUIRE(std::is_sorted(out.begin(), out.end()));
            for (std::size_t i : out) REQUIRE(i < len);
        }
    }
}

TEST_CASE("global sampling is reproducible per seed") {
    SamplerConfig cfg{SamplingStrategy::global, 8, 12345};
    REQUIRE(vfsa::sample(50, 10, cfg) == vfsa::sample(50, 10, cfg));
}

TEST_CASE("global sampling covers the whole range over many seeds") {
    std::set<std::size_t> seen;
    for (std::uint64_t seed = 0; seed < 10000 && seen.size() < 50; ++seed) {
        SamplerConfig cfg{SamplingStrategy::global, 8, seed};
        for (std::size_t i : vfsa::sample(50, 25, cfg)) seen.insert(i);
    }
    REQUIRE(seen.size() == 50);
}

TEST_CASE("sample rejects key out of range") {
    SamplerConfig cfg{SamplingStrategy::global, 4, 0};
    REQUIRE_THROWS(vfsa::sample(10, 10, cfg));
}
