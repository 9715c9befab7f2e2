#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vfsa/fam.hpp"
#include "vfsa/fsm.hpp"
#include "vfsa/geometry.hpp"
#include "vfsa/rng.hpp"

namespace vfsa {

/// Linearly moving object track.
struct Track {
    int class_id = 0;
    Box start;      // box at frame 0
    float vx = 0.0f; // pixels per frame
    float vy = 0.0f;
};

struct SceneSpec {
    int frames = 8;
    int width = 640;
    int height = 640;
    std::vector<Track> objects;
    std::vector<int> strides{8, 16, 32};
    float noise_sigma = 0.0f;
    std::set<int> degrade_frames;
    std::uint64_t seed = 0;
    int num_classes = 8;
    int feat_dim = 8;

    void validate() const {
        if (frames < 1) throw std::invalid_argument("SceneSpec: frames must be >= 1");
        if (noise_sigma < 0.0f) throw std::invalid_argument("SceneSpec: noise_sigma must be >= 0");
        if (num_classes < 1 || num_classes > feat_dim)
            throw std::invalid_argument("SceneSpec: need 1 <= num_classes <= feat_dim");
        for (int s : strides)
            if (s <= 0 || width % s != 0 || height % s != 0)
                throw std::invalid_argument("SceneSpec: strides must divide image size");
        for (const Track& t : objects) {
            if (!t.start.valid()) throw std::invalid_argument("SceneSpec: invalid track box");
            if (t.class_id < 0 || t.class_id >= num_classes)
                throw std::invalid_argument("SceneSpec: track class out of range");
            for (int f = 0; f < frames; ++f) {
                const float dx = t.vx * static_cast<float>(f), dy = t.vy * static_cast<float>(f);
                if (t.start.x1 + dx < 0 || t.start.y1 + dy < 0 ||
                    t.start.x2 + dx > static_cast<float>(width) ||
                    t.start.y2 + dy > static_cast<float>(height))
                    throw std::invalid_argument("SceneSpec: track leaves image bounds");
            }
        }
    }
};

struct GtObject {
    Box box;
    int class_id = 0;
};

struct GroundTruth {
    std::vector<std::vector<GtObject>> frames; // indexed by frame id
};

namespace detail {

/// Orthogonal class prototypes: scaled one-hot rows (num_classes <= feat_dim).
inline std::vector<float> class_prototype(int class_id, int feat_dim) {
    std::vector<float> p(static_cast<std::size_t>(feat_dim), 0.0f);
    p[static_cast<std::size_t>(class_id)] = 1.0f;
    return p;
}

inline float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

} // namespace detail

/// Generate dense per-frame predictions plus ground truth for a synthetic
/// scene. One candidate per grid cell over all strides; cells whose center
/// falls inside an object carry that object's (jittered) box, concentrated
/// class scores and near-1 objectness/IoU; background cells carry near-zero
/// confidences. Frames listed in degrade_frames get confidence and feature
/// noise amplified 5x. Fully reproducible per seed via per-frame sub-seeds.
inline std::pair<std::vector<FramePrediction>, GroundTruth> generate(const SceneSpec& spec) {
    spec.validate();
    std::vector<FramePrediction> preds;
    GroundTruth gt;
    preds.reserve(static_cast<std::size_t>(spec.frames));
    gt.frames.resize(static_cast<std::size_t>(spec.frames));

    for (int f = 0; f < spec.frames; ++f) {
        Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(f)));
        const float amp = spec.degrade_frames.count(f) ? 5.0f : 1.0f;
        const float sigma = spec.noise_sigma * amp;

        std::vector<GtObject>& objs = gt.frames[static_cast<std::size_t>(f)];
        for (const Track& t : spec.objects) {
            const float dx = t.vx * static_cast<float>(f), dy = t.vy * static_cast<float>(f);
            objs.push_back({{t.start.x1 + dx, t.start.y1 + dy, t.start.x2 + dx, t.start.y2 + dy},
                            t.class_id});
        }

        FramePrediction frame;
        frame.frame_id = f;
        for (int s : spec.strides) {
            const int gw = spec.width / s, gh = spec.height / s;
            for (int gy = 0; gy < gh; ++gy) {
                for (int gx = 0; gx < gw; ++gx) {
                    const float cx = (static_cast<float>(gx) + 0.5f) * static_cast<float>(s);
                    const float cy = (static_cast<float>(gy) + 0.5f) * static_cast<float>(s);
                    int hit = -1;
                    for (std::size_t oi = 0; oi < objs.size(); ++oi) {
                        const Box& b = objs[oi].box;
                        if (cx >= b.x1 && cx < b.x2 && cy >= b.y1 && cy < b.y2) {
                            hit = static_cast<int>(oi);
                            break;
                        }
                    }
                    Candidate c;
                    c.class_scores.assign(static_cast<std::size_t>(spec.num_classes), 0.0f);
                    c.feat_cls.resize(static_cast<std::size_t>(spec.feat_dim));
                    c.feat_reg.resize(static_cast<std::size_t>(spec.feat_dim));
                    if (hit >= 0) {
                        const GtObject& o = objs[static_cast<std::size_t>(hit)];
                        const float jitter = sigma * 20.0f;
                        c.box = {o.box.x1 + rng.normal(0.0f, jitter),
                                 o.box.y1 + rng.normal(0.0f, jitter),
                                 o.box.x2 + rng.normal(0.0f, jitter),
                                 o.box.y2 + rng.normal(0.0f, jitter)};
                        if (!c.box.valid()) c.box = o.box; // jitter collapsed the box
                        for (int k = 0; k < spec.num_classes; ++k)
                            c.class_scores[static_cast<std::size_t>(k)] =
                                detail::clamp01(std::abs(rng.normal(0.0f, sigma * 0.1f)));
                        c.class_scores[static_cast<std::size_t>(o.class_id)] =
                            detail::clamp01(1.0f - std::abs(rng.normal(0.0f, sigma * 1.5f)));
                        c.objectness = detail::clamp01(1.0f - std::abs(rng.normal(0.0f, sigma)));
                        c.iou_score = detail::clamp01(1.0f - std::abs(rng.normal(0.0f, sigma)));
                        std::vector<float> proto =
                            detail::class_prototype(o.class_id, spec.feat_dim);
                        for (int k = 0; k < spec.feat_dim; ++k) {
                            c.feat_cls[static_cast<std::size_t>(k)] =
                                proto[static_cast<std::size_t>(k)] + rng.normal(0.0f, sigma);
                            c.feat_reg[static_cast<std::size_t>(k)] =
                                proto[static_cast<std::size_t>(k)] + rng.normal(0.0f, sigma);
                        }
                    } else {
                        const float hs = static_cast<float>(s) * 0.5f;
                        c.box = {cx - hs, cy - hs, cx + hs, cy + hs};
                        for (int k = 0; k < spec.num_classes; ++k)
                            c.class_scores[static_cast<std::size_t>(k)] =
                                detail::clamp01(std::abs(rng.normal(0.0f, sigma * 0.05f)));
                        c.objectness = detail::clamp01(std::abs(rng.normal(0.0f, sigma * 0.05f)));
                        c.iou_score = c.objectness;
                        for (int k = 0; k < spec.feat_dim; ++k) {
                            c.feat_cls[static_cast<std::size_t>(k)] = rng.normal(0.0f, sigma * 0.2f);
                            c.feat_reg[static_cast<std::size_t>(k)] = rng.normal(0.0f, sigma * 0.2f);
                        }
                    }
                    c.refresh_confidence();
                    frame.candidates.push_back(std::move(c));
                }
            }
        }
        preds.push_back(std::move(frame));
    }
    return {std::move(preds), std::move(gt)};
}

/// Constructed batch exercising the homogeneity issue: a degraded key whose
/// feature is a noise-corrupted copy of a low-confidence wrong-class
/// reference, plus several high-confidence correct references.
struct HomogeneityFixture {
    AggregationBatch batch;
    std::size_t key_row = 0;
    std::size_t distractor_row = 1;
    std::vector<std::size_t> correct_rows;
    int correct_class = 0;
    int wrong_class = 1;
};

inline HomogeneityFixture homogeneity_fixture(std::uint64_t seed,
                                              float distractor_confidence = 0.1f,
                                              float noise_sigma = 0.05f) {
    constexpr std::size_t n = 6, d = 8;
    Rng rng(seed);
    HomogeneityFixture fx;
    fx.correct_rows = {2, 3, 4, 5};
    const std::size_t hc = static_cast<std::size_t>(fx.correct_class);
    const std::size_t hw = static_cast<std::size_t>(fx.wrong_class);

    Matrix feats(n, d);
    // key: the correct prototype pushed toward the wrong prototype by the
    // degradation; at sigma = 0 it equals a clean correct reference.
    const float w = std::clamp(noise_sigma * 12.0f, 0.0f, 0.8f);
    for (std::size_t j = 0; j < d; ++j) feats.at(0, j) = rng.normal(0.0f, noise_sigma * 0.2f);
    feats.at(0, hc) += 1.0f - w;
    feats.at(0, hw) += w;
    // distractor: clean wrong-class prototype, low confidence
    feats.at(1, hw) = 1.0f;
    // correct references: clean correct-class prototypes, high confidence
    for (std::size_t r : fx.correct_rows) feats.at(r, hc) = 1.0f;

    fx.batch.features_cls = feats;
    fx.batch.features_reg = feats;
    fx.batch.conf_cls = {0.3f, distractor_confidence, 0.9f, 0.9f, 0.9f, 0.9f};
    fx.batch.conf_iou = fx.batch.conf_cls;
    fx.batch.frame_offsets = {{0, 0}, {1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 4}};
    return fx;
}

} // namespace vfsa
