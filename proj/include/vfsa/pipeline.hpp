#pragma once

#include <algorithm>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "vfsa/evalbench.hpp"
#include "vfsa/fam.hpp"
#include "vfsa/fsm.hpp"
#include "vfsa/sampling.hpp"

namespace vfsa {

struct PipelineConfig {
    SelectionPipeline pipeline = SelectionPipeline::thresh;
    std::size_t topk = 750;
    std::size_t topn = 30;
    float select_nms_iou = 0.75f;
    float conf_thresh = 0.001f;
    std::size_t thresh_cap = 100; // 0 disables
    FamConfig fam;
    SamplerConfig sampler;
    float final_nms_iou = 0.5f;
    float final_conf = 0.001f;
    bool deterministic = true;

    void validate() const {
        fam.validate();
        if (final_nms_iou <= 0.0f || final_nms_iou > 1.0f)
            throw std::invalid_argument("PipelineConfig: final_nms_iou must be in (0,1]");
        if (select_nms_iou <= 0.0f || select_nms_iou > 1.0f)
            throw std::invalid_argument("PipelineConfig: select_nms_iou must be in (0,1]");
        if (conf_thresh < 0.0f || conf_thresh >= 1.0f)
            throw std::invalid_argument("PipelineConfig: conf_thresh must be in [0,1)");
        if (final_conf < 0.0f || final_conf >= 1.0f)
            throw std::invalid_argument("PipelineConfig: final_conf must be in [0,1)");
    }
};

/// Thread cap from the environment; 0 means serial.
inline unsigned env_thread_cap() {
    const char* v = std::getenv("VFSA_THREADS");
    if (!v) return 0;
    const long n = std::strtol(v, nullptr, 10);
    return n > 0 ? static_cast<unsigned>(n) : 0;
}

inline SelectedSet run_selection(const FramePrediction& frame, const PipelineConfig& cfg,
                                 bool apply_cap = true) {
    if (cfg.pipeline == SelectionPipeline::topk_nms)
        return select_topk_nms(frame, cfg.topk, cfg.topn, cfg.select_nms_iou);
    return select_thresh(frame, cfg.conf_thresh, apply_cap ? cfg.thresh_cap : 0);
}

/// Stack the selected candidates of the sampled frames into one batch.
/// frame_indices are positions in `frames`, ascending; rows keep per-frame
/// selection order.
inline AggregationBatch build_batch(const std::vector<FramePrediction>& frames,
                                    const std::vector<std::size_t>& frame_indices,
                                    const std::vector<SelectedSet>& selections,
                                    std::size_t feat_dim) {
    std::size_t n = 0;
    for (std::size_t fi : frame_indices) n += selections[fi].indices.size();
    AggregationBatch batch;
    batch.features_cls = Matrix(n, feat_dim);
    batch.features_reg = Matrix(n, feat_dim);
    batch.conf_cls.reserve(n);
    batch.conf_iou.reserve(n);
    std::size_t row = 0;
    for (std::size_t fi : frame_indices) {
        const FramePrediction& frame = frames[fi];
        for (std::size_t idx : selections[fi].indices) {
            const Candidate& c = frame.candidates[idx];
            if (c.feat_cls.size() != feat_dim || c.feat_reg.size() != feat_dim)
                throw std::invalid_argument("build_batch: candidate feature dim mismatch");
            for (std::size_t j = 0; j < feat_dim; ++j) {
                batch.features_cls.at(row, j) = c.feat_cls[j];
                batch.features_reg.at(row, j) = c.feat_reg[j];
            }
            batch.conf_cls.push_back(c.confidence);
            batch.conf_iou.push_back(c.iou_score);
            batch.frame_offsets.emplace_back(frame.frame_id, idx);
            ++row;
        }
    }
    return batch;
}

/// Refine one key frame: sample references, select, aggregate, rescore, and
/// run the final per-class NMS over the key frame's proposals.
inline DetectionFrame refine_key_frame(const std::vector<FramePrediction>& frames,
                                       const std::vector<SelectedSet>& selections,
                                       std::size_t key, const FamWeights& weights,
                                       const PipelineConfig& cfg) {
    const FramePrediction& key_frame = frames[key];
    DetectionFrame out;
    out.frame_id = key_frame.frame_id;

    std::vector<std::size_t> refs = sample(frames.size(), key, cfg.sampler);
    AggregationBatch batch = build_batch(frames, refs, selections, cfg.fam.dim);
    if (batch.size() == 0) return out;

    RefinedScores scores = fam_forward(batch, weights, cfg.fam);

    std::vector<ScoredBox> boxes;
    for (std::size_t r = 0; r < batch.size(); ++r) {
        if (batch.frame_offsets[r].first != key_frame.frame_id) continue;
        const Candidate& c = key_frame.candidates[batch.frame_offsets[r].second];
        std::size_t best = 0;
        for (std::size_t j = 1; j < cfg.fam.classes; ++j)
            if (scores.cls_probs.at(r, j) > scores.cls_probs.at(r, best)) best = j;
        const float score = scores.cls_probs.at(r, best) * scores.iou_probs[r];
        if (score > cfg.final_conf)
            boxes.push_back({c.box, score, static_cast<int>(best)});
    }
    std::vector<ScoredBox> kept = nms(boxes, cfg.final_nms_iou, /*per_class=*/true);
    std::stable_sort(kept.begin(), kept.end(),
                     [](const ScoredBox& a, const ScoredBox& b) { return a.confidence > b.confidence; });
    for (const ScoredBox& b : kept) out.dets.push_back({b.box, b.class_id, b.confidence});
    return out;
}

/// Full refinement pass over a frame file's worth of predictions. Key frames
/// are processed independently (in parallel when VFSA_THREADS allows) and the
/// output is ordered by frame position, so results do not depend on the thread
/// count.
inline std::vector<DetectionFrame> run_refine(const std::vector<FramePrediction>& frames,
                                              const FamWeights& weights,
                                              const PipelineConfig& cfg) {
    cfg.validate();
    if (weights.cls.w_q.rows != cfg.fam.dim)
        throw std::invalid_argument("run_refine: weights dim " +
                                    std::to_string(weights.cls.w_q.rows) +
                                    " does not match config dim " + std::to_string(cfg.fam.dim));
    std::vector<DetectionFrame> out(frames.size());
    if (frames.empty()) return out;

    std::vector<SelectedSet> selections(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i)
        selections[i] = run_selection(frames[i], cfg);

    // Key-frame parallelism never reorders output, so it is allowed even in
    // deterministic mode; the deterministic flag governs kernel internals.
    const unsigned threads = env_thread_cap();
    if (threads <= 1) {
        for (std::size_t i = 0; i < frames.size(); ++i)
            out[i] = refine_key_frame(frames, selections, i, weights, cfg);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (frames.size() + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t b = std::min<std::size_t>(t * chunk, frames.size());
            const std::size_t e = std::min<std::size_t>(b + chunk, frames.size());
            if (b < e)
                pool.emplace_back([&, b, e] {
                    for (std::size_t i = b; i < e; ++i)
                        out[i] = refine_key_frame(frames, selections, i, weights, cfg);
                });
        }
        for (auto& th : pool) th.join();
    }
    return out;
}

/// Decode selected candidates directly (no FAM): score = confidence, class =
/// argmax class probability, then the final per-class NMS.
inline std::vector<DetectionFrame> decode_selections(const std::vector<FramePrediction>& frames,
                                                     const std::vector<SelectedSet>& selections,
                                                     float final_nms_iou = 0.5f,
                                                     float final_conf = 0.001f) {
    std::vector<DetectionFrame> out;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        DetectionFrame df;
        df.frame_id = frames[i].frame_id;
        std::vector<ScoredBox> boxes;
        for (std::size_t idx : selections[i].indices) {
            const Candidate& c = frames[i].candidates[idx];
            if (c.confidence > final_conf)
                boxes.push_back({c.box, c.confidence, c.best_class()});
        }
        std::vector<ScoredBox> kept = nms(boxes, final_nms_iou, /*per_class=*/true);
        std::stable_sort(kept.begin(), kept.end(), [](const ScoredBox& a, const ScoredBox& b) {
            return a.confidence > b.confidence;
        });
        for (const ScoredBox& b : kept) df.dets.push_back({b.box, b.class_id, b.confidence});
        out.push_back(std::move(df));
    }
    return out;
}

} // namespace vfsa
