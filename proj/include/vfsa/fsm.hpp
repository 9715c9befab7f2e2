#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

#include "vfsa/geometry.hpp"

namespace vfsa {

/// One dense prediction cell: decoded box, per-class probabilities, objectness,
/// IoU-quality score and the feature rows feeding aggregation.
struct Candidate {
    Box box;
    std::vector<float> class_scores;
    float objectness = 0.0f;
    float iou_score = 0.0f;
    std::vector<float> feat_cls;
    std::vector<float> feat_reg;
    float confidence = 0.0f; // cached objectness * max(class_scores)

    int best_class() const {
        return static_cast<int>(std::max_element(class_scores.begin(), class_scores.end()) -
                                class_scores.begin());
    }
    void refresh_confidence() {
        float mx = 0.0f;
        for (float s : class_scores) mx = std::max(mx, s);
        confidence = objectness * mx;
    }
};

struct FramePrediction {
    int frame_id = 0;
    std::vector<Candidate> candidates;
};

enum class SelectionPipeline { topk_nms, thresh };

/// Post-selection foreground subset; indices into the source frame's
/// candidate list, in kept order.
struct SelectedSet {
    int frame_id = 0;
    std::vector<std::size_t> indices;
    SelectionPipeline pipeline = SelectionPipeline::topk_nms;
};

/// TopK+NMS pipeline: take the k highest-confidence candidates, run
/// class-agnostic NMS, keep the first n survivors.
inline SelectedSet select_topk_nms(const FramePrediction& frame, std::size_t k = 750,
                                   std::size_t n = 30, float nms_iou = 0.75f) {
    if (k < n || n < 1) throw std::invalid_argument("select_topk_nms: need k >= n >= 1");
    SelectedSet out{frame.frame_id, {}, SelectionPipeline::topk_nms};
    if (frame.candidates.empty()) return out;

    std::vector<std::size_t> order(frame.candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return frame.candidates[a].confidence > frame.candidates[b].confidence;
    });
    const std::size_t topk = std::min(k, order.size());

    std::vector<ScoredBox> boxes(topk);
    for (std::size_t i = 0; i < topk; ++i) {
        const Candidate& c = frame.candidates[order[i]];
        // class_id smuggles the original index through NMS
        boxes[i] = {c.box, c.confidence, static_cast<int>(order[i])};
    }
    std::vector<ScoredBox> kept = nms(boxes, nms_iou, /*per_class=*/false);
    for (std::size_t i = 0; i < kept.size() && i < n; ++i)
        out.indices.push_back(static_cast<std::size_t>(kept[i].class_id));
    return out;
}

/// Thresh pipeline: keep every candidate with confidence above conf_thresh, in
/// original order. cap > 0 bounds the output to the cap highest-confidence
/// survivors (original order preserved); cap == 0 disables the bound.
inline SelectedSet select_thresh(const FramePrediction& frame, float conf_thresh = 0.001f,
                                 std::size_t cap = 0) {
    if (conf_thresh < 0.0f || conf_thresh >= 1.0f)
        throw std::invalid_argument("select_thresh: conf_thresh must be in [0,1)");
    SelectedSet out{frame.frame_id, {}, SelectionPipeline::thresh};
    for (std::size_t i = 0; i < frame.candidates.size(); ++i)
        if (frame.candidates[i].confidence > conf_thresh) out.indices.push_back(i);
    if (cap > 0 && out.indices.size() > cap) {
        std::vector<std::size_t> order = out.indices;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return frame.candidates[a].confidence > frame.candidates[b].confidence;
        });
        order.resize(cap);
        std::sort(order.begin(), order.end());
        out.indices = order;
    }
    return out;
}

struct GtFrame {
    int frame_id = 0;
    std::vector<Box> boxes;
};

/// Fraction of ground-truth boxes covered by at least one selected box with
/// IoU >= iou_thresh, class-agnostic, each GT counted once.
inline double class_agnostic_recall(const std::vector<FramePrediction>& frames,
                                    const std::vector<SelectedSet>& selections,
                                    const std::vector<GtFrame>& ground_truth,
                                    float iou_thresh = 0.5f) {
    std::map<int, const FramePrediction*> frame_by_id;
    for (const auto& f : frames) frame_by_id[f.frame_id] = &f;
    std::map<int, const SelectedSet*> sel_by_id;
    for (const auto& s : selections) sel_by_id[s.frame_id] = &s;

    std::size_t total = 0, matched = 0;
    for (const auto& gt : ground_truth) {
        total += gt.boxes.size();
        auto fit = frame_by_id.find(gt.frame_id);
        auto sit = sel_by_id.find(gt.frame_id);
        if (fit == frame_by_id.end() || sit == sel_by_id.end()) continue;
        for (const Box& g : gt.boxes) {
            for (std::size_t idx : sit->second->indices) {
                if (iou(g, fit->second->candidates[idx].box) >= iou_thresh) {
                    ++matched;
                    break;
                }
            }
        }
    }
    if (total == 0) throw std::invalid_argument("class_agnostic_recall: no ground-truth boxes");
    return static_cast<double>(matched) / static_cast<double>(total);
}

inline double mean_selected_per_frame(const std::vector<SelectedSet>& selections) {
    if (selections.empty()) throw std::invalid_argument("mean_selected_per_frame: no frames");
    std::size_t total = 0;
    for (const auto& s : selections) total += s.indices.size();
    return static_cast<double>(total) / static_cast<double>(selections.size());
}

} // namespace vfsa
