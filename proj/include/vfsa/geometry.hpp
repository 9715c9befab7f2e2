#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace vfsa {

/// Axis-aligned box in corner format, pixels. x2 > x1 and y2 > y1.
struct Box {
    float x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    bool valid() const { return x2 > x1 && y2 > y1; }
    float area() const { return (x2 - x1) * (y2 - y1); }
};

struct ScoredBox {
    Box box;
    float confidence = 0.0f;
    int class_id = -1;
};

inline float iou(const Box& a, const Box& b) {
    const float ix1 = std::max(a.x1, b.x1);
    const float iy1 = std::max(a.y1, b.y1);
    const float ix2 = std::min(a.x2, b.x2);
    const float iy2 = std::min(a.y2, b.y2);
    const float iw = ix2 - ix1;
    const float ih = iy2 - iy1;
    if (iw <= 0.0f || ih <= 0.0f) return 0.0f;
    const float inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

/// Greedy NMS. Sort by confidence descending (ties broken by lower original
/// index), keep the top, suppress remaining boxes with IoU strictly above
/// iou_thresh. Class-agnostic unless per_class is set.
inline std::vector<ScoredBox> nms(const std::vector<ScoredBox>& candidates, float iou_thresh,
                                  bool per_class = false) {
    if (iou_thresh <= 0.0f || iou_thresh > 1.0f)
        throw std::invalid_argument("nms: iou_thresh must be in (0,1]");
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return candidates[a].confidence > candidates[b].confidence;
    });
    std::vector<bool> suppressed(candidates.size(), false);
    std::vector<ScoredBox> kept;
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const std::size_t i = order[oi];
        if (suppressed[i]) continue;
        kept.push_back(candidates[i]);
        for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
            const std::size_t j = order[oj];
            if (suppressed[j]) continue;
            if (per_class && candidates[j].class_id != candidates[i].class_id) continue;
            if (iou(candidates[i].box, candidates[j].box) > iou_thresh) suppressed[j] = true;
        }
    }
    return kept;
}

/// Literal O(n^2) transcription of the greedy definition, no sorting. Used as
/// ground truth in tests.
inline std::vector<ScoredBox> nms_oracle(const std::vector<ScoredBox>& candidates,
                                         float iou_thresh, bool per_class = false) {
    if (iou_thresh <= 0.0f || iou_thresh > 1.0f)
        throw std::invalid_argument("nms_oracle: iou_thresh must be in (0,1]");
    enum State { kPending, kKept, kSuppressed };
    std::vector<State> state(candidates.size(), kPending);
    std::vector<ScoredBox> kept;
    for (;;) {
        // highest pending confidence, lowest index on ties
        std::size_t best = candidates.size();
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (state[i] != kPending) continue;
            if (best == candidates.size() || candidates[i].confidence > candidates[best].confidence)
                best = i;
        }
        if (best == candidates.size()) break;
        state[best] = kKept;
        kept.push_back(candidates[best]);
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            if (state[j] != kPending) continue;
            if (per_class && candidates[j].class_id != candidates[best].class_id) continue;
            if (iou(candidates[best].box, candidates[j].box) > iou_thresh) state[j] = kSuppressed;
        }
    }
    return kept;
}

} // namespace vfsa
