#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "vfsa/fam.hpp"
#include "vfsa/geometry.hpp"
#include "vfsa/matrix.hpp"
#include "vfsa/rng.hpp"

namespace vfsa {

struct BenchPoint {
    std::size_t n = 0;
    double wall_time = 0.0;       // seconds, median over repeats
    std::size_t attn_entries = 0; // n^2
    double flop_estimate = 0.0;
};

struct BenchReport {
    std::vector<BenchPoint> points;
    double loglog_slope = 0.0;
};

/// Analytic cost of one attention layer: QK^T and AV products (2 n^2 d each)
/// plus a softmax pass (~5 flops per entry).
inline double attention_flop_model(std::size_t n, std::size_t d) {
    if (n < 1 || d < 1) throw std::invalid_argument("attention_flop_model: n, d >= 1");
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    return 4.0 * nn * static_cast<double>(d) + 5.0 * nn;
}

namespace detail {

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (float& v : m.data) v = rng.normal(0.0f, 1.0f);
    return m;
}

} // namespace detail

/// Time one qk-mode attention pass (weights + aggregation) over random Q,K,V.
inline double measure_attention_time(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Matrix q = detail::random_matrix(n, d, rng);
    Matrix k = detail::random_matrix(n, d, rng);
    Matrix v = detail::random_matrix(n, d, rng);
    const auto t0 = std::chrono::steady_clock::now();
    Matrix a = attention_weights_single(q, k, SimilarityMode::qk);
    Matrix agg = aggregate(a, a, v);
    const auto t1 = std::chrono::steady_clock::now();
    // keep the result observable so the work cannot be elided
    volatile float sink = agg.data[0];
    (void)sink;
    return std::chrono::duration<double>(t1 - t0).count();
}

/// Wall-time scaling of attention over candidate counts, with a log-log slope
/// fit over the points at or above min_fit_n.
inline BenchReport bench_attention(const std::vector<std::size_t>& sizes, std::size_t d,
                                   std::size_t repeats, std::uint64_t seed = 0,
                                   std::size_t min_fit_n = 512) {
    if (repeats < 3) throw std::invalid_argument("bench_attention: repeats must be >= 3");
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] <= sizes[i - 1])
            throw std::invalid_argument("bench_attention: sizes must be ascending");

    BenchReport report;
    for (std::size_t n : sizes) {
        std::vector<double> times;
        for (std::size_t r = 0; r < repeats; ++r)
            times.push_back(measure_attention_time(n, d, mix_seed(seed, r)));
        std::sort(times.begin(), times.end());
        const double median = times[times.size() / 2];
        report.points.push_back({n, median, n * n, attention_flop_model(n, d)});
    }

    // least-squares slope of log(t) vs log(n)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (const BenchPoint& p : report.points) {
        if (p.n < min_fit_n || p.wall_time <= 0.0) continue;
        const double x = std::log(static_cast<double>(p.n));
        const double y = std::log(p.wall_time);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m >= 2) {
        const double dm = static_cast<double>(m);
        report.loglog_slope = (dm * sxy - sx * sy) / (dm * sxx - sx * sx);
    }
    return report;
}

struct Detection {
    Box box;
    int class_id = 0;
    float score = 0.0f;
};

struct DetectionFrame {
    int frame_id = 0;
    std::vector<Detection> dets;
};

struct GtObjectFrame {
    int frame_id = 0;
    std::vector<Box> boxes;
    std::vector<int> class_ids;
};

/// Per-class AP at IoU 0.5 with the exact precision-envelope area, averaged
/// over classes present in the ground truth. Detections are matched greedily
/// by descending score, one match per GT box.
inline double average_precision_50(const std::vector<DetectionFrame>& detections,
                                   const std::vector<GtObjectFrame>& ground_truth,
                                   float iou_thresh = 0.5f) {
    std::set<int> classes;
    std::size_t total_gt = 0;
    for (const auto& g : ground_truth) {
        total_gt += g.boxes.size();
        for (int c : g.class_ids) classes.insert(c);
    }
    if (total_gt == 0) throw std::invalid_argument("average_precision_50: no ground truth");

    std::map<int, const GtObjectFrame*> gt_by_frame;
    for (const auto& g : ground_truth) gt_by_frame[g.frame_id] = &g;

    double ap_sum = 0.0;
    for (int cls : classes) {
        // flatten class detections over all frames
        struct Det {
            int frame_id;
            Box box;
            float score;
        };
        std::vector<Det> dets;
        std::size_t gt_count = 0;
        for (const auto& g : ground_truth)
            for (int c : g.class_ids)
                if (c == cls) ++gt_count;
        for (const auto& f : detections)
            for (const auto& d : f.dets)
                if (d.class_id == cls) dets.push_back({f.frame_id, d.box, d.score});
        std::stable_sort(dets.begin(), dets.end(),
                         [](const Det& a, const Det& b) { return a.score > b.score; });

        std::map<int, std::vector<bool>> used;
        std::vector<int> tp;
        tp.reserve(dets.size());
        for (const auto& d : dets) {
            auto it = gt_by_frame.find(d.frame_id);
            int best = -1;
            float best_iou = iou_thresh;
            if (it != gt_by_frame.end()) {
                const GtObjectFrame& g = *it->second;
                auto& flags = used[d.frame_id];
                flags.resize(g.boxes.size(), false);
                for (std::size_t i = 0; i < g.boxes.size(); ++i) {
                    if (g.class_ids[i] != cls || flags[i]) continue;
                    const float ov = iou(d.box, g.boxes[i]);
                    if (ov >= best_iou) {
                        best_iou = ov;
                        best = static_cast<int>(i);
                    }
                }
                if (best >= 0) flags[static_cast<std::size_t>(best)] = true;
            }
            tp.push_back(best >= 0 ? 1 : 0);
        }

        if (gt_count == 0) continue;
        std::vector<double> recall(tp.size()), precision(tp.size());
        std::size_t cum_tp = 0;
        for (std::size_t i = 0; i < tp.size(); ++i) {
            cum_tp += static_cast<std::size_t>(tp[i]);
            recall[i] = static_cast<double>(cum_tp) / static_cast<double>(gt_count);
            precision[i] = static_cast<double>(cum_tp) / static_cast<double>(i + 1);
        }
        // precision envelope, exact area
        for (std::size_t i = precision.size(); i-- > 1;)
            precision[i - 1] = std::max(precision[i - 1], precision[i]);
        double ap = 0.0, prev_r = 0.0;
        for (std::size_t i = 0; i < recall.size(); ++i) {
            ap += (recall[i] - prev_r) * precision[i];
            prev_r = recall[i];
        }
        ap_sum += ap;
    }
    return ap_sum / static_cast<double>(classes.size());
}

} // namespace vfsa
