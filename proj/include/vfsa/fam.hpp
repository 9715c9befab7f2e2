#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vfsa/matrix.hpp"
#include "vfsa/rng.hpp"

namespace vfsa {

enum class SimilarityMode { cosine, qk, affinity };

struct FamConfig {
    std::size_t dim = 256;
    std::size_t heads = 4;
    std::size_t classes = 30;
    SimilarityMode mode = SimilarityMode::affinity;
    float tau = 0.75f;

    void validate() const {
        if (dim == 0 || heads == 0 || dim % heads != 0)
            throw std::invalid_argument("FamConfig: dim must be divisible by heads");
        if (tau < 0.0f || tau > 1.0f) throw std::invalid_argument("FamConfig: tau must be in [0,1]");
        if (classes == 0) throw std::invalid_argument("FamConfig: classes must be >= 1");
    }
};

/// Query/Key/Value projections for one branch, with bias rows (1 x d).
struct BranchWeights {
    Matrix w_q, w_k, w_v;
    Matrix b_q, b_k, b_v;
};

/// Full parameter bundle: one projection set per branch plus the score heads.
/// head_cls consumes the 2d aggregate concatenated with the d-wide pooled
/// reference features (3d total); head_iou consumes the 2d regression aggregate.
struct FamWeights {
    BranchWeights cls, reg;
    Matrix head_cls, head_cls_bias; // 3d x C, 1 x C
    Matrix head_iou, head_iou_bias; // 2d x 1, 1 x 1
};

/// Stacked selected features from f frames. Row r maps to
/// frame_offsets[r] = (frame_id, candidate index).
struct AggregationBatch {
    Matrix features_cls; // n x d
    Matrix features_reg; // n x d
    std::vector<float> conf_cls;
    std::vector<float> conf_iou;
    std::vector<std::pair<int, std::size_t>> frame_offsets;

    std::size_t size() const { return features_cls.rows; }
};

struct RefinedScores {
    Matrix cls_probs;             // n x C
    std::vector<float> iou_probs; // n
};

struct QkvProjection {
    Matrix q, k, v;
};

inline QkvProjection project_qkv(const Matrix& features, const BranchWeights& w) {
    if (features.cols != w.w_q.rows)
        throw std::invalid_argument("project_qkv: feature dim " + std::to_string(features.cols) +
                                    " != weight dim " + std::to_string(w.w_q.rows));
    return {linear(features, w.w_q, w.b_q), linear(features, w.w_k, w.b_k),
            linear(features, w.w_v, w.b_v)};
}

/// Per-head attention matrices, each n x n row-stochastic.
using AttentionHeads = std::vector<Matrix>;

/// Attention weights for one branch. Logits per head h on d/heads slices:
///   qk:       (Q_h K_h^T)_pq / sqrt(d_h)
///   affinity: (Q_h K_h^T)_pq * S_q / sqrt(d_h)
///   cosine:   cos(q_p, k_q) per head slice
/// followed by a row softmax. conf is required iff mode == affinity.
inline AttentionHeads attention_weights(const Matrix& q, const Matrix& k, std::size_t heads,
                                        SimilarityMode mode,
                                        const std::vector<float>* conf = nullptr) {
    const std::size_t n = q.rows;
    if (n == 0) throw std::invalid_argument("attention_weights: empty input");
    if (!q.same_shape(k)) throw std::invalid_argument("attention_weights: Q/K shape mismatch");
    if (heads == 0 || q.cols % heads != 0)
        throw std::invalid_argument("attention_weights: dim not divisible by heads");
    if (mode == SimilarityMode::affinity) {
        if (!conf || conf->size() != n)
            throw std::invalid_argument("attention_weights: affinity mode needs n confidences");
    }
    const std::size_t dh = q.cols / heads;
    const float inv_sqrt_dh = 1.0f / std::sqrt(static_cast<float>(dh));

    AttentionHeads out;
    out.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        // head slices, K laid out transposed so logits reduce over contiguous rows
        Matrix qh(n, dh), kht(dh, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dh; ++j) {
                qh.at(i, j) = q.at(i, off + j);
                kht.at(j, i) = k.at(i, off + j);
            }
        Matrix logits = matmul(qh, kht);
        if (mode == SimilarityMode::cosine) {
            std::vector<float> qn(n), kn(n);
            for (std::size_t i = 0; i < n; ++i) {
                float sq = 0.0f, sk = 0.0f;
                for (std::size_t j = 0; j < dh; ++j) {
                    sq += qh.at(i, j) * qh.at(i, j);
                    sk += kht.at(j, i) * kht.at(j, i);
                }
                qn[i] = std::sqrt(sq);
                kn[i] = std::sqrt(sk);
            }
            for (std::size_t p = 0; p < n; ++p)
                for (std::size_t qi = 0; qi < n; ++qi) {
                    const float denom = qn[p] * kn[qi];
                    logits.at(p, qi) = denom > 0.0f ? logits.at(p, qi) / denom : 0.0f;
                }
        } else if (mode == SimilarityMode::affinity) {
            for (std::size_t p = 0; p < n; ++p)
                for (std::size_t qi = 0; qi < n; ++qi)
                    logits.at(p, qi) = logits.at(p, qi) * (*conf)[qi] * inv_sqrt_dh;
        } else {
            for (float& v : logits.data) v *= inv_sqrt_dh;
        }
        out.push_back(softmax_rows(logits));
    }
    return out;
}

/// Single-head convenience wrapper.
inline Matrix attention_weights_single(const Matrix& q, const Matrix& k, SimilarityMode mode,
                                       const std::vector<float>* conf = nullptr) {
    return attention_weights(q, k, 1, mode, conf)[0];
}

/// concat((A_c + A_r) V / 2, V) — single-head form.
inline Matrix aggregate(const Matrix& a_c, const Matrix& a_r, const Matrix& v) {
    const std::size_t n = v.rows;
    if (a_c.rows != n || a_c.cols != n || !a_c.same_shape(a_r))
        throw std::invalid_argument("aggregate: attention shape mismatch");
    Matrix mix(n, n);
    for (std::size_t i = 0; i < n * n; ++i) mix.data[i] = (a_c.data[i] + a_r.data[i]) * 0.5f;
    return hconcat(matmul(mix, v), v);
}

/// Multi-head form: each head mixes its own d/heads slice of V; the mixed
/// slices are concatenated back to width d before the concat with V.
inline Matrix aggregate_heads(const AttentionHeads& a_c, const AttentionHeads& a_r,
                              const Matrix& v) {
    if (a_c.size() != a_r.size() || a_c.empty())
        throw std::invalid_argument("aggregate_heads: head count mismatch");
    const std::size_t heads = a_c.size();
    if (v.cols % heads != 0) throw std::invalid_argument("aggregate_heads: dim not divisible");
    if (heads == 1) return aggregate(a_c[0], a_r[0], v);
    const std::size_t n = v.rows, dh = v.cols / heads;
    Matrix left(n, v.cols);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        Matrix vh(n, dh);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dh; ++j) vh.at(i, j) = v.at(i, off + j);
        Matrix mixed = aggregate(a_c[h], a_r[h], vh); // n x 2dh, left half wanted
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dh; ++j) left.at(i, off + j) = mixed.at(i, j);
    }
    return hconcat(left, v);
}

/// Average pooling over reference features. Rows are layer-normed then
/// unit-normed so self-similarity is exactly 1; each key row is replaced by the
/// mean of all rows whose similarity reaches tau. Self always participates.
inline Matrix reference_average_pool(const Matrix& v_c, float tau) {
    if (tau < 0.0f || tau > 1.0f)
        throw std::invalid_argument("reference_average_pool: tau must be in [0,1]");
    std::size_t degenerate = 0;
    Matrix normed = layer_norm_rows(v_c, 1e-5f, &degenerate);
    // degenerate rows are all-zero; substitute a unit vector so unit_norm holds
    for (std::size_t i = 0; i < normed.rows; ++i) {
        bool zero = true;
        for (std::size_t j = 0; j < normed.cols; ++j)
            if (normed.at(i, j) != 0.0f) { zero = false; break; }
        if (zero) normed.at(i, 0) = 1.0f;
    }
    normed = unit_norm_rows(normed);

    const std::size_t n = normed.rows, d = normed.cols;
    Matrix pooled(n, d);
    for (std::size_t p = 0; p < n; ++p) {
        std::size_t count = 0;
        for (std::size_t q = 0; q < n; ++q) {
            float sim;
            if (q == p) {
                sim = 1.0f;
            } else {
                sim = 0.0f;
                for (std::size_t j = 0; j < d; ++j) sim += normed.at(p, j) * normed.at(q, j);
                sim = std::min(sim, 1.0f);
            }
            if (sim >= tau) {
                for (std::size_t j = 0; j < d; ++j) pooled.at(p, j) += normed.at(q, j);
                ++count;
            }
        }
        if (count > 1)
            for (std::size_t j = 0; j < d; ++j) pooled.at(p, j) /= static_cast<float>(count);
    }
    return pooled;
}

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

/// End-to-end FAM forward pass over one aggregation batch.
inline RefinedScores fam_forward(const AggregationBatch& batch, const FamWeights& weights,
                                 const FamConfig& cfg) {
    cfg.validate();
    const std::size_t n = batch.size();
    if (n == 0) throw std::invalid_argument("fam_forward: empty batch");
    if (batch.features_cls.cols != cfg.dim || batch.features_reg.cols != cfg.dim)
        throw std::invalid_argument("fam_forward: feature dim mismatch");
    if (batch.conf_cls.size() != n || batch.conf_iou.size() != n)
        throw std::invalid_argument("fam_forward: confidence vector size mismatch");
    if (weights.head_cls.rows != 3 * cfg.dim || weights.head_cls.cols != cfg.classes)
        throw std::invalid_argument("fam_forward: head_cls shape mismatch");
    if (weights.head_iou.rows != 2 * cfg.dim || weights.head_iou.cols != 1)
        throw std::invalid_argument("fam_forward: head_iou shape mismatch");

    QkvProjection cls = project_qkv(batch.features_cls, weights.cls);
    QkvProjection reg = project_qkv(batch.features_reg, weights.reg);

    AttentionHeads a_c = attention_weights(cls.q, cls.k, cfg.heads, cfg.mode, &batch.conf_cls);
    AttentionHeads a_r = attention_weights(reg.q, reg.k, cfg.heads, cfg.mode, &batch.conf_iou);

    Matrix agg_cls = aggregate_heads(a_c, a_r, cls.v); // n x 2d
    Matrix agg_reg = aggregate_heads(a_c, a_r, reg.v); // n x 2d

    Matrix pooled = reference_average_pool(cls.v, cfg.tau); // n x d
    Matrix cls_in = hconcat(agg_cls, pooled);               // n x 3d

    Matrix cls_logits = linear(cls_in, weights.head_cls, weights.head_cls_bias);
    Matrix iou_logits = linear(agg_reg, weights.head_iou, weights.head_iou_bias);

    RefinedScores out;
    out.cls_probs = Matrix(n, cfg.classes);
    for (std::size_t i = 0; i < cls_logits.data.size(); ++i)
        out.cls_probs.data[i] = sigmoid(cls_logits.data[i]);
    out.iou_probs.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.iou_probs[i] = sigmoid(iou_logits.at(i, 0));
    return out;
}

/// Seeded Gaussian(0, 0.02) initialization of all parameters; bit-for-bit
/// reproducible per seed.
inline FamWeights init_weights(std::uint64_t seed, const FamConfig& cfg) {
    cfg.validate();
    Rng rng(seed);
    auto gauss = [&](std::size_t r, std::size_t c) {
        Matrix m(r, c);
        for (float& v : m.data) v = rng.normal(0.0f, 0.02f);
        return m;
    };
    const std::size_t d = cfg.dim;
    FamWeights w;
    for (BranchWeights* b : {&w.cls, &w.reg}) {
        b->w_q = gauss(d, d);
        b->w_k = gauss(d, d);
        b->w_v = gauss(d, d);
        b->b_q = gauss(1, d);
        b->b_k = gauss(1, d);
        b->b_v = gauss(1, d);
    }
    w.head_cls = gauss(3 * d, cfg.classes);
    w.head_cls_bias = gauss(1, cfg.classes);
    w.head_iou = gauss(2 * d, 1);
    w.head_iou_bias = gauss(1, 1);
    return w;
}

} // namespace vfsa
