// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Plain binary (no test framework) so the output is a stable,
// machine-readable checklist.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "vfsa/evalbench.hpp"
#include "vfsa/fam.hpp"
#include "vfsa/fsm.hpp"
#include "vfsa/geometry.hpp"
#include "vfsa/io.hpp"
#include "vfsa/pipeline.hpp"
#include "vfsa/sampling.hpp"
#include "vfsa/synthgen.hpp"

using vfsa::Matrix;
using vfsa::SimilarityMode;

namespace {

int g_failures = 0;

void check(int criterion, bool ok, const std::string& detail) {
    std::printf("criterion %2d: %s  (%s)\n", criterion, ok ? "PASS" : "FAIL", detail.c_str());
    if (!ok) ++g_failures;
}

void run(int criterion, const std::function<std::pair<bool, std::string>()>& fn) {
    try {
        auto [ok, detail] = fn();
        check(criterion, ok, detail);
    } catch (const std::exception& e) {
        check(criterion, false, std::string("exception: ") + e.what());
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix random_matrix(std::size_t r, std::size_t c, vfsa::Rng& rng) {
    Matrix m(r, c);
    for (float& v : m.data) v = rng.normal();
    return m;
}

Matrix identity(std::size_t d) {
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m.at(i, i) = 1.0f;
    return m;
}

vfsa::BranchWeights identity_branch(std::size_t d) {
    return {identity(d), identity(d), identity(d), Matrix(1, d), Matrix(1, d), Matrix(1, d)};
}

/// Identity projections; head_cls reads mixed-feature dim c for class c.
vfsa::FamWeights identity_weights(std::size_t d, std::size_t classes, float gain) {
    vfsa::FamWeights w;
    w.cls = identity_branch(d);
    w.reg = identity_branch(d);
    w.head_cls = Matrix(3 * d, classes);
    for (std::size_t c = 0; c < classes; ++c) w.head_cls.at(c, c) = gain;
    w.head_cls_bias = Matrix(1, classes);
    w.head_iou = Matrix(2 * d, 1);
    w.head_iou_bias = Matrix(1, 1);
    return w;
}

vfsa::SceneSpec acceptance_scene(float sigma, std::uint64_t seed) {
    vfsa::SceneSpec spec;
    spec.frames = 4;
    spec.width = 256;
    spec.height = 256;
    spec.strides = {8, 16, 32};
    spec.noise_sigma = sigma;
    spec.seed = seed;
    spec.num_classes = 3;
    spec.feat_dim = 8;
    spec.objects.push_back(vfsa::Track{1, {40, 40, 100, 100}, 2.0f, 0.0f});
    spec.objects.push_back(vfsa::Track{2, {150, 160, 220, 230}, 0.0f, 1.0f});
    return spec;
}

std::vector<vfsa::GtFrame> to_gt_frames(const vfsa::GroundTruth& gt) {
    std::vector<vfsa::GtFrame> out;
    for (std::size_t f = 0; f < gt.frames.size(); ++f) {
        vfsa::GtFrame g;
        g.frame_id = static_cast<int>(f);
        for (const auto& o : gt.frames[f]) g.boxes.push_back(o.box);
        out.push_back(std::move(g));
    }
    return out;
}

std::string serialize(const std::vector<vfsa::DetectionFrame>& dets) {
    std::string out;
    for (const auto& f : dets) out += vfsa::io::detections_to_json(f) + "\n";
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// ------------------------------------------------------------ criteria

std::pair<bool, std::string> criterion1_nms_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    vfsa::Rng rng(101);
    for (int frame = 0; frame < 1000; ++frame) {
        const std::size_t n = rng.uniform_index(51);
        std::vector<vfsa::ScoredBox> boxes(n);
        for (auto& b : boxes) {
            const float x = static_cast<float>(rng.uniform()) * 90.0f;
            const float y = static_cast<float>(rng.uniform()) * 90.0f;
            b.box = {x, y, x + 1.0f + static_cast<float>(rng.uniform()) * 30.0f,
                     y + 1.0f + static_cast<float>(rng.uniform()) * 30.0f};
            b.confidence = static_cast<float>(rng.uniform());
            b.class_id = static_cast<int>(rng.uniform_index(4));
        }
        for (float thresh : {0.3f, 0.5f, 0.75f}) {
            for (bool per_class : {false, true}) {
                auto fast = vfsa::nms(boxes, thresh, per_class);
                auto slow = vfsa::nms_oracle(boxes, thresh, per_class);
                if (fast.size() != slow.size()) return {false, "kept-set size mismatch"};
                for (std::size_t i = 0; i < fast.size(); ++i) {
                    if (fast[i].box.x1 != slow[i].box.x1 || fast[i].box.y1 != slow[i].box.y1 ||
                        fast[i].box.x2 != slow[i].box.x2 || fast[i].box.y2 != slow[i].box.y2 ||
                        fast[i].confidence != slow[i].confidence ||
                        fast[i].class_id != slow[i].class_id)
                        return {false, "kept-set content mismatch"};
                }
            }
        }
    }
    const double dt = seconds_since(t0);
    if (dt >= 10.0) return {false, "too slow: " + std::to_string(dt) + " s"};
    char buf[96];
    std::snprintf(buf, sizeof buf, "1000 frames x 3 thresholds exact, %.2f s", dt);
    return {true, buf};
}

std::pair<bool, std::string> criterion2_attention_contracts() {
    vfsa::Rng rng(202);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(64);
        const std::size_t d = (trial % 2 == 0) ? 8 : 256;
        const std::size_t heads = std::vector<std::size_t>{1, 2, 4}[rng.uniform_index(3)];
        Matrix q = random_matrix(n, d, rng);
        Matrix k = random_matrix(n, d, rng);
        std::vector<float> conf(n);
        for (float& c : conf) c = static_cast<float>(rng.uniform());
        for (auto mode : {SimilarityMode::cosine, SimilarityMode::qk, SimilarityMode::affinity}) {
            for (const Matrix& a : vfsa::attention_weights(q, k, heads, mode, &conf)) {
                for (std::size_t p = 0; p < n; ++p) {
                    double sum = 0;
                    for (std::size_t c = 0; c < n; ++c) sum += a.at(p, c);
                    if (std::abs(sum - 1.0) > 1e-6)
                        return {false, "row sum off by " + std::to_string(sum - 1.0)};
                }
            }
        }
        std::vector<float> ones(n, 1.0f);
        auto aff = vfsa::attention_weights(q, k, heads, SimilarityMode::affinity, &ones);
        auto qk = vfsa::attention_weights(q, k, heads, SimilarityMode::qk);
        for (std::size_t h = 0; h < heads; ++h)
            if (aff[h].data != qk[h].data) return {false, "affinity(S=1) != qk bitwise"};
    }
    return {true, "200 instances, all modes: rows sum to 1; affinity(S=1) == qk bitwise"};
}

std::pair<bool, std::string> criterion3_aggregate_contract() {
    vfsa::Rng rng(303);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(16);
        const std::size_t d = 1 + rng.uniform_index(16);
        Matrix v = random_matrix(n, d, rng);
        Matrix ac = vfsa::softmax_rows(random_matrix(n, n, rng));
        Matrix ar = vfsa::softmax_rows(random_matrix(n, n, rng));
        Matrix out = vfsa::aggregate(ac, ar, v);
        if (out.cols != 2 * d) return {false, "output width != 2d"};
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (out.at(i, d + j) != v.at(i, j)) return {false, "right half != V"};
        Matrix id_out = vfsa::aggregate(identity(n), identity(n), v);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (id_out.at(i, j) != v.at(i, j) || id_out.at(i, d + j) != v.at(i, j))
                    return {false, "identity attention != concat(V,V)"};
    }
    return {true, "right half == V, width 2d, identity case == concat(V,V), all exact"};
}

std::pair<bool, std::string> criterion4_average_pool() {
    vfsa::Rng rng(404);
    // tau = 1: exactly the normalized key rows
    for (int trial = 0; trial < 20; ++trial) {
        Matrix v = random_matrix(2 + rng.uniform_index(10), 8, rng);
        Matrix pooled = vfsa::reference_average_pool(v, 1.0f);
        Matrix normed = vfsa::unit_norm_rows(vfsa::layer_norm_rows(v));
        if (pooled.data != normed.data) return {false, "tau=1 != normalized rows"};
    }
    // pooled output equals the mean of the similarity-gated member set, and
    // the member-set size never grows with tau
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(10), d = 8;
        Matrix v = random_matrix(n, d, rng);
        Matrix normed = vfsa::unit_norm_rows(vfsa::layer_norm_rows(v));
        std::vector<std::size_t> prev(n, n + 1);
        for (float tau : {0.0f, 0.25f, 0.5f, 0.75f, 1.0f}) {
            Matrix pooled = vfsa::reference_average_pool(v, tau);
            for (std::size_t p = 0; p < n; ++p) {
                std::vector<float> mean(d, 0.0f);
                std::size_t count = 0;
                for (std::size_t q = 0; q < n; ++q) {
                    float sim = 1.0f;
                    if (q != p) {
                        sim = 0.0f;
                        for (std::size_t j = 0; j < d; ++j) sim += normed.at(p, j) * normed.at(q, j);
                        sim = std::min(sim, 1.0f);
                    }
                    if (sim >= tau) {
                        for (std::size_t j = 0; j < d; ++j) mean[j] += normed.at(q, j);
                        ++count;
                    }
                }
                if (tau == 0.0f) {
                    // every nonnegative-similarity reference must be pooled;
                    // the count above includes exactly those
                    if (count == 0) return {false, "tau=0 pooled nothing"};
                }
                if (count > prev[p]) return {false, "member-set size grew with tau"};
                prev[p] = count;
                for (std::size_t j = 0; j < d; ++j) {
                    const float expect = mean[j] / static_cast<float>(count);
                    if (std::abs(pooled.at(p, j) - expect) > 1e-5f)
                        return {false, "pooled row != member-set mean"};
                }
            }
        }
    }
    return {true, "tau=1 exact duplication; tau=0 pools all sims >= 0; set size monotone"};
}

std::pair<bool, std::string> criterion5_homogeneity() {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        vfsa::HomogeneityFixture fx = vfsa::homogeneity_fixture(seed);
        auto p = vfsa::project_qkv(fx.batch.features_cls, identity_branch(8));
        Matrix aff = vfsa::attention_weights_single(p.q, p.k, SimilarityMode::affinity,
                                                    &fx.batch.conf_cls);
        Matrix cos = vfsa::attention_weights_single(p.q, p.k, SimilarityMode::cosine);
        auto argmax_ref = [&](const Matrix& a) {
            std::size_t best = fx.key_row == 0 ? 1 : 0;
            for (std::size_t q = 0; q < a.cols; ++q)
                if (q != fx.key_row && a.at(fx.key_row, q) > a.at(fx.key_row, best)) best = q;
            return best;
        };
        const float aff_conf = fx.batch.conf_cls[argmax_ref(aff)];
        const float cos_conf = fx.batch.conf_cls[argmax_ref(cos)];
        if (aff_conf < cos_conf)
            return {false, "seed " + std::to_string(seed) + ": affinity picked conf " +
                               std::to_string(aff_conf) + " < cosine " + std::to_string(cos_conf)};
    }
    return {true, "20 seeds: affinity argmax reference confidence >= cosine"};
}

std::pair<bool, std::string> criterion6_fsm_recall() {
    // sigma = 0: both pipelines reach recall 1.0
    {
        auto [frames, gt] = vfsa::generate(acceptance_scene(0.0f, 7));
        auto gtf = to_gt_frames(gt);
        std::vector<vfsa::SelectedSet> topk, thresh;
        for (const auto& f : frames) {
            topk.push_back(vfsa::select_topk_nms(f, 750, 30, 0.75f));
            thresh.push_back(vfsa::select_thresh(f, 0.001f));
        }
        if (vfsa::class_agnostic_recall(frames, topk, gtf, 0.5f) != 1.0)
            return {false, "topk_nms recall != 1.0 at sigma=0"};
        if (vfsa::class_agnostic_recall(frames, thresh, gtf, 0.5f) != 1.0)
            return {false, "thresh recall != 1.0 at sigma=0"};
    }
    // recall monotone non-increasing in sigma
    double prev = 1.1;
    for (float sigma : {0.0f, 0.1f, 0.3f, 0.6f}) {
        auto [frames, gt] = vfsa::generate(acceptance_scene(sigma, 7));
        std::vector<vfsa::SelectedSet> sels;
        for (const auto& f : frames) sels.push_back(vfsa::select_thresh(f, 0.001f));
        const double recall = vfsa::class_agnostic_recall(frames, sels, to_gt_frames(gt), 0.5f);
        if (recall > prev)
            return {false, "recall rose to " + std::to_string(recall) + " at sigma " +
                               std::to_string(sigma)};
        prev = recall;
    }
    return {true, "recall 1.0 at sigma=0 (both pipelines); non-increasing over sigma grid"};
}

std::pair<bool, std::string> criterion7_grid_density() {
    vfsa::SceneSpec spec;
    spec.frames = 1;
    spec.objects.push_back(vfsa::Track{0, {100, 100, 200, 200}, 0, 0});
    auto [frames, gt] = vfsa::generate(spec);
    const std::size_t n = frames[0].candidates.size();
    if (n != 8400) return {false, std::to_string(n) + " candidates, expected 8400"};
    return {true, "640x640, strides {8,16,32}: 8400 candidates"};
}

std::pair<bool, std::string> criterion8_cost_scaling() {
    const auto t0 = std::chrono::steady_clock::now();
    vfsa::BenchReport report = vfsa::bench_attention({512, 1024, 2048, 4096, 8192}, 256, 3, 1);
    for (const auto& p : report.points)
        if (p.attn_entries != p.n * p.n) return {false, "attention-entry model != n^2"};
    if (report.loglog_slope < 1.7 || report.loglog_slope > 2.3)
        return {false, "log-log slope " + std::to_string(report.loglog_slope) + " outside [1.7,2.3]"};

    const double flop_ratio =
        vfsa::attention_flop_model(8400, 256) / vfsa::attention_flop_model(100, 256);
    if (flop_ratio < 4900.0) return {false, "analytic flop ratio " + std::to_string(flop_ratio)};

    // median of 3 for the measured reduction demo
    auto median3 = [](std::size_t n) {
        std::vector<double> t;
        for (std::uint64_t r = 0; r < 3; ++r)
            t.push_back(vfsa::measure_attention_time(n, 256, vfsa::mix_seed(2, r)));
        std::sort(t.begin(), t.end());
        return t[1];
    };
    const double wall_ratio = median3(8400) / median3(100);
    if (wall_ratio < 50.0)
        return {false, "measured wall-time ratio " + std::to_string(wall_ratio) + " < 50"};

    const double dt = seconds_since(t0);
    if (dt >= 120.0) return {false, "too slow: " + std::to_string(dt) + " s"};
    char buf[128];
    std::snprintf(buf, sizeof buf, "slope %.2f, flop ratio %.0f, wall ratio %.0fx, %.1f s",
                  report.loglog_slope, flop_ratio, wall_ratio, dt);
    return {true, buf};
}

std::pair<bool, std::string> criterion9_reference_gain() {
    vfsa::FamConfig cfg{8, 1, 2, SimilarityMode::affinity, 0.75f};
    vfsa::FamWeights w = identity_weights(8, 2, 4.0f);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        vfsa::HomogeneityFixture fx = vfsa::homogeneity_fixture(seed);
        vfsa::RefinedScores with_refs = vfsa::fam_forward(fx.batch, w, cfg);

        vfsa::AggregationBatch solo;
        solo.features_cls = Matrix(1, 8);
        solo.features_reg = Matrix(1, 8);
        for (std::size_t j = 0; j < 8; ++j) {
            solo.features_cls.at(0, j) = fx.batch.features_cls.at(fx.key_row, j);
            solo.features_reg.at(0, j) = fx.batch.features_reg.at(fx.key_row, j);
        }
        solo.conf_cls = {fx.batch.conf_cls[fx.key_row]};
        solo.conf_iou = {fx.batch.conf_iou[fx.key_row]};
        solo.frame_offsets = {{0, 0}};
        vfsa::RefinedScores alone = vfsa::fam_forward(solo, w, cfg);

        const std::size_t cc = static_cast<std::size_t>(fx.correct_class);
        if (with_refs.cls_probs.at(fx.key_row, cc) <= alone.cls_probs.at(0, cc))
            return {false, "seed " + std::to_string(seed) + ": references did not raise " +
                               std::to_string(with_refs.cls_probs.at(fx.key_row, cc)) + " vs " +
                               std::to_string(alone.cls_probs.at(0, cc))};
    }
    return {true, "20 seeds: references raise the degraded key's correct-class probability"};
}

std::pair<bool, std::string> criterion10_determinism_io() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "vfsa_acceptance";
    fs::create_directories(dir);

    auto [frames, gt] = vfsa::generate(acceptance_scene(0.3f, 11));
    vfsa::PipelineConfig cfg;
    cfg.fam.dim = 8;
    cfg.fam.heads = 1;
    cfg.fam.classes = 3;
    cfg.sampler.count = 4;
    cfg.deterministic = true;
    vfsa::FamWeights w = vfsa::init_weights(5, cfg.fam);

    setenv("VFSA_THREADS", "0", 1);
    const std::string base = serialize(vfsa::run_refine(frames, w, cfg));
    const std::string again = serialize(vfsa::run_refine(frames, w, cfg));
    std::string threaded2, threaded5;
    setenv("VFSA_THREADS", "2", 1);
    threaded2 = serialize(vfsa::run_refine(frames, w, cfg));
    setenv("VFSA_THREADS", "5", 1);
    threaded5 = serialize(vfsa::run_refine(frames, w, cfg));
    unsetenv("VFSA_THREADS");
    if (base != again) return {false, "repeat run differs"};
    if (base != threaded2 || base != threaded5) return {false, "thread count changes output"};

    const std::string wp1 = (dir / "w1.bin").string(), wp2 = (dir / "w2.bin").string();
    vfsa::io::save_weights(wp1, w);
    vfsa::io::save_weights(wp2, vfsa::io::load_weights(wp1));
    if (slurp(wp1) != slurp(wp2)) return {false, "weights round trip not byte-identical"};

    const std::string fp1 = (dir / "f1.jsonl").string(), fp2 = (dir / "f2.jsonl").string();
    vfsa::io::save_frames(fp1, frames);
    vfsa::io::save_frames(fp2, vfsa::io::load_frames(fp1));
    if (slurp(fp1) != slurp(fp2)) return {false, "frames round trip not byte-identical"};

    fs::remove_all(dir);
    return {true, "refine byte-identical across runs/threads; weights+frames round trip exact"};
}

} // namespace

int main() {
    run(1, criterion1_nms_oracle);
    run(2, criterion2_attention_contracts);
    run(3, criterion3_aggregate_contract);
    run(4, criterion4_average_pool);
    run(5, criterion5_homogeneity);
    run(6, criterion6_fsm_recall);
    run(7, criterion7_grid_density);
    run(8, criterion8_cost_scaling);
    run(9, criterion9_reference_gain);
    run(10, criterion10_determinism_io);
    if (g_failures == 0) {
        std::printf("all 10 criteria passed\n");
        return 0;
    }
    std::printf("%d criteria FAILED\n", g_failures);
    return 1;
}
