// vfsa command-line front end: synthetic scene generation, feature selection,
// attention-based refinement, evaluation and the attention cost benchmark.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vfsa/config.hpp"
#include "vfsa/evalbench.hpp"
#include "vfsa/io.hpp"
#include "vfsa/pipeline.hpp"
#include "vfsa/synthgen.hpp"

namespace {

constexpr int kExitInputError = 2;
constexpr int kExitConfigError = 3;

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool deterministic = true;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key=value config file");
    cmd->add_option("--seed", opts.seed, "random seed")->each([&](const std::string&) {
        opts.seed_set = true;
    });
    cmd->add_flag("--deterministic,!--no-deterministic", opts.deterministic,
                  "serial deterministic kernels (default on)");
}

vfsa::PipelineConfig make_pipeline_config(const CommonOpts& opts) {
    vfsa::PipelineConfig cfg;
    if (!opts.config_path.empty()) vfsa::apply_config(cfg, vfsa::io::load_config(opts.config_path));
    if (opts.seed_set) cfg.sampler.seed = opts.seed;
    cfg.deterministic = opts.deterministic;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"video detection feature selection + aggregation pipeline"};
    app.require_subcommand(1);

    // ---- synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic video (frames + ground truth)");
    CommonOpts synth_opts;
    std::string scene_path, frames_out, gt_out;
    synth->add_option("--scene", scene_path, "scene spec file (key=value)")->required();
    synth->add_option("--frames", frames_out, "output frame predictions (JSONL)")->required();
    synth->add_option("--gt", gt_out, "output ground truth (JSONL)")->required();
    add_common(synth, synth_opts);

    // ---- select
    auto* select = app.add_subcommand("select", "run feature selection and report statistics");
    CommonOpts select_opts;
    std::string sel_frames, sel_gt;
    select->add_option("--frames", sel_frames, "input frame predictions (JSONL)")->required();
    select->add_option("--gt", sel_gt, "ground truth (JSONL) for recall reporting");
    add_common(select, select_opts);

    // ---- refine
    auto* refine = app.add_subcommand("refine", "aggregate features across frames and rescore");
    CommonOpts refine_opts;
    std::string ref_frames, ref_weights, ref_out;
    refine->add_option("--frames", ref_frames, "input frame predictions (JSONL)")->required();
    refine->add_option("--weights", ref_weights, "FAM weights file")->required();
    refine->add_option("--out", ref_out, "output detections (JSONL)")->required();
    add_common(refine, refine_opts);

    // ---- eval
    auto* eval = app.add_subcommand("eval", "score detections against ground truth");
    CommonOpts eval_opts;
    std::string ev_dets, ev_gt;
    eval->add_option("--dets", ev_dets, "detections (JSONL)")->required();
    eval->add_option("--gt", ev_gt, "ground truth (JSONL)")->required();
    add_common(eval, eval_opts);

    // ---- bench
    auto* bench = app.add_subcommand("bench", "attention cost scaling benchmark");
    CommonOpts bench_opts;
    std::vector<std::size_t> bench_sizes{512, 1024, 2048, 4096, 8192};
    std::size_t bench_dim = 256, bench_repeats = 3;
    std::size_t bench_min_fit = 512;
    std::string bench_json;
    bench->add_option("--sizes", bench_sizes, "candidate counts, ascending");
    bench->add_option("--dim", bench_dim, "feature dimension");
    bench->add_option("--repeats", bench_repeats, "timing repeats per size (median)");
    bench->add_option("--min-fit-n", bench_min_fit,
                      "smallest size included in the slope fit");
    bench->add_option("--json", bench_json, "write the report as JSON");
    add_common(bench, bench_opts);

    // ---- init-weights
    auto* initw = app.add_subcommand("init-weights", "write randomly initialized FAM weights");
    CommonOpts initw_opts;
    std::string iw_out;
    initw->add_option("--out", iw_out, "output weights file")->required();
    add_common(initw, initw_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            vfsa::SceneSpec spec;
            try {
                spec = vfsa::scene_from_config(vfsa::io::load_config(scene_path));
                if (synth_opts.seed_set) spec.seed = synth_opts.seed;
                spec.validate();
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return kExitConfigError;
            }
            auto [frames, gt] = vfsa::generate(spec);
            vfsa::io::save_frames(frames_out, frames);
            vfsa::io::save_ground_truth(gt_out, gt);
            std::cout << "wrote " << frames.size() << " frames ("
                      << (frames.empty() ? 0 : frames[0].candidates.size())
                      << " candidates each) to " << frames_out << '\n';
            return 0;
        }

        if (*select) {
            vfsa::PipelineConfig cfg;
            try {
                cfg = make_pipeline_config(select_opts);
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return kExitConfigError;
            }
            auto frames = vfsa::io::load_frames(sel_frames);
            std::vector<vfsa::SelectedSet> sels;
            for (const auto& f : frames) sels.push_back(vfsa::run_selection(f, cfg));
            std::cout << "mean_selected_per_frame=" << vfsa::mean_selected_per_frame(sels) << '\n';
            if (!sel_gt.empty()) {
                auto gtf = vfsa::io::load_ground_truth(sel_gt);
                std::vector<vfsa::GtFrame> gt;
                for (const auto& g : gtf) gt.push_back({g.frame_id, g.boxes});
                std::cout << "class_agnostic_recall="
                          << vfsa::class_agnostic_recall(frames, sels, gt, 0.5f) << '\n';
            }
            return 0;
        }

        if (*refine) {
            vfsa::PipelineConfig cfg;
            try {
                cfg = make_pipeline_config(refine_opts);
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return kExitConfigError;
            }
            auto frames = vfsa::io::load_frames(ref_frames);
            vfsa::FamWeights weights = vfsa::io::load_weights(ref_weights);
            auto dets = vfsa::run_refine(frames, weights, cfg);
            vfsa::io::save_detections(ref_out, dets);
            std::cout << "wrote " << dets.size() << " frames to " << ref_out << '\n';
            return 0;
        }

        if (*eval) {
            auto dets = vfsa::io::load_detections(ev_dets);
            auto gt = vfsa::io::load_ground_truth(ev_gt);
            const double ap = vfsa::average_precision_50(dets, gt);
            std::cout << "ap50=" << ap << '\n';
            return 0;
        }

        if (*bench) {
            vfsa::BenchReport report =
                vfsa::bench_attention(bench_sizes, bench_dim, bench_repeats, bench_opts.seed,
                                      bench_min_fit);
            std::printf("%10s %14s %16s %18s\n", "n", "time(s)", "attn_entries", "flops");
            for (const auto& p : report.points)
                std::printf("%10zu %14.6f %16zu %18.0f\n", p.n, p.wall_time, p.attn_entries,
                            p.flop_estimate);
            std::printf("loglog_slope=%.3f\n", report.loglog_slope);
            if (!bench_json.empty()) {
                nlohmann::json j;
                j["loglog_slope"] = report.loglog_slope;
                for (const auto& p : report.points)
                    j["points"].push_back({{"n", p.n},
                                           {"wall_time", p.wall_time},
                                           {"attn_entries", p.attn_entries},
                                           {"flop_estimate", p.flop_estimate}});
                std::ofstream os(bench_json);
                os << j.dump(2) << '\n';
            }
            return 0;
        }

        if (*initw) {
            vfsa::PipelineConfig cfg;
            try {
                cfg = make_pipeline_config(initw_opts);
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return kExitConfigError;
            }
            vfsa::FamWeights w = vfsa::init_weights(initw_opts.seed, cfg.fam);
            vfsa::io::save_weights(iw_out, w);
            std::cout << "wrote weights (dim=" << cfg.fam.dim << ", classes=" << cfg.fam.classes
                      << ") to " << iw_out << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    }
    return 0;
}
