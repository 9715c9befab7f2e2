#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vfsa/pipeline.hpp"
#include "vfsa/synthgen.hpp"

namespace vfsa {

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, sep)) out.push_back(item);
    return out;
}

template <class T>
T parse_num(const std::string& v, const std::string& key) {
    std::istringstream is(v);
    T out;
    if (!(is >> out)) throw std::runtime_error("config: bad value for '" + key + "': " + v);
    return out;
}

} // namespace detail

/// Apply key=value pairs onto a PipelineConfig. Unknown keys are rejected.
inline void apply_config(PipelineConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, val] : kv) {
        if (key == "pipeline") {
            if (val == "topk_nms") cfg.pipeline = SelectionPipeline::topk_nms;
            else if (val == "thresh") cfg.pipeline = SelectionPipeline::thresh;
            else throw std::runtime_error("config: pipeline must be topk_nms or thresh");
        } else if (key == "topk") {
            cfg.topk = detail::parse_num<std::size_t>(val, key);
        } else if (key == "topn") {
            cfg.topn = detail::parse_num<std::size_t>(val, key);
        } else if (key == "select_nms_iou") {
            cfg.select_nms_iou = detail::parse_num<float>(val, key);
        } else if (key == "conf_thresh") {
            cfg.conf_thresh = detail::parse_num<float>(val, key);
        } else if (key == "thresh_cap") {
            cfg.thresh_cap = detail::parse_num<std::size_t>(val, key);
        } else if (key == "dim") {
            cfg.fam.dim = detail::parse_num<std::size_t>(val, key);
        } else if (key == "heads") {
            cfg.fam.heads = detail::parse_num<std::size_t>(val, key);
        } else if (key == "classes") {
            cfg.fam.classes = detail::parse_num<std::size_t>(val, key);
        } else if (key == "mode") {
            if (val == "cosine") cfg.fam.mode = SimilarityMode::cosine;
            else if (val == "qk") cfg.fam.mode = SimilarityMode::qk;
            else if (val == "affinity") cfg.fam.mode = SimilarityMode::affinity;
            else throw std::runtime_error("config: mode must be cosine, qk or affinity");
        } else if (key == "tau") {
            cfg.fam.tau = detail::parse_num<float>(val, key);
        } else if (key == "sampling") {
            if (val == "global") cfg.sampler.strategy = SamplingStrategy::global;
            else if (val == "local") cfg.sampler.strategy = SamplingStrategy::local;
            else throw std::runtime_error("config: sampling must be global or local");
        } else if (key == "ref_frames") {
            cfg.sampler.count = detail::parse_num<std::size_t>(val, key);
        } else if (key == "seed") {
            cfg.sampler.seed = detail::parse_num<std::uint64_t>(val, key);
        } else if (key == "final_nms_iou") {
            cfg.final_nms_iou = detail::parse_num<float>(val, key);
        } else if (key == "final_conf") {
            cfg.final_conf = detail::parse_num<float>(val, key);
        } else if (key == "deterministic") {
            cfg.deterministic = val == "1" || val == "true" || val == "on";
        } else {
            throw std::runtime_error("config: unknown key '" + key + "'");
        }
    }
}

/// Scene description from key=value pairs. `object` entries use
/// class:x1:y1:x2:y2:vx:vy and may repeat via object, object1, object2, ...
inline SceneSpec scene_from_config(const std::map<std::string, std::string>& kv) {
    SceneSpec spec;
    for (const auto& [key, val] : kv) {
        if (key == "frames") spec.frames = detail::parse_num<int>(val, key);
        else if (key == "width") spec.width = detail::parse_num<int>(val, key);
        else if (key == "height") spec.height = detail::parse_num<int>(val, key);
        else if (key == "noise_sigma") spec.noise_sigma = detail::parse_num<float>(val, key);
        else if (key == "seed") spec.seed = detail::parse_num<std::uint64_t>(val, key);
        else if (key == "classes") spec.num_classes = detail::parse_num<int>(val, key);
        else if (key == "feat_dim") spec.feat_dim = detail::parse_num<int>(val, key);
        else if (key == "strides") {
            spec.strides.clear();
            for (const std::string& s : detail::split(val, ','))
                spec.strides.push_back(detail::parse_num<int>(s, key));
        } else if (key == "degrade_frames") {
            spec.degrade_frames.clear();
            for (const std::string& s : detail::split(val, ','))
                spec.degrade_frames.insert(detail::parse_num<int>(s, key));
        } else if (key.rfind("object", 0) == 0) {
            const std::vector<std::string> parts = detail::split(val, ':');
            if (parts.size() != 7)
                throw std::runtime_error("config: object needs class:x1:y1:x2:y2:vx:vy");
            Track t;
            t.class_id = detail::parse_num<int>(parts[0], key);
            t.start = {detail::parse_num<float>(parts[1], key),
                       detail::parse_num<float>(parts[2], key),
                       detail::parse_num<float>(parts[3], key),
                       detail::parse_num<float>(parts[4], key)};
            t.vx = detail::parse_num<float>(parts[5], key);
            t.vy = detail::parse_num<float>(parts[6], key);
            spec.objects.push_back(t);
        } else {
            throw std::runtime_error("config: unknown scene key '" + key + "'");
        }
    }
    return spec;
}

} // namespace vfsa
