#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfsa/evalbench.hpp"
#include "vfsa/fam.hpp"
#include "vfsa/fsm.hpp"
#include "vfsa/synthgen.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace vfsa::io {

// ---------------------------------------------------------------- base64

inline std::string base64_encode(const std::uint8_t* data, std::size_t len) {
    static constexpr char tbl[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
        if (i + 1 < len) v |= static_cast<std::uint32_t>(data[i + 1]) << 8;
        if (i + 2 < len) v |= data[i + 2];
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(i + 1 < len ? tbl[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? tbl[v & 63] : '=');
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& s) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (s.size() % 4 != 0) throw std::invalid_argument("base64: length not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(s.size() / 4 * 3);
    for (std::size_t i = 0; i < s.size(); i += 4) {
        std::uint32_t v = 0;
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = s[i + static_cast<std::size_t>(j)];
            if (c == '=') {
                ++pad;
                v <<= 6;
            } else {
                const int x = val(c);
                if (x < 0 || pad > 0) throw std::invalid_argument("base64: bad character");
                v = (v << 6) | static_cast<std::uint32_t>(x);
            }
        }
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    return out;
}

inline std::string floats_to_base64(const std::vector<float>& v) {
    return base64_encode(reinterpret_cast<const std::uint8_t*>(v.data()), v.size() * 4);
}

inline std::vector<float> base64_to_floats(const std::string& s) {
    std::vector<std::uint8_t> bytes = base64_decode(s);
    if (bytes.size() % 4 != 0) throw std::invalid_argument("base64 float payload: bad length");
    std::vector<float> out(bytes.size() / 4);
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

// ------------------------------------------------- canonical float text

/// Shortest round-trip decimal form, the canonical encoding in all JSONL
/// files so that parse -> serialize is byte-identical.
inline std::string format_float(float v) {
    char buf[48];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc())
        throw std::runtime_error("format_float failed");
    return {buf, p};
}

// ------------------------------------------------------ weights (VFSA)

inline constexpr char kWeightsMagic[4] = {'V', 'F', 'S', 'A'};
inline constexpr std::uint32_t kWeightsVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4)) throw std::runtime_error("weights: truncated");
    return v;
}

inline void put_tensor(std::ostream& os, const std::string& name, const Matrix& m) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, 2);
    put_u32(os, static_cast<std::uint32_t>(m.rows));
    put_u32(os, static_cast<std::uint32_t>(m.cols));
    os.write(reinterpret_cast<const char*>(m.data.data()),
             static_cast<std::streamsize>(m.data.size() * 4));
}

} // namespace detail

inline void save_weight_map(std::ostream& os,
                            const std::vector<std::pair<std::string, const Matrix*>>& tensors) {
    os.write(kWeightsMagic, 4);
    detail::put_u32(os, kWeightsVersion);
    detail::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors) detail::put_tensor(os, name, *m);
}

inline std::map<std::string, Matrix> load_weight_map(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kWeightsMagic, 4) != 0)
        throw std::runtime_error("weights: bad magic");
    const std::uint32_t version = detail::get_u32(is);
    if (version != kWeightsVersion)
        throw std::runtime_error("weights: unsupported version " + std::to_string(version));
    const std::uint32_t count = detail::get_u32(is);
    std::map<std::string, Matrix> out;
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::uint32_t name_len = detail::get_u32(is);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw std::runtime_error("weights: truncated name");
        const std::uint32_t rank = detail::get_u32(is);
        if (rank != 2) throw std::runtime_error("weights: tensor '" + name + "' has rank " +
                                                std::to_string(rank) + ", expected 2");
        const std::uint32_t rows = detail::get_u32(is);
        const std::uint32_t cols = detail::get_u32(is);
        std::vector<float> data(static_cast<std::size_t>(rows) * cols);
        if (!is.read(reinterpret_cast<char*>(data.data()),
                     static_cast<std::streamsize>(data.size() * 4)))
            throw std::runtime_error("weights: truncated payload for '" + name + "'");
        out.emplace(name, Matrix(rows, cols, std::move(data)));
    }
    return out;
}

inline std::vector<std::pair<std::string, const Matrix*>> weight_tensors(const FamWeights& w) {
    return {
        {"cls.w_q", &w.cls.w_q}, {"cls.w_k", &w.cls.w_k}, {"cls.w_v", &w.cls.w_v},
        {"cls.b_q", &w.cls.b_q}, {"cls.b_k", &w.cls.b_k}, {"cls.b_v", &w.cls.b_v},
        {"reg.w_q", &w.reg.w_q}, {"reg.w_k", &w.reg.w_k}, {"reg.w_v", &w.reg.w_v},
        {"reg.b_q", &w.reg.b_q}, {"reg.b_k", &w.reg.b_k}, {"reg.b_v", &w.reg.b_v},
        {"head_cls.w", &w.head_cls}, {"head_cls.b", &w.head_cls_bias},
        {"head_iou.w", &w.head_iou}, {"head_iou.b", &w.head_iou_bias},
    };
}

inline void save_weights(const std::string& path, const FamWeights& w) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    save_weight_map(os, weight_tensors(w));
}

inline FamWeights load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::map<std::string, Matrix> m = load_weight_map(is);
    auto take = [&](const char* name) -> Matrix {
        auto it = m.find(name);
        if (it == m.end()) throw std::runtime_error("weights: missing tensor '" + std::string(name) + "'");
        return std::move(it->second);
    };
    FamWeights w;
    for (auto [prefix, branch] : {std::pair{"cls", &w.cls}, std::pair{"reg", &w.reg}}) {
        const std::string p(prefix);
        branch->w_q = take((p + ".w_q").c_str());
        branch->w_k = take((p + ".w_k").c_str());
        branch->w_v = take((p + ".w_v").c_str());
        branch->b_q = take((p + ".b_q").c_str());
        branch->b_k = take((p + ".b_k").c_str());
        branch->b_v = take((p + ".b_v").c_str());
    }
    w.head_cls = take("head_cls.w");
    w.head_cls_bias = take("head_cls.b");
    w.head_iou = take("head_iou.w");
    w.head_iou_bias = take("head_iou.b");
    return w;
}

// --------------------------------------------------------- frames JSONL

inline std::string frame_to_json(const FramePrediction& f) {
    std::ostringstream os;
    os << "{\"frame_id\":" << f.frame_id << ",\"candidates\":[";
    bool first = true;
    for (const Candidate& c : f.candidates) {
        if (!first) os << ',';
        first = false;
        os << "{\"box\":[" << format_float(c.box.x1) << ',' << format_float(c.box.y1) << ','
           << format_float(c.box.x2) << ',' << format_float(c.box.y2) << "],\"cls\":[";
        for (std::size_t i = 0; i < c.class_scores.size(); ++i) {
            if (i) os << ',';
            os << format_float(c.class_scores[i]);
        }
        os << "],\"obj\":" << format_float(c.objectness)
           << ",\"iou\":" << format_float(c.iou_score)
           << ",\"feat_cls\":\"" << floats_to_base64(c.feat_cls)
           << "\",\"feat_reg\":\"" << floats_to_base64(c.feat_reg) << "\"}";
    }
    os << "]}";
    return os.str();
}

inline FramePrediction frame_from_json(const std::string& line) {
    const nlohmann::json j = nlohmann::json::parse(line);
    FramePrediction f;
    f.frame_id = j.at("frame_id").get<int>();
    for (const auto& jc : j.at("candidates")) {
        Candidate c;
        const auto& b = jc.at("box");
        c.box = {b.at(0).get<float>(), b.at(1).get<float>(), b.at(2).get<float>(),
                 b.at(3).get<float>()};
        c.class_scores = jc.at("cls").get<std::vector<float>>();
        c.objectness = jc.at("obj").get<float>();
        c.iou_score = jc.at("iou").get<float>();
        c.feat_cls = base64_to_floats(jc.at("feat_cls").get<std::string>());
        c.feat_reg = base64_to_floats(jc.at("feat_reg").get<std::string>());
        c.refresh_confidence();
        f.candidates.push_back(std::move(c));
    }
    return f;
}

inline void save_frames(const std::string& path, const std::vector<FramePrediction>& frames) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    for (const auto& f : frames) os << frame_to_json(f) << '\n';
}

inline std::vector<FramePrediction> load_frames(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::vector<FramePrediction> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(frame_from_json(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed frame record: " + e.what());
        }
    }
    return out;
}

// ------------------------------------------------ detections / GT JSONL

inline std::string detections_to_json(const DetectionFrame& f) {
    std::ostringstream os;
    os << "{\"frame_id\":" << f.frame_id << ",\"dets\":[";
    for (std::size_t i = 0; i < f.dets.size(); ++i) {
        const Detection& d = f.dets[i];
        if (i) os << ',';
        os << "{\"box\":[" << format_float(d.box.x1) << ',' << format_float(d.box.y1) << ','
           << format_float(d.box.x2) << ',' << format_float(d.box.y2)
           << "],\"class_id\":" << d.class_id << ",\"score\":" << format_float(d.score) << '}';
    }
    os << "]}";
    return os.str();
}

inline DetectionFrame detections_from_json(const std::string& line) {
    const nlohmann::json j = nlohmann::json::parse(line);
    DetectionFrame f;
    f.frame_id = j.at("frame_id").get<int>();
    for (const auto& jd : j.at("dets")) {
        const auto& b = jd.at("box");
        f.dets.push_back({{b.at(0).get<float>(), b.at(1).get<float>(), b.at(2).get<float>(),
                           b.at(3).get<float>()},
                          jd.at("class_id").get<int>(), jd.at("score").get<float>()});
    }
    return f;
}

inline void save_detections(const std::string& path, const std::vector<DetectionFrame>& frames) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    for (const auto& f : frames) os << detections_to_json(f) << '\n';
}

inline std::vector<DetectionFrame> load_detections(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::vector<DetectionFrame> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(detections_from_json(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed detection record: " + e.what());
        }
    }
    return out;
}

inline void save_ground_truth(const std::string& path, const GroundTruth& gt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    for (std::size_t f = 0; f < gt.frames.size(); ++f) {
        os << "{\"frame_id\":" << f << ",\"dets\":[";
        for (std::size_t i = 0; i < gt.frames[f].size(); ++i) {
            const GtObject& o = gt.frames[f][i];
            if (i) os << ',';
            os << "{\"box\":[" << format_float(o.box.x1) << ',' << format_float(o.box.y1) << ','
               << format_float(o.box.x2) << ',' << format_float(o.box.y2)
               << "],\"class_id\":" << o.class_id << '}';
        }
        os << "]}\n";
    }
}

inline std::vector<GtObjectFrame> load_ground_truth(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::vector<GtObjectFrame> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            GtObjectFrame f;
            f.frame_id = j.at("frame_id").get<int>();
            for (const auto& jd : j.at("dets")) {
                const auto& b = jd.at("box");
                f.boxes.push_back({b.at(0).get<float>(), b.at(1).get<float>(),
                                   b.at(2).get<float>(), b.at(3).get<float>()});
                f.class_ids.push_back(jd.at("class_id").get<int>());
            }
            out.push_back(std::move(f));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed ground-truth record: " + e.what());
        }
    }
    return out;
}

// -------------------------------------------------------- config files

/// Flat key=value config, '#' comments. Later keys win.
inline std::map<std::string, std::string> load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto ltrim = line.find_first_not_of(" \t\r");
        if (ltrim == std::string::npos) continue;
        const auto rtrim = line.find_last_not_of(" \t\r");
        line = line.substr(ltrim, rtrim - ltrim + 1);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            s = a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        trim(key);
        trim(val);
        out[key] = val;
    }
    return out;
}

} // namespace vfsa::io
