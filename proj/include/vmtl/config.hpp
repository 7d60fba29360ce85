#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vmtl/losses.hpp"
#include "vmtl/model.hpp"
#include "vmtl/optimizer.hpp"
#include "vmtl/task.hpp"

namespace vmtl {

// Everything a run needs, parsed from `key=value` lines with '#' comments.
// Unknown keys are rejected.
struct RunConfig {
    NetworkConfig net;
    OptimizerConfig opt;
    LossWeights loss;
    std::string data_dir;
    std::uint64_t seed = 0;
    std::size_t epochs = 5;
    TaskSet tasks = TaskSet::all();
    std::size_t clips_per_video = 4;   // saliency/action clips per record per epoch
    std::size_t checkpoint_every = 0;  // epochs between checkpoints; 0 = final only
    double sigma_frac = 0.05;          // density sigma / map height
    std::size_t summary_segment_len = 90;
    double summary_budget_frac = 0.15;

    SampleConfig sample_config(bool augment) const {
        SampleConfig s;
        s.clip_len = net.frames;
        s.input_size = net.input_size;
        s.sigma_frac = sigma_frac;
        s.dense_threshold = loss.dense_threshold;
        s.augment = augment;
        return s;
    }
};

namespace detail {

inline double parse_double(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(where + ": expected a number, got '" + v + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        const unsigned long long x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(where + ": expected a non-negative integer, got '" + v + "'");
    }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else cur += c;
    }
    out.push_back(cur);
    return out;
}

} // namespace detail

inline void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& val,
                              const std::string& where) {
    using detail::parse_double;
    using detail::parse_u64;
    if (key == "input_size") cfg.net.input_size = parse_u64(val, where);
    else if (key == "frames") cfg.net.frames = parse_u64(val, where);
    else if (key == "action_classes") cfg.net.action_classes = parse_u64(val, where);
    else if (key == "head_width") cfg.net.head_width = parse_u64(val, where);
    else if (key == "sal_channels") cfg.net.sal_channels = parse_u64(val, where);
    else if (key == "widths") {
        const auto parts = detail::split(val, ',');
        if (parts.size() != 4) throw ConfigError(where + ": widths needs 4 comma-separated values");
        for (std::size_t i = 0; i < 4; ++i)
            cfg.net.widths[i] = parse_u64(parts[i], where);
    } else if (key == "lr") cfg.opt.lr = parse_double(val, where);
    else if (key == "momentum") cfg.opt.momentum = parse_double(val, where);
    else if (key == "weight_decay") cfg.opt.weight_decay = parse_double(val, where);
    else if (key == "batch_sal") cfg.opt.batch_sal = parse_u64(val, where);
    else if (key == "batch_act") cfg.opt.batch_act = parse_u64(val, where);
    else if (key == "batch_sum") cfg.opt.batch_sum = parse_u64(val, where);
    else if (key == "plateau_patience") cfg.opt.plateau_patience = parse_u64(val, where);
    else if (key == "plateau_factor") cfg.opt.plateau_factor = parse_double(val, where);
    else if (key == "plateau_min_rel") cfg.opt.plateau_min_rel = parse_double(val, where);
    else if (key == "w_ce") cfg.loss.w_ce = parse_double(val, where);
    else if (key == "w_cc") cfg.loss.w_cc = parse_double(val, where);
    else if (key == "w_nss") cfg.loss.w_nss = parse_double(val, where);
    else if (key == "alpha_sal") cfg.loss.alpha_sal = parse_double(val, where);
    else if (key == "alpha_act") cfg.loss.alpha_act = parse_double(val, where);
    else if (key == "alpha_sum") cfg.loss.alpha_sum = parse_double(val, where);
    else if (key == "gamma") cfg.loss.gamma = parse_double(val, where);
    else if (key == "dense_threshold") cfg.loss.dense_threshold = parse_double(val, where);
    else if (key == "data") cfg.data_dir = val;
    else if (key == "seed") cfg.seed = parse_u64(val, where);
    else if (key == "epochs") cfg.epochs = parse_u64(val, where);
    else if (key == "clips_per_video") cfg.clips_per_video = parse_u64(val, where);
    else if (key == "checkpoint_every") cfg.checkpoint_every = parse_u64(val, where);
    else if (key == "sigma_frac") cfg.sigma_frac = parse_double(val, where);
    else if (key == "summary_segment_len") cfg.summary_segment_len = parse_u64(val, where);
    else if (key == "summary_budget_frac") cfg.summary_budget_frac = parse_double(val, where);
    else if (key == "tasks") {
        TaskSet set;
        for (const std::string& t : detail::split(val, ',')) {
            if (t == "all") set = TaskSet::all();
            else set.set(task_from_name(t));
        }
        if (!set.any()) throw ConfigError(where + ": tasks must enable at least one task");
        cfg.tasks = set;
    } else
        throw ConfigError(where + ": unknown key '" + key + "'");
}

inline RunConfig parse_config_stream(std::istream& is, const std::string& source) {
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key=value");
        apply_config_line(cfg, line.substr(0, eq), line.substr(eq + 1),
                          source + ":" + std::to_string(line_no));
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    return parse_config_stream(is, path);
}

// Canonical serialization; re-parsing reproduces the config exactly.
inline std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    os << "input_size=" << cfg.net.input_size << '\n';
    os << "frames=" << cfg.net.frames << '\n';
    os << "action_classes=" << cfg.net.action_classes << '\n';
    os << "widths=" << cfg.net.widths[0] << ',' << cfg.net.widths[1] << ',' << cfg.net.widths[2]
       << ',' << cfg.net.widths[3] << '\n';
    os << "head_width=" << cfg.net.head_width << '\n';
    os << "sal_channels=" << cfg.net.sal_channels << '\n';
    os << "lr=" << cfg.opt.lr << '\n';
    os << "momentum=" << cfg.opt.momentum << '\n';
    os << "weight_decay=" << cfg.opt.weight_decay << '\n';
    os << "batch_sal=" << cfg.opt.batch_sal << '\n';
    os << "batch_act=" << cfg.opt.batch_act << '\n';
    os << "batch_sum=" << cfg.opt.batch_sum << '\n';
    os << "plateau_patience=" << cfg.opt.plateau_patience << '\n';
    os << "plateau_factor=" << cfg.opt.plateau_factor << '\n';
    os << "plateau_min_rel=" << cfg.opt.plateau_min_rel << '\n';
    os << "w_ce=" << cfg.loss.w_ce << '\n';
    os << "w_cc=" << cfg.loss.w_cc << '\n';
    os << "w_nss=" << cfg.loss.w_nss << '\n';
    os << "alpha_sal=" << cfg.loss.alpha_sal << '\n';
    os << "alpha_act=" << cfg.loss.alpha_act << '\n';
    os << "alpha_sum=" << cfg.loss.alpha_sum << '\n';
    os << "gamma=" << cfg.loss.gamma << '\n';
    os << "dense_threshold=" << cfg.loss.dense_threshold << '\n';
    os << "seed=" << cfg.seed << '\n';
    os << "epochs=" << cfg.epochs << '\n';
    os << "clips_per_video=" << cfg.clips_per_video << '\n';
    os << "checkpoint_every=" << cfg.checkpoint_every << '\n';
    os << "sigma_frac=" << cfg.sigma_frac << '\n';
    os << "summary_segment_len=" << cfg.summary_segment_len << '\n';
    os << "summary_budget_frac=" << cfg.summary_budget_frac << '\n';
    std::string tasks;
    for (Task t : kAllTasks)
        if (cfg.tasks.has(t)) {
            if (!tasks.empty()) tasks += ',';
            tasks += task_name(t);
        }
    os << "tasks=" << tasks << '\n';
    if (!cfg.data_dir.empty()) os << "data=" << cfg.data_dir << '\n';
    return os.str();
}

} // namespace vmtl
