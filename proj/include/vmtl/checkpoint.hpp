#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vmtl/model.hpp"
#include "vmtl/optimizer.hpp"

namespace vmtl {

// Checkpoint directory layout:
//   manifest.txt   one line per parameter: name=<dims>\t<partition>\t<param|buffer>
//   <name>.stsr    one tensor blob per parameter
//   opt/           optimizer state in the same format (optional)

inline void save_model(const std::filesystem::path& dir, const MultiTaskNet& net) {
    std::filesystem::create_directories(dir);
    const ParamStore& ps = net.params();
    std::ofstream manifest(dir / "manifest.txt");
    if (!manifest) throw ParseError("cannot write " + (dir / "manifest.txt").string());
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const ParamDef& d = ps[i];
        manifest << d.name << '=' << shape_string(d.value.shape()) << '\t'
                 << partition_name(d.part) << '\t' << (d.trainable ? "param" : "buffer") << '\n';
        save_stsr(dir / (d.name + ".stsr"), d.value);
    }
}

inline void load_model(const std::filesystem::path& dir, MultiTaskNet& net) {
    const std::filesystem::path mpath = dir / "manifest.txt";
    std::ifstream manifest(mpath);
    if (!manifest) throw ParseError("cannot open " + mpath.string());
    ParamStore& ps = net.params();
    std::vector<char> seen(ps.size(), 0);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto where = mpath.string() + ":" + std::to_string(line_no);
        const auto eq = line.find('=');
        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (eq == std::string::npos || tab1 == std::string::npos || tab2 == std::string::npos ||
            eq > tab1)
            throw ParseError(where + ": malformed manifest line");
        const std::string name = line.substr(0, eq);
        const std::string dims = line.substr(eq + 1, tab1 - eq - 1);
        const Partition part = partition_from_name(line.substr(tab1 + 1, tab2 - tab1 - 1));
        const std::string kind = line.substr(tab2 + 1);

        std::size_t idx = 0;
        try {
            idx = ps.index_of(name);
        } catch (const ContractError&) {
            throw ParseError(where + ": parameter '" + name + "' not in this model");
        }
        ParamDef& d = ps[idx];
        if (shape_string(d.value.shape()) != dims)
            throw ParseError(where + ": shape " + dims + " does not match model (" +
                             shape_string(d.value.shape()) + ")");
        if (d.part != part || (kind != "param" && kind != "buffer") ||
            d.trainable != (kind == "param"))
            throw ParseError(where + ": partition/kind does not match model");
        d.value = load_stsr(dir / (name + ".stsr"));
        if (shape_string(d.value.shape()) != dims)
            throw ParseError((dir / (name + ".stsr")).string() + ": blob shape mismatch");
        seen[idx] = 1;
    }
    for (std::size_t i = 0; i < ps.size(); ++i)
        if (!seen[i])
            throw ParseError(mpath.string() + ": missing parameter " + ps[i].name);
}

inline void save_optimizer(const std::filesystem::path& dir, const MultiTaskNet& net,
                           MultiTaskSgd& opt) {
    std::filesystem::create_directories(dir);
    const ParamStore& ps = net.params();
    std::ofstream manifest(dir / "manifest.txt");
    if (!manifest) throw ParseError("cannot write " + (dir / "manifest.txt").string());
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const ParamDef& d = ps[i];
        if (!d.trainable) continue;
        manifest << d.name << '=' << shape_string(d.value.shape()) << '\t'
                 << partition_name(d.part) << '\t' << "param" << '\n';
        save_stsr(dir / ("momentum." + d.name + ".stsr"), opt.momentum_buffers()[i]);
        save_stsr(dir / ("accum." + d.name + ".stsr"), opt.accumulators()[i]);
    }
    Tensor state({9});
    state[0] = opt.lr();
    for (std::size_t i = 0; i < 3; ++i) state[1 + i] = static_cast<double>(opt.task_counters()[i]);
    state[4] = static_cast<double>(opt.shared_counter());
    for (std::size_t i = 0; i < 4; ++i) state[5 + i] = static_cast<double>(opt.step_counters()[i]);
    save_stsr(dir / "state.stsr", state);
}

inline void load_optimizer(const std::filesystem::path& dir, const MultiTaskNet& net,
                           MultiTaskSgd& opt) {
    const ParamStore& ps = net.params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const ParamDef& d = ps[i];
        if (!d.trainable) continue;
        Tensor m = load_stsr(dir / ("momentum." + d.name + ".stsr"));
        Tensor a = load_stsr(dir / ("accum." + d.name + ".stsr"));
        if (!m.same_shape(d.value) || !a.same_shape(d.value))
            throw ParseError("optimizer state shape mismatch for " + d.name);
        opt.momentum_buffers()[i] = std::move(m);
        opt.accumulators()[i] = std::move(a);
    }
    Tensor state = load_stsr(dir / "state.stsr");
    if (state.numel() != 9) throw ParseError("optimizer state.stsr has wrong length");
    opt.set_lr(state[0]);
    for (std::size_t i = 0; i < 3; ++i)
        opt.task_counters()[i] = static_cast<std::size_t>(state[1 + i]);
    opt.shared_counter() = static_cast<std::size_t>(state[4]);
    for (std::size_t i = 0; i < 4; ++i)
        opt.step_counters()[i] = static_cast<std::size_t>(state[5 + i]);
}

} // namespace vmtl
