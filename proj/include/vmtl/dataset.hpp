#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vmtl/metrics.hpp"
#include "vmtl/rng.hpp"
#include "vmtl/tensor.hpp"

namespace vmtl {

// One video plus whatever annotations exist for it.
struct VideoRecord {
    std::string id;
    Tensor frames; // [3,N,H,W], values in [0,1]
    std::optional<std::vector<FixationFrame>> fixations;
    std::optional<int> action_class;
    std::optional<std::vector<double>> importance; // per frame, in [0,1]

    std::size_t n_frames() const { return frames.dim(1); }
    std::size_t height() const { return frames.dim(2); }
    std::size_t width() const { return frames.dim(3); }

    void validate() const {
        check_dim(frames.rank() == 4 && frames.dim(0) == 3, "record frames must be [3,N,H,W]");
        if (fixations && fixations->size() != n_frames())
            throw DataError(id + ": fixation list length differs from frame count");
        if (importance && importance->size() != n_frames())
            throw DataError(id + ": importance length differs from frame count");
        if (fixations)
            for (const auto& fr : *fixations)
                for (const Fixation& f : fr)
                    if (f.x < 0 || f.y < 0 || f.x >= static_cast<int>(width()) ||
                        f.y >= static_cast<int>(height()))
                        throw DataError(id + ": fixation outside frame bounds");
    }
};

// ---------------------------------------------------------------------------
// Synthetic videos: a bright Gaussian blob over pixel noise. The motion
// pattern index doubles as the action class; patterns are chosen so a
// horizontal mirror maps each class onto itself, and sweeps follow a
// triangle wave so the blob never sits still inside a clip-length window:
//   0 horizontal sweep (slow)   1 horizontal sweep (fast)
//   2 vertical sweep (slow)     3 vertical sweep (fast)
//   4 circular orbit (slow)     5 circular orbit (fast)
//   6 radius pulse (slow)       7 radius pulse (fast)
// Fixations land on the blob center; importance is 1 while the blob is
// visible and 0 inside randomly inserted blank spans (at least one per video).
// ---------------------------------------------------------------------------

inline constexpr std::size_t kSynthMaxClasses = 8;

inline std::vector<VideoRecord> synth_generate(std::uint64_t seed, std::size_t n_videos,
                                               std::size_t n_frames, std::size_t class_count,
                                               std::size_t height = 64, std::size_t width = 64) {
    if (class_count == 0 || class_count > kSynthMaxClasses)
        throw ValueError("synth_generate: class_count must be in 1.." +
                         std::to_string(kSynthMaxClasses));
    if (n_frames < 32) throw ValueError("synth_generate: need at least 32 frames");
    Rng master(seed);
    std::vector<VideoRecord> records;
    records.reserve(n_videos);

    for (std::size_t v = 0; v < n_videos; ++v) {
        Rng rng = master.fork(v + 1);
        VideoRecord rec;
        {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "vid%04zu", v);
            rec.id = buf;
        }
        const int cls = static_cast<int>(v % class_count);
        rec.action_class = cls;
        rec.frames = Tensor({3, n_frames, height, width});
        rec.fixations = std::vector<FixationFrame>(n_frames);
        rec.importance = std::vector<double>(n_frames, 1.0);

        // keep the sweep inside every corner crop of the smallest scale so
        // augmented clips always see the blob
        const double cx = width / 2.0 + rng.uniform(-3.0, 3.0);
        const double cy = height / 2.0 + rng.uniform(-3.0, 3.0);
        const double amp = std::min(height, width) * 0.16;
        const double phase = rng.uniform(); // fraction of a period
        const double orient = rng.coin() ? 1.0 : -1.0; // orbit direction
        const double base_sigma = height / 8.0;
        const bool fast = (cls % 2) == 1;
        // ~8x speed ratio so slow/fast stays separable after downsampling
        const double period = fast ? 6.0 : 40.0;

        // blank spans where the blob disappears, kept away from the video
        // edges and capped so most frames stay fixated
        std::vector<char> visible(n_frames, 1);
        const std::size_t n_spans = 1 + (n_frames >= 160 ? rng.below(2) : 0);
        const std::size_t max_len = std::min<std::size_t>(24, 8 + n_frames / 12);
        for (std::size_t s = 0; s < n_spans; ++s) {
            const std::size_t len = 8 + rng.below(max_len - 7);
            const std::size_t start = 4 + rng.below(n_frames - len - 8);
            for (std::size_t t = start; t < start + len; ++t) visible[t] = 0;
        }
        bool any_visible = false;
        for (char c : visible) any_visible = any_visible || c;
        if (!any_visible) visible[0] = visible[1] = 1;

        // triangle wave in [-1,1] with unit period; |slope| is constant
        const auto tri = [](double u) {
            u -= std::floor(u);
            return u < 0.5 ? 4.0 * u - 1.0 : 3.0 - 4.0 * u;
        };
        for (std::size_t t = 0; t < n_frames; ++t) {
            const double u_t = static_cast<double>(t) / period + phase;
            const double w_t = 2.0 * 3.14159265358979323846 * u_t;
            double bx = cx, by = cy, sigma = base_sigma;
            switch (cls) {
                case 0: case 1: bx = cx + amp * tri(u_t); break;
                case 2: case 3: by = cy + amp * tri(u_t); break;
                case 4: case 5:
                    bx = cx + amp * std::cos(orient * w_t);
                    by = cy + amp * std::sin(orient * w_t);
                    break;
                default: sigma = base_sigma * (1.0 + 0.6 * tri(u_t)); break;
            }

            double* r = rec.frames.data() + (0 * n_frames + t) * height * width;
            double* g = rec.frames.data() + (1 * n_frames + t) * height * width;
            double* b = rec.frames.data() + (2 * n_frames + t) * height * width;
            const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
            for (std::size_t y = 0; y < height; ++y)
                for (std::size_t x = 0; x < width; ++x) {
                    const std::size_t i = y * width + x;
                    r[i] = 0.05 + 0.2 * rng.uniform();
                    g[i] = 0.05 + 0.2 * rng.uniform();
                    b[i] = 0.05 + 0.2 * rng.uniform();
                    if (visible[t]) {
                        const double dy = static_cast<double>(y) - by;
                        const double dx = static_cast<double>(x) - bx;
                        const double bump = 0.85 * std::exp(-(dx * dx + dy * dy) * inv2s2);
                        r[i] = std::min(1.0, r[i] + bump);
                        g[i] = std::min(1.0, g[i] + bump);
                        b[i] = std::min(1.0, b[i] + bump);
                    }
                }

            if (visible[t]) {
                const int fx = std::clamp(static_cast<int>(std::lround(bx)), 0,
                                          static_cast<int>(width) - 1);
                const int fy = std::clamp(static_cast<int>(std::lround(by)), 0,
                                          static_cast<int>(height) - 1);
                (*rec.fixations)[t].push_back({fx, fy});
            } else {
                (*rec.importance)[t] = 0.0;
            }
        }
        rec.validate();
        records.push_back(std::move(rec));
    }
    return records;
}

// ---------------------------------------------------------------------------
// On-disk container: one directory per record holding a `meta` text file,
// frames as a single STSR blob, fixations as `frame x y` lines and the
// importance curve as an STSR vector.
// ---------------------------------------------------------------------------

inline void write_record(const std::filesystem::path& dir, const VideoRecord& rec) {
    rec.validate();
    std::filesystem::create_directories(dir);
    {
        std::ofstream meta(dir / "meta");
        if (!meta) throw ParseError("cannot write " + (dir / "meta").string());
        meta << "id=" << rec.id << '\n';
        meta << "frames=" << rec.n_frames() << '\n';
        meta << "height=" << rec.height() << '\n';
        meta << "width=" << rec.width() << '\n';
        if (rec.action_class) meta << "class=" << *rec.action_class << '\n';
        meta << "fixations=" << (rec.fixations ? 1 : 0) << '\n';
        meta << "importance=" << (rec.importance ? 1 : 0) << '\n';
    }
    save_stsr(dir / "frames.stsr", rec.frames);
    if (rec.fixations) {
        std::ofstream fix(dir / "fixations.txt");
        for (std::size_t t = 0; t < rec.fixations->size(); ++t)
            for (const Fixation& f : (*rec.fixations)[t])
                fix << t << ' ' << f.x << ' ' << f.y << '\n';
    }
    if (rec.importance)
        save_stsr(dir / "importance.stsr",
                  Tensor({rec.importance->size()}, *rec.importance));
}

inline VideoRecord read_record(const std::filesystem::path& dir) {
    VideoRecord rec;
    std::size_t n = 0, h = 0, w = 0;
    bool has_fix = false, has_imp = false;

    const std::filesystem::path meta_path = dir / "meta";
    std::ifstream meta(meta_path);
    if (!meta) throw ParseError("cannot open " + meta_path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(meta, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(meta_path.string() + ":" + std::to_string(line_no) +
                             ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            if (key == "id") rec.id = val;
            else if (key == "frames") n = std::stoul(val);
            else if (key == "height") h = std::stoul(val);
            else if (key == "width") w = std::stoul(val);
            else if (key == "class") rec.action_class = std::stoi(val);
            else if (key == "fixations") has_fix = std::stoi(val) != 0;
            else if (key == "importance") has_imp = std::stoi(val) != 0;
            else
                throw ParseError(meta_path.string() + ":" + std::to_string(line_no) +
                                 ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw ParseError(meta_path.string() + ":" + std::to_string(line_no) +
                             ": bad value for '" + key + "'");
        }
    }
    if (rec.id.empty() || n == 0 || h == 0 || w == 0)
        throw ParseError(meta_path.string() + ": missing id/frames/height/width");

    rec.frames = load_stsr(dir / "frames.stsr");
    if (rec.frames.shape() != std::vector<std::size_t>{3, n, h, w})
        throw ParseError((dir / "frames.stsr").string() + ": shape " +
                         shape_string(rec.frames.shape()) + " does not match meta");

    if (has_fix) {
        const std::filesystem::path fix_path = dir / "fixations.txt";
        std::ifstream fix(fix_path);
        if (!fix) throw ParseError("cannot open " + fix_path.string());
        rec.fixations = std::vector<FixationFrame>(n);
        std::size_t fix_line = 0;
        while (std::getline(fix, line)) {
            ++fix_line;
            if (line.empty()) continue;
            std::istringstream ss(line);
            long t = -1, x = -1, y = -1;
            if (!(ss >> t >> x >> y))
                throw ParseError(fix_path.string() + ":" + std::to_string(fix_line) +
                                 ": expected 'frame x y'");
            if (t < 0 || t >= static_cast<long>(n))
                throw ParseError(fix_path.string() + ":" + std::to_string(fix_line) +
                                 ": frame index out of range");
            if (x < 0 || y < 0 || x >= static_cast<long>(w) || y >= static_cast<long>(h))
                throw ParseError(fix_path.string() + ":" + std::to_string(fix_line) +
                                 ": fixation out of bounds");
            (*rec.fixations)[static_cast<std::size_t>(t)].push_back(
                {static_cast<int>(x), static_cast<int>(y)});
        }
    }
    if (has_imp) {
        Tensor imp = load_stsr(dir / "importance.stsr");
        if (imp.shape() != std::vector<std::size_t>{n})
            throw ParseError((dir / "importance.stsr").string() +
                             ": length does not match frame count");
        rec.importance = imp.vec();
    }
    rec.validate();
    return rec;
}

// Record directories of a dataset, sorted by name for determinism.
inline std::vector<std::filesystem::path> list_records(const std::filesystem::path& dataset) {
    std::vector<std::filesystem::path> dirs;
    if (!std::filesystem::is_directory(dataset))
        throw ParseError("dataset directory not found: " + dataset.string());
    for (const auto& entry : std::filesystem::directory_iterator(dataset))
        if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

} // namespace vmtl
