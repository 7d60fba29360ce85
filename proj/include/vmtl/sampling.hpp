#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "vmtl/dataset.hpp"
#include "vmtl/losses.hpp"
#include "vmtl/model.hpp"
#include "vmtl/rng.hpp"
#include "vmtl/task.hpp"

namespace vmtl {

struct SampleConfig {
    std::size_t clip_len = 16;
    std::size_t input_size = 112;
    double sigma_frac = 0.05;     // density sigma as a fraction of map height
    double dense_threshold = 0.5; // fraction of the density peak
    bool augment = true;          // random crop/flip; off = center crop, no flip
};

// Multi-scale crop set (fractions of the shorter side).
inline constexpr std::array<double, 4> kCropScales{1.0, 0.84, 0.71, 0.59};

// One training sample: a clip plus exactly one task annotation.
struct AnnotatedClip {
    Tensor clip; // [3,L,S,S]
    Task task = Task::action;
    SaliencyTarget sal;     // task == saliency
    int action_class = -1;  // task == action
    double y_sum = 0.0;     // task == summary
};

namespace detail {

// Corner-aligned bilinear resample of one plane (either direction).
inline void resize_plane(const double* src, std::size_t h, std::size_t w, double* dst,
                         std::size_t H, std::size_t W) {
    for (std::size_t y = 0; y < H; ++y) {
        const double sy = (H > 1 && h > 1)
                              ? static_cast<double>(y) * static_cast<double>(h - 1) /
                                    static_cast<double>(H - 1)
                              : 0.0;
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < W; ++x) {
            const double sx = (W > 1 && w > 1)
                                  ? static_cast<double>(x) * static_cast<double>(w - 1) /
                                        static_cast<double>(W - 1)
                                  : 0.0;
            const std::size_t x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - static_cast<double>(x0);
            dst[y * W + x] = (1.0 - fy) * ((1.0 - fx) * src[y0 * w + x0] + fx * src[y0 * w + x1]) +
                             fy * ((1.0 - fx) * src[y1 * w + x0] + fx * src[y1 * w + x1]);
        }
    }
}

struct CropRect {
    std::size_t y0 = 0, x0 = 0, h = 0, w = 0;
};

// Gather clip frames by index, crop, resize to S x S and optionally mirror.
inline Tensor transform_clip(const Tensor& frames, const std::vector<std::size_t>& idx,
                             const CropRect& crop, std::size_t S, bool flip) {
    const std::size_t n = frames.dim(1), h = frames.dim(2), w = frames.dim(3);
    check_dim(crop.y0 + crop.h <= h && crop.x0 + crop.w <= w, "crop exceeds frame bounds");
    const std::size_t L = idx.size();
    Tensor out({3, L, S, S});
    std::vector<double> patch(crop.h * crop.w);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t j = 0; j < L; ++j) {
            check_dim(idx[j] < n, "frame index out of range");
            const double* src = frames.data() + (c * n + idx[j]) * h * w;
            for (std::size_t y = 0; y < crop.h; ++y)
                for (std::size_t x = 0; x < crop.w; ++x)
                    patch[y * crop.w + x] = src[(crop.y0 + y) * w + (crop.x0 + x)];
            double* dst = out.data() + (c * L + j) * S * S;
            resize_plane(patch.data(), crop.h, crop.w, dst, S, S);
            if (flip)
                for (std::size_t y = 0; y < S; ++y)
                    std::reverse(dst + y * S, dst + (y + 1) * S);
        }
    return out;
}

// Crop geometry draw: scale from the 4-scale set, position from the four
// corners plus center. Consumes two rng words.
inline CropRect draw_crop(Rng& rng, std::size_t h, std::size_t w, bool augment) {
    const std::size_t base = std::min(h, w);
    if (!augment) {
        const std::size_t cs = base;
        return {(h - cs) / 2, (w - cs) / 2, cs, cs};
    }
    const double scale = kCropScales[rng.below(kCropScales.size())];
    const std::size_t cs = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(scale * static_cast<double>(base))));
    const std::size_t pos = rng.below(5);
    switch (pos) {
        case 0: return {0, 0, cs, cs};
        case 1: return {0, w - cs, cs, cs};
        case 2: return {h - cs, 0, cs, cs};
        case 3: return {h - cs, w - cs, cs, cs};
        default: return {(h - cs) / 2, (w - cs) / 2, cs, cs};
    }
}

// Index map for a window of length L starting at `start`, repeating the last
// available frame when the source runs short.
inline std::vector<std::size_t> window_indices(std::size_t start, std::size_t L,
                                               std::size_t limit) {
    std::vector<std::size_t> idx(L);
    for (std::size_t j = 0; j < L; ++j) idx[j] = std::min(start + j, limit - 1);
    return idx;
}

inline std::size_t map_coord(long v, std::size_t in, std::size_t out) {
    if (in <= 1) return 0;
    const double scaled = static_cast<double>(v) * static_cast<double>(out - 1) /
                          static_cast<double>(in - 1);
    const long m = std::lround(scaled);
    return static_cast<std::size_t>(std::clamp<long>(m, 0, static_cast<long>(out) - 1));
}

} // namespace detail

// Random 16-frame window, multi-scale corner/center crop, coin-flip mirror.
// Draw order: window start, crop scale, crop position, flip.
inline AnnotatedClip sample_action_clip(const VideoRecord& rec, Rng& rng,
                                        const SampleConfig& cfg) {
    if (!rec.action_class) throw DataError(rec.id + ": no action label");
    const std::size_t n = rec.n_frames();
    if (n < cfg.clip_len) throw DataError(rec.id + ": too short for a clip");
    const std::size_t start = rng.below(n - cfg.clip_len + 1);
    const detail::CropRect crop = detail::draw_crop(rng, rec.height(), rec.width(), cfg.augment);
    const bool flip = cfg.augment && rng.coin();

    AnnotatedClip out;
    out.task = Task::action;
    out.action_class = *rec.action_class;
    out.clip = detail::transform_clip(rec.frames,
                                      detail::window_indices(start, cfg.clip_len, n), crop,
                                      cfg.input_size, flip);
    return out;
}

// 16-frame clip inside one 90-frame segment with the action-style
// augmentation; the target is the mean importance of the chosen frames.
inline AnnotatedClip sample_summary_clip(const VideoRecord& rec, std::size_t segment_index,
                                         Rng& rng, const SampleConfig& cfg,
                                         std::size_t seg_len = 90) {
    if (!rec.importance) throw DataError(rec.id + ": no importance annotation");
    const auto segments = uniform_segments(rec.n_frames(), seg_len);
    if (segment_index >= segments.size())
        throw ContractError(rec.id + ": segment index out of range");
    const Segment seg = segments[segment_index];

    const std::size_t len = seg.length();
    const std::size_t start =
        seg.start + rng.below(len >= cfg.clip_len ? len - cfg.clip_len + 1 : 1);
    const auto idx = detail::window_indices(start, cfg.clip_len, seg.end);
    const detail::CropRect crop = detail::draw_crop(rng, rec.height(), rec.width(), cfg.augment);
    const bool flip = cfg.augment && rng.coin();

    AnnotatedClip out;
    out.task = Task::summary;
    double mean = 0.0;
    for (std::size_t j : idx) mean += (*rec.importance)[j];
    out.y_sum = mean / static_cast<double>(idx.size());
    out.clip = detail::transform_clip(rec.frames, idx, crop, cfg.input_size, flip);
    return out;
}

// Full-frame resize (no crop); the same mirror is applied to the frames and
// to the median frame's fixations. The median of frames k..k+15 is k+8.
// Windows whose median frame has no fixations are resampled up to 10 times.
inline AnnotatedClip sample_saliency_clip(const VideoRecord& rec, Rng& rng,
                                          const SampleConfig& cfg) {
    if (!rec.fixations) throw DataError(rec.id + ": no fixation annotation");
    const std::size_t n = rec.n_frames();
    if (n < cfg.clip_len) throw DataError(rec.id + ": too short for a clip");

    const std::size_t median_off = cfg.clip_len / 2;
    std::size_t start = 0;
    bool found = false;
    for (int attempt = 0; attempt < 10 && !found; ++attempt) {
        start = rng.below(n - cfg.clip_len + 1);
        found = !(*rec.fixations)[start + median_off].empty();
    }
    if (!found)
        throw DataError(rec.id + ": no fixations on sampled median frames after 10 tries");
    const bool flip = cfg.augment && rng.coin();

    const std::size_t S = cfg.input_size;
    AnnotatedClip out;
    out.task = Task::saliency;
    out.clip = detail::transform_clip(rec.frames,
                                      detail::window_indices(start, cfg.clip_len, n),
                                      {0, 0, rec.height(), rec.width()}, S, flip);

    Tensor fix({S, S});
    for (const Fixation& f : (*rec.fixations)[start + median_off]) {
        std::size_t x = detail::map_coord(f.x, rec.width(), S);
        const std::size_t y = detail::map_coord(f.y, rec.height(), S);
        if (flip) x = S - 1 - x;
        fix.at(y, x) = 1.0;
    }
    out.sal.fix = fix;
    out.sal.den = gaussian_density(fix, cfg.sigma_frac * static_cast<double>(S));
    out.sal.thr = threshold_dense(out.sal.den, cfg.dense_threshold);
    return out;
}

// ---------------------------------------------------------------------------
// Sliding-window test protocols.
// ---------------------------------------------------------------------------

// Records which windows ran and which window produced each frame's output.
struct WindowTrace {
    std::vector<std::size_t> window_starts;
    std::vector<std::size_t> frame_to_window; // index into window_starts
};

// Non-overlapping 16-frame windows with a scale-1 center crop; the video
// prediction is the mean of the per-clip softmax vectors.
inline std::vector<double> infer_action(MultiTaskNet& net, const VideoRecord& rec,
                                        const SampleConfig& cfg,
                                        WindowTrace* trace = nullptr) {
    const std::size_t n = rec.n_frames();
    const std::size_t L = cfg.clip_len;
    const std::size_t n_windows = std::max<std::size_t>(1, (n + L - 1) / L);
    const std::size_t base = std::min(rec.height(), rec.width());
    const detail::CropRect crop{(rec.height() - base) / 2, (rec.width() - base) / 2, base, base};

    std::vector<double> mean_soft(net.config().action_classes, 0.0);
    if (trace) trace->frame_to_window.assign(n, 0);
    for (std::size_t wdx = 0; wdx < n_windows; ++wdx) {
        const std::size_t start = wdx * L;
        if (trace) {
            trace->window_starts.push_back(start);
            for (std::size_t t = start; t < std::min(start + L, n); ++t)
                trace->frame_to_window[t] = wdx;
        }
        Tensor clip = detail::transform_clip(rec.frames, detail::window_indices(start, L, n),
                                             crop, cfg.input_size, false);
        Tape tape;
        TaskOutputs outs = net.forward(tape, clip, TaskSet::only(Task::action), false);
        Var soft = ops::softmax_vector(outs.action_logits);
        for (std::size_t c = 0; c < mean_soft.size(); ++c) mean_soft[c] += soft.value()[c];
    }
    for (double& v : mean_soft) v /= static_cast<double>(n_windows);
    return mean_soft;
}

// Non-overlapping windows; every frame of a window repeats the clip score.
inline std::vector<double> infer_summary_scores(MultiTaskNet& net, const VideoRecord& rec,
                                                const SampleConfig& cfg,
                                                WindowTrace* trace = nullptr) {
    const std::size_t n = rec.n_frames();
    const std::size_t L = cfg.clip_len;
    const std::size_t n_windows = std::max<std::size_t>(1, (n + L - 1) / L);
    const std::size_t base = std::min(rec.height(), rec.width());
    const detail::CropRect crop{(rec.height() - base) / 2, (rec.width() - base) / 2, base, base};

    std::vector<double> scores(n, 0.0);
    if (trace) trace->frame_to_window.assign(n, 0);
    for (std::size_t wdx = 0; wdx < n_windows; ++wdx) {
        const std::size_t start = wdx * L;
        Tensor clip = detail::transform_clip(rec.frames, detail::window_indices(start, L, n),
                                             crop, cfg.input_size, false);
        Tape tape;
        TaskOutputs outs = net.forward(tape, clip, TaskSet::only(Task::summary), false);
        const double score = 1.0 / (1.0 + std::exp(-outs.summary_logit.value().item()));
        if (trace) trace->window_starts.push_back(start);
        for (std::size_t t = start; t < std::min(start + L, n); ++t) {
            scores[t] = score;
            if (trace) trace->frame_to_window[t] = wdx;
        }
    }
    return scores;
}

// Step-1 sliding windows without spatial cropping. Frame t takes the map of
// the window whose median frame is t; boundary frames use the nearest valid
// window. Maps are returned at the record's resolution.
inline std::vector<Tensor> infer_saliency_maps(MultiTaskNet& net, const VideoRecord& rec,
                                               const SampleConfig& cfg,
                                               WindowTrace* trace = nullptr) {
    const std::size_t n = rec.n_frames();
    const std::size_t L = cfg.clip_len;
    const std::size_t S = cfg.input_size;
    const std::size_t median_off = L / 2;
    const std::size_t last_start = n > L ? n - L : 0;

    std::vector<Tensor> window_maps;
    for (std::size_t start = 0; start <= last_start; ++start) {
        Tensor clip = detail::transform_clip(rec.frames, detail::window_indices(start, L, n),
                                             {0, 0, rec.height(), rec.width()}, S, false);
        Tape tape;
        TaskOutputs outs = net.forward(tape, clip, TaskSet::only(Task::saliency), false);
        Var prob = ops::sigmoid(outs.fused_map);
        Tensor map({rec.height(), rec.width()});
        detail::resize_plane(prob.value().data(), S, S, map.data(), rec.height(), rec.width());
        window_maps.push_back(std::move(map));
        if (trace) trace->window_starts.push_back(start);
    }

    std::vector<Tensor> per_frame(n);
    if (trace) trace->frame_to_window.assign(n, 0);
    for (std::size_t t = 0; t < n; ++t) {
        std::size_t start = t >= median_off ? t - median_off : 0;
        start = std::min(start, last_start);
        per_frame[t] = window_maps[start];
        if (trace) trace->frame_to_window[t] = start;
    }
    return per_frame;
}

} // namespace vmtl
