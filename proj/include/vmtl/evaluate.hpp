#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "vmtl/config.hpp"
#include "vmtl/dataset.hpp"
#include "vmtl/metrics.hpp"
#include "vmtl/sampling.hpp"

namespace vmtl {

// Per-video saliency scores, averaged over every frame that has fixations.
struct SaliencyEval {
    double cc = 0.0;
    double nss = 0.0;
    double auc_j = 0.0;
    double sauc = 0.0;
    std::size_t frames_scored = 0;
    std::size_t sauc_frames = 0; // frames with a non-empty negative pool
};

inline SaliencyEval eval_saliency(MultiTaskNet& net, const VideoRecord& rec,
                                  const RunConfig& cfg) {
    if (!rec.fixations) throw DataError(rec.id + ": no fixation annotation to evaluate");
    const SampleConfig scfg = cfg.sample_config(false);
    const std::vector<Tensor> maps = infer_saliency_maps(net, rec, scfg);
    const double sigma = cfg.sigma_frac * static_cast<double>(rec.height());

    SaliencyEval out;
    for (std::size_t t = 0; t < rec.n_frames(); ++t) {
        const FixationFrame& fix = (*rec.fixations)[t];
        if (fix.empty()) continue;
        const Tensor mask = detail::fixation_mask(fix, rec.height(), rec.width());
        const Tensor den = gaussian_density(mask, sigma);
        out.cc += metric_cc(maps[t], den);
        out.nss += metric_nss(maps[t], fix);
        out.auc_j += auc_judd(maps[t], fix);
        ++out.frames_scored;

        FixationFrame pool;
        for (std::size_t u = 0; u < rec.n_frames(); ++u) {
            if (u == t) continue;
            for (const Fixation& f : (*rec.fixations)[u]) pool.push_back(f);
        }
        // pixels fixated in this frame are excluded inside shuffled_auc; a
        // pool that empties out entirely just skips the frame
        try {
            out.sauc += shuffled_auc(maps[t], fix, pool);
            ++out.sauc_frames;
        } catch (const ValueError&) {
        }
    }
    if (out.frames_scored == 0) throw DataError(rec.id + ": no frames with fixations");
    out.cc /= static_cast<double>(out.frames_scored);
    out.nss /= static_cast<double>(out.frames_scored);
    out.auc_j /= static_cast<double>(out.frames_scored);
    if (out.sauc_frames) out.sauc /= static_cast<double>(out.sauc_frames);
    return out;
}

struct ActionEval {
    int predicted = -1;
    std::vector<double> mean_softmax;
    bool correct = false;
};

inline ActionEval eval_action(MultiTaskNet& net, const VideoRecord& rec, const RunConfig& cfg) {
    if (!rec.action_class) throw DataError(rec.id + ": no action label to evaluate");
    ActionEval out;
    out.mean_softmax = infer_action(net, rec, cfg.sample_config(false));
    out.predicted = static_cast<int>(std::max_element(out.mean_softmax.begin(),
                                                      out.mean_softmax.end()) -
                                     out.mean_softmax.begin());
    out.correct = out.predicted == *rec.action_class;
    return out;
}

struct SummaryEval {
    double roc_auc = 0.0;
    double f_max = 0.0;
    double f_mean = 0.0;
    std::vector<double> scores;            // per frame
    std::vector<std::uint8_t> machine;     // keyshot selection, per frame
};

// Keyshot selection: uniform segments scored by mean frame importance,
// picked by exact knapsack under the duration budget.
inline std::vector<std::uint8_t> keyshot_summary(const std::vector<double>& frame_scores,
                                                 std::size_t seg_len, double budget_frac) {
    const std::size_t n = frame_scores.size();
    const auto shots = uniform_segments(n, seg_len);
    std::vector<double> shot_scores(shots.size(), 0.0);
    for (std::size_t s = 0; s < shots.size(); ++s) {
        double m = 0.0;
        for (std::size_t t = shots[s].start; t < shots[s].end; ++t) m += frame_scores[t];
        shot_scores[s] = m / static_cast<double>(shots[s].length());
    }
    const auto budget = static_cast<std::size_t>(std::floor(budget_frac * static_cast<double>(n)));
    const auto picked = knapsack_select(shots, shot_scores, budget);
    std::vector<std::uint8_t> machine(n, 0);
    for (std::size_t s : picked)
        for (std::size_t t = shots[s].start; t < shots[s].end; ++t) machine[t] = 1;
    return machine;
}

inline SummaryEval eval_summary(MultiTaskNet& net, const VideoRecord& rec, const RunConfig& cfg) {
    if (!rec.importance) throw DataError(rec.id + ": no importance annotation to evaluate");
    SummaryEval out;
    out.scores = infer_summary_scores(net, rec, cfg.sample_config(false));

    std::vector<std::uint8_t> labels(rec.n_frames());
    for (std::size_t t = 0; t < labels.size(); ++t)
        labels[t] = (*rec.importance)[t] >= 0.5 ? 1 : 0;
    out.roc_auc = roc_auc_frames(out.scores, labels);

    out.machine = keyshot_summary(out.scores, cfg.summary_segment_len, cfg.summary_budget_frac);
    // the reference summary comes from the annotated importance through the
    // same keyshot pipeline
    const auto user = keyshot_summary(*rec.importance, cfg.summary_segment_len,
                                      cfg.summary_budget_frac);
    const FscoreResult f = fscore_summary(out.machine, {user});
    out.f_max = f.f_max;
    out.f_mean = f.f_mean;
    return out;
}

} // namespace vmtl
