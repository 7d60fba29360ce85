#pragma once

#include <array>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "vmtl/config.hpp"
#include "vmtl/dataset.hpp"
#include "vmtl/optimizer.hpp"
#include "vmtl/sampling.hpp"

namespace vmtl {

struct TrainStats {
    std::vector<double> epoch_losses;                     // alpha-weighted mean per epoch
    std::array<std::vector<double>, 3> task_epoch_losses; // raw per-task means
    std::size_t steps = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, const TrainStats&)>;

namespace detail {

struct PlanItem {
    std::size_t record = 0;
    std::size_t segment = 0; // summary only
};

template <typename T>
inline void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

} // namespace detail

// Epoch loop with round-robin task interleaving (saliency, action, summary,
// repeat). One epoch visits every annotated record clips_per_video times for
// saliency/action and once per 90-frame segment for summarization. The
// whole stream is a pure function of the seed.
inline TrainStats run_training(MultiTaskNet& net, MultiTaskSgd& opt, const RunConfig& cfg,
                               const std::vector<VideoRecord>& records,
                               std::ostream* loss_csv, const EpochCallback& on_epoch = {}) {
    TrainStats stats;
    if (loss_csv) *loss_csv << "step,task,loss\n";

    Rng master(cfg.seed);
    const SampleConfig scfg = cfg.sample_config(true);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng = master.fork(epoch + 1);

        std::array<std::vector<detail::PlanItem>, 3> plans;
        for (std::size_t r = 0; r < records.size(); ++r) {
            const VideoRecord& rec = records[r];
            if (cfg.tasks.has(Task::saliency) && rec.fixations)
                for (std::size_t k = 0; k < cfg.clips_per_video; ++k)
                    plans[0].push_back({r, 0});
            if (cfg.tasks.has(Task::action) && rec.action_class)
                for (std::size_t k = 0; k < cfg.clips_per_video; ++k)
                    plans[1].push_back({r, 0});
            if (cfg.tasks.has(Task::summary) && rec.importance) {
                const auto segs = uniform_segments(rec.n_frames(), cfg.summary_segment_len);
                for (std::size_t s = 0; s < segs.size(); ++s) plans[2].push_back({r, s});
            }
        }
        if (plans[0].empty() && plans[1].empty() && plans[2].empty())
            throw ConfigError("no trainable samples for the enabled tasks");
        for (auto& plan : plans) detail::shuffle(plan, rng);

        std::array<std::size_t, 3> cursor{0, 0, 0};
        std::array<double, 3> task_sum{0, 0, 0};
        std::array<std::size_t, 3> task_n{0, 0, 0};
        double weighted_sum = 0.0;
        std::size_t epoch_steps = 0;

        std::size_t rotation = 0;
        while (cursor[0] < plans[0].size() || cursor[1] < plans[1].size() ||
               cursor[2] < plans[2].size()) {
            const std::size_t ti = rotation % 3;
            rotation++;
            if (cursor[ti] >= plans[ti].size()) continue;
            const detail::PlanItem item = plans[ti][cursor[ti]++];
            const Task task = static_cast<Task>(ti);
            const VideoRecord& rec = records[item.record];

            AnnotatedClip clip;
            switch (task) {
                case Task::saliency: clip = sample_saliency_clip(rec, rng, scfg); break;
                case Task::action: clip = sample_action_clip(rec, rng, scfg); break;
                case Task::summary:
                    clip = sample_summary_clip(rec, item.segment, rng, scfg,
                                               cfg.summary_segment_len);
                    break;
            }

            double raw = 0.0;
            try {
                raw = opt.accumulate(net, clip, cfg.loss);
            } catch (const NumericError&) {
                throw NumericError("non-finite loss at step " + std::to_string(stats.steps + 1) +
                                   " (task " + task_name(task) + ")");
            }
            ++stats.steps;
            ++epoch_steps;
            task_sum[ti] += raw;
            ++task_n[ti];
            const double alpha = ti == 0   ? cfg.loss.alpha_sal
                                 : ti == 1 ? cfg.loss.alpha_act
                                           : cfg.loss.alpha_sum;
            weighted_sum += alpha * raw;

            if (loss_csv) {
                char buf[96];
                std::snprintf(buf, sizeof(buf), "%zu,%s,%.12g\n", stats.steps, task_name(task),
                              raw);
                *loss_csv << buf;
            }
            opt.maybe_step(net);
        }

        stats.epoch_losses.push_back(epoch_steps ? weighted_sum / epoch_steps : 0.0);
        for (std::size_t ti = 0; ti < 3; ++ti)
            stats.task_epoch_losses[ti].push_back(task_n[ti] ? task_sum[ti] / task_n[ti] : 0.0);

        opt.set_lr(lr_on_plateau(stats.epoch_losses, opt.config(), opt.config().lr));
        if (on_epoch) on_epoch(epoch, stats);
    }
    return stats;
}

} // namespace vmtl
