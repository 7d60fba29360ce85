// Command-line front end: dataset generation, training, evaluation,
// inference and the gradient-check table.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "vmtl/checkpoint.hpp"
#include "vmtl/config.hpp"
#include "vmtl/dataset.hpp"
#include "vmtl/evaluate.hpp"
#include "vmtl/gradcheck.hpp"
#include "vmtl/train.hpp"

namespace fs = std::filesystem;
using namespace vmtl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<VideoRecord> load_dataset(const fs::path& dir) {
    std::vector<VideoRecord> records;
    for (const fs::path& p : list_records(dir)) records.push_back(read_record(p));
    if (records.empty()) throw DataError("dataset " + dir.string() + " has no records");
    return records;
}

int cmd_gen_data(const fs::path& out, std::size_t videos, std::size_t frames,
                 std::size_t classes, std::uint64_t seed, std::size_t height,
                 std::size_t width) {
    const auto records = synth_generate(seed, videos, frames, classes, height, width);
    for (const VideoRecord& rec : records) write_record(out / rec.id, rec);
    std::printf("wrote %zu records to %s\n", records.size(), out.string().c_str());
    return kExitOk;
}

int cmd_train(const std::string& config_path, const fs::path& out, long long seed_override) {
    RunConfig cfg = load_config(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (cfg.data_dir.empty()) throw ConfigError("config must set data=<dataset dir>");
    cfg.net.validate();
    cfg.opt.validate();

    const auto records = load_dataset(cfg.data_dir);
    MultiTaskNet net(cfg.net, cfg.seed);
    MultiTaskSgd opt(net, cfg.opt);

    fs::create_directories(out);
    std::ofstream loss_csv(out / "loss.csv");
    if (!loss_csv) throw ParseError("cannot write " + (out / "loss.csv").string());

    const TrainStats stats = run_training(
        net, opt, cfg, records, &loss_csv, [&](std::size_t epoch, const TrainStats& s) {
            std::printf("epoch %zu/%zu loss %s lr %s\n", epoch + 1, cfg.epochs,
                        fmt(s.epoch_losses.back()).c_str(), fmt(opt.lr()).c_str());
            if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
                epoch + 1 < cfg.epochs) {
                const fs::path dir = out / ("checkpoint_epoch" + std::to_string(epoch + 1));
                save_model(dir, net);
                std::ofstream(dir / "config.txt") << serialize_config(cfg);
            }
        });

    const fs::path final_dir = out / "checkpoint_final";
    save_model(final_dir, net);
    save_optimizer(final_dir / "opt", net, opt);
    std::ofstream(final_dir / "config.txt") << serialize_config(cfg);
    std::printf("trained %zu steps over %zu epochs\n", stats.steps, cfg.epochs);
    return kExitOk;
}

RunConfig checkpoint_config(const fs::path& checkpoint, const std::string& config_override) {
    if (!config_override.empty()) return load_config(config_override);
    return load_config((checkpoint / "config.txt").string());
}

int cmd_eval(const fs::path& checkpoint, const fs::path& out, const std::string& task_arg,
             const std::string& config_override, const std::string& data_override) {
    RunConfig cfg = checkpoint_config(checkpoint, config_override);
    if (!data_override.empty()) cfg.data_dir = data_override;
    if (cfg.data_dir.empty()) throw ConfigError("no dataset: set data= in config or --data");

    TaskSet tasks = task_arg == "all" ? TaskSet::all() : TaskSet::only(task_from_name(task_arg));
    MultiTaskNet net(cfg.net, cfg.seed);
    load_model(checkpoint, net);
    const auto records = load_dataset(cfg.data_dir);

    std::vector<MetricRow> rows;
    std::array<std::size_t, 3> covered{0, 0, 0};
    for (const VideoRecord& rec : records) {
        if (tasks.has(Task::saliency) && rec.fixations) {
            const SaliencyEval ev = eval_saliency(net, rec, cfg);
            rows.push_back({"cc", rec.id, ev.cc});
            rows.push_back({"nss", rec.id, ev.nss});
            rows.push_back({"auc_judd", rec.id, ev.auc_j});
            if (ev.sauc_frames) rows.push_back({"sauc", rec.id, ev.sauc});
            ++covered[0];
        }
        if (tasks.has(Task::action) && rec.action_class) {
            const ActionEval ev = eval_action(net, rec, cfg);
            rows.push_back({"accuracy", rec.id, ev.correct ? 1.0 : 0.0});
            ++covered[1];
        }
        if (tasks.has(Task::summary) && rec.importance) {
            const SummaryEval ev = eval_summary(net, rec, cfg);
            rows.push_back({"roc_auc", rec.id, ev.roc_auc});
            rows.push_back({"fscore_max", rec.id, ev.f_max});
            rows.push_back({"fscore_mean", rec.id, ev.f_mean});
            ++covered[2];
        }
    }
    for (Task t : kAllTasks)
        if (tasks.has(t) && covered[static_cast<std::size_t>(t)] == 0 && task_arg != "all")
            throw DataError("no records carry the annotation needed for task " +
                            std::string(task_name(t)));
    if (rows.empty()) throw DataError("nothing to evaluate");

    fs::create_directories(out);
    std::ofstream report(out / "report.tsv");
    write_metric_report(report, rows);
    std::ofstream summary(out / "summary.tsv");
    write_metric_summary(summary, rows);
    std::printf("evaluated %zu records; report in %s\n", records.size(), out.string().c_str());
    return kExitOk;
}

int cmd_infer(const fs::path& checkpoint, const fs::path& video, const fs::path& out,
              const std::string& task_arg, const std::string& config_override) {
    RunConfig cfg = checkpoint_config(checkpoint, config_override);
    MultiTaskNet net(cfg.net, cfg.seed);
    load_model(checkpoint, net);
    const VideoRecord rec = read_record(video);
    const Task task = task_from_name(task_arg);
    fs::create_directories(out);

    if (task == Task::saliency) {
        const auto maps = infer_saliency_maps(net, rec, cfg.sample_config(false));
        const fs::path mapdir = out / "maps";
        fs::create_directories(mapdir);
        for (std::size_t t = 0; t < maps.size(); ++t) {
            char name[32];
            std::snprintf(name, sizeof(name), "frame_%05zu.stsr", t);
            save_stsr(mapdir / name, maps[t]);
        }
        std::printf("wrote %zu saliency maps\n", maps.size());
    } else if (task == Task::action) {
        const auto soft = infer_action(net, rec, cfg.sample_config(false));
        const auto pred = static_cast<std::size_t>(
            std::max_element(soft.begin(), soft.end()) - soft.begin());
        std::ofstream os(out / "action.txt");
        os << "predicted=" << pred << '\n';
        for (std::size_t c = 0; c < soft.size(); ++c)
            os << c << ' ' << fmt(soft[c]) << '\n';
        std::printf("predicted class %zu\n", pred);
    } else {
        const auto scores = infer_summary_scores(net, rec, cfg.sample_config(false));
        const auto machine =
            keyshot_summary(scores, cfg.summary_segment_len, cfg.summary_budget_frac);
        {
            std::ofstream os(out / "scores.txt");
            for (double s : scores) os << fmt(s) << '\n';
        }
        {
            std::ofstream os(out / "selection.txt");
            for (std::uint8_t m : machine) os << int(m) << '\n';
        }
        {
            const auto shots = uniform_segments(rec.n_frames(), cfg.summary_segment_len);
            std::ofstream os(out / "keyshots.txt");
            for (const Segment& s : shots) {
                bool all = true;
                for (std::size_t t = s.start; t < s.end; ++t) all = all && machine[t];
                if (all && s.length() > 0) os << s.start << ' ' << s.end << '\n';
            }
        }
        std::size_t selected = 0;
        for (std::uint8_t m : machine) selected += m;
        std::printf("selected %zu of %zu frames\n", selected, machine.size());
    }
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, int instances) {
    Rng rng(seed);
    bool all_ok = true;
    std::printf("%-20s %-14s %s\n", "op", "max_rel_err", "status");
    for (auto& check : gradcheck::standard_checks()) {
        const double err = check.run(rng, instances);
        const bool ok = err < 1e-4;
        all_ok = all_ok && ok;
        std::printf("%-20s %-14.3e %s\n", check.name.c_str(), err, ok ? "PASS" : "FAIL");
    }
    if (!all_ok) {
        std::printf("gradient check FAILED\n");
        return kExitRuntime;
    }
    std::printf("all gradient checks passed\n");
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-task spatio-temporal video network (saliency, action, summarization)"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    fs::path gen_out;
    std::size_t gen_videos = 20, gen_frames = 96, gen_classes = 4;
    std::size_t gen_h = 64, gen_w = 64;
    std::uint64_t gen_seed = 0;
    gen->add_option("--out", gen_out, "output dataset directory")->required();
    gen->add_option("--videos", gen_videos, "number of videos");
    gen->add_option("--frames", gen_frames, "frames per video");
    gen->add_option("--classes", gen_classes, "number of motion classes");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--height", gen_h, "frame height");
    gen->add_option("--width", gen_w, "frame width");

    // train
    auto* train = app.add_subcommand("train", "train from a config file");
    std::string train_config;
    fs::path train_out;
    long long train_seed = -1;
    train->add_option("--config", train_config, "key=value config file")->required();
    train->add_option("--out", train_out, "run output directory")->required();
    train->add_option("--seed", train_seed, "override the config seed");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    fs::path eval_ckpt, eval_out;
    std::string eval_task = "all", eval_config, eval_data;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
    eval->add_option("--out", eval_out, "report output directory")->required();
    eval->add_option("--task", eval_task, "saliency|action|summary|all");
    eval->add_option("--config", eval_config, "config override (default: checkpoint config)");
    eval->add_option("--data", eval_data, "dataset override");

    // infer
    auto* infer = app.add_subcommand("infer", "run one video through a checkpoint");
    fs::path infer_ckpt, infer_video, infer_out;
    std::string infer_task, infer_config;
    infer->add_option("--checkpoint", infer_ckpt, "checkpoint directory")->required();
    infer->add_option("--video", infer_video, "record directory")->required();
    infer->add_option("--task", infer_task, "saliency|action|summary")->required();
    infer->add_option("--out", infer_out, "output directory")->required();
    infer->add_option("--config", infer_config, "config override");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference table for every op and loss");
    std::uint64_t gc_seed = 0;
    int gc_instances = 20;
    gc->add_option("--seed", gc_seed, "rng seed");
    gc->add_option("--instances", gc_instances, "random instances per op");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(gen_out, gen_videos, gen_frames, gen_classes, gen_seed, gen_h,
                                gen_w);
        if (train->parsed()) return cmd_train(train_config, train_out, train_seed);
        if (eval->parsed())
            return cmd_eval(eval_ckpt, eval_out, eval_task, eval_config, eval_data);
        if (infer->parsed())
            return cmd_infer(infer_ckpt, infer_video, infer_out, infer_task, infer_config);
        if (gc->parsed()) return cmd_gradcheck(gc_seed, gc_instances);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitValidation;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return kExitValidation;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitValidation;
    } catch (const ValueError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitRuntime;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
