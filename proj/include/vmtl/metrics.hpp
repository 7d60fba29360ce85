#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "vmtl/losses.hpp"
#include "vmtl/tensor.hpp"

namespace vmtl {

// One gaze landing point in integer pixel units.
struct Fixation {
    int x = 0;
    int y = 0;
    friend bool operator==(const Fixation& a, const Fixation& b) {
        return a.x == b.x && a.y == b.y;
    }
};

using FixationFrame = std::vector<Fixation>;

namespace detail {

// AUC via tie-averaged ranks; equals the pairwise Mann-Whitney statistic
// Pr(pos > neg) + 0.5 * Pr(tie).
inline double rank_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty())
        throw ValueError("auc: needs at least one positive and one negative");
    std::vector<std::pair<double, int>> all;
    all.reserve(pos.size() + neg.size());
    for (double v : pos) all.emplace_back(v, 1);
    for (double v : neg) all.emplace_back(v, 0);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        // ranks i+1..j averaged over the tie group
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (all[k].second) rank_sum_pos += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(pos.size());
    const double nn = static_cast<double>(neg.size());
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

inline Tensor fixation_mask(const FixationFrame& fix, std::size_t h, std::size_t w) {
    Tensor mask({h, w});
    for (const Fixation& f : fix) {
        if (f.x < 0 || f.y < 0 || f.x >= static_cast<int>(w) || f.y >= static_cast<int>(h))
            throw ValueError("fixation outside frame bounds");
        mask.at(static_cast<std::size_t>(f.y), static_cast<std::size_t>(f.x)) = 1.0;
    }
    return mask;
}

} // namespace detail

// Linear correlation between predicted and ground-truth dense maps.
inline double metric_cc(const Tensor& p, const Tensor& den) {
    return detail::pearson_corr(p, den);
}

// Mean standardized prediction at fixated pixels.
inline double metric_nss(const Tensor& p, const FixationFrame& fix) {
    return detail::nss_score(p, detail::fixation_mask(fix, p.dim(0), p.dim(1)));
}

// Fixated pixels against all remaining pixels.
inline double auc_judd(const Tensor& p, const FixationFrame& fix) {
    check_dim(p.rank() == 2, "auc_judd: map must be rank 2");
    const Tensor mask = detail::fixation_mask(fix, p.dim(0), p.dim(1));
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < p.numel(); ++i)
        (mask[i] != 0.0 ? pos : neg).push_back(p[i]);
    if (pos.empty() || neg.empty())
        throw ValueError("auc_judd: degenerate fixation coverage");
    return detail::rank_auc(pos, neg);
}

// AUC with negatives restricted to pixels fixated in other frames; pixels
// fixated in the current frame are removed from the negative pool.
inline double shuffled_auc(const Tensor& p, const FixationFrame& fix,
                           const FixationFrame& negative_pool) {
    check_dim(p.rank() == 2, "shuffled_auc: map must be rank 2");
    const std::size_t h = p.dim(0), w = p.dim(1);
    const Tensor pos_mask = detail::fixation_mask(fix, h, w);
    const Tensor pool_mask = detail::fixation_mask(negative_pool, h, w);
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < p.numel(); ++i) {
        if (pos_mask[i] != 0.0) pos.push_back(p[i]);
        else if (pool_mask[i] != 0.0) neg.push_back(p[i]);
    }
    if (pos.empty()) throw ValueError("shuffled_auc: frame has no fixations");
    if (neg.empty()) throw ValueError("shuffled_auc: empty negative pool");
    return detail::rank_auc(pos, neg);
}

// Dense map from a binary fixation map: truncated Gaussian splat (square
// window of half-width ceil(3*sigma)), peak-normalized to 1. A map with no
// fixations stays all zero.
inline Tensor gaussian_density(const Tensor& fix, double sigma) {
    check_dim(fix.rank() == 2, "gaussian_density: map must be rank 2");
    if (sigma <= 0.0) throw ValueError("gaussian_density: sigma must be positive");
    const std::size_t h = fix.dim(0), w = fix.dim(1);
    const long r = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<Fixation> pts;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            if (fix.at(y, x) != 0.0)
                pts.push_back({static_cast<int>(x), static_cast<int>(y)});
    Tensor out({h, w});
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (const Fixation& f : pts) {
                const long dy = static_cast<long>(y) - f.y;
                const long dx = static_cast<long>(x) - f.x;
                if (dy < -r || dy > r || dx < -r || dx > r) continue;
                acc += std::exp(-static_cast<double>(dy * dy + dx * dx) * inv2s2);
            }
            out.at(y, x) = acc;
        }
    double mx = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) mx = std::max(mx, out[i]);
    if (mx > 0.0)
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= mx;
    return out;
}

// Half-open frame range of one temporal shot.
struct Segment {
    std::size_t start = 0;
    std::size_t end = 0; // exclusive
    std::size_t length() const { return end - start; }
    friend bool operator==(const Segment& a, const Segment& b) {
        return a.start == b.start && a.end == b.end;
    }
};

// Fixed-length non-overlapping segmentation; the last segment may be short.
inline std::vector<Segment> uniform_segments(std::size_t n_frames, std::size_t seg_len = 90) {
    if (seg_len == 0) throw ValueError("uniform_segments: segment length must be positive");
    std::vector<Segment> out;
    for (std::size_t s = 0; s < n_frames; s += seg_len)
        out.push_back({s, std::min(s + seg_len, n_frames)});
    return out;
}

// Exact 0/1 knapsack: weight = shot length, value = score * length,
// capacity = budget in frames. Returns selected shot indices (ascending).
inline std::vector<std::size_t> knapsack_select(const std::vector<Segment>& shots,
                                                const std::vector<double>& scores,
                                                std::size_t budget_frames) {
    check_dim(shots.size() == scores.size(), "knapsack_select: scores/shots size mismatch");
    const std::size_t n = shots.size();
    const std::size_t cap = budget_frames;
    // dp[i][w] = best value using the first i shots within capacity w
    std::vector<std::vector<double>> dp(n + 1, std::vector<double>(cap + 1, 0.0));
    for (std::size_t i = 1; i <= n; ++i) {
        const std::size_t wi = shots[i - 1].length();
        const double vi = scores[i - 1] * static_cast<double>(wi);
        for (std::size_t w = 0; w <= cap; ++w) {
            dp[i][w] = dp[i - 1][w];
            if (wi <= w && dp[i - 1][w - wi] + vi > dp[i][w])
                dp[i][w] = dp[i - 1][w - wi] + vi;
        }
    }
    std::vector<std::size_t> picked;
    std::size_t w = cap;
    for (std::size_t i = n; i > 0; --i) {
        if (dp[i][w] != dp[i - 1][w]) {
            picked.push_back(i - 1);
            w -= shots[i - 1].length();
        }
    }
    std::reverse(picked.begin(), picked.end());
    return picked;
}

struct FscoreResult {
    double f_max = 0.0;  // best-matching user summary
    double f_mean = 0.0; // average over user summaries
};

// Keyshot F-score of a machine summary against user summaries, as harmonic
// mean of frame overlap precision/recall per user.
inline FscoreResult fscore_summary(const std::vector<std::uint8_t>& machine,
                                   const std::vector<std::vector<std::uint8_t>>& users) {
    if (users.empty()) throw ValueError("fscore_summary: needs at least one user summary");
    double best = 0.0, total = 0.0;
    std::size_t n_machine = 0;
    for (std::uint8_t m : machine) n_machine += m != 0;
    for (const auto& user : users) {
        check_dim(user.size() == machine.size(), "fscore_summary: frame count mismatch");
        std::size_t n_user = 0, overlap = 0;
        for (std::size_t i = 0; i < machine.size(); ++i) {
            n_user += user[i] != 0;
            overlap += (machine[i] != 0 && user[i] != 0);
        }
        const double p = n_machine ? static_cast<double>(overlap) / n_machine : 0.0;
        const double r = n_user ? static_cast<double>(overlap) / n_user : 0.0;
        const double f = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        best = std::max(best, f);
        total += f;
    }
    return {best, total / static_cast<double>(users.size())};
}

// Frame-wise ROC area over all distinct score thresholds.
inline double roc_auc_frames(const std::vector<double>& scores,
                             const std::vector<std::uint8_t>& labels) {
    check_dim(scores.size() == labels.size(), "roc_auc_frames: size mismatch");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i)
        (labels[i] != 0 ? pos : neg).push_back(scores[i]);
    if (pos.empty() || neg.empty())
        throw ValueError("roc_auc_frames: needs both classes present");
    return detail::rank_auc(pos, neg);
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

struct MetricRow {
    std::string metric;
    std::string video;
    double value = 0.0;
};

inline std::string format_metric_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline void write_metric_report(std::ostream& os, const std::vector<MetricRow>& rows) {
    for (const MetricRow& r : rows)
        os << r.metric << '\t' << r.video << '\t' << format_metric_value(r.value) << '\n';
}

// Per-metric means in first-appearance order.
inline void write_metric_summary(std::ostream& os, const std::vector<MetricRow>& rows) {
    std::vector<std::string> order;
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const MetricRow& r : rows) {
        auto [it, inserted] = acc.try_emplace(r.metric, std::pair<double, std::size_t>{0.0, 0});
        if (inserted) order.push_back(r.metric);
        it->second.first += r.value;
        it->second.second += 1;
    }
    for (const std::string& m : order) {
        const auto& [sum, count] = acc[m];
        os << m << '\t' << format_metric_value(sum / static_cast<double>(count)) << '\n';
    }
}

} // namespace vmtl
