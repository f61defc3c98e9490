#pragma once

// Monte Carlo match diffusion: a forward diffusion process over
// correspondence coordinates that turns ground-truth matches into synthetic
// outliers, with the diffusion ratio, noise scale and per-match timestep all
// drawn at random and out-of-image results replaced by uniform matches.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcd/core.hpp"
#include "mcd/rng.hpp"
#include "mcd/synth.hpp"

namespace mcd {

/// Linear beta schedule over t = 0..T with the cumulative products
/// alpha_bar_t = prod_{s=1..t} (1 - beta_s) precomputed in extended precision.
class DiffusionSchedule {
public:
    DiffusionSchedule() : DiffusionSchedule(0.0005, 0.0025, 500) {}

    DiffusionSchedule(double beta_start, double beta_end, int T)
        : beta_start_(beta_start), beta_end_(beta_end), T_(T) {
        if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
            throw Error(ErrorKind::Config, "diffusion schedule needs 0 < beta_start <= beta_end < 1");
        }
        if (T < 1) throw Error(ErrorKind::Config, "diffusion schedule needs T >= 1");
        alpha_bar_.resize(static_cast<std::size_t>(T) + 1);
        long double prod = 1.0L;
        alpha_bar_[0] = 1.0;
        for (int t = 1; t <= T; ++t) {
            const long double beta = static_cast<long double>(beta_start) +
                                     (static_cast<long double>(t) / T) *
                                         (static_cast<long double>(beta_end) - static_cast<long double>(beta_start));
            prod *= 1.0L - beta;
            alpha_bar_[static_cast<std::size_t>(t)] = static_cast<double>(prod);
        }
    }

    double beta_start() const { return beta_start_; }
    double beta_end() const { return beta_end_; }
    int T() const { return T_; }
    const std::vector<double>& alpha_bar_table() const { return alpha_bar_; }

    double beta_at(int t) const {
        check(t);
        const double f = static_cast<double>(t) / T_;
        return (1.0 - f) * beta_start_ + f * beta_end_;  // exact at both ends
    }

    double alpha_bar_at(int t) const {
        check(t);
        return alpha_bar_[static_cast<std::size_t>(t)];
    }

private:
    void check(int t) const {
        if (t < 0 || t > T_) throw Error(ErrorKind::Domain, "timestep " + std::to_string(t) + " outside [0, T]");
    }

    double beta_start_, beta_end_;
    int T_;
    std::vector<double> alpha_bar_;
};

/// Closed-form forward diffusion of one correspondence to timestep t:
/// sqrt(ab_t) * c0 + sqrt(1 - ab_t) * eps * s * max_dim, eps ~ N(0, I_4).
/// The result is not bounds-checked.
inline Correspondence diffuse_match(const Correspondence& c0, const DiffusionSchedule& sched, int t, double s,
                                    double max_dim, Rng& rng) {
    const double ab = sched.alpha_bar_at(t);
    const double keep = std::sqrt(ab);
    const double spread = std::sqrt(1.0 - ab);
    const double scale = s * max_dim;
    Correspondence out;
    for (int k = 0; k < 4; ++k) {
        const double eps_hat = rng.normal() * scale;
        out[k] = keep * c0[k] + spread * eps_hat;
    }
    return out;
}

/// The same process run step by step: c_t = sqrt(1 - beta_t) c_{t-1} + sqrt(beta_t) eps_hat.
inline Correspondence diffuse_match_recursive(const Correspondence& c0, const DiffusionSchedule& sched, int t,
                                              double s, double max_dim, Rng& rng) {
    Correspondence c = c0;
    const double scale = s * max_dim;
    for (int step = 1; step <= t; ++step) {
        const double beta = sched.beta_at(step);
        const double keep = std::sqrt(1.0 - beta);
        const double spread = std::sqrt(beta);
        for (int k = 0; k < 4; ++k) c[k] = keep * c[k] + spread * (rng.normal() * scale);
    }
    return c;
}

struct GtSplit {
    std::vector<std::size_t> diffused;  // C_gt^a
    std::vector<std::size_t> kept;      // C_gt^b
};

/// Uniform random partition with |diffused| = round(r * n).
inline GtSplit split_gt(std::size_t n, double r, Rng& rng) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorKind::Domain, "diffusion ratio must lie in [0, 1]");
    const auto k = static_cast<std::size_t>(std::llround(r * static_cast<double>(n)));
    GtSplit split;
    split.diffused = detail::choose_subset(n, k, rng);
    split.kept.reserve(n - k);
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (j < split.diffused.size() && split.diffused[j] == i) {
            ++j;
        } else {
            split.kept.push_back(i);
        }
    }
    return split;
}

/// Returns c when every coordinate is inside its image, else a fresh uniform match.
inline Correspondence resample_invalid(const Correspondence& c, double w1, double h1, double w2, double h2, Rng& rng,
                                       bool* replaced = nullptr) {
    const bool ok = in_bounds(c, w1, h1, w2, h2);
    if (replaced) *replaced = !ok;
    if (ok) return c;
    return {rng.uniform(0.0, w1), rng.uniform(0.0, h1), rng.uniform(0.0, w2), rng.uniform(0.0, h2)};
}

struct McdConfig {
    DiffusionSchedule schedule{};
    double r_min = 0.2, r_max = 0.9;
    double s_min = 0.02, s_max = 0.7;
    std::uint64_t seed = 7;
    // Diffuse relative to each image's center (true) or to the pixel origin
    // at the top-left corner (false). With the corner origin the sqrt(ab_t)
    // shrinkage pulls every diffused match toward one corner.
    bool centered = true;
    // Off by default: diffused matches are outliers regardless of where they land.
    bool relabel_by_residual = false;
    double relabel_threshold = 1e-3;

    void validate() const {
        if (!(r_min >= 0.0 && r_min <= r_max && r_max <= 1.0)) throw Error(ErrorKind::Config, "mcd needs 0 <= r_min <= r_max <= 1");
        if (!(s_min > 0.0 && s_min <= s_max)) throw Error(ErrorKind::Config, "mcd needs 0 < s_min <= s_max");
    }
};

enum class Origin : std::uint8_t { Kept, Diffused, Resampled };

inline const char* to_string(Origin o) {
    switch (o) {
        case Origin::Kept: return "kept";
        case Origin::Diffused: return "diffused";
        case Origin::Resampled: return "resampled";
    }
    return "?";
}

struct Provenance {
    Origin origin = Origin::Kept;
    int t = 0;  // 0 for kept matches
};

struct DiffusedSet {
    MatchSet matches;  // labels inside: true = member of the clean subset
    std::vector<Provenance> provenance;
    double sampled_r = 0.0;
    double sampled_s = 0.0;
};

/// One Monte Carlo draw: RND-r, split, RND-s, per-match RND-t, diffusion,
/// resampling of invalid matches, union with the clean subset. Diffused
/// matches keep the slot of the ground-truth match they came from.
inline DiffusedSet mcd_sample(const MatchSet& gt, const McdConfig& cfg, const Camera& cam1, const Camera& cam2,
                              Rng& rng, const RelativePose* gt_pose = nullptr) {
    cfg.validate();
    if (gt.size() == 0) throw Error(ErrorKind::InsufficientData, "mcd_sample needs a non-empty ground-truth set");
    const double w1 = cam1.width, h1 = cam1.height, w2 = cam2.width, h2 = cam2.height;
    for (const auto& c : gt.matches) {
        if (!in_bounds(c, w1, h1, w2, h2)) throw Error(ErrorKind::Data, "ground-truth match outside image bounds");
    }
    const double max_dim = std::max({w1, h1, w2, h2});
    const Correspondence origin = cfg.centered ? Correspondence{w1 / 2, h1 / 2, w2 / 2, h2 / 2} : Correspondence{};

    DiffusedSet out;
    out.matches = MatchSet::for_cameras(cam1, cam2);
    out.matches.matches = gt.matches;
    out.matches.labels.assign(gt.size(), true);
    out.provenance.assign(gt.size(), Provenance{});

    out.sampled_r = rng.uniform(cfg.r_min, cfg.r_max);
    const GtSplit split = split_gt(gt.size(), out.sampled_r, rng);
    out.sampled_s = rng.uniform(cfg.s_min, cfg.s_max);

    const int T = cfg.schedule.T();
    for (const std::size_t i : split.diffused) {
        const int t = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(T)));
        Correspondence c0 = gt.matches[i];
        for (int k = 0; k < 4; ++k) c0[k] -= origin[k];
        Correspondence noised = diffuse_match(c0, cfg.schedule, t, out.sampled_s, max_dim, rng);
        for (int k = 0; k < 4; ++k) noised[k] += origin[k];
        bool replaced = false;
        out.matches.matches[i] = resample_invalid(noised, w1, h1, w2, h2, rng, &replaced);
        out.matches.labels[i] = false;
        out.provenance[i] = {replaced ? Origin::Resampled : Origin::Diffused, t};
    }
    if (cfg.relabel_by_residual) {
        if (!gt_pose) throw Error(ErrorKind::Config, "relabel_by_residual needs the ground-truth pose");
        out.matches.labels = label_by_residual(out.matches, cam1, cam2, *gt_pose, cfg.relabel_threshold);
    }
    return out;
}

inline DiffusedSet mcd_sample(const ScenePair& scene, const McdConfig& cfg, Rng& rng) {
    return mcd_sample(scene.gt_matches, cfg, scene.cam1, scene.cam2, rng, &scene.pose);
}

/// Stream of independent Monte Carlo draws, one per source scene. Scene i is
/// diffused with the sub-stream derive_seed(master_seed, i).
template <typename Source>
class McdStream {
public:
    McdStream(Source source, McdConfig cfg, std::uint64_t master_seed)
        : source_(std::move(source)), cfg_(std::move(cfg)), master_seed_(master_seed) {}

    std::optional<DiffusedSet> next() {
        std::optional<ScenePair> scene = source_();
        if (!scene) return std::nullopt;
        Rng rng(derive_seed(master_seed_, index_++));
        return mcd_sample(*scene, cfg_, rng);
    }

    std::uint64_t emitted() const { return index_; }

private:
    Source source_;
    McdConfig cfg_;
    std::uint64_t master_seed_;
    std::uint64_t index_ = 0;
};

/// Source over an in-memory scene list.
inline auto scene_list_source(const std::vector<ScenePair>& scenes) {
    return [&scenes, i = std::size_t{0}]() mutable -> std::optional<ScenePair> {
        if (i >= scenes.size()) return std::nullopt;
        return scenes[i++];
    };
}

}  // namespace mcd
