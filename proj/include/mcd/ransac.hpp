#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mcd/core.hpp"
#include "mcd/geometry.hpp"
#include "mcd/rng.hpp"

namespace mcd {

inline constexpr std::size_t kMinimalSetSize = 8;

struct RansacConfig {
    double threshold = 1e-3;  // Sampson distance, normalized units
    std::size_t max_iters = 1000;
    double confidence = 0.999;
    std::size_t min_set = kMinimalSetSize;
    bool refine = true;
    std::uint64_t seed = 11;

    void validate() const {
        if (!(threshold > 0.0)) throw Error(ErrorKind::Config, "ransac.threshold must be > 0");
        if (max_iters < 1) throw Error(ErrorKind::Config, "ransac.max_iters must be >= 1");
        if (!(confidence > 0.0 && confidence < 1.0)) throw Error(ErrorKind::Config, "ransac.confidence must lie in (0, 1)");
        if (min_set != kMinimalSetSize) throw Error(ErrorKind::Config, "ransac.min_set must be 8");
    }
};

struct EstimationResult {
    EssentialHypothesis hypothesis;
    RelativePose pose;
    std::size_t iterations_used = 0;
    double inlier_ratio = 0.0;
};

/// m distinct indices; each draw picks index i with probability
/// w_i / (sum of weights not drawn yet).
inline std::vector<std::size_t> sample_minimal_set(std::span<const double> weights, std::size_t m, Rng& rng) {
    std::size_t positive = 0;
    for (const double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::Numeric, "sampling weights must be finite and >= 0");
        positive += w > 0.0 ? 1 : 0;
    }
    if (positive < m) throw Error(ErrorKind::SamplingInfeasible, "fewer positive weights than the sample size");

    std::vector<std::size_t> picked;
    picked.reserve(m);
    std::vector<bool> taken(weights.size(), false);
    double remaining = 0.0;
    for (const double w : weights) remaining += w;
    for (std::size_t j = 0; j < m; ++j) {
        const double u = rng.uniform() * remaining;
        double acc = 0.0;
        std::size_t choice = weights.size();
        std::size_t last_positive = weights.size();
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (taken[i] || weights[i] <= 0.0) continue;
            last_positive = i;
            acc += weights[i];
            if (u < acc) {
                choice = i;
                break;
            }
        }
        if (choice == weights.size()) choice = last_positive;  // u rounded up to the total
        taken[choice] = true;
        picked.push_back(choice);
        // Recompute instead of subtracting so rounding error never accumulates.
        remaining = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (!taken[i]) remaining += weights[i];
        }
    }
    return picked;
}

struct InlierCount {
    std::vector<bool> mask;
    std::size_t score = 0;
};

inline InlierCount count_inliers(const Eigen::Matrix3d& E, std::span<const Correspondence> normalized, double threshold) {
    InlierCount out;
    out.mask.resize(normalized.size());
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        const bool in = within_threshold(sampson_distance(E, normalized[i]), threshold);
        out.mask[i] = in;
        out.score += in ? 1 : 0;
    }
    return out;
}

/// ceil(log(1 - p) / log(1 - w^m)) clamped to [1, max_iters].
inline std::size_t adaptive_iters(double w, std::size_t m, double p, std::size_t max_iters) {
    if (w >= 1.0) return 1;
    const double wm = std::pow(w, static_cast<double>(m));
    if (!(wm > 0.0)) return max_iters;
    const double denom = std::log1p(-wm);
    if (!(denom < 0.0)) return max_iters;
    const double n = std::ceil(std::log1p(-p) / denom);
    if (!(n < static_cast<double>(max_iters))) return max_iters;
    return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

namespace detail {

inline std::vector<Correspondence> gather(std::span<const Correspondence> ms, std::span<const std::size_t> idx) {
    std::vector<Correspondence> out;
    out.reserve(idx.size());
    for (const std::size_t i : idx) out.push_back(ms[i]);
    return out;
}

inline std::vector<Correspondence> gather_mask(std::span<const Correspondence> ms, const std::vector<bool>& mask) {
    std::vector<Correspondence> out;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        if (mask[i]) out.push_back(ms[i]);
    }
    return out;
}

}  // namespace detail

/// RANSAC on normalized correspondences. Uniform sampling when weights is
/// empty, otherwise guided by the weights.
inline EstimationResult ransac_estimate_normalized(std::span<const Correspondence> normalized,
                                                   std::span<const double> weights, const RansacConfig& cfg) {
    cfg.validate();
    const std::size_t n = normalized.size();
    if (n < cfg.min_set) throw Error(ErrorKind::EstimationFailed, "fewer than 8 correspondences");
    if (!weights.empty() && weights.size() != n) throw Error(ErrorKind::Data, "weight count differs from match count");

    const std::vector<double> uniform(weights.empty() ? n : 0, 1.0);
    const std::span<const double> w = weights.empty() ? std::span<const double>(uniform) : weights;

    Rng rng(cfg.seed);
    std::optional<EssentialHypothesis> best;
    std::size_t bound = cfg.max_iters;
    std::size_t iter = 0;
    for (; iter < bound; ++iter) {
        const auto idx = sample_minimal_set(w, cfg.min_set, rng);
        const auto sample = detail::gather(normalized, idx);
        Eigen::Matrix3d E;
        try {
            E = eight_point(sample);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::SolverDegenerate || e.kind() == ErrorKind::Numeric) continue;
            throw;
        }
        InlierCount ic = count_inliers(E, normalized, cfg.threshold);
        if (!best || ic.score > best->score) {  // strict: ties keep the earlier hypothesis
            best = EssentialHypothesis{E, std::move(ic.mask), ic.score};
            const double ratio = static_cast<double>(best->score) / static_cast<double>(n);
            bound = std::min(bound, std::max(iter + 1, adaptive_iters(ratio, cfg.min_set, cfg.confidence, cfg.max_iters)));
        }
    }
    if (!best) throw Error(ErrorKind::EstimationFailed, "every sampled minimal set was degenerate");

    if (cfg.refine && best->score >= cfg.min_set) {
        try {
            const Eigen::Matrix3d E = eight_point(detail::gather_mask(normalized, best->inlier_mask));
            InlierCount ic = count_inliers(E, normalized, cfg.threshold);
            if (ic.score >= best->score) best = EssentialHypothesis{E, std::move(ic.mask), ic.score};
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::SolverDegenerate && e.kind() != ErrorKind::Numeric) throw;
        }
    }

    EstimationResult result;
    const auto inliers = detail::gather_mask(normalized, best->inlier_mask);
    try {
        result.pose = decompose_essential(best->E, inliers);
    } catch (const Error& e) {
        throw Error(ErrorKind::EstimationFailed, e.what());
    }
    result.iterations_used = iter;
    result.inlier_ratio = static_cast<double>(best->score) / static_cast<double>(n);
    result.hypothesis = std::move(*best);
    return result;
}

/// RANSAC on pixel correspondences; normalizes with the camera intrinsics.
inline EstimationResult ransac_estimate(const MatchSet& ms, const Camera& cam1, const Camera& cam2,
                                        std::span<const double> weights, const RansacConfig& cfg) {
    const auto normalized = normalize_matches(ms.matches, cam1, cam2);
    return ransac_estimate_normalized(normalized, weights, cfg);
}

}  // namespace mcd
