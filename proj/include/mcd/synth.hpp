#pragma once

// Synthetic two-view scenes with exact ground-truth correspondences, and
// "matcher style" corruptions that imitate the statistics of different
// feature matchers (localization noise, gross outliers, grid quantization,
// density).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "mcd/core.hpp"
#include "mcd/geometry.hpp"
#include "mcd/rng.hpp"

namespace mcd {

struct SceneConfig {
    std::size_t n_points = 512;
    double z_min = 1.0;
    double z_max = 5.0;
    double rotation_max_deg = 20.0;
    double baseline_min = 0.3;
    double baseline_max = 1.0;
    Camera camera{};
    std::uint64_t seed = 1;

    void validate() const {
        camera.validate();
        if (n_points < 8) throw Error(ErrorKind::Config, "scene.n_points must be >= 8");
        if (!(z_min > 0.0 && z_min < z_max)) throw Error(ErrorKind::Config, "scene depth range needs 0 < z_min < z_max");
        if (!(rotation_max_deg >= 0.0 && rotation_max_deg <= 60.0)) {
            throw Error(ErrorKind::Config, "scene.rotation_max_deg must lie in [0, 60]");
        }
        if (!(baseline_min > 0.0 && baseline_min <= baseline_max)) {
            throw Error(ErrorKind::Config, "scene baseline range needs 0 < b_min <= b_max");
        }
    }
};

struct ScenePair {
    Camera cam1, cam2;
    RelativePose pose;
    std::vector<Eigen::Vector3d> points;  // camera-1 frame
    MatchSet gt_matches;
};

namespace detail {

inline Eigen::Vector3d random_unit_vector(Rng& rng) {
    for (;;) {
        const Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
        const double n = v.norm();
        if (n > 1e-12) return v / n;
    }
}

/// First k entries of a uniformly shuffled [0, n), sorted ascending.
inline std::vector<std::size_t> choose_subset(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.index(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace detail

/// Populates a scene for a fixed pose X2 = R * X1 + translation (translation
/// not normalized; its norm is the baseline). Points are uniform in the
/// camera-1 frustum slab [z_min, z_max], rejected until both projections are
/// in-bounds with positive depth.
inline ScenePair generate_scene_with_pose(const SceneConfig& cfg, const Eigen::Matrix3d& R,
                                          const Eigen::Vector3d& translation, Rng& rng) {
    cfg.validate();
    if (!(translation.norm() > 0.0)) throw Error(ErrorKind::Config, "zero baseline");

    ScenePair sp;
    sp.cam1 = cfg.camera;
    sp.cam2 = cfg.camera;
    sp.pose.R = R;
    sp.pose.t = translation.normalized();
    sp.gt_matches = MatchSet::for_cameras(sp.cam1, sp.cam2);
    sp.gt_matches.matches.reserve(cfg.n_points);
    sp.points.reserve(cfg.n_points);

    const Camera& c1 = sp.cam1;
    const Camera& c2 = sp.cam2;
    const double z3_lo = cfg.z_min * cfg.z_min * cfg.z_min;
    const double z3_hi = cfg.z_max * cfg.z_max * cfg.z_max;
    const std::size_t max_attempts = 1000 * cfg.n_points + 10000;

    std::size_t attempts = 0;
    while (sp.gt_matches.matches.size() < cfg.n_points) {
        if (++attempts > max_attempts) {
            throw Error(ErrorKind::SceneInfeasible, "frustum intersection too small after " +
                                                        std::to_string(max_attempts) + " rejection rounds");
        }
        const double u = rng.uniform(0.0, c1.width);
        const double v = rng.uniform(0.0, c1.height);
        // Cross-section area grows as z^2, so the volume-uniform depth has CDF ~ z^3.
        const double z = std::cbrt(z3_lo + rng.uniform() * (z3_hi - z3_lo));
        const Eigen::Vector3d X1(z * (u - c1.cx) / c1.fx, z * (v - c1.cy) / c1.fy, z);
        const Eigen::Vector3d X2 = R * X1 + translation;
        if (!(X2.z() > 0.0)) continue;
        const double up = c2.fx * X2.x() / X2.z() + c2.cx;
        const double vp = c2.fy * X2.y() / X2.z() + c2.cy;
        const Correspondence m{u, v, up, vp};
        if (!sp.gt_matches.in_bounds(m)) continue;
        sp.gt_matches.matches.push_back(m);
        sp.points.push_back(X1);
    }
    sp.gt_matches.labels.assign(sp.gt_matches.matches.size(), true);
    return sp;
}

/// Random relative pose (rotation angle <= rotation_max_deg about a uniform
/// axis, baseline uniform in range along a uniform direction) and its scene.
inline ScenePair generate_scene(const SceneConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const Eigen::Vector3d axis = detail::random_unit_vector(rng);
    const double angle = rng.uniform(0.0, cfg.rotation_max_deg) * kDegToRad;
    const Eigen::Matrix3d R = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    const double baseline = rng.uniform(cfg.baseline_min, cfg.baseline_max);
    const Eigen::Vector3d center2 = baseline * detail::random_unit_vector(rng);
    return generate_scene_with_pose(cfg, R, -R * center2, rng);
}

struct MatcherStyle {
    std::string name = "none";
    double keypoint_jitter_px = 0.0;
    double outlier_ratio = 0.0;
    double grid_snap_px = 0.0;
    std::size_t density = 0;  // 0 = keep every ground-truth match

    void validate() const {
        if (!(outlier_ratio >= 0.0 && outlier_ratio <= 0.95)) throw Error(ErrorKind::Config, "outlier_ratio must lie in [0, 0.95]");
        if (!(keypoint_jitter_px >= 0.0)) throw Error(ErrorKind::Config, "keypoint_jitter_px must be >= 0");
        if (!(grid_snap_px >= 0.0)) throw Error(ErrorKind::Config, "grid_snap_px must be >= 0");
    }

    bool is_identity() const { return keypoint_jitter_px == 0.0 && outlier_ratio == 0.0 && grid_snap_px == 0.0; }
};

/// Handcrafted-detector-like: noisy keypoints, many gross mismatches, sparse.
inline MatcherStyle style_h() { return {"style-H", 1.5, 0.7, 0.0, 500}; }

/// Detector-free-like: precise, grid-quantized, few outliers, dense.
inline MatcherStyle style_d() { return {"style-D", 0.5, 0.15, 8.0, 1000}; }

inline MatcherStyle style_none(std::size_t density = 0) { return {"none", 0.0, 0.0, 0.0, density}; }

inline MatcherStyle style_by_name(const std::string& name) {
    if (name == "style-H") return style_h();
    if (name == "style-D") return style_d();
    if (name == "none") return style_none();
    throw Error(ErrorKind::Config, "unknown matcher style '" + name + "'");
}

namespace detail {

inline double snap_coordinate(double v, double pitch, double limit) {
    const double top = std::floor(limit / pitch) * pitch;
    return std::clamp(std::round(v / pitch) * pitch, 0.0, top);
}

}  // namespace detail

/// Geometric inlier labels: Sampson distance under the ground-truth pose below threshold.
inline std::vector<bool> label_by_residual(const MatchSet& ms, const Camera& cam1, const Camera& cam2,
                                           const RelativePose& pose, double threshold) {
    const Eigen::Matrix3d E = essential_from_pose(pose);
    std::vector<bool> labels(ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) {
        labels[i] = within_threshold(sampson_distance(E, normalize_match(ms.matches[i], cam1, cam2)), threshold);
    }
    return labels;
}

/// Corrupts a subsample of the ground truth the way `style` prescribes.
inline MatchSet apply_style(const ScenePair& sp, const MatcherStyle& style, std::uint64_t seed,
                            double label_threshold) {
    style.validate();
    const std::size_t available = sp.gt_matches.size();
    const std::size_t density = style.density == 0 ? available : style.density;
    if (density > available) {
        throw Error(ErrorKind::InsufficientData, "style density " + std::to_string(density) + " exceeds " +
                                                     std::to_string(available) + " ground-truth matches");
    }
    Rng rng(seed);
    MatchSet out = MatchSet::for_cameras(sp.cam1, sp.cam2);
    const std::array<double, 4> limits{out.width1, out.height1, out.width2, out.height2};

    for (const std::size_t i : detail::choose_subset(available, density, rng)) {
        out.matches.push_back(sp.gt_matches.matches[i]);
    }
    if (style.keypoint_jitter_px > 0.0) {
        for (auto& c : out.matches) {
            for (int k = 0; k < 4; ++k) {
                c[k] = std::clamp(c[k] + style.keypoint_jitter_px * rng.normal(), 0.0, limits[k]);
            }
        }
    }
    const auto n_outliers = static_cast<std::size_t>(std::floor(style.outlier_ratio * static_cast<double>(density)));
    for (const std::size_t i : detail::choose_subset(density, n_outliers, rng)) {
        auto& c = out.matches[i];
        for (int k = 0; k < 4; ++k) c[k] = rng.uniform(0.0, limits[k]);
    }
    if (style.grid_snap_px > 0.0) {
        for (auto& c : out.matches) {
            for (int k = 0; k < 4; ++k) c[k] = detail::snap_coordinate(c[k], style.grid_snap_px, limits[k]);
        }
    }
    out.labels = label_by_residual(out, sp.cam1, sp.cam2, sp.pose, label_threshold);
    return out;
}

}  // namespace mcd
