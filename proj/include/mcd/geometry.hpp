#pragma once

// Calibrated two-view geometry: essential matrices, Sampson residuals, the
// normalized eight-point solver, cheirality-based decomposition and the pose
// error / AUC metrics used for evaluation.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mcd/core.hpp"

namespace mcd {

/// Pose error assigned to failed estimations.
inline constexpr double kFailedPoseError = 180.0;

struct EssentialHypothesis {
    Eigen::Matrix3d E = Eigen::Matrix3d::Zero();
    std::vector<bool> inlier_mask;
    std::size_t score = 0;
};

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

/// E = [t]x R scaled to ||E||_F = sqrt(2).
inline Eigen::Matrix3d essential_from_pose(const RelativePose& pose) {
    Eigen::Matrix3d E = skew(pose.t) * pose.R;
    return E * (std::sqrt(2.0) / E.norm());
}

/// Pixel -> normalized camera coordinates, each image with its own intrinsics.
inline Correspondence normalize_match(const Correspondence& c, const Camera& cam1, const Camera& cam2) {
    return {(c[0] - cam1.cx) / cam1.fx, (c[1] - cam1.cy) / cam1.fy,
            (c[2] - cam2.cx) / cam2.fx, (c[3] - cam2.cy) / cam2.fy};
}

inline Correspondence denormalize_match(const Correspondence& c, const Camera& cam1, const Camera& cam2) {
    return {c[0] * cam1.fx + cam1.cx, c[1] * cam1.fy + cam1.cy,
            c[2] * cam2.fx + cam2.cx, c[3] * cam2.fy + cam2.cy};
}

inline std::vector<Correspondence> normalize_matches(std::span<const Correspondence> matches, const Camera& cam1,
                                                     const Camera& cam2) {
    std::vector<Correspondence> out;
    out.reserve(matches.size());
    for (const auto& c : matches) out.push_back(normalize_match(c, cam1, cam2));
    return out;
}

/// Squared first-order geometric error of a normalized correspondence.
/// Returns +inf when the gradient of the epipolar constraint vanishes.
inline double sampson_distance(const Eigen::Matrix3d& E, const Correspondence& c) {
    const Eigen::Vector3d x(c[0], c[1], 1.0);
    const Eigen::Vector3d xp(c[2], c[3], 1.0);
    const Eigen::Vector3d Ex = E * x;
    const Eigen::Vector3d Etxp = E.transpose() * xp;
    const double r = xp.dot(Ex);
    const double den = Ex.x() * Ex.x() + Ex.y() * Ex.y() + Etxp.x() * Etxp.x() + Etxp.y() * Etxp.y();
    if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
    return r * r / den;
}

/// Inlier test shared by scoring and labeling. `threshold` is a Sampson
/// distance in normalized units (about threshold * f pixels), compared against
/// the squared error returned by sampson_distance.
inline bool within_threshold(double sampson_sq, double threshold) { return sampson_sq < threshold * threshold; }

/// Replaces the singular values of M by (s, s, 0), s = (s1 + s2) / 2, and
/// rescales to ||E||_F = sqrt(2).
inline Eigen::Matrix3d project_to_essential(const Eigen::Matrix3d& M) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    const double mean = 0.5 * (sv(0) + sv(1));
    if (!(mean > 0.0) || !std::isfinite(mean)) {
        throw Error(ErrorKind::SolverDegenerate, "essential projection of a rank < 2 matrix");
    }
    const Eigen::Matrix3d E = svd.matrixU() * Eigen::Vector3d(mean, mean, 0.0).asDiagonal() * svd.matrixV().transpose();
    return E * (std::sqrt(2.0) / E.norm());
}

namespace detail {

struct Similarity2 {
    double scale = 1.0, mx = 0.0, my = 0.0;

    Eigen::Matrix3d matrix() const {
        Eigen::Matrix3d T;
        T << scale, 0.0, -scale * mx,
             0.0, scale, -scale * my,
             0.0, 0.0, 1.0;
        return T;
    }
};

// Isotropic Hartley normalization: centroid to origin, mean distance sqrt(2).
inline Similarity2 hartley(std::span<const Correspondence> ms, int offset) {
    Similarity2 s;
    const double n = static_cast<double>(ms.size());
    for (const auto& c : ms) {
        s.mx += c[offset];
        s.my += c[offset + 1];
    }
    s.mx /= n;
    s.my /= n;
    double mean_dist = 0.0;
    for (const auto& c : ms) mean_dist += std::hypot(c[offset] - s.mx, c[offset + 1] - s.my);
    mean_dist /= n;
    s.scale = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
    return s;
}

}  // namespace detail

/// Normalized eight-point estimate from >= 8 normalized correspondences.
inline Eigen::Matrix3d eight_point(std::span<const Correspondence> ms) {
    const auto n = static_cast<Eigen::Index>(ms.size());
    if (n < 8) throw Error(ErrorKind::InsufficientData, "eight_point needs at least 8 correspondences");

    const detail::Similarity2 s1 = detail::hartley(ms, 0);
    const detail::Similarity2 s2 = detail::hartley(ms, 2);

    // Square design matrix for the minimal case so the full null space is available.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(n, 9), 9);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& c = ms[static_cast<std::size_t>(i)];
        const double x = s1.scale * (c[0] - s1.mx), y = s1.scale * (c[1] - s1.my);
        const double xp = s2.scale * (c[2] - s2.mx), yp = s2.scale * (c[3] - s2.my);
        A.row(i) << xp * x, xp * y, xp, yp * x, yp * y, yp, x, y, 1.0;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const Eigen::VectorXd sv = svd.singularValues();
    if (!sv.allFinite()) throw Error(ErrorKind::Numeric, "non-finite design matrix");
    // A one-dimensional null space needs rank 8.
    if (!(sv(7) > 1e-10 * sv(0))) {
        throw Error(ErrorKind::SolverDegenerate, "rank-deficient eight-point design matrix");
    }
    const Eigen::VectorXd e = svd.matrixV().col(8);
    Eigen::Matrix3d En;
    En << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);

    const Eigen::Matrix3d E = s2.matrix().transpose() * En * s1.matrix();
    return project_to_essential(E);
}

namespace detail {

// Depths (lambda1, lambda2) minimizing |lambda1 * R x1 + t - lambda2 * x2|.
// Returns false when the rays are (numerically) parallel.
inline bool triangulate_depths(const Eigen::Matrix3d& R, const Eigen::Vector3d& t, const Correspondence& c,
                               double& lambda1, double& lambda2) {
    const Eigen::Vector3d a = R * Eigen::Vector3d(c[0], c[1], 1.0);
    const Eigen::Vector3d b(c[2], c[3], 1.0);
    // [a, -b] * (l1, l2)^T = -t
    const double aa = a.dot(a), bb = b.dot(b), ab = a.dot(b);
    const double det = aa * bb - ab * ab;
    if (!(det > 1e-14 * aa * bb)) return false;
    const double at = a.dot(t), bt = b.dot(t);
    lambda1 = (-at * bb + ab * bt) / det;
    lambda2 = (aa * bt - ab * at) / det;
    return true;
}

}  // namespace detail

/// Index of the unique maximum count; a tie for the maximum is an error.
inline std::size_t select_cheirality_candidate(std::span<const std::size_t> counts) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < counts.size(); ++i) {
        if (counts[i] > counts[best]) best = i;
    }
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (i != best && counts[i] == counts[best]) {
            throw Error(ErrorKind::AmbiguousPose, "cheirality vote tie between pose candidates");
        }
    }
    return best;
}

/// The four (R, t) factorizations of E, ordered (R1,+t), (R1,-t), (R2,+t), (R2,-t).
inline std::array<RelativePose, 4> essential_candidates(const Eigen::Matrix3d& E) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d U = svd.matrixU();
    Eigen::Matrix3d V = svd.matrixV();
    if (U.determinant() < 0) U.col(2) *= -1.0;
    if (V.determinant() < 0) V.col(2) *= -1.0;
    Eigen::Matrix3d W;
    W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    const Eigen::Matrix3d R1 = U * W * V.transpose();
    const Eigen::Matrix3d R2 = U * W.transpose() * V.transpose();
    const Eigen::Vector3d t = U.col(2).normalized();
    std::array<RelativePose, 4> out;
    out[0] = {R1, t};
    out[1] = {R1, -t};
    out[2] = {R2, t};
    out[3] = {R2, -t};
    return out;
}

inline std::size_t cheirality_count(const RelativePose& pose, std::span<const Correspondence> ms) {
    std::size_t count = 0;
    for (const auto& c : ms) {
        double l1 = 0, l2 = 0;
        if (detail::triangulate_depths(pose.R, pose.t, c, l1, l2) && l1 > 0.0 && l2 > 0.0) ++count;
    }
    return count;
}

/// Picks the factorization of E that places the most matches in front of both cameras.
inline RelativePose decompose_essential(const Eigen::Matrix3d& E, std::span<const Correspondence> ms) {
    if (ms.empty()) throw Error(ErrorKind::InsufficientData, "decompose_essential needs at least one match");
    const auto candidates = essential_candidates(E);
    std::array<std::size_t, 4> counts{};
    for (std::size_t i = 0; i < 4; ++i) counts[i] = cheirality_count(candidates[i], ms);
    return candidates[select_cheirality_candidate(counts)];
}

/// Geodesic angle between two rotations, degrees in [0, 180].
/// Evaluated as atan2(sin, cos) of the relative rotation, which equals the
/// arccos-of-trace form but keeps full precision near 0 and 180 degrees.
inline double rotation_error_deg(const Eigen::Matrix3d& R_est, const Eigen::Matrix3d& R_gt) {
    const Eigen::Matrix3d D = R_gt.transpose() * R_est;
    const double c = std::clamp((D.trace() - 1.0) / 2.0, -1.0, 1.0);
    const Eigen::Vector3d axis(D(2, 1) - D(1, 2), D(0, 2) - D(2, 0), D(1, 0) - D(0, 1));
    const double s = 0.5 * axis.norm();
    return std::atan2(s, c) * kRadToDeg;
}

/// Sign-invariant angle between translation directions, degrees in [0, 90].
inline double translation_error_deg(const Eigen::Vector3d& t_est, const Eigen::Vector3d& t_gt) {
    const Eigen::Vector3d a = t_est.normalized();
    const Eigen::Vector3d b = t_gt.normalized();
    const double theta = std::atan2(a.cross(b).norm(), std::clamp(a.dot(b), -1.0, 1.0)) * kRadToDeg;
    return std::min(theta, 180.0 - theta);
}

struct PoseErrors {
    double rotation = kFailedPoseError;
    double translation = kFailedPoseError;
    double combined() const { return std::max(rotation, translation); }
};

inline PoseErrors pose_errors(const RelativePose& est, const RelativePose& gt) {
    return {rotation_error_deg(est.R, gt.R), translation_error_deg(est.t, gt.t)};
}

/// max(rotation error, translation error) in degrees.
inline double pose_error(const RelativePose& est, const RelativePose& gt) { return pose_errors(est, gt).combined(); }

/// Area under the recall curve recall(e) = |{err <= e}| / N over [0, tau],
/// divided by tau. The step function integrates exactly to
/// sum_i max(0, tau - err_i) / (N * tau).
inline std::vector<double> pose_auc(std::span<const double> errors, std::span<const double> thresholds) {
    if (errors.empty()) throw Error(ErrorKind::UndefinedMetric, "pose_auc of an empty error list");
    std::vector<double> out;
    out.reserve(thresholds.size());
    for (const double tau : thresholds) {
        if (!(tau > 0.0)) throw Error(ErrorKind::Domain, "AUC threshold must be positive");
        long double area = 0.0L;
        for (const double e : errors) {
            if (!(e >= 0.0) || !std::isfinite(e)) throw Error(ErrorKind::Domain, "pose errors must be finite and >= 0");
            if (e < tau) area += static_cast<long double>(tau) - e;
        }
        out.push_back(static_cast<double>(area / (static_cast<long double>(errors.size()) * tau)));
    }
    return out;
}

inline const std::array<double, 3> kAucThresholds = {5.0, 10.0, 20.0};

}  // namespace mcd
