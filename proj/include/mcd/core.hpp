#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mcd {

/// Failure categories. The CLI maps them onto process exit codes.
enum class ErrorKind {
    Config,            // invalid configuration or arguments
    Data,              // malformed or inconsistent input data
    Numeric,           // non-finite values, zero probability mass
    Domain,            // argument outside the operation's domain
    SolverDegenerate,  // rank-deficient design matrix
    AmbiguousPose,     // cheirality vote tie
    SceneInfeasible,   // rejection sampling exhausted
    InsufficientData,  // not enough matches for the request
    SamplingInfeasible,
    EstimationFailed,
    UndefinedMetric,
    Io,  // unreadable or unwritable file
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Data: return "data";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::SolverDegenerate: return "solver-degenerate";
        case ErrorKind::AmbiguousPose: return "ambiguous-decomposition";
        case ErrorKind::SceneInfeasible: return "scene-infeasible";
        case ErrorKind::InsufficientData: return "insufficient-data";
        case ErrorKind::SamplingInfeasible: return "sampling-infeasible";
        case ErrorKind::EstimationFailed: return "estimation-failed";
        case ErrorKind::UndefinedMetric: return "undefined-metric";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// One correspondence row [x, y, x', y'].
using Correspondence = std::array<double, 4>;

struct Camera {
    double fx = 3000.0;
    double fy = 3000.0;
    double cx = 2000.0;
    double cy = 1500.0;
    double width = 4000.0;
    double height = 3000.0;

    bool valid() const {
        return fx > 0 && fy > 0 && cx > 0 && cx < width && cy > 0 && cy < height;
    }

    void validate() const {
        if (!valid()) throw Error(ErrorKind::Config, "camera intrinsics violate fx,fy>0, 0<cx<W, 0<cy<H");
    }

    friend bool operator==(const Camera&, const Camera&) = default;
};

/// Relative pose of camera 2 w.r.t. camera 1: X2 = R * X1 + t (t unit-norm).
struct RelativePose {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::UnitZ();

    bool valid(double tol = 1e-9) const {
        if (!R.allFinite() || !t.allFinite()) return false;
        const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
        return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol && std::abs(t.norm() - 1.0) <= tol;
    }

    void validate(double tol = 1e-9) const {
        if (!valid(tol)) throw Error(ErrorKind::Data, "pose is not a proper rotation with unit translation");
    }
};

/// Match set with the image sizes it lives in and per-match inlier labels.
struct MatchSet {
    std::vector<Correspondence> matches;
    std::vector<bool> labels;
    double width1 = 0, height1 = 0, width2 = 0, height2 = 0;

    std::size_t size() const { return matches.size(); }

    bool in_bounds(const Correspondence& c) const {
        return c[0] >= 0.0 && c[0] <= width1 && c[1] >= 0.0 && c[1] <= height1 &&
               c[2] >= 0.0 && c[2] <= width2 && c[3] >= 0.0 && c[3] <= height2;
    }

    std::size_t inlier_count() const {
        std::size_t n = 0;
        for (bool b : labels) n += b ? 1 : 0;
        return n;
    }

    static MatchSet for_cameras(const Camera& c1, const Camera& c2) {
        MatchSet ms;
        ms.width1 = c1.width;
        ms.height1 = c1.height;
        ms.width2 = c2.width;
        ms.height2 = c2.height;
        return ms;
    }
};

inline bool in_bounds(const Correspondence& c, double w1, double h1, double w2, double h2) {
    return c[0] >= 0.0 && c[0] <= w1 && c[1] >= 0.0 && c[1] <= h1 && c[2] >= 0.0 && c[2] <= w2 &&
           c[3] >= 0.0 && c[3] <= h2;
}

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kRadToDeg = 180.0 / kPi;
inline constexpr double kDegToRad = kPi / 180.0;

}  // namespace mcd
