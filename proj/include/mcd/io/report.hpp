#pragma once

// Evaluation reports, training logs and cumulative error curves.
// CSV files start with their column header; trailing `#` lines carry the
// format version, the aggregates and the configuration echo.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mcd/core.hpp"
#include "mcd/geometry.hpp"
#include "mcd/io/config.hpp"
#include "mcd/sampler.hpp"

namespace mcd::io {

inline constexpr int kReportFormatVersion = 1;

struct EvalRow {
    std::size_t scene_id = 0;
    double rot_err = kFailedPoseError;
    double trans_err = kFailedPoseError;
    double pose_err = kFailedPoseError;
    std::size_t iterations = 0;
    bool failed = false;
};

struct AucEntry {
    double threshold = 0.0;
    double auc = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::vector<AucEntry> aucs;
    std::size_t failures = 0;

    std::vector<double> pose_errors() const {
        std::vector<double> e;
        e.reserve(rows.size());
        for (const auto& r : rows) e.push_back(r.pose_err);
        return e;
    }

    double auc_at(double threshold) const {
        for (const auto& a : aucs) {
            if (a.threshold == threshold) return a.auc;
        }
        throw Error(ErrorKind::Data, "report has no AUC at " + detail::format_double(threshold));
    }
};

namespace detail {

inline std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

inline void write_text(const std::string& path, const std::string& text, const char* what) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, std::string("cannot write ") + what + " '" + path + "'");
    out << text;
    out.flush();
    if (!out) throw Error(ErrorKind::Io, std::string("write failed for '") + path + "'");
}

inline std::string echo_comments(const KeyValues& echo) {
    std::string s;
    for (const auto& [k, v] : echo) s += "# config " + k + " = " + v + "\n";
    return s;
}

}  // namespace detail

inline void compute_aucs(EvalReport& rep, const std::vector<double>& thresholds) {
    rep.aucs.clear();
    const auto errs = rep.pose_errors();
    if (errs.empty()) throw Error(ErrorKind::UndefinedMetric, "no scenes to aggregate");
    const auto values = pose_auc(errs, thresholds);
    for (std::size_t i = 0; i < thresholds.size(); ++i) rep.aucs.push_back({thresholds[i], values[i]});
}

inline std::string render_report_csv(const EvalReport& rep, const KeyValues& echo) {
    std::string s = "scene_id,rot_err,trans_err,pose_err,iterations\n";
    for (const auto& r : rep.rows) {
        s += std::to_string(r.scene_id) + "," + detail::fmt("%.9g", r.rot_err) + "," + detail::fmt("%.9g", r.trans_err) +
             "," + detail::fmt("%.9g", r.pose_err) + "," + std::to_string(r.iterations) + "\n";
    }
    s += "# format_version = " + std::to_string(kReportFormatVersion) + "\n";
    s += "# scenes = " + std::to_string(rep.rows.size()) + "\n";
    s += "# failures = " + std::to_string(rep.failures) + "\n";
    for (const auto& a : rep.aucs) s += "# auc@" + detail::format_double(a.threshold) + " = " + detail::fmt("%.6f", a.auc) + "\n";
    s += detail::echo_comments(echo);
    return s;
}

inline void write_report_csv(const std::string& path, const EvalReport& rep, const KeyValues& echo) {
    detail::write_text(path, render_report_csv(rep, echo), "report");
}

/// Reads the rows of a report CSV (comment lines are skipped).
inline EvalReport read_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read report '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "scene_id,rot_err,trans_err,pose_err,iterations") {
        throw Error(ErrorKind::Data, path + ": not an evaluation report");
    }
    EvalReport rep;
    for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
        if (line.empty() || line.front() == '#') continue;
        std::stringstream ss(line);
        std::string f[5];
        for (int k = 0; k < 5; ++k) {
            if (!std::getline(ss, f[k], ',')) throw Error(ErrorKind::Data, path + ":" + std::to_string(lineno) + ": expected 5 fields");
        }
        const std::string where = path + ":" + std::to_string(lineno);
        EvalRow r;
        try {
            r.scene_id = static_cast<std::size_t>(detail::parse_uint(where, f[0]));
            r.rot_err = detail::parse_double(where, f[1]);
            r.trans_err = detail::parse_double(where, f[2]);
            r.pose_err = detail::parse_double(where, f[3]);
            r.iterations = static_cast<std::size_t>(detail::parse_uint(where, f[4]));
        } catch (const Error& e) {
            throw Error(ErrorKind::Data, e.what());
        }
        if (r.pose_err < 0.0 || r.pose_err > kFailedPoseError) throw Error(ErrorKind::Data, where + ": pose_err outside [0, 180]");
        rep.rows.push_back(r);
    }
    return rep;
}

inline std::string render_training_log(const std::vector<EpochLog>& log, const KeyValues& echo) {
    std::string s = "epoch,mean_loss,grad_norm,lr\n";
    for (const auto& e : log) {
        s += std::to_string(e.epoch) + "," + detail::fmt("%.17g", e.mean_loss) + "," + detail::fmt("%.17g", e.grad_norm) + "," +
             detail::fmt("%.17g", e.lr) + "\n";
    }
    s += "# format_version = " + std::to_string(kReportFormatVersion) + "\n";
    s += detail::echo_comments(echo);
    return s;
}

inline void write_training_log(const std::string& path, const std::vector<EpochLog>& log, const KeyValues& echo) {
    detail::write_text(path, render_training_log(log, echo), "training log");
}

struct CurveSeries {
    std::string name;
    std::vector<double> errors;
};

/// Recall-vs-error step function: (x, fraction of errors <= x) vertices on [0, max_deg].
inline std::vector<std::pair<double, double>> recall_steps(std::vector<double> errors, double max_deg) {
    std::vector<std::pair<double, double>> pts;
    if (errors.empty()) return pts;
    std::sort(errors.begin(), errors.end());
    const double n = static_cast<double>(errors.size());
    std::size_t i = 0;
    while (i < errors.size() && errors[i] <= 0.0) ++i;
    double recall = static_cast<double>(i) / n;
    pts.emplace_back(0.0, recall);
    while (i < errors.size() && errors[i] <= max_deg) {
        const double x = errors[i];
        while (i < errors.size() && errors[i] == x) ++i;
        pts.emplace_back(x, recall);
        recall = static_cast<double>(i) / n;
        pts.emplace_back(x, recall);
    }
    pts.emplace_back(max_deg, recall);
    return pts;
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

/// Cumulative pose-error curves as a standalone SVG document.
inline std::string render_curves_svg(const std::vector<CurveSeries>& series, double max_deg, const KeyValues& echo,
                                     const std::string& title = "Cumulative pose error") {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    const double W = 640, H = 420, left = 60, right = 170, top = 40, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;
    auto X = [&](double deg) { return left + pw * deg / max_deg; };
    auto Y = [&](double r) { return top + ph * (1.0 - r); };
    using detail::fmt;

    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
    s += "<metadata>format_version=" + std::to_string(kReportFormatVersion);
    for (const auto& [k, v] : echo) s += "\n" + detail::xml_escape(k + " = " + v);
    s += "</metadata>\n";
    s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"white\"/>\n";
    s += "<text x=\"" + fmt("%.1f", left + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
         detail::xml_escape(title) + "</text>\n";

    // Axes, grid and ticks.
    s += "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
    for (int k = 0; k <= 4; ++k) {
        const double deg = max_deg * k / 4.0, r = k / 4.0;
        s += "<line x1=\"" + fmt("%.2f", X(deg)) + "\" y1=\"" + fmt("%.2f", Y(0)) + "\" x2=\"" + fmt("%.2f", X(deg)) + "\" y2=\"" +
             fmt("%.2f", Y(1)) + "\"/>\n";
        s += "<line x1=\"" + fmt("%.2f", X(0)) + "\" y1=\"" + fmt("%.2f", Y(r)) + "\" x2=\"" + fmt("%.2f", X(max_deg)) + "\" y2=\"" +
             fmt("%.2f", Y(r)) + "\"/>\n";
    }
    s += "</g>\n";
    s += "<g stroke=\"black\" stroke-width=\"1.5\">\n";
    s += "<line x1=\"" + fmt("%.2f", X(0)) + "\" y1=\"" + fmt("%.2f", Y(0)) + "\" x2=\"" + fmt("%.2f", X(max_deg)) + "\" y2=\"" +
         fmt("%.2f", Y(0)) + "\"/>\n";
    s += "<line x1=\"" + fmt("%.2f", X(0)) + "\" y1=\"" + fmt("%.2f", Y(0)) + "\" x2=\"" + fmt("%.2f", X(0)) + "\" y2=\"" +
         fmt("%.2f", Y(1)) + "\"/>\n";
    s += "</g>\n";
    s += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int k = 0; k <= 4; ++k) {
        const double deg = max_deg * k / 4.0, r = k / 4.0;
        s += "<text x=\"" + fmt("%.2f", X(deg)) + "\" y=\"" + fmt("%.2f", Y(0) + 16) + "\" text-anchor=\"middle\">" +
             fmt("%g", deg) + "</text>\n";
        s += "<text x=\"" + fmt("%.2f", X(0) - 6) + "\" y=\"" + fmt("%.2f", Y(r) + 4) + "\" text-anchor=\"end\">" + fmt("%.2f", r) +
             "</text>\n";
    }
    s += "<text x=\"" + fmt("%.1f", left + pw / 2) + "\" y=\"" + fmt("%.1f", H - 12) +
         "\" text-anchor=\"middle\">pose error (deg)</text>\n";
    s += "<text x=\"16\" y=\"" + fmt("%.1f", top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         fmt("%.1f", top + ph / 2) + ")\">recall</text>\n";
    s += "</g>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = palette[i % (sizeof palette / sizeof *palette)];
        std::string pts;
        for (const auto& [x, r] : recall_steps(series[i].errors, max_deg)) {
            pts += (pts.empty() ? "" : " ") + fmt("%.2f", X(x)) + "," + fmt("%.2f", Y(r));
        }
        s += "<polyline class=\"series\" data-name=\"" + detail::xml_escape(series[i].name) + "\" fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    }

    s += "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = palette[i % (sizeof palette / sizeof *palette)];
        const double y = top + 14 + 20.0 * static_cast<double>(i);
        s += "<line x1=\"" + fmt("%.1f", W - right + 15) + "\" y1=\"" + fmt("%.1f", y) + "\" x2=\"" + fmt("%.1f", W - right + 40) +
             "\" y2=\"" + fmt("%.1f", y) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + fmt("%.1f", W - right + 46) + "\" y=\"" + fmt("%.1f", y + 4) + "\">" +
             detail::xml_escape(series[i].name) + "</text>\n";
    }
    s += "</g>\n</svg>\n";
    return s;
}

inline void write_svg(const std::string& path, const std::string& svg) { detail::write_text(path, svg, "plot"); }

}  // namespace mcd::io
