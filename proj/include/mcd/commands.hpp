#pragma once

// The six pipeline commands. Each takes a validated RunConfig, reads and
// writes the file formats in mcd/io, and prints a short summary.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "mcd/core.hpp"
#include "mcd/diffusion.hpp"
#include "mcd/geometry.hpp"
#include "mcd/io/config.hpp"
#include "mcd/io/dataset.hpp"
#include "mcd/io/model_io.hpp"
#include "mcd/io/report.hpp"
#include "mcd/parallel.hpp"
#include "mcd/ransac.hpp"
#include "mcd/rng.hpp"
#include "mcd/sampler.hpp"
#include "mcd/synth.hpp"

namespace mcd {

/// Process exit code for an error kind: 2 configuration, 3 data, 4 numeric.
inline int exit_code_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config:
        case ErrorKind::SceneInfeasible: return 2;
        case ErrorKind::Data:
        case ErrorKind::Io:
        case ErrorKind::InsufficientData:
        case ErrorKind::UndefinedMetric: return 3;
        default: return 4;
    }
}

struct NamedPath {
    std::string name;
    std::string path;
};

/// Parses `name=path`; a bare path is named after its file stem.
inline NamedPath parse_named_path(const std::string& arg) {
    NamedPath np;
    if (const auto eq = arg.find('='); eq != std::string::npos) {
        np.name = arg.substr(0, eq);
        np.path = arg.substr(eq + 1);
    } else {
        np.path = arg;
        np.name = std::filesystem::path(arg).stem().string();
    }
    if (np.name.empty() || np.path.empty()) throw Error(ErrorKind::Config, "expected name=path, got '" + arg + "'");
    for (const char c : np.name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) {
            throw Error(ErrorKind::Config, "series name '" + np.name + "' may only use letters, digits, '-', '_', '.'");
        }
    }
    return np;
}

// ---------------------------------------------------------------- synth

/// Scene i uses derive_seed(scene.seed, i); its style draw derive_seed(style.seed, i).
inline io::Dataset synth_dataset(const io::RunConfig& cfg) {
    io::Dataset ds;
    ds.kind = cfg.style.is_identity() ? io::DatasetKind::Gt : io::DatasetKind::Styled;
    ds.cam1 = ds.cam2 = cfg.scene.camera;
    ds.config = io::config_echo(cfg);
    ds.master_seed = cfg.scene.seed;
    ds.records.resize(cfg.n_scenes);
    SceneConfig sc = cfg.scene;
    sc.n_points = std::max(sc.n_points, cfg.style.density);
    parallel_for(cfg.n_scenes, [&](std::size_t i) {
        SceneConfig si = sc;
        si.seed = derive_seed(cfg.scene.seed, i);
        const ScenePair sp = generate_scene(si);
        io::SceneRecord& r = ds.records[i];
        r.scene_id = i;
        r.pose = sp.pose;
        if (ds.kind == io::DatasetKind::Gt) {
            r.matches = sp.gt_matches;
            if (cfg.style.density > 0) {
                Rng rng(derive_seed(cfg.style_seed, i));
                MatchSet sub = MatchSet::for_cameras(sp.cam1, sp.cam2);
                for (const std::size_t k : detail::choose_subset(sp.gt_matches.size(), cfg.style.density, rng)) {
                    sub.matches.push_back(sp.gt_matches.matches[k]);
                }
                sub.labels.assign(sub.matches.size(), true);
                r.matches = std::move(sub);
            }
        } else {
            r.matches = apply_style(sp, cfg.style, derive_seed(cfg.style_seed, i), cfg.ransac.threshold);
        }
    });
    return ds;
}

struct DatasetStats {
    std::size_t scenes = 0;
    double mean_matches = 0.0;
    double inlier_fraction = 0.0;  // pooled over all matches
};

inline DatasetStats dataset_stats(const io::Dataset& ds) {
    DatasetStats st;
    st.scenes = ds.size();
    std::size_t matches = 0, inliers = 0;
    for (const auto& r : ds.records) {
        matches += r.matches.size();
        inliers += r.matches.inlier_count();
    }
    if (st.scenes) st.mean_matches = static_cast<double>(matches) / static_cast<double>(st.scenes);
    if (matches) st.inlier_fraction = static_cast<double>(inliers) / static_cast<double>(matches);
    return st;
}

inline void print_stats(std::ostream& out, const char* verb, const std::string& path, const io::Dataset& ds) {
    const DatasetStats st = dataset_stats(ds);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s %zu scenes (%s) -> %s\n  matches/scene %.1f, labeled inliers %.2f%%\n", verb,
                  st.scenes, io::to_string(ds.kind), path.c_str(), st.mean_matches, 100.0 * st.inlier_fraction);
    out << buf;
}

inline io::Dataset cmd_synth(const io::RunConfig& cfg, const std::string& out_path, std::ostream& out) {
    io::Dataset ds = synth_dataset(cfg);
    io::write_dataset(out_path, ds);
    print_stats(out, "wrote", out_path, ds);
    out << "  style " << cfg.style.name << ": jitter " << cfg.style.keypoint_jitter_px << " px, outliers "
        << cfg.style.outlier_ratio << ", grid " << cfg.style.grid_snap_px << " px, density " << cfg.style.density << "\n";
    return ds;
}

// ---------------------------------------------------------------- diffuse

/// One Monte Carlo draw per ground-truth scene, scene i with derive_seed(mcd.seed, scene_id).
inline io::Dataset diffuse_dataset(const io::Dataset& gt, const io::RunConfig& cfg) {
    if (gt.kind != io::DatasetKind::Gt) {
        throw Error(ErrorKind::Data, std::string("diffuse needs a gt dataset, got kind '") + io::to_string(gt.kind) + "'");
    }
    io::Dataset ds;
    ds.kind = io::DatasetKind::Diffused;
    ds.cam1 = gt.cam1;
    ds.cam2 = gt.cam2;
    ds.config = io::config_echo(cfg);
    ds.source_config = gt.config;
    ds.master_seed = cfg.mcd.seed;
    ds.records.resize(gt.size());
    parallel_for(gt.size(), [&](std::size_t i) {
        const io::SceneRecord& in = gt.records[i];
        Rng rng(derive_seed(cfg.mcd.seed, in.scene_id));
        DiffusedSet d = mcd_sample(in.matches, cfg.mcd, gt.cam1, gt.cam2, rng, &in.pose);
        io::SceneRecord& r = ds.records[i];
        r.scene_id = in.scene_id;
        r.pose = in.pose;
        r.matches = std::move(d.matches);
        r.provenance = std::move(d.provenance);
        r.sampled_r = d.sampled_r;
        r.sampled_s = d.sampled_s;
    });
    return ds;
}

inline io::Dataset cmd_diffuse(const io::RunConfig& cfg, const std::string& in_path, const std::string& out_path,
                               std::ostream& out) {
    const io::Dataset gt = io::read_dataset(in_path);
    io::Dataset ds = diffuse_dataset(gt, cfg);
    io::write_dataset(out_path, ds);
    print_stats(out, "wrote", out_path, ds);
    std::size_t resampled = 0, total = 0;
    for (const auto& r : ds.records) {
        for (const auto& p : r.provenance) resampled += p.origin == Origin::Resampled ? 1 : 0;
        total += r.provenance.size();
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "  resampled out-of-bounds matches %.2f%%\n",
                  total ? 100.0 * static_cast<double>(resampled) / static_cast<double>(total) : 0.0);
    out << buf;
    return ds;
}

// ---------------------------------------------------------------- train

struct TrainOutput {
    io::ModelFile model;
    std::vector<EpochLog> log;
    std::vector<std::string> warnings;
};

/// Fixed scenes for styled and diffused data; a gt dataset is re-diffused
/// every epoch from mcd.seed.
inline TrainOutput train_on_dataset(const io::Dataset& ds, const io::RunConfig& cfg) {
    if (ds.size() < cfg.train.H) {
        throw Error(ErrorKind::Data, "dataset too small for one epoch: " + std::to_string(ds.size()) + " scenes, batch size " +
                                         std::to_string(cfg.train.H));
    }
    SamplerModel init = SamplerModel::initialize(cfg.layer_dims, cfg.init_seed, cfg.logit_bound);
    std::vector<TrainingScene> fixed;
    std::vector<ScenePair> gt;
    TrainingSource source;
    if (ds.kind == io::DatasetKind::Gt) {
        gt.reserve(ds.size());
        for (const auto& r : ds.records) {
            ScenePair sp;
            sp.cam1 = ds.cam1;
            sp.cam2 = ds.cam2;
            sp.pose = r.pose;
            sp.gt_matches = r.matches;
            gt.push_back(std::move(sp));
        }
        source = mcd_source(gt, cfg.mcd, cfg.mcd.seed);
    } else {
        fixed.reserve(ds.size());
        for (const auto& r : ds.records) fixed.push_back({ds.cam1, ds.cam2, r.pose, r.matches});
        source = fixed_source(fixed);
    }
    TrainResult tr = train(std::move(init), source, cfg.train);
    TrainOutput out;
    out.model = {std::move(tr.model), cfg.init_seed, io::config_echo(cfg)};
    out.log = std::move(tr.log);
    out.warnings = std::move(tr.warnings);
    return out;
}

inline std::string default_log_path(const std::string& model_path) {
    std::filesystem::path p(model_path);
    return (p.parent_path() / (p.stem().string() + "_log.csv")).string();
}

inline TrainOutput cmd_train(const io::RunConfig& cfg, const std::string& data_path, const std::string& model_out,
                             const std::string& log_out, std::ostream& out, std::ostream& err) {
    const io::Dataset ds = io::read_dataset(data_path);
    TrainOutput t = train_on_dataset(ds, cfg);
    io::write_model(model_out, t.model);
    io::write_training_log(log_out, t.log, io::config_echo(cfg));
    for (const auto& w : t.warnings) err << "warning: " << w << "\n";
    char buf[256];
    if (t.log.empty()) {
        std::snprintf(buf, sizeof buf, "trained 0 epochs; wrote the initial model to %s\n", model_out.c_str());
    } else {
        std::snprintf(buf, sizeof buf, "trained %zu epochs on %zu %s scenes; final mean loss %.4f deg\n  model -> %s\n  log -> %s\n",
                      t.log.size(), ds.size(), io::to_string(ds.kind), t.log.back().mean_loss, model_out.c_str(),
                      log_out.c_str());
    }
    out << buf;
    return t;
}

// ---------------------------------------------------------------- eval

/// Per scene: weights from the model (uniform without one), RANSAC seeded with
/// derive_seed(ransac.seed, scene_id), pose error against the stored pose.
/// Scenes with fewer than 8 matches or no estimate count as failures at 180 deg.
inline io::EvalReport evaluate(const io::Dataset& ds, const SamplerModel* model, const io::RunConfig& cfg) {
    if (model) {
        model->validate();
        if (model->layer_dims.front() != 4) throw Error(ErrorKind::Data, "model input width differs from the 4 match coordinates");
    }
    io::EvalReport rep;
    rep.rows.resize(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) {
        const io::SceneRecord& r = ds.records[i];
        io::EvalRow& row = rep.rows[i];
        row.scene_id = r.scene_id;
        row.failed = true;
        if (r.matches.size() < kMinimalSetSize) return;
        const auto normalized = normalize_matches(r.matches.matches, ds.cam1, ds.cam2);
        std::vector<double> weights;
        if (model) weights = sampling_weights(forward(*model, normalized));
        RansacConfig rc = cfg.ransac;
        rc.seed = derive_seed(cfg.ransac.seed, r.scene_id);
        try {
            const EstimationResult est = ransac_estimate_normalized(normalized, weights, rc);
            const PoseErrors pe = pose_errors(est.pose, r.pose);
            row.rot_err = pe.rotation;
            row.trans_err = pe.translation;
            row.pose_err = pe.combined();
            row.iterations = est.iterations_used;
            row.failed = false;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::EstimationFailed && e.kind() != ErrorKind::SamplingInfeasible &&
                e.kind() != ErrorKind::AmbiguousPose && e.kind() != ErrorKind::SolverDegenerate) {
                throw;
            }
        }
    });
    for (const auto& row : rep.rows) rep.failures += row.failed ? 1 : 0;
    io::compute_aucs(rep, cfg.eval.auc_thresholds);
    return rep;
}

inline std::string auc_header(const std::vector<double>& thresholds) {
    std::string s;
    for (const double t : thresholds) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "  AUC@%-4s", (io::detail::format_double(t)).c_str());
        s += buf;
    }
    return s;
}

inline std::string auc_cells(const io::EvalReport& rep) {
    std::string s;
    for (const auto& a : rep.aucs) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "  %8.4f", a.auc);
        s += buf;
    }
    return s;
}

inline io::EvalReport cmd_eval(const io::RunConfig& cfg, const std::string& data_path, const std::optional<std::string>& model_path,
                               const std::string& report_out, std::ostream& out) {
    const io::Dataset ds = io::read_dataset(data_path);
    std::optional<io::ModelFile> mf;
    if (model_path) mf = io::read_model(*model_path);
    io::EvalReport rep = evaluate(ds, mf ? &mf->model : nullptr, cfg);
    io::write_report_csv(report_out, rep, io::config_echo(cfg));
    out << "dataset " << data_path << " (" << ds.size() << " scenes), sampler " << (model_path ? *model_path : "uniform") << "\n";
    out << "      " << auc_header(cfg.eval.auc_thresholds) << "  failures\n";
    out << "      " << auc_cells(rep) << "  " << rep.failures << "\n";
    out << "report -> " << report_out << "\n";
    return rep;
}

// ---------------------------------------------------------------- plot

inline std::string plot_reports(const std::vector<NamedPath>& reports, const io::RunConfig& cfg) {
    if (reports.empty()) throw Error(ErrorKind::Config, "plot needs at least one report");
    std::vector<io::CurveSeries> series;
    for (const auto& np : reports) {
        const io::EvalReport rep = io::read_report_csv(np.path);
        if (rep.rows.empty()) throw Error(ErrorKind::Data, "report '" + np.path + "' has no rows");
        series.push_back({np.name, rep.pose_errors()});
    }
    return io::render_curves_svg(series, cfg.eval.plot_max_deg, io::config_echo(cfg));
}

inline void cmd_plot(const io::RunConfig& cfg, const std::vector<NamedPath>& reports, const std::string& out_svg,
                     std::ostream& out) {
    io::write_svg(out_svg, plot_reports(reports, cfg));
    out << "plotted " << reports.size() << " series -> " << out_svg << "\n";
}

// ---------------------------------------------------------------- compare

struct CompareResult {
    std::vector<std::string> rows;   // "uniform" first, then the training sources
    std::vector<std::string> tests;
    std::map<std::pair<std::string, std::string>, io::EvalReport> cells;

    const io::EvalReport& cell(const std::string& row, const std::string& test) const {
        const auto it = cells.find({row, test});
        if (it == cells.end()) throw Error(ErrorKind::Data, "no comparison cell " + row + " x " + test);
        return it->second;
    }
};

/// True when the file's first line is a dataset header rather than a model file.
inline bool looks_like_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
    std::string line;
    std::getline(in, line);
    try {
        const io::Json j = io::Json::parse(line);
        return j.is_object() && j.contains("kind");
    } catch (const nlohmann::json::exception&) {
        return false;
    }
}

inline std::string render_compare_table(const CompareResult& res, const std::vector<double>& thresholds) {
    std::string s;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-14s", "train \\ test");
    s += buf;
    for (const auto& t : res.tests) {
        std::snprintf(buf, sizeof buf, " | %-*s", static_cast<int>(10 * thresholds.size()), t.c_str());
        s += buf;
    }
    s += "\n";
    std::snprintf(buf, sizeof buf, "%-14s", "");
    s += buf;
    for (std::size_t k = 0; k < res.tests.size(); ++k) s += " |" + auc_header(thresholds).substr(1);
    s += "\n";
    for (const auto& r : res.rows) {
        std::snprintf(buf, sizeof buf, "%-14s", r.c_str());
        s += buf;
        for (const auto& t : res.tests) s += " |" + auc_cells(res.cell(r, t)).substr(1);
        s += "\n";
    }
    return s;
}

inline CompareResult cmd_compare(const io::RunConfig& cfg, const std::vector<NamedPath>& train_sources,
                                 const std::vector<NamedPath>& test_sources, const std::string& out_dir, std::ostream& out,
                                 std::ostream& err) {
    if (test_sources.empty()) throw Error(ErrorKind::Config, "compare needs at least one --test source");
    std::set<std::string> names{"uniform"};
    for (const auto& np : train_sources) {
        if (!names.insert(np.name).second) throw Error(ErrorKind::Config, "duplicate training source name '" + np.name + "'");
    }
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    const auto echo = io::config_echo(cfg);

    CompareResult res;
    res.rows.push_back("uniform");
    std::map<std::string, SamplerModel> models;
    for (const auto& np : train_sources) {
        res.rows.push_back(np.name);
        if (looks_like_dataset(np.path)) {
            const io::Dataset ds = io::read_dataset(np.path);
            TrainOutput t = train_on_dataset(ds, cfg);
            for (const auto& w : t.warnings) err << "warning: " << np.name << ": " << w << "\n";
            io::write_model((dir / ("model_" + np.name + ".json")).string(), t.model);
            io::write_training_log((dir / ("log_" + np.name + ".csv")).string(), t.log, echo);
            out << "trained " << np.name << " on " << ds.size() << " " << io::to_string(ds.kind) << " scenes";
            if (!t.log.empty()) out << ", final mean loss " << io::detail::fmt("%.4f", t.log.back().mean_loss);
            out << "\n";
            models.emplace(np.name, std::move(t.model.model));
        } else {
            models.emplace(np.name, io::read_model(np.path).model);
            out << "loaded " << np.name << " from " << np.path << "\n";
        }
    }

    std::string csv = "train,test";
    for (const double t : cfg.eval.auc_thresholds) csv += ",auc@" + io::detail::format_double(t);
    csv += ",failures\n";
    for (const auto& tp : test_sources) {
        const io::Dataset ds = io::read_dataset(tp.path);
        res.tests.push_back(tp.name);
        std::vector<io::CurveSeries> series;
        for (const auto& row : res.rows) {
            const SamplerModel* m = row == "uniform" ? nullptr : &models.at(row);
            io::EvalReport rep = evaluate(ds, m, cfg);
            const std::string stem = row + "__" + tp.name;
            io::write_report_csv((dir / ("report_" + stem + ".csv")).string(), rep, echo);
            io::write_svg((dir / ("curve_" + stem + ".svg")).string(),
                          io::render_curves_svg({{row, rep.pose_errors()}}, cfg.eval.plot_max_deg, echo,
                                                "train " + row + ", test " + tp.name));
            series.push_back({row, rep.pose_errors()});
            csv += row + "," + tp.name;
            for (const auto& a : rep.aucs) csv += "," + io::detail::fmt("%.6f", a.auc);
            csv += "," + std::to_string(rep.failures) + "\n";
            res.cells.emplace(std::make_pair(row, tp.name), std::move(rep));
        }
        io::write_svg((dir / ("curves_" + tp.name + ".svg")).string(),
                      io::render_curves_svg(series, cfg.eval.plot_max_deg, echo, "test " + tp.name));
    }
    csv += "# format_version = " + std::to_string(io::kReportFormatVersion) + "\n" + io::detail::echo_comments(echo);
    io::detail::write_text((dir / "compare.csv").string(), csv, "comparison table");
    const std::string table = render_compare_table(res, cfg.eval.auc_thresholds);
    io::detail::write_text((dir / "table.txt").string(), table, "comparison table");
    out << table;
    return res;
}

}  // namespace mcd
