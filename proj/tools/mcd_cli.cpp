// mcd: synthetic matches, Monte Carlo diffusion, sampler training and evaluation.
//
// Any configuration key can be overridden with its dotted name, either as
// `--mcd.r_min 0.2` or `--mcd.r_min=0.2`. Overrides are applied after the
// --config file.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcd/commands.hpp"

namespace {

struct Overrides {
    mcd::io::KeyValues pairs;
    std::vector<std::string> rest;  // arguments left for CLI11
};

bool is_config_key(const std::string& key) {
    if (key.find('.') == std::string::npos) return false;
    static const char* sections[] = {"scene.", "style.", "mcd.", "ransac.", "train.", "eval."};
    for (const char* s : sections) {
        if (key.rfind(s, 0) == 0) return true;
    }
    return false;
}

Overrides split_overrides(int argc, char** argv) {
    Overrides o;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a.rfind("--", 0) != 0) {
            o.rest.push_back(a);
            continue;
        }
        const std::string body = a.substr(2);
        const auto eq = body.find('=');
        const std::string key = body.substr(0, eq);
        if (!is_config_key(key)) {
            o.rest.push_back(a);
            continue;
        }
        if (eq != std::string::npos) {
            o.pairs.emplace_back(key, body.substr(eq + 1));
        } else {
            if (i + 1 >= argc) throw mcd::Error(mcd::ErrorKind::Config, "--" + key + " needs a value");
            o.pairs.emplace_back(key, argv[++i]);
        }
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        Overrides ov = split_overrides(argc, argv);

        CLI::App app{"Monte Carlo diffusion of correspondences for learned robust estimation"};
        app.name("mcd");
        app.require_subcommand(1);
        app.fallthrough();  // --config may follow the subcommand
        std::string config_path;
        app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);

        std::string out, in, data, model, log, out_dir;
        std::optional<std::size_t> scenes;
        std::optional<std::string> style;
        std::vector<std::string> trains, tests, reports;

        auto* synth = app.add_subcommand("synth", "generate ground-truth or styled scenes");
        synth->add_option("--out", out, "output dataset (JSONL)")->required();
        synth->add_option("--scenes", scenes, "alias for scene.n_scenes");
        synth->add_option("--style", style, "alias for style.name (none, style-H, style-D)");

        auto* diffuse = app.add_subcommand("diffuse", "one Monte Carlo diffusion draw per ground-truth scene");
        diffuse->add_option("--in", in, "ground-truth dataset")->required()->check(CLI::ExistingFile);
        diffuse->add_option("--out", out, "output dataset")->required();

        auto* train = app.add_subcommand("train", "train the guided sampler");
        train->add_option("--data", data, "styled, diffused or gt dataset (gt is re-diffused every epoch)")
            ->required()
            ->check(CLI::ExistingFile);
        train->add_option("--out", out, "output model file")->required();
        train->add_option("--log", log, "training log CSV (default: <model>_log.csv)");

        auto* eval = app.add_subcommand("eval", "estimate poses and report AUC");
        eval->add_option("--data", data, "dataset to evaluate")->required()->check(CLI::ExistingFile);
        eval->add_option("--model", model, "sampler model (uniform sampling without one)")->check(CLI::ExistingFile);
        eval->add_option("--out", out, "report CSV")->required();

        auto* compare = app.add_subcommand("compare", "cross-evaluate training sources on test sources");
        compare->add_option("--train", trains, "name=path of a training dataset or model file");
        compare->add_option("--test", tests, "name=path of a test dataset")->required();
        compare->add_option("--out-dir", out_dir, "directory for models, reports and curves")->required();

        auto* plot = app.add_subcommand("plot", "cumulative error curves from report CSVs");
        plot->add_option("--report", reports, "[name=]path of a report CSV")->required();
        plot->add_option("--out", out, "output SVG")->required();

        std::vector<std::string> args(ov.rest.rbegin(), ov.rest.rend());
        try {
            app.parse(args);
        } catch (const CLI::ParseError& e) {
            const int rc = app.exit(e);
            return rc == 0 ? 0 : 2;
        }

        mcd::io::KeyValues pairs;
        if (!config_path.empty()) pairs = mcd::io::read_config_file(config_path);
        if (scenes) pairs.emplace_back("scene.n_scenes", std::to_string(*scenes));
        if (style) pairs.emplace_back("style.name", *style);
        pairs.insert(pairs.end(), ov.pairs.begin(), ov.pairs.end());
        const mcd::io::RunConfig cfg = mcd::io::make_config(pairs);
        (void)mcd::worker_count();  // reject a malformed MCD_THREADS up front

        if (*synth) {
            mcd::cmd_synth(cfg, out, std::cout);
        } else if (*diffuse) {
            mcd::cmd_diffuse(cfg, in, out, std::cout);
        } else if (*train) {
            mcd::cmd_train(cfg, data, out, log.empty() ? mcd::default_log_path(out) : log, std::cout, std::cerr);
        } else if (*eval) {
            mcd::cmd_eval(cfg, data, model.empty() ? std::nullopt : std::optional<std::string>(model), out, std::cout);
        } else if (*compare) {
            std::vector<mcd::NamedPath> tr, te;
            for (const auto& s : trains) tr.push_back(mcd::parse_named_path(s));
            for (const auto& s : tests) te.push_back(mcd::parse_named_path(s));
            mcd::cmd_compare(cfg, tr, te, out_dir, std::cout, std::cerr);
        } else if (*plot) {
            std::vector<mcd::NamedPath> rp;
            for (const auto& s : reports) rp.push_back(mcd::parse_named_path(s));
            mcd::cmd_plot(cfg, rp, out, std::cout);
        }
        return 0;
    } catch (const mcd::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return mcd::exit_code_for(e.kind());
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
