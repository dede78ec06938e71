// svdclass: train, evaluate and apply SVD reconstruction-error classifiers.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "svdclass/svdclass.hpp"

namespace {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfigError = 2,
    kDataError = 3,
    kConvergenceError = 4,
};

struct Flags {
    std::string data;
    std::string out;
    std::string model;
    std::size_t size = svdclass::kDefaultImageSize;
    double train_frac = 0.8;
    std::uint64_t seed = 42;
    std::string norms = "1,2,inf,fro";
    std::string ranks;
    std::string method = "optimized";
    bool svg = false;
    unsigned workers = 0;

    // synth only
    std::size_t per_class = 40;
    double noise = 0.05;
    std::vector<double> means = {0.2, 0.9};
    std::vector<std::string> labels = {"dark", "bright"};
};

svdclass::RunConfig run_config(const Flags& f) {
    svdclass::RunConfig c;
    c.data = f.data;
    c.size = f.size;
    c.train_fraction = f.train_frac;
    c.seed = f.seed;
    c.norms = svdclass::parse_norm_list(f.norms);
    c.ranks = f.ranks.empty() ? svdclass::RankRange{1, f.size} : svdclass::parse_rank_range(f.ranks);
    c.method = svdclass::parse_template_method(f.method);
    svdclass::validate(c);
    return c;
}

svdclass::RunOptions run_options(const Flags& f) {
    svdclass::RunOptions o;
    o.out = f.out;
    o.svg = f.svg;
    o.workers = f.workers;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SVD low-rank reconstruction-error image classifier"};
    app.require_subcommand(1);
    Flags f;

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--data", f.data, "Dataset root with one subdirectory per class")->required();
        cmd->add_option("--size", f.size, "Working image size (pixels per side)")->capture_default_str();
        cmd->add_option("--train-frac", f.train_frac, "Fraction of each class used for training")->capture_default_str();
        cmd->add_option("--seed", f.seed, "Seed for the train/test split")->capture_default_str();
        cmd->add_option("--norms", f.norms, "Comma list of candidate norms (1,2,inf,fro)")->capture_default_str();
        cmd->add_option("--ranks", f.ranks, "Rank range a..b (default 1..size)");
        cmd->add_option("--template", f.method, "Template method: uniform or optimized")->capture_default_str();
        cmd->add_option("--out", f.out, "Output directory")->required();
        cmd->add_flag("--svg", f.svg, "Also write SVG charts");
        cmd->add_option("--workers", f.workers, "Worker threads (0 = hardware concurrency)");
    };

    auto* train = app.add_subcommand("train", "Build templates and select norm and rank on the training split");
    add_run_flags(train);

    auto* sweep = app.add_subcommand("sweep", "Write training-split rank sweeps for each norm");
    add_run_flags(sweep);

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a model on its held-out split or another dataset");
    evaluate->add_option("--model", f.model, "Model file written by train")->required();
    evaluate->add_option("--data", f.data, "Dataset root (default: the model's held-out split)");
    evaluate->add_option("--out", f.out, "Output directory")->required();
    evaluate->add_flag("--svg", f.svg, "Also write an SVG scatter plot");
    evaluate->add_option("--workers", f.workers, "Worker threads (0 = hardware concurrency)");

    std::string image;
    auto* predict = app.add_subcommand("predict", "Classify a single image");
    predict->add_option("--model", f.model, "Model file written by train")->required();
    predict->add_option("image", image, "Image file (JPEG, PNG or PGM)")->required();

    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic two-class PGM dataset");
    synth->add_option("--out", f.out, "Output dataset root")->required();
    synth->add_option("--seed", f.seed, "Generator seed")->capture_default_str();
    synth->add_option("--size", f.size, "Image size (pixels per side)")->capture_default_str();
    synth->add_option("--per-class", f.per_class, "Images per class")->capture_default_str();
    synth->add_option("--noise", f.noise, "Noise standard deviation")->capture_default_str();
    synth->add_option("--means", f.means, "Mean intensity of each class")->expected(2);
    synth->add_option("--labels", f.labels, "Class labels")->expected(2);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*train) {
            svdclass::cmd_train(run_config(f), run_options(f));
        } else if (*sweep) {
            svdclass::cmd_sweep(run_config(f), run_options(f));
        } else if (*evaluate) {
            const auto model = svdclass::load_model(f.model);
            const auto result = svdclass::cmd_evaluate(model, f.data, run_options(f));
            std::cout << svdclass::dump(svdclass::metrics_json(result.report.confusion, model.model.class_labels));
        } else if (*predict) {
            svdclass::cmd_predict(svdclass::load_model(f.model), image, std::cout);
        } else if (*synth) {
            svdclass::SynthSpec spec;
            spec.classes = {svdclass::SynthClass{f.labels[0], f.means[0]}, svdclass::SynthClass{f.labels[1], f.means[1]}};
            spec.noise = f.noise;
            spec.images_per_class = f.per_class;
            spec.size = f.size;
            spec.seed = f.seed;
            const auto ds = svdclass::cmd_synth(spec, f.out, svdclass::warn_to_stderr);
            std::cerr << "wrote " << ds.items.size() << " images to " << f.out << '\n';
        }
    } catch (const svdclass::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const svdclass::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const svdclass::ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << '\n';
        return kConvergenceError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}
