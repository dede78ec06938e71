#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "svdclass/classifier.hpp"
#include "svdclass/errors.hpp"
#include "svdclass/imgio.hpp"
#include "svdclass/linalg.hpp"
#include "svdclass/report.hpp"
#include "svdclass/synth.hpp"
#include "svdclass/templates.hpp"

namespace svdclass {

inline constexpr const char* kModelFormatVersion = "1";

/// Everything that determines a trained model.
struct RunConfig {
    std::string data;
    std::size_t size = kDefaultImageSize;
    double train_fraction = 0.8;
    std::uint64_t seed = 42;
    std::vector<NormKind> norms = {kAllNorms.begin(), kAllNorms.end()};
    RankRange ranks{1, kDefaultImageSize};
    TemplateMethod method = TemplateMethod::Optimized;

    friend bool operator==(const RunConfig& a, const RunConfig& b) {
        return a.data == b.data && a.size == b.size && a.train_fraction == b.train_fraction && a.seed == b.seed &&
               a.norms == b.norms && a.ranks.first == b.ranks.first && a.ranks.last == b.ranks.last &&
               a.method == b.method;
    }
};

/// Execution settings that never influence results.
struct RunOptions {
    std::filesystem::path out;
    bool svg = false;
    unsigned workers = 1;
    WarningSink warn = warn_to_stderr;
    std::ostream* log = &std::cerr;
};

inline std::vector<NormKind> parse_norm_list(const std::string& s) {
    std::vector<NormKind> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = std::min(s.find(',', start), s.size());
        const auto token = s.substr(start, comma - start);
        if (token.empty()) throw ConfigError("empty entry in norm list '" + s + "'");
        const NormKind n = parse_norm(token);
        if (std::find(out.begin(), out.end(), n) != out.end())
            throw ConfigError("norm '" + token + "' listed twice");
        out.push_back(n);
        start = comma + 1;
    }
    return out;
}

inline std::string norm_list_string(const std::vector<NormKind>& norms) {
    std::string s;
    for (std::size_t i = 0; i < norms.size(); ++i) {
        if (i) s += ',';
        s += to_string(norms[i]);
    }
    return s;
}

inline void validate(const RunConfig& c) {
    if (c.data.empty()) throw ConfigError("no dataset root given (--data)");
    if (c.size == 0) throw ConfigError("--size must be at least 1");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw ConfigError("--train-frac must lie in (0, 1)");
    if (c.norms.empty()) throw ConfigError("--norms must name at least one norm");
    if (c.ranks.first < 1 || c.ranks.last < c.ranks.first || c.ranks.last > c.size)
        throw ConfigError("--ranks " + to_string(c.ranks) + " must lie within 1.." + std::to_string(c.size));
}

inline json to_json(const RunConfig& c) {
    return {{"data", c.data},
            {"size", c.size},
            {"train_frac", c.train_fraction},
            {"seed", c.seed},
            {"norms", norm_list_string(c.norms)},
            {"ranks", to_string(c.ranks)},
            {"template", std::string(to_string(c.method))}};
}

inline RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    c.data = j.at("data").get<std::string>();
    c.size = j.at("size").get<std::size_t>();
    c.train_fraction = j.at("train_frac").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.norms = parse_norm_list(j.at("norms").get<std::string>());
    c.ranks = parse_rank_range(j.at("ranks").get<std::string>());
    c.method = parse_template_method(j.at("template").get<std::string>());
    validate(c);
    return c;
}

/// Signed weight-sum difference and largest per-weight gap between the
/// optimized and uniform weights of one class.
struct TemplateComparison {
    std::string label;
    double divergence = 0.0;
    double max_abs_difference = 0.0;
    double objective_uniform = 0.0;
    double objective_optimized = 0.0;
    int solver_iterations = 0;
    double kkt_residual = 0.0;
};

struct ModelFile {
    RunConfig config;
    TemplatePair templates;
    ModelConfig model;
    std::vector<std::string> train_files;
};

inline json to_json(const ModelFile& m) {
    return {{"version", kModelFormatVersion},
            {"config", to_json(m.config)},
            {"model", to_json(m.model)},
            {"templates", {to_json(m.templates[0]), to_json(m.templates[1])}},
            {"train_files", m.train_files}};
}

inline ModelFile model_from_json(const json& j) {
    if (!j.contains("version") || j.at("version") != kModelFormatVersion) {
        throw ConfigError("unsupported model file version " + (j.contains("version") ? j.at("version").dump() : "<missing>") +
                          " (expected \"" + kModelFormatVersion + "\")");
    }
    ModelFile m;
    m.config = run_config_from_json(j.at("config"));
    m.model = model_config_from_json(j.at("model"));
    const auto& ts = j.at("templates");
    if (!ts.is_array() || ts.size() != 2) throw ConfigError("model file must hold exactly two templates");
    m.templates = {template_from_json(ts[0]), template_from_json(ts[1])};
    m.train_files = j.at("train_files").get<std::vector<std::string>>();

    for (std::size_t c = 0; c < 2; ++c) {
        const auto& t = m.templates[c];
        if (t.label != m.model.class_labels[c]) throw ConfigError("template labels do not match the model's classes");
        if (t.matrix.rows() != m.config.size || t.matrix.cols() != m.config.size)
            throw DataError("template '" + t.label + "' is " + std::to_string(t.matrix.rows()) + "x" +
                            std::to_string(t.matrix.cols()) + " but the model image size is " +
                            std::to_string(m.config.size));
    }
    if (m.model.rank < 1 || m.model.rank > m.config.size) throw ConfigError("model rank outside the image size");
    return m;
}

inline ModelFile load_model(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse model file " + path.string() + ": " + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const json::exception& e) {
        throw ConfigError("malformed model file " + path.string() + ": " + e.what());
    }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// train

struct TrainResult {
    ModelFile model;
    NormSelection selection;
    std::array<TemplateComparison, 2> comparisons;
    std::vector<svg::NormMetrics> norm_metrics;  // training-set metrics at each norm's best rank
    std::vector<std::string> files_read;
};

inline json train_report_json(const TrainResult& r) {
    json comparisons = json::array();
    for (const auto& c : r.comparisons) {
        comparisons.push_back({{"label", c.label},
                               {"weight_divergence", c.divergence},
                               {"weight_max_abs_difference", c.max_abs_difference},
                               {"objective_uniform", c.objective_uniform},
                               {"objective_optimized", c.objective_optimized},
                               {"solver_iterations", c.solver_iterations},
                               {"kkt_residual", c.kkt_residual}});
    }
    const auto& labels = r.model.model.class_labels;
    json norms = json::array();
    for (const auto& nm : r.norm_metrics) {
        json entry = metrics_json(nm.confusion, labels);
        entry["norm"] = std::string(to_string(nm.norm));
        entry["rank"] = nm.rank;
        norms.push_back(entry);
    }
    return {{"config", to_json(r.model.config)},
            {"selected", to_json(r.model.model)},
            {"selected_average_probability", r.selection.average},
            {"train_counts", {r.model.templates[0].weights.size(), r.model.templates[1].weights.size()}},
            {"template_comparison", comparisons},
            {"norms", norms}};
}

/// Loads the training split only, builds both kinds of template, selects
/// (norm, rank) on the training split, and writes the model plus reports
/// into options.out. Nothing is written unless every step succeeds.
inline TrainResult cmd_train(const RunConfig& config, const RunOptions& options) {
    validate(config);
    const auto manifest = list_dataset(config.data);
    const auto [train_files, test_files] = split_manifest(manifest, config.train_fraction, config.seed);

    TrainResult result;
    const LabeledDataset train =
        load_manifest(train_files, config.size, options.warn, options.workers, &result.files_read);
    train.validate();

    TemplatePair chosen;
    for (std::size_t c = 0; c < 2; ++c) {
        const auto images = train.images_of(c);
        const ClassTemplate uniform = uniform_template(images, train.labels[c]);
        const WeightSolution solved = solve_template_weights(images);
        ClassTemplate optimized{train.labels[c], weighted_sum(images, solved.weights), solved.weights,
                                TemplateMethod::Optimized};
        const TemplateObjective objective(images);

        auto& cmp = result.comparisons[c];
        cmp.label = train.labels[c];
        cmp.divergence = weight_divergence(optimized.weights, uniform.weights);
        cmp.max_abs_difference = weight_max_abs_difference(optimized.weights, uniform.weights);
        cmp.objective_uniform = objective.value(uniform.weights);
        cmp.objective_optimized = solved.objective;
        cmp.solver_iterations = solved.iterations;
        cmp.kkt_residual = solved.kkt_residual;
        if (options.log) {
            *options.log << "template '" << cmp.label << "': " << images.size()
                         << " images, weight divergence " << format_double(cmp.divergence) << ", max |dw| "
                         << format_double(cmp.max_abs_difference) << '\n';
        }
        chosen[c] = config.method == TemplateMethod::Uniform ? uniform : optimized;
    }

    result.selection = select_norm(train, chosen, config.norms, config.ranks, options.workers);
    for (const auto& sweep : result.selection.sweeps) {
        const std::size_t k = select_rank(sweep);
        const auto report = evaluate(train, chosen, ModelConfig{sweep.norm, k, train.labels}, options.workers);
        result.norm_metrics.push_back({sweep.norm, k, report.confusion});
    }

    result.model.config = config;
    result.model.templates = chosen;
    result.model.model = ModelConfig{result.selection.norm, result.selection.rank, train.labels};
    for (const auto& item : train.items) result.model.train_files.push_back(item.source);

    if (options.log) {
        *options.log << "selected norm " << to_string(result.selection.norm) << ", rank " << result.selection.rank
                     << " (average training probability " << format_double(result.selection.average) << ")\n";
    }

    if (!options.out.empty()) {
        ensure_directory(options.out);
        write_text(options.out / "model.json", dump(to_json(result.model)));
        write_text(options.out / "train_report.json", dump(train_report_json(result)));
        write_text(options.out / "sweep.csv", sweep_csv(result.selection.sweeps));
        if (options.svg) {
            for (const auto& sweep : result.selection.sweeps)
                write_text(options.out / ("sweep_" + std::string(to_string(sweep.norm)) + ".svg"),
                           svg::sweep_chart(sweep, train.labels));
            write_text(options.out / "norms.svg", svg::norm_bar_chart(result.norm_metrics, train.labels));
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateResult {
    EvaluationReport report;
    std::vector<std::string> files_read;
    bool held_out_split = false;
};

inline bool same_location(const std::filesystem::path& a, const std::filesystem::path& b) {
    std::error_code ec;
    const bool eq = std::filesystem::equivalent(a, b, ec);
    return !ec && eq;
}

/// Evaluates a trained model. With `data` empty or naming the model's own
/// dataset root, the held-out split recorded by the model's seed and train
/// fraction is used; any other root is evaluated in full.
inline EvaluateResult cmd_evaluate(const ModelFile& model, const std::string& data, const RunOptions& options) {
    EvaluateResult result;
    const std::string root = data.empty() ? model.config.data : data;
    auto manifest = list_dataset(root);
    if (manifest.labels != model.model.class_labels) {
        throw DataError("dataset classes {" + manifest.labels[0] + ", " + manifest.labels[1] +
                        "} do not match the model's {" + model.model.class_labels[0] + ", " +
                        model.model.class_labels[1] + "}");
    }
    if (data.empty() || same_location(data, model.config.data)) {
        manifest = split_manifest(manifest, model.config.train_fraction, model.config.seed).second;
        result.held_out_split = true;
        if (manifest.files[0].empty() && manifest.files[1].empty())
            throw DataError("held-out split is empty; lower --train-frac");
    }

    // A held-out split may leave one class without images, so classes are not required here.
    LabeledDataset test =
        decode_manifest(manifest, model.config.size, options.warn, options.workers, &result.files_read);
    if (test.items.empty()) throw DataError("no decodable test images under " + root);

    result.report = evaluate(test, model.templates, model.model, options.workers);
    if (options.log) {
        *options.log << "evaluated " << result.report.confusion.total() << " images: accuracy "
                     << format_double(result.report.confusion.accuracy()) << '\n';
    }
    if (!options.out.empty()) {
        ensure_directory(options.out);
        json j = to_json(result.report);
        j["source"] = {{"data", root}, {"held_out_split", result.held_out_split}};
        write_text(options.out / "evaluation.json", dump(j));
        write_text(options.out / "evaluation.csv", evaluation_csv(result.report));
        write_text(options.out / "predictions.txt", prediction_listing(result.report));
        if (options.svg) write_text(options.out / "scatter.svg", svg::error_scatter(result.report));
    }
    return result;
}

// ---------------------------------------------------------------------------
// predict, sweep, synth

inline PredictionOutcome cmd_predict(const ModelFile& model, const std::filesystem::path& image, std::ostream& out) {
    const GrayMatrix m = preprocess(decode_file(image), model.config.size);
    const PredictionOutcome o = classify(m, model.templates, model.model);
    const auto& labels = model.model.class_labels;
    out << "predicted: " << labels[o.predicted] << '\n'
        << "error_" << labels[0] << ": " << format_double(o.errors[0]) << '\n'
        << "error_" << labels[1] << ": " << format_double(o.errors[1]) << '\n';
    return o;
}

/// Rank sweeps on the training split without writing a model.
inline std::vector<RankSweepResult> cmd_sweep(const RunConfig& config, const RunOptions& options) {
    validate(config);
    const auto manifest = list_dataset(config.data);
    const auto train_files = split_manifest(manifest, config.train_fraction, config.seed).first;
    const LabeledDataset train = load_manifest(train_files, config.size, options.warn, options.workers);
    train.validate();
    TemplatePair templates;
    for (std::size_t c = 0; c < 2; ++c) templates[c] = build_template(train.images_of(c), train.labels[c], config.method);
    auto sweeps = rank_sweeps(train, templates, config.norms, config.ranks, options.workers);
    if (!options.out.empty()) {
        ensure_directory(options.out);
        write_text(options.out / "sweep.csv", sweep_csv(sweeps));
        if (options.svg)
            for (const auto& s : sweeps)
                write_text(options.out / ("sweep_" + std::string(to_string(s.norm)) + ".svg"),
                           svg::sweep_chart(s, train.labels));
    }
    return sweeps;
}

inline LabeledDataset cmd_synth(const SynthSpec& spec, const std::filesystem::path& out, const WarningSink& warn) {
    auto ds = generate(spec, warn);
    write_dataset(ds, out);
    return ds;
}

}  // namespace svdclass
