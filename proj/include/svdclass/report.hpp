#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "svdclass/classifier.hpp"
#include "svdclass/errors.hpp"
#include "svdclass/templates.hpp"

namespace svdclass {

using json = nlohmann::ordered_json;

/// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const ModelConfig& c) {
    return {{"norm", std::string(to_string(c.norm))},
            {"rank", c.rank},
            {"class_labels", {c.class_labels[0], c.class_labels[1]}}};
}

inline ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    c.norm = parse_norm(j.at("norm").get<std::string>());
    c.rank = j.at("rank").get<std::size_t>();
    const auto labels = j.at("class_labels").get<std::vector<std::string>>();
    if (labels.size() != 2) throw ConfigError("model must name exactly two class labels");
    c.class_labels = {labels[0], labels[1]};
    return c;
}

inline json to_json(const ClassTemplate& t) {
    return {{"label", t.label},
            {"method", std::string(to_string(t.method))},
            {"rows", t.matrix.rows()},
            {"cols", t.matrix.cols()},
            {"values", std::vector<double>(t.matrix.values().begin(), t.matrix.values().end())},
            {"weights", t.weights}};
}

inline ClassTemplate template_from_json(const json& j) {
    ClassTemplate t;
    t.label = j.at("label").get<std::string>();
    t.method = parse_template_method(j.at("method").get<std::string>());
    t.matrix = Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                      j.at("values").get<std::vector<double>>());
    t.weights = j.at("weights").get<std::vector<double>>();
    return t;
}

inline json to_json(const ConfusionMatrix& cm, const ClassLabels& labels) {
    return {{"labels", {labels[0], labels[1]}},
            {"counts", {{cm.counts[0][0], cm.counts[0][1]}, {cm.counts[1][0], cm.counts[1][1]}}}};
}

inline json metrics_json(const ConfusionMatrix& cm, const ClassLabels& labels) {
    json per_class = json::array();
    for (std::size_t c = 0; c < 2; ++c) {
        per_class.push_back({{"label", labels[c]},
                             {"support", cm.actual(c)},
                             {"tp_recall", optional_number(cm.recall(c))},
                             {"fp_recall", optional_number(cm.false_positive_rate(c))}});
    }
    return {{"accuracy", cm.accuracy()},
            {"balanced_accuracy", optional_number(cm.balanced_accuracy())},
            {"total", cm.total()},
            {"per_class", per_class}};
}

inline json to_json(const EvaluationReport& r) {
    return {{"config", to_json(r.config)},
            {"confusion", to_json(r.confusion, r.config.class_labels)},
            {"metrics", metrics_json(r.confusion, r.config.class_labels)}};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string sweep_csv(const std::vector<RankSweepResult>& sweeps) {
    std::string out = "norm,rank,p_classA,p_classB,p_avg\n";
    for (const auto& s : sweeps)
        for (const auto& e : s.entries) {
            out += std::string(to_string(s.norm)) + ',' + std::to_string(e.rank) + ',' +
                   format_double(e.probability[0]) + ',' + format_double(e.probability[1]) + ',' +
                   format_double(e.average) + '\n';
        }
    return out;
}

inline std::string evaluation_csv(const EvaluationReport& r) {
    std::string out = "file,true,predicted,error_classA,error_classB\n";
    for (const auto& img : r.images) {
        out += img.source + ',' + r.config.class_labels[img.truth] + ',' +
               r.config.class_labels[img.outcome.predicted] + ',' + format_double(img.outcome.errors[0]) + ',' +
               format_double(img.outcome.errors[1]) + '\n';
    }
    return out;
}

/// One "file -> predicted" line per image, marking misclassifications.
inline std::string prediction_listing(const EvaluationReport& r) {
    std::string out;
    for (const auto& img : r.images) {
        out += img.source + " -> " + r.config.class_labels[img.outcome.predicted];
        if (img.outcome.predicted != img.truth) out += " (true: " + r.config.class_labels[img.truth] + ")";
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// SVG charts

namespace svg {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline const std::array<const char*, 3> kPalette = {"#1b9e77", "#d95f02", "#000000"};

struct Frame {
    double width = 640, height = 400, left = 60, right = 20, top = 40, bottom = 50;
    double x0, x1, y0, y1;

    double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
    double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline std::string open(const Frame& f, const std::string& title) {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.width) << "\" height=\"" << num(f.height)
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << num(f.width / 2) << "\" y=\"20\" text-anchor=\"middle\">" << escape(title) << "</text>\n"
      << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.height - f.bottom) << "\" x2=\""
      << num(f.width - f.right) << "\" y2=\"" << num(f.height - f.bottom) << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.top) << "\" x2=\"" << num(f.left) << "\" y2=\""
      << num(f.height - f.bottom) << "\" stroke=\"black\"/>\n";
    return o.str();
}

inline std::string axis_labels(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
    std::ostringstream o;
    o << "<text x=\"" << num((f.left + f.width - f.right) / 2) << "\" y=\"" << num(f.height - 10)
      << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n"
      << "<text x=\"15\" y=\"" << num((f.top + f.height - f.bottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << num((f.top + f.height - f.bottom) / 2) << ")\">" << escape(ylabel) << "</text>\n"
      << "<text x=\"" << num(f.left - 5) << "\" y=\"" << num(f.py(f.y0)) << "\" text-anchor=\"end\">"
      << num(f.y0) << "</text>\n"
      << "<text x=\"" << num(f.left - 5) << "\" y=\"" << num(f.py(f.y1)) << "\" text-anchor=\"end\">"
      << num(f.y1) << "</text>\n"
      << "<text x=\"" << num(f.px(f.x0)) << "\" y=\"" << num(f.height - f.bottom + 15)
      << "\" text-anchor=\"middle\">" << num(f.x0) << "</text>\n"
      << "<text x=\"" << num(f.px(f.x1)) << "\" y=\"" << num(f.height - f.bottom + 15)
      << "\" text-anchor=\"middle\">" << num(f.x1) << "</text>\n";
    return o.str();
}

inline std::string legend(const Frame& f, const std::vector<std::string>& names) {
    std::ostringstream o;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double y = f.top + 15.0 * static_cast<double>(i);
        o << "<rect x=\"" << num(f.width - f.right - 150) << "\" y=\"" << num(y - 9) << "\" width=\"10\" height=\"10\" fill=\""
          << kPalette[i % kPalette.size()] << "\"/>\n"
          << "<text x=\"" << num(f.width - f.right - 135) << "\" y=\"" << num(y) << "\">" << escape(names[i]) << "</text>\n";
    }
    return o.str();
}

/// Per-class and average prediction probability against rank.
inline std::string sweep_chart(const RankSweepResult& sweep, const ClassLabels& labels) {
    Frame f;
    f.x0 = static_cast<double>(sweep.entries.empty() ? 1 : sweep.entries.front().rank);
    f.x1 = static_cast<double>(sweep.entries.empty() ? 2 : sweep.entries.back().rank);
    if (f.x1 <= f.x0) f.x1 = f.x0 + 1;
    f.y0 = 0.0;
    f.y1 = 1.0;
    std::string out = open(f, "Prediction probability vs rank (" + std::string(to_string(sweep.norm)) + " norm)");
    for (std::size_t series = 0; series < 3; ++series) {
        out += "<polyline fill=\"none\" stroke=\"" + std::string(kPalette[series]) + "\" points=\"";
        for (const auto& e : sweep.entries) {
            const double y = series < 2 ? e.probability[series] : e.average;
            out += num(f.px(static_cast<double>(e.rank))) + "," + num(f.py(y)) + " ";
        }
        out += "\"/>\n";
    }
    out += axis_labels(f, "rank", "prediction probability");
    out += legend(f, {labels[0], labels[1], "average"});
    return out + "</svg>\n";
}

struct NormMetrics {
    NormKind norm;
    std::size_t rank;
    ConfusionMatrix confusion;
};

/// Grouped bars of TP recall, FP recall (first class as positive) and accuracy per norm.
inline std::string norm_bar_chart(const std::vector<NormMetrics>& rows, const ClassLabels& labels) {
    Frame f;
    f.x0 = 0;
    f.x1 = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
    f.y0 = 0;
    f.y1 = 1;
    std::string out = open(f, "Training metrics per norm at its best rank (positive class: " + labels[0] + ")");
    const double group = (f.width - f.left - f.right) / f.x1;
    const double bar = group / 4.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& cm = rows[i].confusion;
        const std::array<double, 3> values = {cm.recall(0).value_or(0.0), cm.false_positive_rate(0).value_or(0.0),
                                              cm.accuracy()};
        for (std::size_t b = 0; b < 3; ++b) {
            const double x = f.left + group * static_cast<double>(i) + bar * (static_cast<double>(b) + 0.5);
            out += "<rect x=\"" + num(x) + "\" y=\"" + num(f.py(values[b])) + "\" width=\"" + num(bar * 0.9) +
                   "\" height=\"" + num(f.py(0) - f.py(values[b])) + "\" fill=\"" + kPalette[b] + "\"/>\n";
        }
        out += "<text x=\"" + num(f.left + group * (static_cast<double>(i) + 0.5)) + "\" y=\"" +
               num(f.height - f.bottom + 15) + "\" text-anchor=\"middle\">" + std::string(to_string(rows[i].norm)) +
               " (k=" + std::to_string(rows[i].rank) + ")</text>\n";
    }
    out += legend(f, {"TP recall", "FP recall", "accuracy"});
    return out + "</svg>\n";
}

/// Error against class A vs error against class B; points below the
/// diagonal are predicted as class B.
inline std::string error_scatter(const EvaluationReport& r) {
    double hi = 0.0;
    for (const auto& img : r.images) hi = std::max({hi, img.outcome.errors[0], img.outcome.errors[1]});
    Frame f;
    f.x0 = f.y0 = 0.0;
    f.x1 = f.y1 = hi > 0 ? hi * 1.05 : 1.0;
    const auto& labels = r.config.class_labels;
    std::string out = open(f, "Test classification (" + std::string(to_string(r.config.norm)) +
                                  " norm, rank " + std::to_string(r.config.rank) + ")");
    out += "<line x1=\"" + num(f.px(0)) + "\" y1=\"" + num(f.py(0)) + "\" x2=\"" + num(f.px(f.x1)) + "\" y2=\"" +
           num(f.py(f.y1)) + "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
    for (const auto& img : r.images) {
        out += "<circle cx=\"" + num(f.px(img.outcome.errors[0])) + "\" cy=\"" + num(f.py(img.outcome.errors[1])) +
               "\" r=\"3\" fill=\"" + kPalette[img.truth] + "\"/>\n";
    }
    out += axis_labels(f, "error vs " + labels[0] + " template", "error vs " + labels[1] + " template");
    out += legend(f, {"true " + labels[0], "true " + labels[1]});
    return out + "</svg>\n";
}

}  // namespace svg

}  // namespace svdclass
