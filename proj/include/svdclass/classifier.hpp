#pragma once

#include <array>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "svdclass/errors.hpp"
#include "svdclass/imgio.hpp"
#include "svdclass/linalg.hpp"
#include "svdclass/parallel.hpp"
#include "svdclass/templates.hpp"

namespace svdclass {

using TemplatePair = std::array<ClassTemplate, 2>;

struct ModelConfig {
    NormKind norm = NormKind::Frobenius;
    std::size_t rank = 1;
    ClassLabels class_labels;
};

/// Inclusive range of truncation ranks.
struct RankRange {
    std::size_t first = 1;
    std::size_t last = kDefaultImageSize;

    std::size_t size() const { return last - first + 1; }
};

/// Parses "a..b" or a single rank "k".
inline RankRange parse_rank_range(std::string_view s) {
    auto parse_one = [&](std::string_view part) {
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc{} || ptr != part.data() + part.size() || part.empty())
            throw ConfigError("invalid rank range '" + std::string(s) + "'");
        return v;
    };
    RankRange r;
    if (const auto dots = s.find(".."); dots != std::string_view::npos) {
        r = {parse_one(s.substr(0, dots)), parse_one(s.substr(dots + 2))};
    } else {
        r.first = r.last = parse_one(s);
    }
    if (r.first < 1 || r.last < r.first) throw ConfigError("invalid rank range '" + std::string(s) + "'");
    return r;
}

inline std::string to_string(const RankRange& r) {
    return std::to_string(r.first) + ".." + std::to_string(r.last);
}

struct PredictionOutcome {
    std::size_t predicted = 0;          // index into the class labels
    std::array<double, 2> errors = {};  // reconstruction error per class
};

/// The first class wins only on a strictly smaller error; ties go to the second.
inline std::size_t decide(const std::array<double, 2>& errors) { return errors[0] < errors[1] ? 0 : 1; }

namespace detail {

inline void check_templates(const TemplatePair& templates) {
    if (!templates[0].matrix.same_shape(templates[1].matrix))
        throw DataError("class templates have differing dimensions");
    if (templates[0].matrix.empty()) throw DataError("class template is empty");
}

inline std::size_t min_dimension(const Matrix& m) { return std::min(m.rows(), m.cols()); }

inline void check_rank(std::size_t rank, const Matrix& m) {
    if (rank < 1 || rank > min_dimension(m))
        throw ConfigError("rank " + std::to_string(rank) + " outside [1, " + std::to_string(min_dimension(m)) +
                          "]");
}

inline std::array<double, 2> reconstruction_errors(const Matrix& approx, const TemplatePair& templates,
                                                   NormKind norm) {
    return {matrix_norm(approx - templates[0].matrix, norm), matrix_norm(approx - templates[1].matrix, norm)};
}

}  // namespace detail

/// Classifies one image: truncate its SVD to config.rank and compare the
/// result with each full-rank template under config.norm.
inline PredictionOutcome classify(const GrayMatrix& test, const TemplatePair& templates, const ModelConfig& config) {
    detail::check_templates(templates);
    if (!test.same_shape(templates[0].matrix))
        throw DataError("test image is " + std::to_string(test.rows()) + "x" + std::to_string(test.cols()) +
                        " but templates are " + std::to_string(templates[0].matrix.rows()) + "x" +
                        std::to_string(templates[0].matrix.cols()));
    detail::check_rank(config.rank, test);
    const Matrix approx = truncate(svd(test), config.rank);
    PredictionOutcome out;
    out.errors = detail::reconstruction_errors(approx, templates, config.norm);
    out.predicted = decide(out.errors);
    return out;
}

// ---------------------------------------------------------------------------
// Rank sweeps

struct RankSweepEntry {
    std::size_t rank = 0;
    std::array<double, 2> probability = {};  // per-class training recall
    double average = 0.0;
};

struct RankSweepResult {
    NormKind norm = NormKind::Frobenius;
    std::vector<RankSweepEntry> entries;
};

/// Mean of the two per-class recalls.
inline double average_probability(const std::array<double, 2>& p) { return (p[0] + p[1]) / 2.0; }

/// Reconstruction errors of every item at every (norm, rank) pair. Each
/// image's SVD is computed once and the rank-k approximations are built
/// incrementally, matching truncate() bit for bit.
struct ErrorTable {
    std::vector<NormKind> norms;
    RankRange ranks;
    // errors[item][norm_index * ranks.size() + rank_offset]
    std::vector<std::vector<std::array<double, 2>>> errors;

    const std::array<double, 2>& at(std::size_t item, std::size_t norm_index, std::size_t rank) const {
        return errors[item][norm_index * ranks.size() + (rank - ranks.first)];
    }
};

inline ErrorTable compute_error_table(const LabeledDataset& ds, const TemplatePair& templates,
                                      const std::vector<NormKind>& norms, RankRange ranks, unsigned workers = 1) {
    detail::check_templates(templates);
    if (norms.empty()) throw ConfigError("no norms requested");
    if (ds.items.empty()) throw DataError("dataset is empty");
    for (const auto& it : ds.items)
        if (!it.image.same_shape(templates[0].matrix))
            throw DataError("image " + it.source + " does not match the template dimensions");
    detail::check_rank(ranks.first, templates[0].matrix);
    detail::check_rank(ranks.last, templates[0].matrix);

    ErrorTable table{norms, ranks, std::vector<std::vector<std::array<double, 2>>>(ds.items.size())};
    parallel_for(ds.items.size(), workers, [&](std::size_t i) {
        const SvdFactors f = svd(ds.items[i].image);
        Matrix approx(f.u.rows(), f.v.rows());
        auto& row = table.errors[i];
        row.resize(norms.size() * ranks.size());
        std::size_t next_term = 0;
        for (std::size_t k = ranks.first; k <= ranks.last; ++k) {
            for (; next_term < k; ++next_term) add_rank_one_term(f, next_term, approx);
            for (std::size_t n = 0; n < norms.size(); ++n)
                row[n * ranks.size() + (k - ranks.first)] = detail::reconstruction_errors(approx, templates, norms[n]);
        }
    });
    return table;
}

inline RankSweepResult sweep_from_table(const LabeledDataset& ds, const ErrorTable& table, std::size_t norm_index) {
    std::array<std::size_t, 2> totals = {ds.count(0), ds.count(1)};
    if (totals[0] == 0 || totals[1] == 0) throw DataError("rank sweep needs images of both classes");
    RankSweepResult result{table.norms[norm_index], {}};
    for (std::size_t k = table.ranks.first; k <= table.ranks.last; ++k) {
        std::array<std::size_t, 2> correct = {0, 0};
        for (std::size_t i = 0; i < ds.items.size(); ++i)
            if (decide(table.at(i, norm_index, k)) == ds.items[i].label) ++correct[ds.items[i].label];
        RankSweepEntry e;
        e.rank = k;
        for (std::size_t c = 0; c < 2; ++c)
            e.probability[c] = static_cast<double>(correct[c]) / static_cast<double>(totals[c]);
        e.average = average_probability(e.probability);
        result.entries.push_back(e);
    }
    return result;
}

/// One sweep per requested norm, sharing the per-image SVDs.
inline std::vector<RankSweepResult> rank_sweeps(const LabeledDataset& train, const TemplatePair& templates,
                                                const std::vector<NormKind>& norms, RankRange ranks,
                                                unsigned workers = 1) {
    train.validate();
    const ErrorTable table = compute_error_table(train, templates, norms, ranks, workers);
    std::vector<RankSweepResult> out;
    for (std::size_t n = 0; n < norms.size(); ++n) out.push_back(sweep_from_table(train, table, n));
    return out;
}

inline RankSweepResult rank_sweep(const LabeledDataset& train, const TemplatePair& templates, NormKind norm,
                                  RankRange ranks, unsigned workers = 1) {
    return rank_sweeps(train, templates, {norm}, ranks, workers).front();
}

/// Smallest rank attaining the maximal average probability.
inline std::size_t select_rank(const RankSweepResult& sweep) {
    if (sweep.entries.empty()) throw ConfigError("empty rank sweep");
    const RankSweepEntry* best = &sweep.entries.front();
    for (const auto& e : sweep.entries)
        if (e.average > best->average || (e.average == best->average && e.rank < best->rank)) best = &e;
    return best->rank;
}

inline double average_at(const RankSweepResult& sweep, std::size_t rank) {
    for (const auto& e : sweep.entries)
        if (e.rank == rank) return e.average;
    throw ConfigError("rank " + std::to_string(rank) + " not in sweep");
}

/// Tie-break priority between norms with equal best scores; lower wins.
inline int norm_priority(NormKind n) {
    switch (n) {
        case NormKind::Frobenius: return 0;
        case NormKind::Two: return 1;
        case NormKind::One: return 2;
        case NormKind::Infinity: return 3;
    }
    return 4;
}

struct NormSelection {
    NormKind norm = NormKind::Frobenius;
    std::size_t rank = 1;
    double average = 0.0;
    std::vector<RankSweepResult> sweeps;  // one per candidate, in candidate order
};

inline NormSelection select_from_sweeps(std::vector<RankSweepResult> sweeps) {
    if (sweeps.empty()) throw ConfigError("no candidate norms");
    NormSelection sel;
    bool have = false;
    for (const auto& s : sweeps) {
        const std::size_t k = select_rank(s);
        const double avg = average_at(s, k);
        if (!have || avg > sel.average ||
            (avg == sel.average && norm_priority(s.norm) < norm_priority(sel.norm))) {
            sel.norm = s.norm;
            sel.rank = k;
            sel.average = avg;
            have = true;
        }
    }
    sel.sweeps = std::move(sweeps);
    return sel;
}

/// Sweeps every candidate norm, picks each norm's best rank, and returns the
/// (norm, rank) with the highest average probability.
inline NormSelection select_norm(const LabeledDataset& train, const TemplatePair& templates,
                                 const std::vector<NormKind>& candidates, RankRange ranks, unsigned workers = 1) {
    return select_from_sweeps(rank_sweeps(train, templates, candidates, ranks, workers));
}

// ---------------------------------------------------------------------------
// Evaluation

/// Rows are the true class, columns the predicted class.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, 2>, 2> counts = {};

    std::size_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
    std::size_t actual(std::size_t c) const { return counts[c][0] + counts[c][1]; }

    double accuracy() const {
        return total() == 0 ? 0.0
                            : static_cast<double>(counts[0][0] + counts[1][1]) / static_cast<double>(total());
    }
    /// Fraction of class-c images predicted as c.
    std::optional<double> recall(std::size_t c) const {
        if (actual(c) == 0) return std::nullopt;
        return static_cast<double>(counts[c][c]) / static_cast<double>(actual(c));
    }
    /// Fraction of the other class's images predicted as c.
    std::optional<double> false_positive_rate(std::size_t c) const {
        const std::size_t other = 1 - c;
        if (actual(other) == 0) return std::nullopt;
        return static_cast<double>(counts[other][c]) / static_cast<double>(actual(other));
    }
    std::optional<double> balanced_accuracy() const {
        const auto r0 = recall(0);
        const auto r1 = recall(1);
        if (!r0 || !r1) return std::nullopt;
        return average_probability({*r0, *r1});
    }
};

struct ImageResult {
    std::string source;
    std::size_t truth = 0;
    PredictionOutcome outcome;
};

struct EvaluationReport {
    ModelConfig config;
    ConfusionMatrix confusion;
    std::vector<ImageResult> images;
};

inline EvaluationReport evaluate(const LabeledDataset& test, const TemplatePair& templates, const ModelConfig& config,
                                 unsigned workers = 1) {
    if (test.items.empty()) throw DataError("evaluation set is empty");
    detail::check_templates(templates);
    detail::check_rank(config.rank, templates[0].matrix);
    const ErrorTable table =
        compute_error_table(test, templates, {config.norm}, RankRange{config.rank, config.rank}, workers);

    EvaluationReport report{config, {}, {}};
    for (std::size_t i = 0; i < test.items.size(); ++i) {
        const auto& item = test.items[i];
        PredictionOutcome o;
        o.errors = table.at(i, 0, config.rank);
        o.predicted = decide(o.errors);
        ++report.confusion.counts[item.label][o.predicted];
        report.images.push_back({item.source, item.label, o});
    }
    return report;
}

}  // namespace svdclass
