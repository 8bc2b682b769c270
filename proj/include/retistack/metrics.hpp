#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "retistack/csv.hpp"
#include "retistack/dataset.hpp"
#include "retistack/error.hpp"
#include "retistack/prediction.hpp"

namespace retistack {

struct RocPoint {
    double fpr;
    double tpr;
    double threshold;
};

struct RocCurve {
    std::vector<RocPoint> points; // starts at (0,0), ends at (1,1)
};

namespace detail {

// Indices sorted by score descending; equal scores stay grouped.
inline std::vector<std::size_t> order_by_score_desc(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

inline void check_binary_pair(const std::vector<double>& scores,
                              const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) fail_validation("scores/labels length mismatch");
    if (scores.empty()) fail_validation("empty score vector");
}

} // namespace detail

// One curve point per unique score value (descending); tied scores collapse
// into a single step so the curve credits them with the diagonal segment.
inline RocCurve roc_curve(const std::vector<double>& scores,
                          const std::vector<std::uint8_t>& labels) {
    detail::check_binary_pair(scores, labels);
    std::size_t total_pos = 0;
    for (auto y : labels) total_pos += y;
    const std::size_t total_neg = labels.size() - total_pos;
    if (total_pos == 0 || total_neg == 0)
        fail_validation("roc_curve needs at least one positive and one negative");

    const auto order = detail::order_by_score_desc(scores);

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        const double value = scores[order[i]];
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == value) {
            if (labels[order[j]]) ++tp; else ++fp;
            ++j;
        }
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(total_neg),
                                static_cast<double>(tp) / static_cast<double>(total_pos),
                                value});
        i = j;
    }
    return curve;
}

// Trapezoidal area under roc_curve. With grouped ties this equals the
// Mann-Whitney statistic where tied positive/negative pairs count 1/2.
inline double auroc(const std::vector<double>& scores,
                    const std::vector<std::uint8_t>& labels) {
    const RocCurve curve = roc_curve(scores, labels);
    double area = 0.0;
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        const auto& a = curve.points[k - 1];
        const auto& b = curve.points[k];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    return area;
}

// Step-wise (non-interpolated) average precision over descending-score tie
// groups: AP = sum_g (R_g - R_{g-1}) * P_g.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<std::uint8_t>& labels) {
    detail::check_binary_pair(scores, labels);
    std::size_t total_pos = 0;
    for (auto y : labels) total_pos += y;
    if (total_pos == 0) fail_validation("average_precision needs at least one positive");

    const auto order = detail::order_by_score_desc(scores);

    double ap = 0.0;
    double recall_prev = 0.0;
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        const double value = scores[order[i]];
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == value) {
            if (labels[order[j]]) ++tp; else ++fp;
            ++j;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j;
    }
    return ap;
}

struct ClassEval {
    std::string name;
    std::optional<double> auroc;
    std::optional<double> ap;
    std::size_t positives = 0;
};

struct EvalReport {
    std::string fold_tag;
    std::vector<ClassEval> classes;
    std::vector<std::string> skipped;   // classes lacking both outcomes
    double macro_auroc = 0.0;           // over non-skipped classes only
    double macro_map = 0.0;
    double challenge_score = 0.0;       // (macro_auroc + macro_map) / 2
};

namespace detail {

inline void finalize_macros(EvalReport& report) {
    double auroc_sum = 0.0, ap_sum = 0.0;
    std::size_t auroc_n = 0, ap_n = 0;
    for (const auto& c : report.classes) {
        if (c.auroc) { auroc_sum += *c.auroc; ++auroc_n; }
        if (c.ap) { ap_sum += *c.ap; ++ap_n; }
    }
    report.macro_auroc = auroc_n ? auroc_sum / static_cast<double>(auroc_n) : 0.0;
    report.macro_map = ap_n ? ap_sum / static_cast<double>(ap_n) : 0.0;
    report.challenge_score = (report.macro_auroc + report.macro_map) / 2.0;
}

} // namespace detail

// Per-class AUROC and AP plus macro averages. Classes whose truth column has
// no positives or no negatives cannot be scored and are listed as skipped
// instead of polluting the macros.
inline EvalReport evaluate_multilabel(const PredictionMatrix& preds,
                                      const LabelMatrix& truth,
                                      const std::string& fold_tag = "") {
    preds.validate();
    EvalReport report;
    report.fold_tag = fold_tag;

    std::vector<std::size_t> truth_rows;
    truth_rows.reserve(preds.sample_ids.size());
    for (const auto& id : preds.sample_ids) {
        if (!truth.contains(id)) fail_validation("sample id not in truth manifest: " + id);
        truth_rows.push_back(&truth.by_id(id) - truth.records().data());
    }

    for (std::size_t j = 0; j < preds.class_names.size(); ++j) {
        const auto& name = preds.class_names[j];
        const std::size_t truth_col = truth.schema().index_of(name);

        std::vector<double> scores(preds.sample_ids.size());
        std::vector<std::uint8_t> labels(preds.sample_ids.size());
        std::size_t positives = 0;
        for (std::size_t i = 0; i < preds.sample_ids.size(); ++i) {
            scores[i] = preds.values(i, j);
            labels[i] = truth.records()[truth_rows[i]].labels[truth_col];
            positives += labels[i];
        }

        ClassEval ce;
        ce.name = name;
        ce.positives = positives;
        if (positives == 0 || positives == labels.size()) {
            report.skipped.push_back(name);
        } else {
            ce.auroc = auroc(scores, labels);
            ce.ap = average_precision(scores, labels);
        }
        report.classes.push_back(std::move(ce));
    }
    detail::finalize_macros(report);
    return report;
}

// Class-wise mean over folds first, then macro over classes. A class skipped
// in every fold stays skipped; otherwise it averages the folds that scored it.
inline EvalReport macro_over_folds(const std::vector<EvalReport>& reports) {
    if (reports.empty()) fail_validation("macro_over_folds needs at least one report");
    for (const auto& r : reports) {
        if (r.classes.size() != reports.front().classes.size())
            fail_validation("fold reports have mismatched class schemas");
        for (std::size_t c = 0; c < r.classes.size(); ++c)
            if (r.classes[c].name != reports.front().classes[c].name)
                fail_validation("fold reports have mismatched class schemas");
    }

    EvalReport out;
    out.fold_tag = "macro";
    for (std::size_t c = 0; c < reports.front().classes.size(); ++c) {
        ClassEval ce;
        ce.name = reports.front().classes[c].name;
        double auroc_sum = 0.0, ap_sum = 0.0;
        std::size_t auroc_n = 0, ap_n = 0;
        for (const auto& r : reports) {
            const auto& rc = r.classes[c];
            ce.positives += rc.positives;
            if (rc.auroc) { auroc_sum += *rc.auroc; ++auroc_n; }
            if (rc.ap) { ap_sum += *rc.ap; ++ap_n; }
        }
        if (auroc_n) ce.auroc = auroc_sum / static_cast<double>(auroc_n);
        if (ap_n) ce.ap = ap_sum / static_cast<double>(ap_n);
        if (!ce.auroc && !ce.ap) out.skipped.push_back(ce.name);
        out.classes.push_back(std::move(ce));
    }
    detail::finalize_macros(out);
    return out;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : r.classes) {
        nlohmann::json jc;
        jc["name"] = c.name;
        jc["positives"] = c.positives;
        jc["auroc"] = c.auroc ? nlohmann::json(*c.auroc) : nlohmann::json(nullptr);
        jc["ap"] = c.ap ? nlohmann::json(*c.ap) : nlohmann::json(nullptr);
        classes.push_back(std::move(jc));
    }
    return nlohmann::json{{"fold", r.fold_tag},
                          {"classes", std::move(classes)},
                          {"skipped", r.skipped},
                          {"macro_auroc", r.macro_auroc},
                          {"macro_map", r.macro_map},
                          {"challenge_score", r.challenge_score}};
}

inline std::string report_to_csv(const EvalReport& r) {
    std::string out = "class,auroc,ap,positives\n";
    for (const auto& c : r.classes) {
        out += c.name;
        out += ",";
        if (c.auroc) out += csv::format_double(*c.auroc);
        out += ",";
        if (c.ap) out += csv::format_double(*c.ap);
        out += "," + std::to_string(c.positives) + "\n";
    }
    return out;
}

inline std::string roc_to_csv(const RocCurve& curve) {
    std::string out = "fpr,tpr,threshold\n";
    for (const auto& p : curve.points) {
        out += csv::format_double(p.fpr) + "," + csv::format_double(p.tpr) + ",";
        out += std::isinf(p.threshold) ? "inf" : csv::format_double(p.threshold);
        out += "\n";
    }
    return out;
}

// Unit-square viewBox with a diagonal chance line; y axis flipped so the
// curve reads the usual way up.
inline std::string roc_to_svg(const RocCurve& curve) {
    std::string points;
    for (const auto& p : curve.points) {
        if (!points.empty()) points += " ";
        points += csv::format_double_exact(p.fpr) + "," + csv::format_double_exact(1.0 - p.tpr);
    }
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1 1\">\n";
    svg += "  <rect x=\"0\" y=\"0\" width=\"1\" height=\"1\" fill=\"white\" stroke=\"black\" stroke-width=\"0.004\"/>\n";
    svg += "  <line x1=\"0\" y1=\"1\" x2=\"1\" y2=\"0\" stroke=\"gray\" stroke-width=\"0.004\" stroke-dasharray=\"0.02,0.02\"/>\n";
    svg += "  <polyline fill=\"none\" stroke=\"crimson\" stroke-width=\"0.006\" points=\"" + points + "\"/>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace retistack
