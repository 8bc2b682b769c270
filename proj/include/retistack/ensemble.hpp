#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "retistack/dataset.hpp"
#include "retistack/error.hpp"
#include "retistack/logistic.hpp"
#include "retistack/matrix.hpp"
#include "retistack/prediction.hpp"

namespace retistack {

enum class ModelType { detector, classifier };

inline std::string model_type_name(ModelType t) {
    return t == ModelType::detector ? "detector" : "classifier";
}

inline ModelType model_type_from_name(const std::string& s) {
    if (s == "detector") return ModelType::detector;
    if (s == "classifier") return ModelType::classifier;
    fail_validation("unknown model type: " + s);
}

struct MemberInfo {
    std::string model_id;
    ModelType type = ModelType::detector;
    std::string architecture;
    int fold = -1;
};

struct EnsembleSpec {
    std::vector<MemberInfo> members;

    void validate() const {
        std::set<std::string> ids;
        for (const auto& m : members)
            if (!ids.insert(m.model_id).second)
                fail_validation("duplicate model_id in ensemble spec: " + m.model_id);
    }
};

struct FeatureMatrix {
    std::vector<std::string> column_names; // "<model_id>/<class>"
    std::vector<std::string> sample_ids;
    Matrix values;
};

// Concatenates every member's every class probability, in member order, into
// one row per requested sample. Column naming "<model_id>/<class>" keeps the
// layout deterministic and auditable.
inline FeatureMatrix assemble_features(const std::vector<PredictionMatrix>& members,
                                       const std::vector<std::string>& sample_ids) {
    std::set<std::string> ids;
    std::size_t total_cols = 0;
    for (const auto& m : members) {
        m.validate();
        if (!ids.insert(m.model_id).second)
            fail_validation("duplicate model_id in feature assembly: " + m.model_id);
        total_cols += m.class_names.size();
    }

    FeatureMatrix out;
    out.sample_ids = sample_ids;
    out.column_names.reserve(total_cols);
    out.values = Matrix(sample_ids.size(), total_cols);

    std::size_t col = 0;
    for (const auto& m : members) {
        std::map<std::string, std::size_t> row_index;
        for (std::size_t r = 0; r < m.sample_ids.size(); ++r) row_index[m.sample_ids[r]] = r;
        for (std::size_t j = 0; j < m.class_names.size(); ++j) {
            out.column_names.push_back(m.model_id + "/" + m.class_names[j]);
            for (std::size_t i = 0; i < sample_ids.size(); ++i) {
                auto it = row_index.find(sample_ids[i]);
                if (it == row_index.end())
                    fail_validation("model " + m.model_id + " has no prediction for sample " +
                                    sample_ids[i]);
                out.values(i, col) = m.values(it->second, j);
            }
            ++col;
        }
    }
    return out;
}

struct StackedClass {
    std::string class_name;
    LogisticModel model;
};

// One fitted binary logistic regression per output class over the shared
// stacking feature columns.
struct StackedModel {
    std::vector<std::string> feature_columns;
    EnsembleSpec spec;
    std::vector<StackedClass> classes;
    std::vector<std::string> degenerate_classes; // zero-positive fallbacks
};

// Fits the per-class stackers on the pooled rows of the given per-fold
// feature matrices. The caller guarantees the out-of-fold discipline (each
// fold's rows come from members that never trained on them); this function
// checks that the folds agree on the feature columns and that every target
// class gets a model. Classes with single-valued targets fall back to a
// constant model and are reported in degenerate_classes.
inline StackedModel fit_stacker(const std::vector<FeatureMatrix>& fold_features,
                                const LabelMatrix& targets, double lambda = 1e-4) {
    if (fold_features.empty()) fail_validation("fit_stacker needs at least one feature matrix");
    for (const auto& f : fold_features)
        if (f.column_names != fold_features.front().column_names)
            fail_validation("fold feature matrices disagree on columns");

    std::size_t total_rows = 0;
    for (const auto& f : fold_features) total_rows += f.sample_ids.size();

    const std::size_t n_cols = fold_features.front().column_names.size();
    Matrix X(total_rows, n_cols);
    std::vector<const SampleRecord*> rows;
    rows.reserve(total_rows);
    std::size_t r = 0;
    for (const auto& f : fold_features) {
        for (std::size_t i = 0; i < f.sample_ids.size(); ++i, ++r) {
            rows.push_back(&targets.by_id(f.sample_ids[i]));
            for (std::size_t j = 0; j < n_cols; ++j) X(r, j) = f.values(i, j);
        }
    }

    StackedModel stacked;
    stacked.feature_columns = fold_features.front().column_names;
    for (std::size_t c = 0; c < targets.schema().size(); ++c) {
        std::vector<std::uint8_t> y(total_rows);
        for (std::size_t i = 0; i < total_rows; ++i) y[i] = rows[i]->labels[c];
        StackedClass sc;
        sc.class_name = targets.schema().class_names[c];
        sc.model = fit_logistic(X, y, lambda);
        sc.model.feature_names = stacked.feature_columns;
        if (sc.model.degenerate) stacked.degenerate_classes.push_back(sc.class_name);
        stacked.classes.push_back(std::move(sc));
    }
    return stacked;
}

// Assembles the stacking features from the given members (which must cover
// the model's feature columns exactly; missing columns are a hard error,
// never imputed) and emits the per-class stacked probabilities.
inline PredictionMatrix predict_stacked(const StackedModel& stacked,
                                        const std::vector<PredictionMatrix>& members) {
    if (members.empty()) fail_validation("predict_stacked needs member predictions");
    const FeatureMatrix assembled = assemble_features(members, members.front().sample_ids);

    std::map<std::string, std::size_t> col_index;
    for (std::size_t j = 0; j < assembled.column_names.size(); ++j)
        col_index[assembled.column_names[j]] = j;

    Matrix X(assembled.sample_ids.size(), stacked.feature_columns.size());
    for (std::size_t j = 0; j < stacked.feature_columns.size(); ++j) {
        auto it = col_index.find(stacked.feature_columns[j]);
        if (it == col_index.end())
            fail_validation("missing stacking feature column: " + stacked.feature_columns[j]);
        for (std::size_t i = 0; i < X.rows; ++i) X(i, j) = assembled.values(i, it->second);
    }

    PredictionMatrix out;
    out.model_id = "stacked";
    out.sample_ids = assembled.sample_ids;
    out.values = Matrix(X.rows, stacked.classes.size());
    for (std::size_t c = 0; c < stacked.classes.size(); ++c) {
        out.class_names.push_back(stacked.classes[c].class_name);
        const auto probs = predict_logistic(stacked.classes[c].model, X);
        for (std::size_t i = 0; i < X.rows; ++i) out.values(i, c) = probs[i];
    }
    return out;
}

// Elementwise mean across members sharing one class schema; the fold-bag
// baseline.
inline PredictionMatrix mean_bag(const std::vector<PredictionMatrix>& members,
                                 std::string model_id = "bag") {
    if (members.empty()) fail_validation("mean_bag needs at least one member");
    const auto& first = members.front();
    for (const auto& m : members) {
        if (m.class_names != first.class_names)
            fail_validation("mean_bag class schema mismatch for " + m.model_id);
        if (m.sample_ids != first.sample_ids)
            fail_validation("mean_bag sample id mismatch for " + m.model_id);
    }
    PredictionMatrix out;
    out.model_id = std::move(model_id);
    out.sample_ids = first.sample_ids;
    out.class_names = first.class_names;
    out.values = Matrix(first.values.rows, first.values.cols);
    for (std::size_t idx = 0; idx < out.values.data.size(); ++idx) {
        double sum = 0.0;
        for (const auto& m : members) sum += m.values.data[idx];
        out.values.data[idx] = sum / static_cast<double>(members.size());
    }
    return out;
}

inline nlohmann::json ensemble_spec_to_json(const EnsembleSpec& spec) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : spec.members)
        members.push_back({{"model_id", m.model_id},
                           {"type", model_type_name(m.type)},
                           {"architecture", m.architecture},
                           {"fold", m.fold}});
    return nlohmann::json{{"members", std::move(members)}};
}

inline EnsembleSpec ensemble_spec_from_json(const nlohmann::json& j) {
    EnsembleSpec spec;
    for (const auto& jm : j.at("members")) {
        MemberInfo m;
        m.model_id = jm.at("model_id").get<std::string>();
        m.type = model_type_from_name(jm.at("type").get<std::string>());
        m.architecture = jm.at("architecture").get<std::string>();
        m.fold = jm.at("fold").get<int>();
        spec.members.push_back(std::move(m));
    }
    spec.validate();
    return spec;
}

inline nlohmann::json stacked_to_json(const StackedModel& s) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : s.classes) {
        nlohmann::json model = logistic_to_json(c.model);
        model.erase("feature_names"); // shared via feature_columns
        classes.push_back({{"name", c.class_name}, {"model", std::move(model)}});
    }
    return nlohmann::json{{"schema_version", 1},
                          {"feature_columns", s.feature_columns},
                          {"spec", ensemble_spec_to_json(s.spec)},
                          {"degenerate_classes", s.degenerate_classes},
                          {"classes", std::move(classes)}};
}

inline StackedModel stacked_from_json(const nlohmann::json& j) {
    StackedModel s;
    s.feature_columns = j.at("feature_columns").get<std::vector<std::string>>();
    s.spec = ensemble_spec_from_json(j.at("spec"));
    s.degenerate_classes = j.value("degenerate_classes", std::vector<std::string>{});
    for (const auto& jc : j.at("classes")) {
        StackedClass sc;
        sc.class_name = jc.at("name").get<std::string>();
        sc.model = logistic_from_json(jc.at("model"));
        sc.model.feature_names = s.feature_columns;
        s.classes.push_back(std::move(sc));
    }
    return s;
}

} // namespace retistack
