#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "retistack/csv.hpp"
#include "retistack/error.hpp"
#include "retistack/matrix.hpp"

namespace retistack {

// Per-class probabilities emitted by one model (a trained reference model, an
// externally supplied predictor, a fold bag, or the stacker itself).
struct PredictionMatrix {
    std::string model_id;
    std::vector<std::string> sample_ids;
    std::vector<std::string> class_names;
    Matrix values; // sample_ids.size() x class_names.size(), entries in [0,1]

    std::size_t row_of(const std::string& sample_id) const {
        for (std::size_t i = 0; i < sample_ids.size(); ++i)
            if (sample_ids[i] == sample_id) return i;
        fail_validation("model " + model_id + " has no prediction for sample " + sample_id);
    }

    std::size_t col_of(const std::string& class_name) const {
        for (std::size_t j = 0; j < class_names.size(); ++j)
            if (class_names[j] == class_name) return j;
        fail_validation("model " + model_id + " has no class " + class_name);
    }

    void validate() const {
        if (values.rows != sample_ids.size() || values.cols != class_names.size())
            fail_validation("prediction matrix shape mismatch for " + model_id);
        for (double v : values.data)
            if (!(v >= 0.0 && v <= 1.0))
                fail_validation("probability out of [0,1] in " + model_id);
    }
};

inline std::string prediction_to_csv(const PredictionMatrix& p) {
    std::string out = "sample_id";
    for (const auto& name : p.class_names) out += "," + name;
    out += "\n";
    for (std::size_t i = 0; i < p.sample_ids.size(); ++i) {
        out += p.sample_ids[i];
        for (std::size_t j = 0; j < p.class_names.size(); ++j)
            out += "," + csv::format_double(p.values(i, j));
        out += "\n";
    }
    return out;
}

// Filename convention: <model_id>.csv inside the member directory.
inline void save_prediction(const PredictionMatrix& p, const std::filesystem::path& path) {
    csv::write_file_atomic(path, prediction_to_csv(p));
}

inline PredictionMatrix load_prediction(const std::filesystem::path& path, std::string model_id = "") {
    auto rows = csv::read_file(path);
    if (rows.empty()) fail_validation("empty prediction file: " + path.string());
    const auto& header = rows.front();
    if (header.size() < 2 || header[0] != "sample_id")
        fail_validation("prediction header must start with sample_id: " + path.string());

    PredictionMatrix p;
    p.model_id = model_id.empty() ? path.stem().string() : std::move(model_id);
    p.class_names.assign(header.begin() + 1, header.end());
    p.values = Matrix(rows.size() - 1, p.class_names.size());
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != header.size())
            fail_validation("ragged prediction row in " + path.string());
        p.sample_ids.push_back(rows[i][0]);
        for (std::size_t j = 1; j < rows[i].size(); ++j)
            p.values(i - 1, j - 1) = csv::parse_double(rows[i][j], "probability");
    }
    p.validate();
    return p;
}

} // namespace retistack
