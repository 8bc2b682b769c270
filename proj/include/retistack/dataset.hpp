#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "retistack/csv.hpp"
#include "retistack/error.hpp"
#include "retistack/matrix.hpp"

namespace retistack {

constexpr const char* kDefaultRiskName = "Disease_Risk";

// Ordered label set. The schema is always derived from the manifest header
// (never hard-coded) since published label tables and their prose disagree
// on the exact class count.
struct LabelSchema {
    std::vector<std::string> class_names;
    std::string disease_risk_name = kDefaultRiskName;

    std::size_t size() const { return class_names.size(); }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < class_names.size(); ++i)
            if (class_names[i] == name) return i;
        fail_validation("unknown class: " + name);
    }

    std::size_t risk_index() const { return index_of(disease_risk_name); }

    void validate() const {
        std::set<std::string> seen;
        for (const auto& name : class_names) {
            if (name.empty()) fail_validation("empty class name in schema");
            if (!seen.insert(name).second) fail_validation("duplicate class name: " + name);
        }
        if (!seen.count(disease_risk_name))
            fail_validation("header missing disease-risk column '" + disease_risk_name + "'");
    }
};

struct SampleRecord {
    std::string sample_id;
    std::string image_path; // optional, empty when labels-only workflows are used
    std::vector<std::uint8_t> labels;
};

class LabelMatrix {
public:
    LabelMatrix() = default;
    LabelMatrix(LabelSchema schema, std::vector<SampleRecord> records)
        : schema_(std::move(schema)), records_(std::move(records)) {
        validate();
    }

    const LabelSchema& schema() const { return schema_; }
    const std::vector<SampleRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    const SampleRecord& by_id(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) fail_validation("unknown sample id: " + id);
        return records_[it->second];
    }

    bool contains(const std::string& id) const { return index_.count(id) != 0; }

    std::vector<std::string> sample_ids() const {
        std::vector<std::string> ids;
        ids.reserve(records_.size());
        for (const auto& r : records_) ids.push_back(r.sample_id);
        return ids;
    }

    void set_image_path(const std::string& id, const std::string& path) {
        auto it = index_.find(id);
        if (it == index_.end()) fail_validation("unknown sample id: " + id);
        records_[it->second].image_path = path;
    }

private:
    void validate() {
        schema_.validate();
        index_.clear();
        for (std::size_t i = 0; i < records_.size(); ++i) {
            const auto& r = records_[i];
            if (r.labels.size() != schema_.size())
                fail_validation("label vector length mismatch for sample " + r.sample_id);
            for (auto v : r.labels)
                if (v > 1) fail_validation("non-binary label for sample " + r.sample_id);
            if (!index_.emplace(r.sample_id, i).second)
                fail_validation("duplicate sample_id: " + r.sample_id);
        }
    }

    LabelSchema schema_;
    std::vector<SampleRecord> records_;
    std::map<std::string, std::size_t> index_;
};

// Manifest CSV: header row, first column is the sample id (any name), the
// remaining columns are labels written as literal "0"/"1". When an expected
// schema is given, the header must reproduce it exactly.
inline LabelMatrix load_manifest(const std::filesystem::path& path,
                                 const std::string& risk_name = kDefaultRiskName,
                                 const std::optional<LabelSchema>& expected = std::nullopt) {
    if (!std::filesystem::exists(path)) fail_validation("missing file: " + path.string());
    auto rows = csv::read_file(path);
    if (rows.empty()) fail_validation("empty manifest: " + path.string());

    const auto& header = rows.front();
    if (header.size() < 2) fail_validation("manifest header needs an id column and at least one label");

    LabelSchema schema;
    schema.disease_risk_name = risk_name;
    schema.class_names.assign(header.begin() + 1, header.end());
    if (expected) {
        if (schema.class_names != expected->class_names ||
            risk_name != expected->disease_risk_name)
            fail_validation("manifest header does not match the expected schema");
    }

    std::vector<SampleRecord> records;
    records.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() != header.size())
            fail_validation("manifest row " + std::to_string(i) + " has " +
                            std::to_string(row.size()) + " fields, expected " +
                            std::to_string(header.size()));
        SampleRecord rec;
        rec.sample_id = row[0];
        if (rec.sample_id.find('#') != std::string::npos)
            fail_validation("'#' is reserved for replica ids, found in sample " + rec.sample_id);
        rec.labels.reserve(row.size() - 1);
        for (std::size_t j = 1; j < row.size(); ++j) {
            if (row[j] == "0") rec.labels.push_back(0);
            else if (row[j] == "1") rec.labels.push_back(1);
            else fail_validation("non-binary label '" + row[j] + "' for sample " + rec.sample_id);
        }
        records.push_back(std::move(rec));
    }
    return LabelMatrix(std::move(schema), std::move(records));
}

inline std::string manifest_to_csv(const LabelMatrix& m) {
    std::string out = "ID";
    for (const auto& name : m.schema().class_names) out += "," + name;
    out += "\n";
    for (const auto& r : m.records()) {
        out += r.sample_id;
        for (auto v : r.labels) out += v ? ",1" : ",0";
        out += "\n";
    }
    return out;
}

inline void save_manifest(const LabelMatrix& m, const std::filesystem::path& path) {
    csv::write_file_atomic(path, manifest_to_csv(m));
}

inline std::map<std::string, std::size_t> label_counts(const LabelMatrix& m) {
    std::map<std::string, std::size_t> counts;
    for (const auto& name : m.schema().class_names) counts[name] = 0;
    for (const auto& r : m.records())
        for (std::size_t c = 0; c < r.labels.size(); ++c)
            if (r.labels[c]) ++counts[m.schema().class_names[c]];
    return counts;
}

enum class TargetMode { detector, classifier };

struct TargetMatrix {
    std::vector<std::string> class_names;
    Matrix values; // samples x classes, entries in {0,1}
};

// detector: single disease-risk column. classifier: every other column in
// schema order.
inline TargetMatrix targets(const LabelMatrix& m, TargetMode mode) {
    const auto& schema = m.schema();
    const std::size_t risk = schema.risk_index();

    TargetMatrix out;
    if (mode == TargetMode::detector) {
        out.class_names = {schema.disease_risk_name};
    } else {
        for (std::size_t c = 0; c < schema.size(); ++c)
            if (c != risk) out.class_names.push_back(schema.class_names[c]);
    }

    out.values = Matrix(m.size(), out.class_names.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto& labels = m.records()[i].labels;
        if (mode == TargetMode::detector) {
            out.values(i, 0) = labels[risk];
        } else {
            std::size_t j = 0;
            for (std::size_t c = 0; c < schema.size(); ++c)
                if (c != risk) out.values(i, j++) = labels[c];
        }
    }
    return out;
}

} // namespace retistack
