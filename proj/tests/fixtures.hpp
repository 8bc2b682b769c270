#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "retistack/dataset.hpp"

namespace fixtures {

// Per-class annotation frequencies of the public retinal fundus training set
// (1920 samples; risk class plus 28 condition labels). The generator places
// positives cyclically over the risk-positive rows, so per-class counts match
// the published table while co-occurrence stays plausible.
inline const std::vector<std::pair<std::string, std::size_t>>& fundus_label_counts() {
    static const std::vector<std::pair<std::string, std::size_t>> counts = {
        {"DR", 376},  {"ARMD", 100}, {"MH", 317},  {"DN", 138},  {"MYA", 101},
        {"BRVO", 73}, {"TSLN", 186}, {"ERM", 14},  {"LS", 47},   {"MS", 15},
        {"CSR", 37},  {"ODC", 282},  {"CRVO", 28}, {"TV", 6},    {"AH", 16},
        {"ODP", 65},  {"ST", 5},     {"AION", 17}, {"PT", 11},   {"RT", 14},
        {"RS", 43},   {"CRS", 32},   {"EDN", 15},  {"RPEC", 22}, {"MHL", 11},
        {"RP", 6},    {"ODE", 58},   {"OTHER", 34},
    };
    return counts;
}

constexpr std::size_t kFundusSamples = 1920;
constexpr std::size_t kFundusRiskPositives = 1519;

inline retistack::LabelMatrix make_fundus_like_manifest() {
    using namespace retistack;
    LabelSchema schema;
    schema.class_names.push_back(kDefaultRiskName);
    for (const auto& [name, count] : fundus_label_counts()) schema.class_names.push_back(name);

    std::vector<SampleRecord> records(kFundusSamples);
    for (std::size_t i = 0; i < kFundusSamples; ++i) {
        char id[16];
        std::snprintf(id, sizeof(id), "R%04zu", i + 1);
        records[i].sample_id = id;
        records[i].labels.assign(schema.size(), 0);
        if (i < kFundusRiskPositives) records[i].labels[0] = 1;
    }

    std::size_t offset = 0;
    for (std::size_t l = 0; l < fundus_label_counts().size(); ++l) {
        const std::size_t count = fundus_label_counts()[l].second;
        for (std::size_t j = 0; j < count; ++j)
            records[(offset + j) % kFundusRiskPositives].labels[l + 1] = 1;
        offset += count;
    }
    return LabelMatrix(std::move(schema), std::move(records));
}

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("retistack_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::filesystem::path write_text(const std::filesystem::path& path,
                                        const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    out << contents;
    return path;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace fixtures
