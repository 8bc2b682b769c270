#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "retistack/csv.hpp"
#include "retistack/dataset.hpp"
#include "retistack/error.hpp"
#include "retistack/matrix.hpp"
#include "retistack/rng.hpp"

namespace retistack {

// Seed stream ids for the counter-based derivation scheme.
namespace seed_stream {
constexpr std::uint64_t kfold = 1;
constexpr std::uint64_t upsample_shuffle = 2;
constexpr std::uint64_t upsample_augment = 3;
constexpr std::uint64_t training = 4;
constexpr std::uint64_t synthetic = 5;
} // namespace seed_stream

struct FoldAssignment {
    int k = 0;
    std::vector<std::string> sample_ids;
    std::vector<int> fold_of; // aligned with sample_ids

    int fold(const std::string& id) const {
        for (std::size_t i = 0; i < sample_ids.size(); ++i)
            if (sample_ids[i] == id) return fold_of[i];
        fail_validation("sample id not in fold assignment: " + id);
    }
};

// Iterative stratification. Repeatedly takes the label with the fewest
// remaining unassigned positives and deals its samples to the fold with the
// greatest remaining per-label quota; ties go to the smallest fold, then to a
// seeded coin. Samples with no positive labels are dealt last, balancing
// fold sizes.
inline std::vector<int> stratified_kfold(const Matrix& targets, int k, std::uint64_t seed) {
    const std::size_t n = targets.rows, n_labels = targets.cols;
    if (k < 2) fail_validation("fold count must be >= 2");
    if (n < static_cast<std::size_t>(k)) fail_validation("fewer samples than folds");

    Rng rng(derive_seed(seed, {seed_stream::kfold}));

    // desired[f][l]: remaining share of label l wanted by fold f.
    std::vector<std::vector<double>> desired(k, std::vector<double>(n_labels));
    for (std::size_t l = 0; l < n_labels; ++l) {
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) count += targets(i, l) != 0.0;
        for (int f = 0; f < k; ++f)
            desired[f][l] = static_cast<double>(count) / static_cast<double>(k);
    }

    std::vector<int> assignment(n, -1);
    std::vector<std::size_t> fold_size(k, 0);
    std::size_t unassigned = n;

    auto assign = [&](std::size_t sample, int fold) {
        assignment[sample] = fold;
        ++fold_size[fold];
        --unassigned;
        for (std::size_t l = 0; l < n_labels; ++l)
            if (targets(sample, l) != 0.0) desired[fold][l] -= 1.0;
    };

    auto pick_fold = [&](const std::vector<double>& scores) {
        std::vector<int> best;
        double best_score = -1e300;
        for (int f = 0; f < k; ++f) {
            if (scores[f] > best_score) {
                best_score = scores[f];
                best = {f};
            } else if (scores[f] == best_score) {
                best.push_back(f);
            }
        }
        std::vector<int> smallest;
        std::size_t min_size = SIZE_MAX;
        for (int f : best) {
            if (fold_size[f] < min_size) {
                min_size = fold_size[f];
                smallest = {f};
            } else if (fold_size[f] == min_size) {
                smallest.push_back(f);
            }
        }
        return smallest[rng.below(smallest.size())];
    };

    while (unassigned > 0) {
        // Remaining positives per label.
        std::vector<std::size_t> remaining(n_labels, 0);
        for (std::size_t i = 0; i < n; ++i)
            if (assignment[i] < 0)
                for (std::size_t l = 0; l < n_labels; ++l)
                    if (targets(i, l) != 0.0) ++remaining[l];

        std::size_t label = n_labels;
        for (std::size_t l = 0; l < n_labels; ++l)
            if (remaining[l] > 0 && (label == n_labels || remaining[l] < remaining[label]))
                label = l;

        if (label == n_labels) {
            // Only all-zero samples left; deal them by fold-size balance.
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < n; ++i)
                if (assignment[i] < 0) rest.push_back(i);
            rng.shuffle(rest);
            const double share = static_cast<double>(n) / static_cast<double>(k);
            for (std::size_t s : rest) {
                std::vector<double> deficit(k);
                for (int f = 0; f < k; ++f) deficit[f] = share - static_cast<double>(fold_size[f]);
                assign(s, pick_fold(deficit));
            }
            break;
        }

        std::vector<std::size_t> batch;
        for (std::size_t i = 0; i < n; ++i)
            if (assignment[i] < 0 && targets(i, label) != 0.0) batch.push_back(i);
        rng.shuffle(batch);
        for (std::size_t s : batch) {
            std::vector<double> scores(k);
            for (int f = 0; f < k; ++f) scores[f] = desired[f][label];
            assign(s, pick_fold(scores));
        }
    }
    return assignment;
}

// Stratifies over the full label schema of the manifest.
inline FoldAssignment make_fold_assignment(const LabelMatrix& m, int k, std::uint64_t seed) {
    Matrix t(m.size(), m.schema().size());
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t l = 0; l < m.schema().size(); ++l)
            t(i, l) = m.records()[i].labels[l];
    FoldAssignment fa;
    fa.k = k;
    fa.sample_ids = m.sample_ids();
    fa.fold_of = stratified_kfold(t, k, seed);
    return fa;
}

inline std::string folds_to_csv(const FoldAssignment& fa) {
    std::string out = "sample_id,fold\n";
    for (std::size_t i = 0; i < fa.sample_ids.size(); ++i)
        out += fa.sample_ids[i] + "," + std::to_string(fa.fold_of[i]) + "\n";
    return out;
}

inline FoldAssignment folds_from_csv(const std::filesystem::path& path) {
    auto rows = csv::read_file(path);
    if (rows.size() < 2 || rows[0] != std::vector<std::string>{"sample_id", "fold"})
        fail_validation("bad fold file: " + path.string());
    FoldAssignment fa;
    int max_fold = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2) fail_validation("bad fold row in " + path.string());
        fa.sample_ids.push_back(rows[i][0]);
        const int f = static_cast<int>(csv::parse_long(rows[i][1], "fold"));
        if (f < 0) fail_validation("negative fold index in " + path.string());
        fa.fold_of.push_back(f);
        max_fold = std::max(max_fold, f);
    }
    fa.k = max_fold + 1;
    return fa;
}

struct UpsampleEntry {
    std::string source_id;
    int replica_index = 0;      // 1-based per source
    std::uint64_t aug_seed = 0; // unique across the plan
};

struct UpsamplePlan {
    std::vector<UpsampleEntry> entries;
};

// Greedy augmentation plan: labels are processed in ascending original
// count; each label cycles through its source samples in seeded shuffled
// order adding one replica at a time. A replica counts toward every label of
// its source, and effective counts are re-read after every addition, so
// co-occurring rare labels share replicas. Labels with zero occurrences
// cannot be up-sampled and are skipped.
inline UpsamplePlan upsample_plan(const LabelMatrix& m, std::size_t threshold,
                                  std::uint64_t seed) {
    const std::size_t n_labels = m.schema().size();
    std::vector<std::size_t> effective(n_labels, 0);
    for (const auto& r : m.records())
        for (std::size_t l = 0; l < n_labels; ++l) effective[l] += r.labels[l];

    std::vector<std::size_t> label_order(n_labels);
    std::iota(label_order.begin(), label_order.end(), 0);
    std::stable_sort(label_order.begin(), label_order.end(),
                     [&](std::size_t a, std::size_t b) { return effective[a] < effective[b]; });

    UpsamplePlan plan;
    std::map<std::string, int> replica_counter;
    std::uint64_t entry_counter = 0;

    for (std::size_t l : label_order) {
        if (effective[l] == 0 || effective[l] >= threshold) continue;

        std::vector<std::size_t> sources;
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m.records()[i].labels[l]) sources.push_back(i);

        Rng shuffle_rng(derive_seed(seed, {seed_stream::upsample_shuffle, l}));
        shuffle_rng.shuffle(sources);

        std::size_t cursor = 0;
        while (effective[l] < threshold) {
            const auto& rec = m.records()[sources[cursor % sources.size()]];
            ++cursor;
            UpsampleEntry e;
            e.source_id = rec.sample_id;
            e.replica_index = ++replica_counter[rec.sample_id];
            // mix64 is a bijection, so distinct counters give distinct seeds.
            e.aug_seed = derive_seed(seed, {seed_stream::upsample_augment, entry_counter++});
            plan.entries.push_back(std::move(e));
            for (std::size_t lab = 0; lab < n_labels; ++lab) effective[lab] += rec.labels[lab];
        }
    }
    return plan;
}

inline std::string upsample_to_csv(const UpsamplePlan& plan) {
    std::string out = "source_id,replica_index,aug_seed\n";
    for (const auto& e : plan.entries)
        out += e.source_id + "," + std::to_string(e.replica_index) + "," +
               std::to_string(e.aug_seed) + "\n";
    return out;
}

inline UpsamplePlan upsample_from_csv(const std::filesystem::path& path) {
    auto rows = csv::read_file(path);
    if (rows.size() < 1 || rows[0] != std::vector<std::string>{"source_id", "replica_index", "aug_seed"})
        fail_validation("bad upsample plan file: " + path.string());
    UpsamplePlan plan;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 3) fail_validation("bad upsample row in " + path.string());
        UpsampleEntry e;
        e.source_id = rows[i][0];
        e.replica_index = static_cast<int>(csv::parse_long(rows[i][1], "replica_index"));
        e.aug_seed = std::strtoull(rows[i][2].c_str(), nullptr, 10);
        plan.entries.push_back(std::move(e));
    }
    return plan;
}

// Replica id convention: "<source>#<replica_index>". Replicas inherit the
// labels of their source; image materialization happens at training time via
// the stored augmentation seed.
inline std::string replica_id(const std::string& source_id, int replica_index) {
    return source_id + "#" + std::to_string(replica_index);
}

inline LabelMatrix apply_upsample(const LabelMatrix& m, const UpsamplePlan& plan) {
    std::vector<SampleRecord> records = m.records();
    records.reserve(records.size() + plan.entries.size());
    for (const auto& e : plan.entries) {
        SampleRecord rec = m.by_id(e.source_id);
        rec.sample_id = replica_id(e.source_id, e.replica_index);
        records.push_back(std::move(rec));
    }
    return LabelMatrix(m.schema(), std::move(records));
}

} // namespace retistack
