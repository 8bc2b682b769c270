#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "retistack/augment.hpp"
#include "retistack/dataset.hpp"
#include "retistack/ensemble.hpp"
#include "retistack/image.hpp"
#include "retistack/losses.hpp"
#include "retistack/metrics.hpp"
#include "retistack/sampling.hpp"
#include "retistack/training.hpp"

namespace retistack {

// ---------------------------------------------------------------------------
// Synthetic desk-scale dataset: vertical signal stripes, one per condition
// class, with the risk class as their union. Linearly separable by
// construction so the full pipeline is testable end to end in seconds.
// ---------------------------------------------------------------------------

struct SyntheticConfig {
    std::size_t n_samples = 500;
    int image_size = 64;
    int n_labels = 4;        // condition classes, plus the risk class
    double label_rate = 0.3;
    double signal = 0.5;     // stripe brightness lift for a positive label
    double noise = 0.05;
    std::uint64_t seed = 1;
};

struct SyntheticDataset {
    LabelMatrix manifest;
    std::map<std::string, ImageBuffer> images;
};

inline SyntheticDataset make_synthetic(const SyntheticConfig& cfg) {
    LabelSchema schema;
    schema.class_names.push_back(kDefaultRiskName);
    for (int c = 0; c < cfg.n_labels; ++c)
        schema.class_names.push_back("C" + std::to_string(c + 1));

    SyntheticDataset out;
    std::vector<SampleRecord> records;
    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        Rng rng(derive_seed(cfg.seed, {seed_stream::synthetic, i}));
        SampleRecord rec;
        char id[16];
        std::snprintf(id, sizeof(id), "S%05zu", i + 1);
        rec.sample_id = id;

        std::vector<std::uint8_t> bits(cfg.n_labels);
        std::uint8_t any = 0;
        for (int c = 0; c < cfg.n_labels; ++c) {
            bits[c] = rng.bernoulli(cfg.label_rate) ? 1 : 0;
            any |= bits[c];
        }
        rec.labels.push_back(any);
        rec.labels.insert(rec.labels.end(), bits.begin(), bits.end());

        ImageBuffer img(cfg.image_size, cfg.image_size);
        const int stripe_w = cfg.image_size / cfg.n_labels;
        for (int y = 0; y < cfg.image_size; ++y) {
            for (int x = 0; x < cfg.image_size; ++x) {
                const int stripe = std::min(x / stripe_w, cfg.n_labels - 1);
                const double level = 0.15 + (bits[stripe] ? cfg.signal : 0.0);
                // fundus-like warm tint, independent noise per channel
                const double tint[3] = {1.0, 0.72, 0.45};
                for (int ch = 0; ch < 3; ++ch) {
                    const double v = level * tint[ch] + cfg.noise * rng.normal();
                    img.at(y, x, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
            }
        }
        out.images.emplace(rec.sample_id, std::move(img));
        records.push_back(std::move(rec));
    }
    out.manifest = LabelMatrix(std::move(schema), std::move(records));
    return out;
}

// ---------------------------------------------------------------------------
// End-to-end pipeline: split -> (optional) up-sample -> preprocess/extract ->
// train the member grid -> out-of-fold stacking -> evaluation.
// ---------------------------------------------------------------------------

enum class StackMode {
    oof,    // stacker sees fold-grouped out-of-fold member predictions
    replica // stacker sees every member's predictions on augmented replicas
};

struct PipelineConfig {
    int k = 5;
    std::uint64_t seed = 0;
    int arch_input_size = 224;               // preprocess target size
    std::vector<int> detector_downscales = {16, 8};   // member architectures
    std::vector<int> classifier_downscales = {16, 8};
    LossKind loss = LossKind::focal;
    double stack_lambda = 1e-4;
    std::size_t upsample_threshold = 0;       // 0 disables up-sampling
    StackMode stack_mode = StackMode::oof;
    TrainingConfig train;
    AugmentRanges augment_ranges;
    NormalizationStats norm;
};

struct MemberResult {
    MemberInfo info;
    ReferenceModel model;
    TrainingConfig train_cfg;
    ClassWeights class_weights;
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double val_loss = 0.0;
    PredictionMatrix oof;  // validation-fold originals only
    EvalReport report;     // member performance on its validation fold
};

struct PipelineResult {
    FoldAssignment folds;
    UpsamplePlan plan;
    EnsembleSpec spec;
    std::vector<MemberResult> members;
    StackedModel stacked;
    PredictionMatrix stacked_oof; // manifest order, all samples
    EvalReport stacked_report;
};

using ImageProvider = std::function<const ImageBuffer&(const std::string& sample_id)>;

namespace pipeline_detail {

inline std::string group_id(ModelType type, int downscale) {
    return model_type_name(type) + "-ds" + std::to_string(downscale);
}

inline std::string member_id(ModelType type, int downscale, int fold) {
    return group_id(type, downscale) + "-f" + std::to_string(fold);
}

// Preprocess + per-downscale feature extraction for one raw image.
inline ImageBuffer preprocess_raw(const ImageBuffer& raw, const PipelineConfig& cfg) {
    const CameraProfile cam =
        match_camera_profile(raw.width, raw.height, default_camera_profiles());
    return preprocess(raw, cam, ArchPreset{"pipeline", cfg.arch_input_size}, cfg.norm);
}

inline ClassWeights weights_for(const Matrix& train_targets,
                                const std::vector<std::string>& class_names) {
    std::vector<std::size_t> positives(train_targets.cols, 0);
    for (std::size_t i = 0; i < train_targets.rows; ++i)
        for (std::size_t c = 0; c < train_targets.cols; ++c)
            positives[c] += train_targets(i, c) != 0.0;
    return class_weights_from_counts(train_targets.rows, class_names, positives);
}

} // namespace pipeline_detail

inline PipelineResult run_pipeline(const LabelMatrix& manifest, const ImageProvider& images,
                                   const PipelineConfig& cfg, std::ostream* log = nullptr) {
    namespace pd = pipeline_detail;
    auto say = [&](const std::string& s) {
        if (log) *log << s << "\n";
    };

    PipelineResult result;
    result.folds = make_fold_assignment(manifest, cfg.k, cfg.seed);

    // Up-sampling: replicas inherit their source's fold so validation folds
    // never see augmented twins of training images.
    LabelMatrix working = manifest;
    if (cfg.upsample_threshold > 0) {
        result.plan = upsample_plan(manifest, cfg.upsample_threshold, cfg.seed);
        working = apply_upsample(manifest, result.plan);
        say("upsample: +" + std::to_string(result.plan.entries.size()) + " replicas (total " +
            std::to_string(working.size()) + ")");
    }

    std::map<std::string, std::uint64_t> replica_seed;
    for (const auto& e : result.plan.entries)
        replica_seed[replica_id(e.source_id, e.replica_index)] = e.aug_seed;

    // Fold of every working row; replicas follow their source.
    std::vector<int> row_fold(working.size());
    std::vector<bool> row_is_replica(working.size(), false);
    for (std::size_t i = 0; i < working.size(); ++i) {
        const std::string& id = working.records()[i].sample_id;
        const auto hash = id.find('#');
        if (hash == std::string::npos) {
            row_fold[i] = result.folds.fold(id);
        } else {
            row_fold[i] = result.folds.fold(id.substr(0, hash));
            row_is_replica[i] = true;
        }
    }

    // Features per downscale, rows aligned with the working manifest.
    std::vector<int> downscales;
    for (int ds : cfg.detector_downscales) downscales.push_back(ds);
    for (int ds : cfg.classifier_downscales)
        if (std::find(downscales.begin(), downscales.end(), ds) == downscales.end())
            downscales.push_back(ds);

    say("extracting features for " + std::to_string(working.size()) + " rows");
    std::map<int, Matrix> features;
    for (int ds : downscales)
        features[ds] = Matrix(working.size(), static_cast<std::size_t>(ds) * ds * 3);
    for (std::size_t i = 0; i < working.size(); ++i) {
        const std::string& id = working.records()[i].sample_id;
        ImageBuffer raw;
        if (row_is_replica[i]) {
            const auto hash = id.find('#');
            const AugmentParams params =
                sample_augment_params(replica_seed.at(id), cfg.augment_ranges);
            raw = augment(images(id.substr(0, hash)), params);
        } else {
            raw = images(id);
        }
        const ImageBuffer pre = pd::preprocess_raw(raw, cfg);
        for (int ds : downscales) {
            FeatureSpec spec;
            spec.downscale = ds;
            const auto feat = extract_features(pre, spec);
            std::copy(feat.begin(), feat.end(), features[ds].row(i));
        }
    }

    // Member grid: mode x architecture x fold.
    struct ModeSpec {
        ModelType type;
        TargetMode target_mode;
        const std::vector<int>* downscales;
    };
    const ModeSpec modes[2] = {
        {ModelType::detector, TargetMode::detector, &cfg.detector_downscales},
        {ModelType::classifier, TargetMode::classifier, &cfg.classifier_downscales},
    };

    const TargetMatrix full_truth[2] = {targets(working, TargetMode::detector),
                                        targets(working, TargetMode::classifier)};

    for (int mi = 0; mi < 2; ++mi) {
        const auto& mode = modes[mi];
        const TargetMatrix& truth = full_truth[mi];
        for (int ds : *mode.downscales) {
            const Matrix& X = features.at(ds);
            for (int f = 0; f < cfg.k; ++f) {
                std::vector<std::size_t> train_rows, val_rows, oof_rows;
                for (std::size_t i = 0; i < working.size(); ++i) {
                    if (row_fold[i] == f) {
                        val_rows.push_back(i);
                        if (!row_is_replica[i]) oof_rows.push_back(i);
                    } else {
                        train_rows.push_back(i);
                    }
                }

                auto slice = [&](const Matrix& src, const std::vector<std::size_t>& rows) {
                    Matrix out(rows.size(), src.cols);
                    for (std::size_t r = 0; r < rows.size(); ++r)
                        std::copy(src.row(rows[r]), src.row(rows[r]) + src.cols, out.row(r));
                    return out;
                };

                MemberResult member;
                member.info.model_id = pd::member_id(mode.type, ds, f);
                member.info.type = mode.type;
                member.info.architecture = "ds" + std::to_string(ds);
                member.info.fold = f;

                TrainingConfig tc = cfg.train;
                tc.seed = derive_seed(cfg.seed, {seed_stream::training,
                                                 static_cast<std::uint64_t>(mi),
                                                 static_cast<std::uint64_t>(ds),
                                                 static_cast<std::uint64_t>(f)});
                member.train_cfg = tc;

                const Matrix Xtr = slice(X, train_rows);
                const Matrix Ytr = slice(truth.values, train_rows);
                const Matrix Xval = slice(X, val_rows);
                const Matrix Yval = slice(truth.values, val_rows);
                member.class_weights = pd::weights_for(Ytr, truth.class_names);

                FeatureSpec spec;
                spec.downscale = ds;
                say("training " + member.info.model_id + " (train " +
                    std::to_string(train_rows.size()) + ", val " +
                    std::to_string(val_rows.size()) + ")");
                FitResult fit = fit_reference_model(Xtr, Ytr, Xval, Yval, member.class_weights,
                                                    cfg.loss, tc, spec, truth.class_names);
                member.model = std::move(fit.model);
                member.history = std::move(fit.history);
                member.best_epoch = fit.best.epoch;
                member.val_loss = fit.best.val_loss;

                std::vector<std::string> oof_ids;
                for (auto r : oof_rows) oof_ids.push_back(working.records()[r].sample_id);
                member.oof =
                    predict(member.model, slice(X, oof_rows), oof_ids, member.info.model_id);
                member.report = evaluate_multilabel(member.oof, manifest, "fold" + std::to_string(f));

                result.spec.members.push_back(member.info);
                result.members.push_back(std::move(member));
            }
        }
    }
    result.spec.validate();

    // Stacking features. OOF mode: per fold, the fold's members (which never
    // trained on it) provide the columns under fold-agnostic group names.
    // Replica mode: every member predicts a freshly augmented replica of
    // every sample, reproducing the source method's leakage guard.
    std::vector<FeatureMatrix> fold_features;
    std::map<int, std::vector<PredictionMatrix>> fold_members; // relabeled, per fold

    if (cfg.stack_mode == StackMode::oof) {
        for (int f = 0; f < cfg.k; ++f) {
            std::vector<PredictionMatrix> group_preds;
            for (const auto& member : result.members) {
                if (member.info.fold != f) continue;
                PredictionMatrix relabeled = member.oof;
                relabeled.model_id =
                    pd::group_id(member.info.type,
                                 std::stoi(member.info.architecture.substr(2)));
                group_preds.push_back(std::move(relabeled));
            }
            std::vector<std::string> fold_ids = group_preds.front().sample_ids;
            fold_features.push_back(assemble_features(group_preds, fold_ids));
            fold_members[f] = std::move(group_preds);
        }
    } else {
        // One augmented replica per sample; all members predict all rows.
        std::map<int, Matrix> replica_features;
        for (int ds : downscales)
            replica_features[ds] = Matrix(manifest.size(), static_cast<std::size_t>(ds) * ds * 3);
        for (std::size_t i = 0; i < manifest.size(); ++i) {
            const std::string& id = manifest.records()[i].sample_id;
            const AugmentParams params = sample_augment_params(
                derive_seed(cfg.seed, {seed_stream::upsample_augment, 0xda7a, i}),
                cfg.augment_ranges);
            const ImageBuffer pre = pd::preprocess_raw(augment(images(id), params), cfg);
            for (int ds : downscales) {
                FeatureSpec spec;
                spec.downscale = ds;
                const auto feat = extract_features(pre, spec);
                std::copy(feat.begin(), feat.end(), replica_features[ds].row(i));
            }
        }
        std::vector<PredictionMatrix> member_preds;
        for (const auto& member : result.members) {
            const int ds = std::stoi(member.info.architecture.substr(2));
            member_preds.push_back(predict(member.model, replica_features.at(ds),
                                           manifest.sample_ids(), member.info.model_id));
        }
        fold_features.push_back(assemble_features(member_preds, manifest.sample_ids()));
        fold_members[0] = std::move(member_preds);
    }

    say("fitting stacker on " + std::to_string(fold_features.front().column_names.size()) +
        " feature columns");
    result.stacked = fit_stacker(fold_features, working, cfg.stack_lambda);
    result.stacked.spec = result.spec;

    // Stacked out-of-fold predictions for every original sample.
    std::map<std::string, std::pair<std::size_t, std::size_t>> where; // id -> (fold idx, row)
    std::vector<PredictionMatrix> fold_outputs;
    for (const auto& [f, preds] : fold_members) {
        PredictionMatrix out = predict_stacked(result.stacked, preds);
        for (std::size_t r = 0; r < out.sample_ids.size(); ++r)
            where[out.sample_ids[r]] = {fold_outputs.size(), r};
        fold_outputs.push_back(std::move(out));
    }

    PredictionMatrix& stacked_oof = result.stacked_oof;
    stacked_oof.model_id = "stacked";
    stacked_oof.sample_ids = manifest.sample_ids();
    stacked_oof.class_names = fold_outputs.front().class_names;
    stacked_oof.values = Matrix(manifest.size(), stacked_oof.class_names.size());
    for (std::size_t i = 0; i < stacked_oof.sample_ids.size(); ++i) {
        const auto& loc = where.at(stacked_oof.sample_ids[i]);
        const auto& src = fold_outputs[loc.first];
        for (std::size_t c = 0; c < stacked_oof.class_names.size(); ++c)
            stacked_oof.values(i, c) = src.values(loc.second, c);
    }

    result.stacked_report = evaluate_multilabel(stacked_oof, manifest, "oof");
    say("stacked macro AUROC " + std::to_string(result.stacked_report.macro_auroc) +
        ", macro mAP " + std::to_string(result.stacked_report.macro_map));
    return result;
}

// Serializes every pipeline artifact under work_dir with the documented file
// formats; rerunning with the same inputs and seed reproduces each byte.
inline void write_pipeline_artifacts(const PipelineResult& result,
                                     const std::filesystem::path& work_dir) {
    namespace fs = std::filesystem;
    csv::write_file_atomic(work_dir / "folds.csv", folds_to_csv(result.folds));
    if (!result.plan.entries.empty())
        csv::write_file_atomic(work_dir / "upsample.csv", upsample_to_csv(result.plan));

    for (const auto& member : result.members) {
        const auto& id = member.info.model_id;
        csv::write_file_atomic(work_dir / "models" / (id + ".json"),
                               reference_model_to_json(member.model, member.train_cfg,
                                                       member.best_epoch, member.val_loss)
                                   .dump(2) + "\n");
        csv::write_file_atomic(work_dir / "history" / (id + ".csv"),
                               history_to_csv(member.history));
        csv::write_file_atomic(work_dir / "oof" / (id + ".csv"), prediction_to_csv(member.oof));
        csv::write_file_atomic(work_dir / "weights" / (id + ".json"),
                               class_weights_to_json(member.class_weights).dump(2) + "\n");
        csv::write_file_atomic(work_dir / "reports" / (id + ".json"),
                               report_to_json(member.report).dump(2) + "\n");
    }

    csv::write_file_atomic(work_dir / "stacked.json", stacked_to_json(result.stacked).dump(2) + "\n");
    csv::write_file_atomic(work_dir / "stacked_oof.csv", prediction_to_csv(result.stacked_oof));
    csv::write_file_atomic(work_dir / "report.json",
                           report_to_json(result.stacked_report).dump(2) + "\n");
    csv::write_file_atomic(work_dir / "report.csv", report_to_csv(result.stacked_report));
}

} // namespace retistack
