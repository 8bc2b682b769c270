// retistack -- multi-disease retinal classification pipeline CLI.
//
// Subcommands mirror the pipeline stages: split, upsample, preprocess,
// train, predict, stack-fit, stack-predict, evaluate, run-all, make-synth.
// Stages communicate only through documented files, so deleting the work
// directory and re-running from the inputs reproduces every artifact.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "retistack/augment.hpp"
#include "retistack/dataset.hpp"
#include "retistack/ensemble.hpp"
#include "retistack/image_io.hpp"
#include "retistack/metrics.hpp"
#include "retistack/pipeline.hpp"
#include "retistack/sampling.hpp"
#include "retistack/training.hpp"
#include "retistack/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace retistack;

namespace {

// ---------------------------------------------------------------------------
// Run configuration: one JSON document, overridable with --set key=value
// (dotted paths). Every stage reads the same file so a run is fully captured
// by config + seed.
// ---------------------------------------------------------------------------

struct RunConfig {
    fs::path manifest;
    fs::path image_root;
    fs::path work_dir;
    std::string risk_name = kDefaultRiskName;
    PipelineConfig pipeline;
};

json default_config_json() {
    json j;
    j["manifest"] = "";
    j["image_root"] = "";
    j["work_dir"] = "work";
    j["risk_name"] = kDefaultRiskName;
    j["k"] = 5;
    j["seed"] = 42;
    j["arch_input_size"] = 224;
    j["detector_downscales"] = {16, 8};
    j["classifier_downscales"] = {16, 8};
    j["loss"] = "focal";
    j["stack_lambda"] = 1e-4;
    j["stack_mode"] = "oof";
    j["upsample_threshold"] = 100;
    j["training"] = training_config_to_json(TrainingConfig{});
    const AugmentRanges a;
    j["augment"] = {{"rotation_min", a.rotation_min},
                    {"rotation_max", a.rotation_max},
                    {"flip_h_prob", a.flip_h_prob},
                    {"flip_v_prob", a.flip_v_prob},
                    {"brightness_max_delta", a.brightness_max_delta},
                    {"contrast_min", a.contrast_min},
                    {"contrast_max", a.contrast_max},
                    {"saturation_min", a.saturation_min},
                    {"saturation_max", a.saturation_max},
                    {"hue_max_delta", a.hue_max_delta}};
    const NormalizationStats n;
    j["normalization"] = {{"mean", {n.mean[0], n.mean[1], n.mean[2]}},
                          {"std", {n.std[0], n.std[1], n.std[2]}}};
    return j;
}

json load_config_json(const fs::path& path, const std::vector<std::string>& overrides) {
    json j = default_config_json();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) fail_validation("cannot open config: " + path.string());
        json user;
        try {
            in >> user;
        } catch (const json::exception& e) {
            fail_validation("config parse error: " + std::string(e.what()));
        }
        j.merge_patch(user);
    }
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) fail_validation("--set expects key=value, got '" + kv + "'");
        std::string key = "/" + kv.substr(0, eq);
        for (auto& ch : key)
            if (ch == '.') ch = '/';
        const std::string raw = kv.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::exception&) {
            value = raw; // plain string
        }
        j[json::json_pointer(key)] = value;
    }
    return j;
}

RunConfig parse_run_config(const json& j) {
    RunConfig rc;
    rc.manifest = j.at("manifest").get<std::string>();
    rc.image_root = j.at("image_root").get<std::string>();
    rc.work_dir = j.at("work_dir").get<std::string>();
    rc.risk_name = j.at("risk_name").get<std::string>();

    PipelineConfig& p = rc.pipeline;
    p.k = j.at("k").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.arch_input_size = j.at("arch_input_size").get<int>();
    p.detector_downscales = j.at("detector_downscales").get<std::vector<int>>();
    p.classifier_downscales = j.at("classifier_downscales").get<std::vector<int>>();
    const std::string loss = j.at("loss").get<std::string>();
    if (loss == "focal") p.loss = LossKind::focal;
    else if (loss == "bce") p.loss = LossKind::bce;
    else fail_validation("loss must be 'focal' or 'bce', got '" + loss + "'");
    p.stack_lambda = j.at("stack_lambda").get<double>();
    const std::string mode = j.at("stack_mode").get<std::string>();
    if (mode == "oof") p.stack_mode = StackMode::oof;
    else if (mode == "replica") p.stack_mode = StackMode::replica;
    else fail_validation("stack_mode must be 'oof' or 'replica', got '" + mode + "'");
    p.upsample_threshold = j.at("upsample_threshold").get<std::size_t>();
    p.train = training_config_from_json(j.at("training"));
    if (p.train.seed == 0) p.train.seed = p.seed;

    const json& a = j.at("augment");
    p.augment_ranges.rotation_min = a.at("rotation_min").get<double>();
    p.augment_ranges.rotation_max = a.at("rotation_max").get<double>();
    p.augment_ranges.flip_h_prob = a.at("flip_h_prob").get<double>();
    p.augment_ranges.flip_v_prob = a.at("flip_v_prob").get<double>();
    p.augment_ranges.brightness_max_delta = a.at("brightness_max_delta").get<double>();
    p.augment_ranges.contrast_min = a.at("contrast_min").get<double>();
    p.augment_ranges.contrast_max = a.at("contrast_max").get<double>();
    p.augment_ranges.saturation_min = a.at("saturation_min").get<double>();
    p.augment_ranges.saturation_max = a.at("saturation_max").get<double>();
    p.augment_ranges.hue_max_delta = a.at("hue_max_delta").get<double>();

    const json& n = j.at("normalization");
    for (int c = 0; c < 3; ++c) {
        p.norm.mean[c] = n.at("mean").at(c).get<double>();
        p.norm.std[c] = n.at("std").at(c).get<double>();
    }
    return rc;
}

// Image files live at <image_root>/<sample_id>.(png|ppm).
fs::path find_image(const fs::path& root, const std::string& sample_id) {
    for (const char* ext : {".png", ".ppm"}) {
        fs::path p = root / (sample_id + ext);
        if (fs::exists(p)) return p;
    }
    fail_validation("no image found for sample " + sample_id + " under " + root.string());
}

// Loads each sample's image once; keeps them for the run.
class DiskImages {
public:
    explicit DiskImages(fs::path root) : root_(std::move(root)) {}

    const ImageBuffer& operator()(const std::string& sample_id) {
        auto it = cache_.find(sample_id);
        if (it != cache_.end()) return it->second;
        auto img = load_image(find_image(root_, sample_id));
        return cache_.emplace(sample_id, std::move(img)).first->second;
    }

private:
    fs::path root_;
    std::map<std::string, ImageBuffer> cache_;
};

void print_fold_label_counts(const LabelMatrix& m, const FoldAssignment& fa) {
    const auto& schema = m.schema();
    std::vector<std::vector<std::size_t>> counts(fa.k,
                                                 std::vector<std::size_t>(schema.size(), 0));
    std::vector<std::size_t> sizes(fa.k, 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const int f = fa.fold_of[i];
        ++sizes[f];
        for (std::size_t c = 0; c < schema.size(); ++c)
            counts[f][c] += m.records()[i].labels[c];
    }
    for (int f = 0; f < fa.k; ++f) {
        std::cout << "fold " << f << " (" << sizes[f] << " samples):";
        for (std::size_t c = 0; c < schema.size(); ++c)
            std::cout << " " << schema.class_names[c] << "=" << counts[f][c];
        std::cout << "\n";
    }
}

// ---------------------------------------------------------------------------
// Subcommand bodies. Each returns the process exit code.
// ---------------------------------------------------------------------------

int cmd_split(const fs::path& manifest_path, const std::string& risk_name, int k,
              std::uint64_t seed, const fs::path& out) {
    const LabelMatrix m = load_manifest(manifest_path, risk_name);
    const FoldAssignment fa = make_fold_assignment(m, k, seed);
    csv::write_file_atomic(out, folds_to_csv(fa));
    print_fold_label_counts(m, fa);
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

int cmd_upsample(const fs::path& manifest_path, const std::string& risk_name,
                 std::size_t threshold, std::uint64_t seed, const fs::path& out) {
    const LabelMatrix m = load_manifest(manifest_path, risk_name);
    const UpsamplePlan plan = upsample_plan(m, threshold, seed);
    csv::write_file_atomic(out, upsample_to_csv(plan));
    std::cout << "plan: " << plan.entries.size() << " replicas (dataset "
              << m.size() << " -> " << m.size() + plan.entries.size() << ")\n";
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

int cmd_preprocess(const json& cfg_json, const std::string& arch_name) {
    const RunConfig rc = parse_run_config(cfg_json);
    const LabelMatrix m = load_manifest(rc.manifest, rc.risk_name);

    ArchPreset preset{"default", 224};
    bool found = false;
    for (const auto& a : default_arch_presets())
        if (a.name == arch_name) {
            preset = a;
            found = true;
        }
    if (!found) {
        try {
            preset = ArchPreset{arch_name, std::stoi(arch_name)};
        } catch (...) {
            fail_validation("unknown architecture preset: " + arch_name);
        }
    }

    DiskImages images(rc.image_root);
    const fs::path out_dir = rc.work_dir / "tensors" / preset.name;
    std::size_t warned = 0;
    for (const auto& rec : m.records()) {
        const ImageBuffer& raw = images(rec.sample_id);
        bool matched = false;
        const CameraProfile cam =
            match_camera_profile(raw.width, raw.height, default_camera_profiles(), &matched);
        if (!matched && ++warned <= 5)
            std::cerr << "warning: unknown camera resolution " << raw.width << "x" << raw.height
                      << " for " << rec.sample_id << ", padding only\n";
        const ImageBuffer pre = preprocess(raw, cam, preset, rc.pipeline.norm);
        save_tensor(pre, out_dir / (rec.sample_id + ".fens"));
    }
    std::cout << "wrote " << m.size() << " tensors (" << preset.input_size << "x"
              << preset.input_size << "x3) to " << out_dir.string() << "\n";
    return 0;
}

// Trains members of one mode. fold < 0 means every fold; workers > 1 runs
// fold/architecture tasks in parallel (the fits are independent).
int cmd_train(const json& cfg_json, const std::string& mode_name, int fold, int workers) {
    const RunConfig rc = parse_run_config(cfg_json);
    if (mode_name != "detector" && mode_name != "classifier")
        fail_validation("mode must be detector or classifier");
    const ModelType type = model_type_from_name(mode_name);
    const TargetMode tmode =
        type == ModelType::detector ? TargetMode::detector : TargetMode::classifier;

    const LabelMatrix manifest = load_manifest(rc.manifest, rc.risk_name);
    if (tmode == TargetMode::classifier && manifest.schema().size() < 2)
        fail_validation("no label classes besides disease risk");

    const fs::path folds_path = rc.work_dir / "folds.csv";
    if (!fs::exists(folds_path))
        fail_validation("missing fold file (run split first): " + folds_path.string());
    const FoldAssignment folds = folds_from_csv(folds_path);
    if (fold >= folds.k) fail_validation("fold index out of range");

    const PipelineConfig& pc = rc.pipeline;
    LabelMatrix working = manifest;
    UpsamplePlan plan;
    if (pc.upsample_threshold > 0) {
        plan = upsample_plan(manifest, pc.upsample_threshold, pc.seed);
        working = apply_upsample(manifest, plan);
    }
    std::map<std::string, std::uint64_t> replica_seed;
    for (const auto& e : plan.entries)
        replica_seed[replica_id(e.source_id, e.replica_index)] = e.aug_seed;

    DiskImages images(rc.image_root);
    const auto& downscales =
        type == ModelType::detector ? pc.detector_downscales : pc.classifier_downscales;

    // Feature extraction (shared across tasks, done up front).
    std::map<int, Matrix> features;
    for (int ds : downscales)
        features[ds] = Matrix(working.size(), static_cast<std::size_t>(ds) * ds * 3);
    std::vector<int> row_fold(working.size());
    std::vector<bool> row_is_replica(working.size(), false);
    for (std::size_t i = 0; i < working.size(); ++i) {
        const std::string& id = working.records()[i].sample_id;
        const auto hash = id.find('#');
        ImageBuffer raw;
        if (hash == std::string::npos) {
            row_fold[i] = folds.fold(id);
            raw = images(id);
        } else {
            row_fold[i] = folds.fold(id.substr(0, hash));
            row_is_replica[i] = true;
            raw = augment(images(id.substr(0, hash)),
                          sample_augment_params(replica_seed.at(id), pc.augment_ranges));
        }
        const CameraProfile cam =
            match_camera_profile(raw.width, raw.height, default_camera_profiles());
        const ImageBuffer pre =
            preprocess(raw, cam, ArchPreset{"pipeline", pc.arch_input_size}, pc.norm);
        for (int ds : downscales) {
            FeatureSpec spec;
            spec.downscale = ds;
            const auto feat = extract_features(pre, spec);
            std::copy(feat.begin(), feat.end(), features[ds].row(i));
        }
    }

    const TargetMatrix truth = targets(working, tmode);

    struct Task {
        int ds;
        int fold;
    };
    std::vector<Task> tasks;
    for (int ds : downscales)
        for (int f = 0; f < folds.k; ++f)
            if (fold < 0 || f == fold) tasks.push_back({ds, f});

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size() || failed.load()) return;
            const Task task = tasks[t];
            try {
                std::vector<std::size_t> train_rows, val_rows, oof_rows;
                for (std::size_t i = 0; i < working.size(); ++i) {
                    if (row_fold[i] == task.fold) {
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
                const Matrix& X = features.at(task.ds);
                const Matrix Xtr = slice(X, train_rows), Xval = slice(X, val_rows);
                const Matrix Ytr = slice(truth.values, train_rows),
                             Yval = slice(truth.values, val_rows);

                std::vector<std::size_t> positives(Ytr.cols, 0);
                for (std::size_t i = 0; i < Ytr.rows; ++i)
                    for (std::size_t c = 0; c < Ytr.cols; ++c) positives[c] += Ytr(i, c) != 0.0;
                const ClassWeights cw =
                    class_weights_from_counts(Ytr.rows, truth.class_names, positives);

                TrainingConfig tc = pc.train;
                tc.seed = derive_seed(pc.seed,
                                      {seed_stream::training,
                                       static_cast<std::uint64_t>(type == ModelType::detector ? 0 : 1),
                                       static_cast<std::uint64_t>(task.ds),
                                       static_cast<std::uint64_t>(task.fold)});

                FeatureSpec spec;
                spec.downscale = task.ds;
                const std::string id = mode_name + "-ds" + std::to_string(task.ds) + "-f" +
                                       std::to_string(task.fold);
                FitResult fit = fit_reference_model(Xtr, Ytr, Xval, Yval, cw, pc.loss, tc, spec,
                                                    truth.class_names);

                std::vector<std::string> oof_ids;
                for (auto r : oof_rows) oof_ids.push_back(working.records()[r].sample_id);
                const PredictionMatrix oof = predict(fit.model, slice(X, oof_rows), oof_ids, id);

                csv::write_file_atomic(rc.work_dir / "models" / (id + ".json"),
                                       reference_model_to_json(fit.model, tc, fit.best.epoch,
                                                               fit.best.val_loss)
                                           .dump(2) + "\n");
                csv::write_file_atomic(rc.work_dir / "history" / (id + ".csv"),
                                       history_to_csv(fit.history));
                csv::write_file_atomic(rc.work_dir / "oof" / (id + ".csv"),
                                       prediction_to_csv(oof));
                csv::write_file_atomic(rc.work_dir / "weights" / (id + ".json"),
                                       class_weights_to_json(cw).dump(2) + "\n");
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed = true;
                failure = e.what();
                return;
            }
        }
    };

    const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed) throw Error(errc::numeric, failure);

    std::cout << "trained " << tasks.size() << " " << mode_name << " model(s) into "
              << (rc.work_dir / "models").string() << "\n";
    return 0;
}

int cmd_predict(const fs::path& model_path, const json& cfg_json, const fs::path& out) {
    const RunConfig rc = parse_run_config(cfg_json);
    std::ifstream in(model_path);
    if (!in) fail_validation("cannot open model: " + model_path.string());
    json jm;
    in >> jm;
    const ReferenceModel model = reference_model_from_json(jm);

    const LabelMatrix manifest = load_manifest(rc.manifest, rc.risk_name);
    DiskImages images(rc.image_root);

    Matrix X(manifest.size(), model.feature_dim());
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const ImageBuffer& raw = images(manifest.records()[i].sample_id);
        const CameraProfile cam =
            match_camera_profile(raw.width, raw.height, default_camera_profiles());
        const ImageBuffer pre = preprocess(raw, cam, ArchPreset{"pipeline", rc.pipeline.arch_input_size},
                                           rc.pipeline.norm);
        const auto feat = extract_features(pre, model.feature_spec);
        std::copy(feat.begin(), feat.end(), X.row(i));
    }
    const PredictionMatrix p =
        predict(model, X, manifest.sample_ids(), model_path.stem().string());
    csv::write_file_atomic(out, prediction_to_csv(p));
    std::cout << "wrote " << out.string() << " (" << p.sample_ids.size() << " samples x "
              << p.class_names.size() << " classes)\n";
    return 0;
}

std::vector<PredictionMatrix> load_member_csvs(const std::vector<std::string>& files) {
    std::vector<PredictionMatrix> members;
    for (const auto& f : files) members.push_back(load_prediction(f));
    return members;
}

// Stacker over externally materialized member CSVs: every member must cover
// every requested sample (replica-style feature rows).
int cmd_stack_fit(const fs::path& manifest_path, const std::string& risk_name,
                  const std::vector<std::string>& member_files, double lambda,
                  bool allow_degenerate, const fs::path& out) {
    const LabelMatrix manifest = load_manifest(manifest_path, risk_name);
    auto members = load_member_csvs(member_files);

    FeatureMatrix fm = assemble_features(members, manifest.sample_ids());
    std::cout << "assembled " << fm.column_names.size() << " stacking feature columns from "
              << members.size() << " members\n";

    StackedModel stacked = fit_stacker({fm}, manifest);
    for (auto& c : stacked.classes) c.model.l2_lambda = lambda;
    if (!stacked.degenerate_classes.empty()) {
        for (const auto& name : stacked.degenerate_classes)
            std::cerr << "warning: class " << name << " has a single-valued target, constant model\n";
        if (!allow_degenerate)
            fail_degenerate("degenerate stacker classes (" +
                            std::to_string(stacked.degenerate_classes.size()) +
                            "); pass --allow-degenerate to accept");
    }
    for (const auto& m : members)
        stacked.spec.members.push_back({m.model_id, ModelType::classifier, "external", -1});
    csv::write_file_atomic(out, stacked_to_json(stacked).dump(2) + "\n");
    std::cout << "wrote " << out.string() << " (" << stacked.classes.size() << " class models)\n";
    return 0;
}

int cmd_stack_predict(const fs::path& model_path, const std::vector<std::string>& member_files,
                      const fs::path& out) {
    std::ifstream in(model_path);
    if (!in) fail_validation("cannot open stacked model: " + model_path.string());
    json jm;
    in >> jm;
    const StackedModel stacked = stacked_from_json(jm);

    auto members = load_member_csvs(member_files);

    // OOF-trained stackers use fold-agnostic group columns; bag the folds of
    // each (type, architecture) group before assembling.
    bool group_columns = false;
    for (const auto& col : stacked.feature_columns)
        if (col.find("-f") == std::string::npos) group_columns = true;
    if (group_columns && !stacked.spec.members.empty()) {
        std::map<std::string, std::vector<PredictionMatrix>> groups;
        for (auto& m : members) {
            std::string gid = m.model_id;
            for (const auto& info : stacked.spec.members)
                if (info.model_id == m.model_id) {
                    gid = model_type_name(info.type) + "-" + info.architecture;
                    break;
                }
            groups[gid].push_back(std::move(m));
        }
        members.clear();
        for (auto& [gid, preds] : groups) members.push_back(mean_bag(preds, gid));
    }

    const PredictionMatrix p = predict_stacked(stacked, members);
    csv::write_file_atomic(out, prediction_to_csv(p));
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

int cmd_evaluate(const fs::path& pred_path, const fs::path& manifest_path,
                 const std::string& risk_name, const fs::path& out_prefix, bool write_svg) {
    const LabelMatrix manifest = load_manifest(manifest_path, risk_name);
    const PredictionMatrix preds = load_prediction(pred_path);
    const EvalReport report = evaluate_multilabel(preds, manifest);

    csv::write_file_atomic(fs::path(out_prefix.string() + ".json"),
                           report_to_json(report).dump(2) + "\n");
    csv::write_file_atomic(fs::path(out_prefix.string() + ".csv"), report_to_csv(report));

    // Per-class ROC curves for the evaluable classes.
    for (std::size_t j = 0; j < preds.class_names.size(); ++j) {
        const auto& name = preds.class_names[j];
        const std::size_t col = manifest.schema().index_of(name);
        std::vector<double> scores(preds.sample_ids.size());
        std::vector<std::uint8_t> labels(preds.sample_ids.size());
        std::size_t pos = 0;
        for (std::size_t i = 0; i < preds.sample_ids.size(); ++i) {
            scores[i] = preds.values(i, j);
            labels[i] = manifest.by_id(preds.sample_ids[i]).labels[col];
            pos += labels[i];
        }
        if (pos == 0 || pos == labels.size()) continue;
        const RocCurve curve = roc_curve(scores, labels);
        csv::write_file_atomic(fs::path(out_prefix.string() + ".roc." + name + ".csv"),
                               roc_to_csv(curve));
        if (write_svg)
            csv::write_file_atomic(fs::path(out_prefix.string() + ".roc." + name + ".svg"),
                                   roc_to_svg(curve));
    }

    std::cout << "macro AUROC " << csv::format_double(report.macro_auroc) << ", macro mAP "
              << csv::format_double(report.macro_map) << ", challenge score "
              << csv::format_double(report.challenge_score) << "\n";
    for (const auto& name : report.skipped)
        std::cerr << "warning: class " << name << " skipped (single-valued truth)\n";
    std::cout << "wrote " << out_prefix.string() << ".{json,csv,roc.*}\n";
    return 0;
}

int cmd_run_all(const json& cfg_json) {
    const RunConfig rc = parse_run_config(cfg_json);
    const LabelMatrix manifest = load_manifest(rc.manifest, rc.risk_name);
    DiskImages images(rc.image_root);
    const PipelineResult result =
        run_pipeline(manifest, [&](const std::string& id) -> const ImageBuffer& {
            return images(id);
        }, rc.pipeline, &std::cout);
    write_pipeline_artifacts(result, rc.work_dir);
    csv::write_file_atomic(rc.work_dir / "run_config.json", cfg_json.dump(2) + "\n");

    std::cout << "member macro AUROC:\n";
    for (const auto& m : result.members)
        std::cout << "  " << m.info.model_id << ": " << csv::format_double(m.report.macro_auroc)
                  << "\n";
    std::cout << "stacked macro AUROC " << csv::format_double(result.stacked_report.macro_auroc)
              << ", macro mAP " << csv::format_double(result.stacked_report.macro_map) << "\n";
    std::cout << "artifacts in " << rc.work_dir.string() << "\n";
    return 0;
}

int cmd_make_synth(const fs::path& out_dir, std::size_t samples, int size, int labels,
                   double rate, double noise, std::uint64_t seed) {
    SyntheticConfig sc;
    sc.n_samples = samples;
    sc.image_size = size;
    sc.n_labels = labels;
    sc.label_rate = rate;
    sc.noise = noise;
    sc.seed = seed;
    const SyntheticDataset data = make_synthetic(sc);
    save_manifest(data.manifest, out_dir / "manifest.csv");
    for (const auto& [id, img] : data.images) save_ppm(img, out_dir / "images" / (id + ".ppm"));
    std::cout << "wrote " << data.manifest.size() << " samples to " << out_dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"retistack: bagged + stacked multi-disease retinal classification pipeline"};
    app.require_subcommand(0, 1);

    bool show_version = false;
    app.add_flag("--version", show_version, "print tool and file schema versions");

    std::string config_path;
    std::vector<std::string> overrides;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration JSON");
        sub->add_option("--set", overrides, "override config values (key.path=value)");
    };

    // split
    auto* split = app.add_subcommand("split", "stratified multi-label k-fold split");
    std::string manifest_arg, risk_arg = kDefaultRiskName, out_arg = "folds.csv";
    int k_arg = 5;
    std::uint64_t seed_arg = 42;
    split->add_option("--manifest", manifest_arg, "label manifest CSV")->required();
    split->add_option("--risk-name", risk_arg, "disease-risk column name");
    split->add_option("--k", k_arg, "fold count (>= 2)");
    split->add_option("--seed", seed_arg, "split seed");
    split->add_option("--out", out_arg, "output fold CSV");

    // upsample
    auto* upsample = app.add_subcommand("upsample", "augmentation-based up-sampling plan");
    std::string up_manifest, up_out = "upsample.csv";
    std::size_t up_threshold = 100;
    std::uint64_t up_seed = 42;
    std::string up_risk = kDefaultRiskName;
    upsample->add_option("--manifest", up_manifest, "label manifest CSV")->required();
    upsample->add_option("--risk-name", up_risk, "disease-risk column name");
    upsample->add_option("--threshold", up_threshold, "minimum per-label count");
    upsample->add_option("--seed", up_seed, "plan seed");
    upsample->add_option("--out", up_out, "output plan CSV");

    // preprocess
    auto* preprocess_cmd = app.add_subcommand("preprocess", "export preprocessed tensors");
    std::string arch_arg = "default";
    preprocess_cmd->add_option("--arch", arch_arg,
                               "architecture preset (default|efficientnetb4|inceptionv3|<pixels>)");
    add_config(preprocess_cmd);

    // train
    auto* train = app.add_subcommand("train", "train reference models for one mode");
    std::string mode_arg;
    int fold_arg = -1, workers_arg = 1;
    train->add_option("--mode", mode_arg, "detector|classifier")->required();
    train->add_option("--fold", fold_arg, "validation fold (default: all folds)");
    train->add_option("--workers", workers_arg, "parallel fold workers");
    add_config(train);

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "emit a member prediction CSV");
    std::string model_arg, pred_out = "predictions.csv";
    predict_cmd->add_option("--model", model_arg, "reference model JSON")->required();
    predict_cmd->add_option("--out", pred_out, "output prediction CSV");
    add_config(predict_cmd);

    // stack-fit
    auto* stack_fit = app.add_subcommand("stack-fit", "fit per-class stacked logistic models");
    std::string sf_manifest, sf_out = "stacked.json", sf_risk = kDefaultRiskName;
    std::vector<std::string> sf_members;
    double sf_lambda = 1e-4;
    bool sf_allow_degenerate = false;
    stack_fit->add_option("--manifest", sf_manifest, "label manifest CSV")->required();
    stack_fit->add_option("--risk-name", sf_risk, "disease-risk column name");
    stack_fit->add_option("--members", sf_members, "member prediction CSVs")->required();
    stack_fit->add_option("--lambda", sf_lambda, "L2 regularization");
    stack_fit->add_flag("--allow-degenerate", sf_allow_degenerate,
                        "accept zero-positive classes as constant models");
    stack_fit->add_option("--out", sf_out, "output stacked model JSON");

    // stack-predict
    auto* stack_predict = app.add_subcommand("stack-predict", "final stacked predictions");
    std::string sp_model, sp_out = "final.csv";
    std::vector<std::string> sp_members;
    stack_predict->add_option("--model", sp_model, "stacked model JSON")->required();
    stack_predict->add_option("--members", sp_members, "member prediction CSVs")->required();
    stack_predict->add_option("--out", sp_out, "output prediction CSV");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "AUROC / mAP evaluation report");
    std::string ev_pred, ev_manifest, ev_risk = kDefaultRiskName, ev_prefix = "report";
    bool ev_svg = false;
    evaluate->add_option("--pred", ev_pred, "prediction CSV")->required();
    evaluate->add_option("--manifest", ev_manifest, "truth manifest CSV")->required();
    evaluate->add_option("--risk-name", ev_risk, "disease-risk column name");
    evaluate->add_option("--out-prefix", ev_prefix, "output file prefix");
    evaluate->add_flag("--svg", ev_svg, "also write ROC SVG plots");

    // run-all
    auto* run_all = app.add_subcommand("run-all", "full pipeline: split, train, stack, evaluate");
    add_config(run_all);

    // make-synth
    auto* make_synth = app.add_subcommand("make-synth", "generate a synthetic demo dataset");
    std::string ms_out = "synth";
    std::size_t ms_samples = 500;
    int ms_size = 64, ms_labels = 4;
    double ms_rate = 0.3, ms_noise = 0.05;
    std::uint64_t ms_seed = 1;
    make_synth->add_option("--out-dir", ms_out, "output directory");
    make_synth->add_option("--samples", ms_samples, "sample count");
    make_synth->add_option("--size", ms_size, "image side length");
    make_synth->add_option("--labels", ms_labels, "condition class count");
    make_synth->add_option("--rate", ms_rate, "per-label positive rate");
    make_synth->add_option("--noise", ms_noise, "pixel noise sigma");
    make_synth->add_option("--seed", ms_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (show_version) {
        std::cout << "retistack " << kVersion << "\n";
        std::cout << "  manifest csv schema: " << kManifestSchemaVersion << "\n";
        std::cout << "  fold csv schema: " << kFoldSchemaVersion << "\n";
        std::cout << "  upsample csv schema: " << kUpsampleSchemaVersion << "\n";
        std::cout << "  prediction csv schema: " << kPredictionSchemaVersion << "\n";
        std::cout << "  model json schema: " << kModelSchemaVersion << "\n";
        std::cout << "  stacked json schema: " << kStackedSchemaVersion << "\n";
        std::cout << "  tensor format: FENS v" << kTensorSchemaVersion << "\n";
        return 0;
    }

    try {
        if (split->parsed())
            return cmd_split(manifest_arg, risk_arg, k_arg, seed_arg, out_arg);
        if (upsample->parsed())
            return cmd_upsample(up_manifest, up_risk, up_threshold, up_seed, up_out);
        if (preprocess_cmd->parsed())
            return cmd_preprocess(load_config_json(config_path, overrides), arch_arg);
        if (train->parsed())
            return cmd_train(load_config_json(config_path, overrides), mode_arg, fold_arg,
                             workers_arg);
        if (predict_cmd->parsed())
            return cmd_predict(model_arg, load_config_json(config_path, overrides), pred_out);
        if (stack_fit->parsed())
            return cmd_stack_fit(sf_manifest, sf_risk, sf_members, sf_lambda,
                                 sf_allow_degenerate, sf_out);
        if (stack_predict->parsed())
            return cmd_stack_predict(sp_model, sp_members, sp_out);
        if (evaluate->parsed())
            return cmd_evaluate(ev_pred, ev_manifest, ev_risk, ev_prefix, ev_svg);
        if (run_all->parsed())
            return cmd_run_all(load_config_json(config_path, overrides));
        if (make_synth->parsed())
            return cmd_make_synth(ms_out, ms_samples, ms_size, ms_labels, ms_rate, ms_noise,
                                  ms_seed);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    std::cout << app.help();
    return 0;
}
