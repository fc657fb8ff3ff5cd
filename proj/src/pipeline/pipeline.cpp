// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/pipeline/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "toxpipe/depict/layout.hpp"
#include "toxpipe/explain/gradcam.hpp"
#include "toxpipe/fingerprint/morgan.hpp"
#include "toxpipe/parallel.hpp"
#include "toxpipe/random.hpp"

namespace toxpipe::pipeline {

namespace {

constexpr std::size_t kExtractBatch = 32;

void say(const Logger& log, const std::string& msg) {
    if (log) {
        log(msg);
    }
}

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

RenderedSet render_records(const std::vector<DatasetRecord>& records, std::size_t size) {
    std::vector<std::optional<depict::StructImage>> slots(records.size());
    std::vector<std::optional<QuarantinedRow>> errors(records.size());
    const int side = static_cast<int>(size);
    parallel_for(records.size(), [&](std::size_t i) {
        const auto& rec = records[i];
        try {
            slots[i] = depict::rasterize(rec.molecule, depict::layout2d(rec.molecule), side, side);
        } catch (const Error& e) {
            errors[i] = QuarantinedRow{rec.line, rec.smiles, e.code(), e.what()};
        }
    });
    RenderedSet out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (slots[i]) {
            out.images.push_back(std::move(*slots[i]));
            out.kept.push_back(i);
        } else {
            out.failed.push_back(std::move(*errors[i]));
        }
    }
    return out;
}

ensemble::FeatureMatrix extract_features(const nn::DenseNet<float>& net,
                                         const std::vector<depict::StructImage>& images) {
    const std::size_t d = net.feature_dim();
    ensemble::FeatureMatrix x(images.size(), d);
    const std::size_t batches = (images.size() + kExtractBatch - 1) / kExtractBatch;
    parallel_for(batches, [&](std::size_t b) {
        const std::size_t start = b * kExtractBatch;
        const std::size_t end = std::min(images.size(), start + kExtractBatch);
        std::vector<const depict::StructImage*> ptrs;
        for (std::size_t i = start; i < end; ++i) {
            ptrs.push_back(&images[i]);
        }
        const auto rows = net.extract(ptrs);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            std::copy(rows[k].begin(), rows[k].end(), x.row(start + k).begin());
        }
    });
    return x;
}

ModelBundle train_model(const std::vector<DatasetRecord>& train, const PipelineConfig& config, const Logger& log) {
    if (train.empty()) {
        raise(ErrorCode::EmptyDataset, "no training records");
    }
    RenderedSet rendered = render_records(train, config.network.input_size);
    for (const auto& f : rendered.failed) {
        say(log, "excluded line " + std::to_string(f.line) + " (" + f.smiles + "): " + f.reason);
    }
    if (rendered.images.empty()) {
        raise(ErrorCode::EmptyDataset, "no training record could be depicted");
    }
    say(log, "rendered " + std::to_string(rendered.images.size()) + " training images");

    std::vector<nn::TrainSample> samples;
    samples.reserve(rendered.images.size());
    for (std::size_t k = 0; k < rendered.images.size(); ++k) {
        const auto& rec = train[rendered.kept[k]];
        nn::TrainSample s;
        s.image = &rendered.images[k];
        s.labels.resize(kAssayCount);
        s.mask.resize(kAssayCount);
        for (std::size_t a = 0; a < kAssayCount; ++a) {
            s.mask[a] = rec.labels[a] != ensemble::kMissing ? 1 : 0;
            s.labels[a] = rec.labels[a] == 1 ? 1.0f : 0.0f;
        }
        samples.push_back(std::move(s));
    }

    ModelBundle bundle;
    bundle.network = nn::DenseNet<float>::initialize(config.network, splitmix64(config.seed ^ 0x696e6974ULL));
    const auto history = nn::train(bundle.network, samples, config.training, [&](std::size_t epoch, double loss) {
        say(log, "epoch " + std::to_string(epoch + 1) + "/" + std::to_string(config.training.epochs) +
                     " loss " + fixed(loss));
    });

    const auto features = extract_features(bundle.network, rendered.images);
    ensemble::LabelMatrix labels(rendered.kept.size(), kAssayCount);
    for (std::size_t k = 0; k < rendered.kept.size(); ++k) {
        for (std::size_t a = 0; a < kAssayCount; ++a) {
            labels(k, a) = train[rendered.kept[k]].labels[a];
        }
    }
    bundle.ensemble = ensemble::EnsembleModel::fit(features, labels, config.ensemble);
    for (std::size_t a = 0; a < kAssayCount; ++a) {
        if (!bundle.ensemble.labels[a].any()) {
            say(log, std::string(kAssays[a]) + " untrained: " + bundle.ensemble.labels[a].skip_reason);
        }
    }

    bundle.meta.seed = config.seed;
    bundle.meta.epochs = config.training.epochs;
    bundle.meta.dataset_hash = dataset_hash(train);
    bundle.meta.train_records = rendered.kept.size();
    bundle.meta.excluded_records = rendered.failed.size();
    bundle.meta.loss_history = history.loss_history;
    bundle.meta.fractions = config.fractions;
    bundle.meta.augment_runs = config.augment_runs;
    bundle.meta.confidence_weight = config.confidence_weight;
    return bundle;
}

ScoredSet score_records(const ModelBundle& bundle, const std::vector<DatasetRecord>& records) {
    const auto rendered = render_records(records, bundle.network.config().input_size);
    const auto features = extract_features(bundle.network, rendered.images);
    ScoredSet out;
    out.kept = rendered.kept;
    out.predictions.resize(rendered.kept.size());
    parallel_for(rendered.kept.size(),
                 [&](std::size_t k) { out.predictions[k] = bundle.ensemble.predict(features.row(k)); });
    return out;
}

EvaluationReport evaluate_model(const ModelBundle& bundle, const std::vector<DatasetRecord>& records) {
    const auto scored = score_records(bundle, records);
    std::vector<AssayMetrics> metrics;
    for (std::size_t a = 0; a < kAssayCount; ++a) {
        std::vector<double> scores;
        std::vector<int> verdicts;
        std::vector<int> labels;
        for (std::size_t k = 0; k < scored.kept.size(); ++k) {
            const auto& p = scored.predictions[k][a];
            const auto label = records[scored.kept[k]].labels[a];
            if (!p.trained || label == ensemble::kMissing) {
                continue;
            }
            scores.push_back(p.mean_probability);
            verdicts.push_back(p.verdict);
            labels.push_back(label);
        }
        if (!labels.empty()) {
            metrics.push_back(assay_metrics(std::string(kAssays[a]), scores, verdicts, labels));
        }
    }
    if (metrics.empty()) {
        raise(ErrorCode::NoEvaluableRecords, "no assay has evaluable records");
    }
    auto report = summarize(std::move(metrics));
    report.excluded_records = records.size() - scored.kept.size();
    return report;
}

std::string content_hash(std::string_view smiles) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : smiles) {
        h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

PredictionReport predict_report(const ModelBundle& bundle, const std::string& smiles, const PredictOptions& options) {
    chem::Molecule mol;
    try {
        mol = chem::parse(smiles);
    } catch (const Error& e) {
        raise(ErrorCode::ParseFailure, e.what());
    }
    if (bundle.ensemble.label_count() != kAssayCount || bundle.ensemble.feature_dim() != bundle.network.feature_dim()) {
        raise(ErrorCode::BundleCorrupt, "ensemble does not match the extractor");
    }
    const int side = static_cast<int>(bundle.network.config().input_size);
    const auto image = depict::rasterize(mol, depict::layout2d(mol), side, side);
    const auto features = bundle.network.extract(image);
    const std::vector<double> raw(features.begin(), features.end());
    const auto preds = bundle.ensemble.predict(raw);

    const std::size_t runs = options.augment_runs.value_or(bundle.meta.augment_runs);
    std::vector<depict::StructImage> jittered;
    for (std::size_t r = 0; r < runs; ++r) {
        jittered.push_back(depict::augment(image, splitmix64(options.seed + r)));
    }
    const auto run_features = extract_features(bundle.network, jittered);
    std::vector<std::vector<double>> standardized;
    for (std::size_t r = 0; r < runs; ++r) {
        standardized.push_back(bundle.ensemble.scaler.apply(run_features.row(r)));
    }

    PredictionReport report;
    report.smiles = smiles;
    report.trust_densenet = ensemble::trust_densenet(standardized);
    const double weight = bundle.meta.confidence_weight;
    double trust_sum = 0.0;
    std::size_t trained = 0;
    for (std::size_t a = 0; a < kAssayCount; ++a) {
        AssayReport ar;
        ar.assay = std::string(kAssays[a]);
        const auto& p = preds[a];
        ar.trained = p.trained;
        ar.classifier_probability = p.probability;
        if (p.trained) {
            ar.verdict = p.verdict;
            ar.probability = p.mean_probability;
            ar.trust_ml = p.trust;
            ar.global_confidence = ensemble::global_confidence(report.trust_densenet, p.trust, weight);
            trust_sum += p.trust;
            ++trained;
        }
        report.assays.push_back(std::move(ar));
    }
    report.trust_ml = trained ? trust_sum / static_cast<double>(trained) : 0.0;
    report.global_confidence = ensemble::global_confidence(report.trust_densenet, report.trust_ml, weight);

    if (options.explain) {
        std::filesystem::create_directories(options.heatmap_dir);
        const std::string stem = content_hash(smiles);
        for (std::size_t a = 0; a < kAssayCount; ++a) {
            if (options.explain_label && *options.explain_label != a) {
                continue;
            }
            const auto map = explain::gradcam(bundle.network, image, a);
            const auto full = explain::upsample(map, image.width, image.height);
            const auto path = options.heatmap_dir / (stem + "_" + std::string(kAssays[a]) + ".png");
            depict::write_png(explain::overlay(full, image, options.overlay_alpha), path);
            report.assays[a].heatmap = path.string();
        }
    }
    return report;
}

depict::StructImage explain_overlay(const ModelBundle& bundle, const std::string& smiles, std::size_t assay,
                                    double alpha) {
    chem::Molecule mol;
    try {
        mol = chem::parse(smiles);
    } catch (const Error& e) {
        raise(ErrorCode::ParseFailure, e.what());
    }
    const int side = static_cast<int>(bundle.network.config().input_size);
    const auto image = depict::rasterize(mol, depict::layout2d(mol), side, side);
    const auto map = explain::gradcam(bundle.network, image, assay);
    return explain::overlay(explain::upsample(map, image.width, image.height), image, alpha);
}

std::string format_report_text(const PredictionReport& r) {
    std::string out;
    auto line = [&out](const std::string& key, const std::string& value) { out += key + ": " + value + "\n"; };
    line("smiles", r.smiles);
    line("trust_densenet", fixed(r.trust_densenet));
    line("trust_ml", fixed(r.trust_ml));
    line("global_confidence", fixed(r.global_confidence));
    for (const auto& a : r.assays) {
        line(a.assay + ".trained", a.trained ? "true" : "false");
        line(a.assay + ".verdict", a.verdict ? "active" : "inactive");
        line(a.assay + ".probability", fixed(a.probability));
        for (std::size_t c = 0; c < ensemble::kClassifierCount; ++c) {
            const auto& p = a.classifier_probability[c];
            line(a.assay + "." + ensemble::classifier_name(static_cast<ensemble::Classifier>(c)),
                 p ? fixed(*p) : std::string("none"));
        }
        line(a.assay + ".trust_ml", fixed(a.trust_ml));
        line(a.assay + ".global_confidence", fixed(a.global_confidence));
        if (!a.heatmap.empty()) {
            line(a.assay + ".heatmap", a.heatmap);
        }
    }
    return out;
}

std::string format_report_line(const PredictionReport& r) {
    nlohmann::ordered_json j;
    j["smiles"] = r.smiles;
    j["trust_densenet"] = r.trust_densenet;
    j["trust_ml"] = r.trust_ml;
    j["global_confidence"] = r.global_confidence;
    auto assays = nlohmann::ordered_json::array();
    for (const auto& a : r.assays) {
        nlohmann::ordered_json e;
        e["assay"] = a.assay;
        e["trained"] = a.trained;
        e["verdict"] = a.verdict ? "active" : "inactive";
        e["probability"] = a.probability;
        for (std::size_t c = 0; c < ensemble::kClassifierCount; ++c) {
            const auto& p = a.classifier_probability[c];
            const char* name = ensemble::classifier_name(static_cast<ensemble::Classifier>(c));
            e[name] = p ? nlohmann::ordered_json(*p) : nlohmann::ordered_json(nullptr);
        }
        e["trust_ml"] = a.trust_ml;
        e["global_confidence"] = a.global_confidence;
        if (!a.heatmap.empty()) {
            e["heatmap"] = a.heatmap;
        }
        assays.push_back(std::move(e));
    }
    j["assays"] = std::move(assays);
    return j.dump();
}

// ---------------------------------------------------------------------------

ensemble::FeatureMatrix fingerprint_features(const std::vector<DatasetRecord>& records, unsigned radius,
                                             std::size_t nbits) {
    ensemble::FeatureMatrix x(records.size(), nbits);
    parallel_for(records.size(), [&](std::size_t i) {
        const auto fp = fingerprint::morgan_fingerprint(records[i].molecule, radius, nbits);
        auto row = x.row(i);
        for (std::size_t b = 0; b < nbits; ++b) {
            row[b] = fp.test(b) ? 1.0 : 0.0;
        }
    });
    return x;
}

FingerprintBaseline fit_fingerprint_baseline(const std::vector<DatasetRecord>& train, const PipelineConfig& config) {
    FingerprintBaseline model;
    model.radius = config.fingerprint_radius;
    model.nbits = config.fingerprint_bits;
    const auto x = fingerprint_features(train, model.radius, model.nbits);
    parallel_for(kAssayCount, [&](std::size_t a) {
        std::vector<std::size_t> rows;
        std::vector<int> y;
        for (std::size_t i = 0; i < train.size(); ++i) {
            if (train[i].labels[a] != ensemble::kMissing) {
                rows.push_back(i);
                y.push_back(train[i].labels[a]);
            }
        }
        try {
            ensemble::require_two_classes(y);
        } catch (const Error&) {
            return;
        }
        auto params = config.ensemble.forest;
        params.seed = splitmix64(params.seed ^ (0xf00 + a));
        model.forests[a] = ensemble::fit_random_forest(x.select(rows), y, params);
    });
    return model;
}

std::vector<std::array<double, kAssayCount>> baseline_scores(const FingerprintBaseline& model,
                                                             const std::vector<DatasetRecord>& records) {
    const auto x = fingerprint_features(records, model.radius, model.nbits);
    std::vector<std::array<double, kAssayCount>> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (std::size_t a = 0; a < kAssayCount; ++a) {
            out[i][a] = model.forests[a] ? model.forests[a]->probability(x.row(i))
                                         : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

EvaluationReport evaluate_baseline(const FingerprintBaseline& model, const std::vector<DatasetRecord>& records) {
    const auto scores = baseline_scores(model, records);
    std::vector<AssayMetrics> metrics;
    for (std::size_t a = 0; a < kAssayCount; ++a) {
        if (!model.forests[a]) {
            continue;
        }
        std::vector<double> s;
        std::vector<int> v;
        std::vector<int> y;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i].labels[a] == ensemble::kMissing) {
                continue;
            }
            s.push_back(scores[i][a]);
            v.push_back(scores[i][a] > 0.5 ? 1 : 0);
            y.push_back(records[i].labels[a]);
        }
        if (!y.empty()) {
            metrics.push_back(assay_metrics(std::string(kAssays[a]), s, v, y));
        }
    }
    if (metrics.empty()) {
        raise(ErrorCode::NoEvaluableRecords, "no assay has evaluable records");
    }
    return summarize(std::move(metrics));
}

}  // namespace toxpipe::pipeline
