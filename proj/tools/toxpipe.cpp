// SPDX-License-Identifier: Apache-2.0
//
// toxpipe: command-line front end for parsing, fingerprinting, depicting, training, evaluating
// and explaining Tox21 toxicity predictions.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "toxpipe/chem/elements.hpp"
#include "toxpipe/chem/rings.hpp"
#include "toxpipe/chem/smiles.hpp"
#include "toxpipe/depict/layout.hpp"
#include "toxpipe/depict/raster.hpp"
#include "toxpipe/error.hpp"
#include "toxpipe/fingerprint/morgan.hpp"
#include "toxpipe/parallel.hpp"
#include "toxpipe/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using namespace toxpipe;

namespace {

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonOptions& c) {
    cmd->add_option("--config", c.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Master seed");
    cmd->add_option("--out", c.out, "Output path");
    cmd->add_option("--threads", c.threads, "Worker threads");
}

pipeline::PipelineConfig resolve(const CommonOptions& c) {
    pipeline::PipelineConfig cfg;
    if (!c.config_path.empty()) {
        cfg = pipeline::load_config(c.config_path, cfg);
    }
    if (c.seed) {
        cfg.reseed(*c.seed);
    }
    if (c.threads) {
        cfg.threads = *c.threads;
    }
    set_thread_count(cfg.threads);
    return cfg;
}

// SMILES come from positional arguments, or one per line from --in.
std::vector<std::string> gather_smiles(const std::vector<std::string>& args, const std::string& file) {
    std::vector<std::string> out = args;
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) {
            raise(ErrorCode::Io, "cannot open " + file);
        }
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (!line.empty() && line[0] != '#') {
                out.push_back(line.substr(0, line.find_first_of(" \t")));
            }
        }
    }
    return out;
}

// Writes to --out when given, stdout otherwise.
void emit(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f || !(f << text)) {
        raise(ErrorCode::Io, "cannot write " + out);
    }
}

std::string describe(const chem::Molecule& mol, const std::string& smiles) {
    std::ostringstream out;
    out << "smiles: " << smiles << '\n';
    out << "atoms: " << mol.atom_count() << '\n';
    out << "bonds: " << mol.bond_count() << '\n';
    out << "fragments: " << mol.fragment_count() << '\n';
    out << "rings: " << chem::find_rings(mol).size() << '\n';
    for (std::size_t i = 0; i < mol.atom_count(); ++i) {
        const auto& a = mol.atom(i);
        out << "atom." << i << ": " << chem::element_symbol(a.element) << (a.aromatic ? " aromatic" : "")
            << " charge=" << a.formal_charge << " implicit_h=" << mol.implicit_h(i) << (mol.in_ring(i) ? " ring" : "")
            << '\n';
    }
    for (std::size_t b = 0; b < mol.bond_count(); ++b) {
        const auto& bond = mol.bond(b);
        out << "bond." << b << ": " << bond.a << ' ' << bond.b << ' ' << chem::bond_order_symbol(bond.order) << '\n';
    }
    return out.str();
}

void report_error(const std::string& what, const Error& e) {
    std::cerr << what << ": " << error_code_name(e.code()) << ": " << e.what() << '\n';
}

pipeline::Dataset load_dataset(const std::string& path) {
    auto ds = pipeline::load_tox21_csv(path);
    std::cerr << "read " << ds.rows_in << " rows: " << ds.records.size() << " records, " << ds.quarantine.size()
              << " quarantined\n";
    for (const auto& q : ds.quarantine) {
        std::cerr << "  line " << q.line << " (" << q.smiles << "): " << error_code_name(q.code) << ": " << q.reason
                  << '\n';
    }
    return ds;
}

std::optional<std::size_t> assay_by_name(const std::string& name) {
    if (name.empty()) {
        return std::nullopt;
    }
    const auto idx = pipeline::assay_index(name);
    if (!idx) {
        raise(ErrorCode::InvalidLabel, "unknown assay " + name);
    }
    return idx;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tox21 toxicity prediction from 2D structure images"};
    app.require_subcommand(1);

    CommonOptions common;
    std::vector<std::string> smiles_args;
    std::string smiles_file;

    auto* parse_cmd = app.add_subcommand("parse", "Parse SMILES and print the molecular graph");
    add_common(parse_cmd, common);
    parse_cmd->add_option("smiles", smiles_args, "SMILES strings");
    parse_cmd->add_option("--in", smiles_file, "File with one SMILES per line");

    unsigned radius = fingerprint::kDefaultRadius;
    std::size_t nbits = fingerprint::kDefaultBits;
    auto* fp_cmd = app.add_subcommand("fingerprint", "Morgan fingerprints as hex, one per line");
    add_common(fp_cmd, common);
    fp_cmd->add_option("smiles", smiles_args, "SMILES strings");
    fp_cmd->add_option("--in", smiles_file, "File with one SMILES per line");
    fp_cmd->add_option("--radius", radius, "Environment radius")->capture_default_str();
    fp_cmd->add_option("--nbits", nbits, "Bit length (power of two)")->capture_default_str();

    int size = depict::kDefaultImageSize;
    auto* depict_cmd = app.add_subcommand("depict", "Render structure images (PNG) named by SMILES hash");
    add_common(depict_cmd, common);
    depict_cmd->add_option("smiles", smiles_args, "SMILES strings");
    depict_cmd->add_option("--in", smiles_file, "File with one SMILES per line");
    depict_cmd->add_option("--size", size, "Image side in pixels")->capture_default_str();

    std::string data_path;
    std::string metrics_path;
    auto* train_cmd = app.add_subcommand("train", "Train extractor and ensemble on the training split");
    add_common(train_cmd, common);
    train_cmd->add_option("--data", data_path, "Tox21 CSV")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--metrics", metrics_path, "Write test-split metrics CSV here");

    std::string model_path;
    std::string split_name = "test";
    auto* eval_cmd = app.add_subcommand("evaluate", "Per-assay metrics CSV for a trained bundle");
    add_common(eval_cmd, common);
    eval_cmd->add_option("--model", model_path, "Model bundle")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", data_path, "Tox21 CSV")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--split", split_name, "train, validation, test or all")
        ->check(CLI::IsMember({"train", "validation", "test", "all"}))
        ->capture_default_str();

    std::string format = "text";
    std::optional<std::size_t> augment_runs;
    auto* predict_cmd = app.add_subcommand("predict", "Verdicts, probabilities and confidence per assay");
    add_common(predict_cmd, common);
    predict_cmd->add_option("--model", model_path, "Model bundle")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("smiles", smiles_args, "SMILES strings");
    predict_cmd->add_option("--in", smiles_file, "File with one SMILES per line");
    predict_cmd->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
    predict_cmd->add_option("--augment-runs", augment_runs, "Augmented renderings for feature stability");

    std::string label_name;
    std::string heatmap_dir = ".";
    double alpha = 0.5;
    auto* explain_cmd = app.add_subcommand("explain", "Prediction plus Grad-CAM heatmap overlays");
    add_common(explain_cmd, common);
    explain_cmd->add_option("--model", model_path, "Model bundle")->required()->check(CLI::ExistingFile);
    explain_cmd->add_option("smiles", smiles_args, "SMILES strings");
    explain_cmd->add_option("--in", smiles_file, "File with one SMILES per line");
    explain_cmd->add_option("--label", label_name, "Only this assay (required with --out)");
    explain_cmd->add_option("--heatmaps", heatmap_dir, "Directory for overlay PNGs")->capture_default_str();
    explain_cmd->add_option("--alpha", alpha, "Overlay opacity")->check(CLI::Range(0.0, 1.0));
    explain_cmd->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
    explain_cmd->add_option("--augment-runs", augment_runs, "Augmented renderings for feature stability");

    CLI11_PARSE(app, argc, argv);

    int status = 0;
    try {
        const auto cfg = resolve(common);

        if (parse_cmd->parsed() || fp_cmd->parsed() || depict_cmd->parsed()) {
            const auto smiles = gather_smiles(smiles_args, smiles_file);
            std::string text;
            if (depict_cmd->parsed() && !common.out.empty()) {
                fs::create_directories(common.out);
            }
            for (const auto& s : smiles) {
                try {
                    const auto mol = chem::parse(s);
                    if (parse_cmd->parsed()) {
                        text += describe(mol, s);
                    } else if (fp_cmd->parsed()) {
                        text += fingerprint::morgan_fingerprint(mol, radius, nbits).to_hex() + '\t' + s + '\n';
                    } else {
                        const auto img = depict::rasterize(mol, depict::layout2d(mol), size, size);
                        const fs::path dir = common.out.empty() ? fs::path(".") : fs::path(common.out);
                        const auto path = dir / (pipeline::content_hash(s) + ".png");
                        depict::write_png(img, path);
                        std::cout << path.string() << '\t' << s << '\n';
                    }
                } catch (const Error& e) {
                    report_error(s, e);
                    status = 1;
                }
            }
            if (!depict_cmd->parsed()) {
                emit(text, common.out);
            }
        } else if (train_cmd->parsed()) {
            const auto ds = load_dataset(data_path);
            const auto split = pipeline::stratified_split(pipeline::label_matrix(ds.records), cfg.seed, cfg.fractions);
            std::cerr << "split " << split.train.size() << '/' << split.validation.size() << '/' << split.test.size()
                      << '\n';
            const auto log = [](const std::string& msg) { std::cerr << msg << '\n'; };
            const auto bundle = pipeline::train_model(pipeline::select_records(ds.records, split.train), cfg, log);
            const fs::path out = common.out.empty() ? fs::path("model.toxb") : fs::path(common.out);
            pipeline::save_bundle(bundle, out);
            std::cerr << "wrote " << out.string() << '\n';
            if (!split.test.empty()) {
                const auto report = pipeline::evaluate_model(bundle, pipeline::select_records(ds.records, split.test));
                const auto csv = pipeline::metrics_csv(report);
                if (metrics_path.empty()) {
                    std::cout << csv;
                } else {
                    emit(csv, metrics_path);
                }
            }
        } else if (eval_cmd->parsed()) {
            const auto bundle = pipeline::load_bundle(model_path);
            const auto ds = load_dataset(data_path);
            std::vector<std::size_t> pick;
            if (split_name == "all") {
                for (std::size_t i = 0; i < ds.records.size(); ++i) {
                    pick.push_back(i);
                }
            } else {
                const auto split = pipeline::stratified_split(pipeline::label_matrix(ds.records), bundle.meta.seed,
                                                              bundle.meta.fractions);
                pick = split_name == "train" ? split.train : split_name == "validation" ? split.validation : split.test;
            }
            const auto report = pipeline::evaluate_model(bundle, pipeline::select_records(ds.records, pick));
            emit(pipeline::metrics_csv(report), common.out);
        } else if (explain_cmd->parsed() && !common.out.empty()) {
            // Single overlay written to --out; the report goes to stdout.
            const auto smiles = gather_smiles(smiles_args, smiles_file);
            if (smiles.size() != 1 || label_name.empty()) {
                std::cerr << "explain --out needs exactly one SMILES and --label\n";
                return 2;
            }
            const auto bundle = pipeline::load_bundle(model_path);
            const auto assay = *assay_by_name(label_name);
            depict::write_png(pipeline::explain_overlay(bundle, smiles[0], assay, alpha), common.out);
            pipeline::PredictOptions options;
            options.seed = cfg.seed;
            options.augment_runs = augment_runs;
            auto report = pipeline::predict_report(bundle, smiles[0], options);
            report.assays[assay].heatmap = common.out;
            std::cout << (format == "json" ? pipeline::format_report_line(report) + '\n'
                                           : pipeline::format_report_text(report));
        } else if (predict_cmd->parsed() || explain_cmd->parsed()) {
            const auto bundle = pipeline::load_bundle(model_path);
            pipeline::PredictOptions options;
            options.seed = cfg.seed;
            options.augment_runs = augment_runs;
            if (explain_cmd->parsed()) {
                options.explain = true;
                options.heatmap_dir = heatmap_dir;
                options.overlay_alpha = alpha;
                options.explain_label = assay_by_name(label_name);
            }
            std::string text;
            for (const auto& s : gather_smiles(smiles_args, smiles_file)) {
                try {
                    const auto report = pipeline::predict_report(bundle, s, options);
                    text += format == "json" ? pipeline::format_report_line(report) + '\n'
                                             : pipeline::format_report_text(report);
                } catch (const Error& e) {
                    report_error(s, e);
                    status = 1;
                }
            }
            emit(text, common.out);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return status;
}
