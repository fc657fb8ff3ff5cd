// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/pipeline/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "toxpipe/error.hpp"
#include "toxpipe/random.hpp"

namespace toxpipe::pipeline {

void PipelineConfig::reseed(std::uint64_t s) {
    seed = s;
    training.seed = splitmix64(s ^ 0x7261696eULL);
    ensemble.seed = s;
    ensemble.svm.seed = splitmix64(s ^ 0x73766dULL);
    ensemble.forest.seed = splitmix64(s ^ 0x666f72ULL);
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

[[noreturn]] void bad(std::size_t line, std::string_view key, std::string_view value) {
    raise(ErrorCode::BadConfig,
          "line " + std::to_string(line) + ": bad value '" + std::string(value) + "' for " + std::string(key));
}

template <typename T>
T parse_number(std::size_t line, std::string_view key, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        bad(line, key, value);
    }
    return out;
}

double parse_double(std::size_t line, std::string_view key, std::string_view value) {
    return parse_number<double>(line, key, value);
}

std::vector<std::string_view> split_list(std::string_view value) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = value.find(',');
        out.push_back(trim(value.substr(0, comma)));
        if (comma == std::string_view::npos) {
            break;
        }
        value.remove_prefix(comma + 1);
    }
    return out;
}

}  // namespace

PipelineConfig parse_config(std::string_view text, PipelineConfig cfg) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            raise(ErrorCode::BadConfig, "line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        const std::size_t n = line_no;
        auto size = [&] { return parse_number<std::size_t>(n, key, value); };
        auto real = [&] { return parse_double(n, key, value); };

        if (key == "seed") {
            cfg.reseed(parse_number<std::uint64_t>(n, key, value));
        } else if (key == "threads") {
            cfg.threads = parse_number<unsigned>(n, key, value);
        } else if (key == "image_size") {
            cfg.network.input_size = size();
        } else if (key == "block_layers") {
            cfg.network.block_layers.clear();
            for (auto part : split_list(value)) {
                cfg.network.block_layers.push_back(parse_number<std::size_t>(n, key, part));
            }
        } else if (key == "growth_rate") {
            cfg.network.growth_rate = size();
        } else if (key == "stem_channels") {
            cfg.network.stem_channels = size();
        } else if (key == "compression") {
            cfg.network.compression = real();
            if (!(cfg.network.compression > 0.0 && cfg.network.compression <= 1.0)) {
                bad(n, key, value);
            }
        } else if (key == "bottleneck_factor") {
            cfg.network.bottleneck_factor = size();
        } else if (key == "epochs") {
            cfg.training.epochs = size();
        } else if (key == "batch_size") {
            cfg.training.batch_size = size();
        } else if (key == "learning_rate") {
            cfg.training.learning_rate = real();
        } else if (key == "momentum") {
            cfg.training.momentum = real();
        } else if (key == "svm_lambda") {
            cfg.ensemble.svm.lambda = real();
            if (!(cfg.ensemble.svm.lambda > 0.0)) {
                bad(n, key, value);
            }
        } else if (key == "svm_epochs") {
            cfg.ensemble.svm.epochs = size();
        } else if (key == "svm_calibration_fraction") {
            cfg.ensemble.svm.calibration_fraction = real();
        } else if (key == "rf_trees") {
            cfg.ensemble.forest.n_trees = size();
        } else if (key == "rf_depth") {
            cfg.ensemble.forest.max_depth = size();
        } else if (key == "rf_max_features") {
            cfg.ensemble.forest.max_features = size();
        } else if (key == "gbm_rounds") {
            cfg.ensemble.gbm.n_rounds = size();
        } else if (key == "gbm_depth") {
            cfg.ensemble.gbm.max_depth = size();
        } else if (key == "gbm_learning_rate") {
            cfg.ensemble.gbm.learning_rate = real();
        } else if (key == "gbm_lambda") {
            cfg.ensemble.gbm.lambda = real();
        } else if (key == "alpha") {
            const auto parts = split_list(value);
            if (parts.size() != ensemble::kClassifierCount) {
                bad(n, key, value);
            }
            for (std::size_t i = 0; i < parts.size(); ++i) {
                cfg.ensemble.alpha[i] = parse_double(n, key, parts[i]);
            }
        } else if (key == "train_fraction") {
            cfg.fractions.train = real();
        } else if (key == "validation_fraction") {
            cfg.fractions.validation = real();
        } else if (key == "test_fraction") {
            cfg.fractions.test = real();
        } else if (key == "augment_runs") {
            cfg.augment_runs = size();
        } else if (key == "confidence_weight") {
            cfg.confidence_weight = real();
        } else if (key == "fingerprint_radius") {
            cfg.fingerprint_radius = parse_number<unsigned>(n, key, value);
        } else if (key == "fingerprint_bits") {
            cfg.fingerprint_bits = size();
        } else {
            raise(ErrorCode::BadConfig, "line " + std::to_string(n) + ": unknown key " + std::string(key));
        }
    }
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorCode::Io, "cannot open " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::string format_config(const PipelineConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "seed = " << c.seed << '\n';
    out << "threads = " << c.threads << '\n';
    out << "image_size = " << c.network.input_size << '\n';
    out << "block_layers = ";
    for (std::size_t i = 0; i < c.network.block_layers.size(); ++i) {
        out << (i ? "," : "") << c.network.block_layers[i];
    }
    out << '\n';
    out << "growth_rate = " << c.network.growth_rate << '\n';
    out << "stem_channels = " << c.network.stem_channels << '\n';
    out << "compression = " << c.network.compression << '\n';
    out << "bottleneck_factor = " << c.network.bottleneck_factor << '\n';
    out << "epochs = " << c.training.epochs << '\n';
    out << "batch_size = " << c.training.batch_size << '\n';
    out << "learning_rate = " << c.training.learning_rate << '\n';
    out << "momentum = " << c.training.momentum << '\n';
    out << "svm_lambda = " << c.ensemble.svm.lambda << '\n';
    out << "svm_epochs = " << c.ensemble.svm.epochs << '\n';
    out << "svm_calibration_fraction = " << c.ensemble.svm.calibration_fraction << '\n';
    out << "rf_trees = " << c.ensemble.forest.n_trees << '\n';
    out << "rf_depth = " << c.ensemble.forest.max_depth << '\n';
    if (c.ensemble.forest.max_features) {
        out << "rf_max_features = " << *c.ensemble.forest.max_features << '\n';
    }
    out << "gbm_rounds = " << c.ensemble.gbm.n_rounds << '\n';
    out << "gbm_depth = " << c.ensemble.gbm.max_depth << '\n';
    out << "gbm_learning_rate = " << c.ensemble.gbm.learning_rate << '\n';
    out << "gbm_lambda = " << c.ensemble.gbm.lambda << '\n';
    out << "alpha = " << c.ensemble.alpha[0] << ',' << c.ensemble.alpha[1] << ',' << c.ensemble.alpha[2] << '\n';
    out << "train_fraction = " << c.fractions.train << '\n';
    out << "validation_fraction = " << c.fractions.validation << '\n';
    out << "test_fraction = " << c.fractions.test << '\n';
    out << "augment_runs = " << c.augment_runs << '\n';
    out << "confidence_weight = " << c.confidence_weight << '\n';
    out << "fingerprint_radius = " << c.fingerprint_radius << '\n';
    out << "fingerprint_bits = " << c.fingerprint_bits << '\n';
    return out.str();
}

}  // namespace toxpipe::pipeline
