// SPDX-License-Identifier: Apache-2.0
//
// Writes a synthetic Tox21-layout CSV whose labels follow simple structural motifs.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "toxpipe/pipeline/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Synthetic Tox21-layout fixture generator"};
    toxpipe::pipeline::SyntheticOptions options;
    std::string out;
    app.add_option("--records", options.records, "Rows to write")->capture_default_str();
    app.add_option("--seed", options.seed, "Generator seed")->capture_default_str();
    app.add_option("--missing-rate", options.missing_rate, "Chance a label cell is empty")->capture_default_str();
    app.add_option("--out", out, "Output file (stdout when omitted)");
    CLI11_PARSE(app, argc, argv);

    const auto csv = toxpipe::pipeline::synthetic_tox21_csv(options);
    if (out.empty()) {
        std::cout << csv;
        return 0;
    }
    std::ofstream f(out, std::ios::binary);
    if (!(f << csv)) {
        std::cerr << "cannot write " << out << '\n';
        return 1;
    }
    return 0;
}
