// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/pipeline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "toxpipe/random.hpp"

namespace toxpipe::pipeline {

std::optional<std::size_t> assay_index(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kAssays.size(); ++i) {
        if (kAssays[i] == name) {
            return i;
        }
    }
    return std::nullopt;
}

std::size_t DatasetRecord::labelled_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(labels.begin(), labels.end(), [](std::int8_t v) { return v != ensemble::kMissing; }));
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

/// Comma-separated fields; double quotes group commas, "" is a literal quote.
std::optional<std::vector<std::string>> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back(trim(field));
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted) {
        return std::nullopt;
    }
    out.emplace_back(trim(field));
    return out;
}

std::optional<std::int8_t> parse_label(std::string_view cell) {
    if (cell.empty()) {
        return ensemble::kMissing;
    }
    if (cell == "0" || cell == "0.0") {
        return std::int8_t{0};
    }
    if (cell == "1" || cell == "1.0") {
        return std::int8_t{1};
    }
    return std::nullopt;
}

}  // namespace

Dataset read_tox21_csv(std::istream& in) {
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            auto fields = split_fields(line);
            if (!fields) {
                raise(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": unterminated quote");
            }
            header = std::move(*fields);
            break;
        }
    }
    if (!header.empty() && header.front().starts_with("\xEF\xBB\xBF")) {
        header.front().erase(0, 3);
    }
    std::optional<std::size_t> smiles_col;
    std::array<std::optional<std::size_t>, kAssayCount> assay_col{};
    for (std::size_t c = 0; c < header.size(); ++c) {
        std::string lower = header[c];
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (lower == "smiles" && !smiles_col) {
            smiles_col = c;
        } else if (auto a = assay_index(header[c]); a && !assay_col[*a]) {
            assay_col[*a] = c;
            ds.assay_present[*a] = true;
        }
    }
    if (!smiles_col) {
        raise(ErrorCode::MissingSmilesColumn, "header has no smiles column");
    }
    if (std::none_of(ds.assay_present.begin(), ds.assay_present.end(), [](bool b) { return b; })) {
        raise(ErrorCode::NoAssayColumns, "header names none of the 12 assays");
    }

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_fields(line);
        if (!fields || fields->size() != header.size()) {
            raise(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected " +
                                               std::to_string(header.size()) + " fields");
        }
        ++ds.rows_in;
        DatasetRecord rec;
        rec.line = line_no;
        rec.smiles = (*fields)[*smiles_col];
        rec.labels.fill(ensemble::kMissing);
        for (std::size_t a = 0; a < kAssayCount; ++a) {
            if (!assay_col[a]) {
                continue;
            }
            const auto v = parse_label((*fields)[*assay_col[a]]);
            if (!v) {
                raise(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": label '" +
                                                   (*fields)[*assay_col[a]] + "' for " + std::string(kAssays[a]));
            }
            rec.labels[a] = *v;
        }
        try {
            rec.molecule = chem::parse(rec.smiles);
        } catch (const Error& e) {
            ds.quarantine.push_back({line_no, rec.smiles, e.code(), e.what()});
            continue;
        }
        if (rec.labelled_count() == 0) {
            ds.quarantine.push_back({line_no, rec.smiles, ErrorCode::MalformedRow, "no assay label present"});
            continue;
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

Dataset load_tox21_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorCode::Io, "cannot open " + path.string());
    }
    return read_tox21_csv(in);
}

ensemble::LabelMatrix label_matrix(const std::vector<DatasetRecord>& records) {
    ensemble::LabelMatrix y(records.size(), kAssayCount);
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (std::size_t a = 0; a < kAssayCount; ++a) {
            y(i, a) = records[i].labels[a];
        }
    }
    return y;
}

std::vector<DatasetRecord> select_records(const std::vector<DatasetRecord>& records,
                                          const std::vector<std::size_t>& indices) {
    std::vector<DatasetRecord> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        out.push_back(records.at(i));
    }
    return out;
}

std::uint64_t dataset_hash(const std::vector<DatasetRecord>& records) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char b) { h = (h ^ b) * 0x100000001b3ULL; };
    for (const auto& r : records) {
        for (char c : r.smiles) {
            mix(static_cast<unsigned char>(c));
        }
        mix(0);
        for (auto v : r.labels) {
            mix(static_cast<unsigned char>(v));
        }
    }
    return h;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& f) {
    const std::array<double, 3> frac{f.train, f.validation, f.test};
    double total = 0.0;
    for (double v : frac) {
        if (!(v >= 0.0)) {
            raise(ErrorCode::BadFractions, "fractions must be non-negative");
        }
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        raise(ErrorCode::BadFractions, "fractions sum to " + std::to_string(total));
    }
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainder{};
    std::size_t used = 0;
    for (std::size_t j = 0; j < 3; ++j) {
        const double exact = frac[j] * static_cast<double>(n);
        // guard against 0.8 * 10 landing on 7.999...
        sizes[j] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[j] = exact - static_cast<double>(sizes[j]);
        used += sizes[j];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; used < n; ++k, ++used) {
        ++sizes[order[k % 3]];
    }
    return sizes;
}

Split stratified_split(const ensemble::LabelMatrix& labels, std::uint64_t seed, const SplitFractions& fractions) {
    const std::size_t n = labels.rows;
    const auto sizes = split_sizes(n, fractions);
    const std::array<double, 3> frac{fractions.train, fractions.validation, fractions.test};
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());

    std::array<std::size_t, 3> room = sizes;
    std::vector<std::array<double, 3>> wanted(labels.cols);
    for (std::size_t l = 0; l < labels.cols; ++l) {
        double positives = 0;
        for (std::size_t i = 0; i < n; ++i) {
            positives += labels(i, l) == 1 ? 1 : 0;
        }
        for (std::size_t j = 0; j < 3; ++j) {
            wanted[l][j] = frac[j] * positives;
        }
    }
    std::vector<int> part(n, -1);
    std::array<std::vector<std::size_t>, 3> out;

    auto assign = [&](std::size_t i, std::size_t j) {
        part[i] = static_cast<int>(j);
        out[j].push_back(i);
        --room[j];
        for (std::size_t l = 0; l < labels.cols; ++l) {
            if (labels(i, l) == 1) {
                wanted[l][j] -= 1.0;
            }
        }
    };

    while (true) {
        // rarest label among unassigned examples
        std::optional<std::size_t> pick;
        std::size_t pick_count = 0;
        for (std::size_t l = 0; l < labels.cols; ++l) {
            std::size_t c = 0;
            for (std::size_t i = 0; i < n; ++i) {
                c += (part[i] < 0 && labels(i, l) == 1) ? 1 : 0;
            }
            if (c > 0 && (!pick || c < pick_count)) {
                pick = l;
                pick_count = c;
            }
        }
        if (!pick) {
            break;
        }
        const std::size_t l = *pick;
        for (std::size_t i : order) {
            if (part[i] >= 0 || labels(i, l) != 1) {
                continue;
            }
            std::optional<std::size_t> best;
            for (std::size_t j = 0; j < 3; ++j) {
                if (room[j] == 0) {
                    continue;
                }
                if (!best || wanted[l][j] > wanted[l][*best] ||
                    (wanted[l][j] == wanted[l][*best] && room[j] > room[*best])) {
                    best = j;
                }
            }
            assign(i, *best);
        }
    }
    for (std::size_t i : order) {
        if (part[i] >= 0) {
            continue;
        }
        std::size_t best = 0;
        for (std::size_t j = 1; j < 3; ++j) {
            if (room[j] > room[best]) {
                best = j;
            }
        }
        assign(i, best);
    }
    for (auto& v : out) {
        std::sort(v.begin(), v.end());
    }
    return {std::move(out[0]), std::move(out[1]), std::move(out[2])};
}

}  // namespace toxpipe::pipeline
