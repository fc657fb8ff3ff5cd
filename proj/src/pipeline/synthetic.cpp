// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/pipeline/synthetic.hpp"

#include <array>
#include <sstream>

#include "toxpipe/ensemble/matrix.hpp"
#include "toxpipe/random.hpp"

namespace toxpipe::pipeline {

namespace {

enum class RingKind { Benzene, Pyridine, Cyclohexane, Thiophene };

struct Substituent {
    const char* smiles;
    double weight;
};

// Aromatic-ring substituents. "O" on an aromatic carbon is a phenol.
constexpr std::array<Substituent, 12> kSubstituents{{
    {"C", 3.0},
    {"CC", 1.5},
    {"O", 1.2},
    {"N", 1.0},
    {"OC", 1.0},
    {"F", 1.0},
    {"Cl", 1.0},
    {"Br", 0.6},
    {"C(=O)O", 0.8},
    {"[N+](=O)[O-]", 0.7},
    {"SC", 0.5},
    {"C#N", 0.6},
}};

const char* pick_substituent(Rng& rng) {
    double total = 0.0;
    for (const auto& s : kSubstituents) {
        total += s.weight;
    }
    double u = rng.uniform() * total;
    for (const auto& s : kSubstituents) {
        u -= s.weight;
        if (u < 0.0) {
            return s.smiles;
        }
    }
    return kSubstituents.back().smiles;
}

void note(Motifs& m, std::string_view sub, bool aromatic_host) {
    if (sub == "Cl" || sub == "Br") {
        m.heavy_halogen = true;
    }
    if (sub == "Br") {
        m.bromine = true;
    }
    if (sub == "[N+](=O)[O-]") {
        m.nitro = true;
    }
    if (sub == "O" && aromatic_host) {
        m.phenol = true;
    }
    if (sub == "C(=O)O") {
        m.acid = true;
    }
    if (sub == "SC") {
        m.sulfur = true;
    }
}

RingKind pick_ring(Rng& rng) {
    const double u = rng.uniform();
    if (u < 0.55) {
        return RingKind::Benzene;
    }
    if (u < 0.72) {
        return RingKind::Pyridine;
    }
    if (u < 0.88) {
        return RingKind::Cyclohexane;
    }
    return RingKind::Thiophene;
}

// Ring atoms with a closure digit on the first and last; substituents go on positions before the
// closing atom. `tail` (a linker plus a second ring) hangs off one free position.
std::string ring_smiles(Rng& rng, int digit, bool attached, Motifs& m, const std::string& tail) {
    const RingKind kind = pick_ring(rng);
    std::vector<std::string> atoms;
    bool aromatic = true;
    switch (kind) {
    case RingKind::Benzene: atoms.assign(6, "c"); break;
    case RingKind::Pyridine:
        atoms.assign(6, "c");
        atoms[3] = "n";
        m.aza_aromatic = true;
        break;
    case RingKind::Cyclohexane:
        atoms.assign(6, "C");
        aromatic = false;
        break;
    case RingKind::Thiophene:
        atoms.assign(5, "c");
        atoms[3] = "s";
        m.sulfur = true;
        break;
    }
    ++m.rings;

    // position 0 of an appended ring already carries the linker bond
    std::vector<std::size_t> free;
    for (std::size_t i = attached ? 1 : 0; i + 1 < atoms.size(); ++i) {
        if (atoms[i] == "c" || atoms[i] == "C") {
            free.push_back(i);
        }
    }
    rng.shuffle(free.begin(), free.end());
    std::vector<std::string> branch(atoms.size());
    std::size_t next = 0;
    if (!tail.empty()) {
        branch[free[next++]] = tail;
    }
    const std::size_t subs = rng.below(3) + (tail.empty() ? 1 : 0);
    for (std::size_t k = 0; k < subs && next < free.size(); ++k) {
        const std::string sub = pick_substituent(rng);
        note(m, sub, aromatic);
        branch[free[next++]] = sub;
    }

    std::string out;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        out += atoms[i];
        if (i == 0 || i + 1 == atoms.size()) {
            out += std::to_string(digit);
        }
        if (!branch[i].empty()) {
            out += "(" + branch[i] + ")";
        }
    }
    return out;
}

// Up to six heavy atoms: a carbon chain with at most one branch per carbon.
std::string small_smiles(Rng& rng, Motifs& m) {
    static constexpr std::array<const char*, 7> kBranches{"O", "N", "Cl", "Br", "F", "=O", "S"};
    const std::size_t carbons = 1 + rng.below(4);
    std::size_t heavy = carbons;
    std::string out;
    for (std::size_t i = 0; i < carbons; ++i) {
        out += "C";
        if (heavy < 6 && rng.uniform() < 0.5) {
            const std::string b = kBranches[rng.below(kBranches.size())];
            if (b == "=O" && carbons == 1) {
                continue;
            }
            out += "(" + b + ")";
            ++heavy;
            note(m, b, false);
            m.sulfur = m.sulfur || b == "S";
        }
    }
    return out;
}

}  // namespace

SyntheticMolecule synthetic_molecule(std::uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0x6d6f6cULL));
    SyntheticMolecule out;
    if (rng.uniform() < 0.125) {
        out.smiles = small_smiles(rng, out.motifs);
        return out;
    }
    std::string tail;
    if (rng.uniform() < 0.45) {
        static constexpr std::array<const char*, 5> kLinkers{"", "C", "CC", "C(=O)N", "O"};
        tail = std::string(kLinkers[rng.below(kLinkers.size())]) + ring_smiles(rng, 2, true, out.motifs, "");
    }
    out.smiles = ring_smiles(rng, 1, false, out.motifs, tail);
    return out;
}

LabelVector synthetic_labels(const Motifs& m, std::uint64_t seed, const SyntheticOptions& options) {
    const std::array<bool, kAssayCount> hit{
        m.heavy_halogen,                      // NR-AR
        m.heavy_halogen && m.rings >= 1,      // NR-AR-LBD
        m.aza_aromatic || m.nitro,            // NR-AhR
        m.phenol,                             // NR-ER
        m.phenol && m.rings >= 2,             // NR-ER-LBD
        m.acid,                               // NR-PPAR-gamma
        m.aza_aromatic,                       // NR-Aromatase
        m.nitro || m.sulfur,                  // SR-ARE
        m.bromine,                            // SR-ATAD5
        m.sulfur,                             // SR-HSE
        m.heavy_halogen && m.rings >= 2,      // SR-MMP
        m.nitro,                              // SR-p53
    };
    Rng rng(splitmix64(seed ^ 0x6c6162ULL));
    LabelVector labels{};
    bool any = false;
    for (std::size_t a = 0; a < kAssayCount; ++a) {
        const double p = hit[a] ? options.hit_rate : options.background_rate;
        labels[a] = rng.uniform() < p ? 1 : 0;
        if (rng.uniform() < options.missing_rate) {
            labels[a] = ensemble::kMissing;
        } else {
            any = true;
        }
    }
    if (!any) {
        labels[0] = hit[0] ? 1 : 0;
    }
    return labels;
}

std::string synthetic_tox21_csv(const SyntheticOptions& options) {
    std::ostringstream out;
    for (std::size_t a = 0; a < kAssayCount; ++a) {
        out << kAssays[a] << ',';
    }
    out << "mol_id,smiles\n";
    for (std::size_t i = 0; i < options.records; ++i) {
        const std::uint64_t key = splitmix64(options.seed + i);
        const auto mol = synthetic_molecule(key);
        const auto labels = synthetic_labels(mol.motifs, key, options);
        for (std::size_t a = 0; a < kAssayCount; ++a) {
            if (labels[a] != ensemble::kMissing) {
                out << static_cast<int>(labels[a]);
            }
            out << ',';
        }
        out << "SYN" << (i + 1) << ',' << mol.smiles << '\n';
    }
    return out.str();
}

}  // namespace toxpipe::pipeline
