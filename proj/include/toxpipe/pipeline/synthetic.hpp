// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "toxpipe/pipeline/dataset.hpp"

namespace toxpipe::pipeline {

/// Structural motifs that drive the synthetic assay labels.
struct Motifs {
    bool heavy_halogen = false;  // Cl, Br or I
    bool bromine = false;
    bool nitro = false;
    bool aza_aromatic = false;  // pyridine-type nitrogen
    bool phenol = false;
    bool acid = false;
    bool sulfur = false;
    int rings = 0;
};

struct SyntheticMolecule {
    std::string smiles;
    Motifs motifs;
};

/// Random drug-like SMILES: one or two ring cores with substituents, or (about one in eight)
/// a small acyclic molecule of at most six heavy atoms.
SyntheticMolecule synthetic_molecule(std::uint64_t seed);

struct SyntheticOptions {
    std::size_t records = 200;
    std::uint64_t seed = 0;
    double missing_rate = 0.15;
    /// Chance that a motif-bearing molecule is labelled active, and the background rate.
    double hit_rate = 0.9;
    double background_rate = 0.04;
};

/// Labels in panel order, ensemble::kMissing for missing cells.
LabelVector synthetic_labels(const Motifs& motifs, std::uint64_t seed, const SyntheticOptions& options);

/// A Tox21-layout CSV (assay columns in panel order, then `mol_id,smiles`).
std::string synthetic_tox21_csv(const SyntheticOptions& options);

}  // namespace toxpipe::pipeline
