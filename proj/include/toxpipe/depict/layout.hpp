// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "toxpipe/chem/smiles.hpp"

namespace toxpipe::depict {

struct Point {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point&) const = default;
};

/// Per-atom 2D coordinates in bond-length units.
struct Layout2D {
    std::vector<Point> coords;

    bool operator==(const Layout2D&) const = default;
};

struct LayoutOptions {
    int refine_iterations = 100;
    double repulsion = 0.1;      // coefficient of the 1/d^2 push between non-bonded atoms
    double spring = 0.5;         // pull toward unit bond length
    double max_step = 0.2;       // per-iteration displacement clamp
    double crowding_distance = 0.35;  // non-bonded pairs closer than this trigger refinement
};

/// Greedy BFS placement from atom 0: rings as regular polygons, fused rings on the far side of
/// their shared edge, spiro rings opposite the shared atom's substituents, chains in a 120 degree
/// zigzag (straight through sp centres). Systems of three or more rings, bridged systems and
/// crowded placements get a force-directed refinement pass.
///
/// Throws EmptyMolecule, or LayoutOverlap if atoms still coincide (or a bond leaves [0.5, 2.0])
/// after refinement.
Layout2D layout2d(const chem::Molecule& mol, const LayoutOptions& options = {});

/// Checks the Layout2D invariants: bonded distances in [0.5, 2.0], no coincident atoms.
bool layout_is_valid(const chem::Molecule& mol, const Layout2D& layout);

}  // namespace toxpipe::depict
