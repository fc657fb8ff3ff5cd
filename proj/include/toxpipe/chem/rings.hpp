// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "toxpipe/chem/smiles.hpp"

namespace toxpipe::chem {

/// A ring as a cyclic atom sequence: consecutive entries (and last/first) are bonded.
using Ring = std::vector<std::size_t>;

/// Smallest set of smallest rings: for every ring bond the shortest cycle through it is a
/// candidate, then candidates are accepted smallest-first while they stay linearly independent
/// (over GF(2) on bond sets) until the cycle rank is reached. Deterministic given atom order.
std::vector<Ring> find_rings(const Molecule& mol);

/// Groups rings that share at least one atom. Returns lists of ring indices.
std::vector<std::vector<std::size_t>> ring_systems(const std::vector<Ring>& rings);

}  // namespace toxpipe::chem
