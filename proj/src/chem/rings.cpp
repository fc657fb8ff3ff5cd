// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/chem/rings.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <set>

namespace toxpipe::chem {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

// Shortest path from `from` to `to` avoiding `banned_bond`, restricted to ring bonds.
std::vector<std::size_t> shortest_path(const Molecule& mol, std::size_t from, std::size_t to, std::size_t banned_bond) {
    std::vector<std::size_t> prev(mol.atom_count(), kNone);
    std::vector<std::uint8_t> seen(mol.atom_count(), 0);
    std::deque<std::size_t> queue{from};
    seen[from] = 1;
    while (!queue.empty()) {
        const std::size_t cur = queue.front();
        queue.pop_front();
        if (cur == to) {
            break;
        }
        for (const auto& nb : mol.neighbors(cur)) {
            if (nb.bond == banned_bond || !mol.bond_in_ring(nb.bond) || seen[nb.atom]) {
                continue;
            }
            seen[nb.atom] = 1;
            prev[nb.atom] = cur;
            queue.push_back(nb.atom);
        }
    }
    std::vector<std::size_t> path;
    if (!seen[to]) {
        return path;
    }
    for (std::size_t cur = to; cur != kNone; cur = prev[cur]) {
        path.push_back(cur);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

using BitRow = std::vector<std::uint64_t>;

BitRow bond_bits(const Molecule& mol, const Ring& ring) {
    BitRow row((mol.bond_count() + 63) / 64, 0);
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const auto b = *mol.bond_between(ring[i], ring[(i + 1) % ring.size()]);
        row[b / 64] |= std::uint64_t{1} << (b % 64);
    }
    return row;
}

}  // namespace

std::vector<Ring> find_rings(const Molecule& mol) {
    std::vector<Ring> candidates;
    std::set<std::vector<std::size_t>> seen_sets;
    for (std::size_t bi = 0; bi < mol.bond_count(); ++bi) {
        if (!mol.bond_in_ring(bi)) {
            continue;
        }
        const Bond& b = mol.bond(bi);
        Ring path = shortest_path(mol, b.b, b.a, bi);
        if (path.size() < 3) {
            continue;
        }
        std::vector<std::size_t> key = path;
        std::sort(key.begin(), key.end());
        if (seen_sets.insert(key).second) {
            candidates.push_back(std::move(path));
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Ring& x, const Ring& y) { return x.size() < y.size(); });

    // cycle rank = ring bonds - ring atoms + ring-connected components
    std::size_t ring_bond_count = 0;
    std::vector<std::size_t> parent(mol.atom_count());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (std::size_t bi = 0; bi < mol.bond_count(); ++bi) {
        if (mol.bond_in_ring(bi)) {
            ++ring_bond_count;
            parent[find(mol.bond(bi).a)] = find(mol.bond(bi).b);
        }
    }
    std::size_t ring_atoms = 0;
    std::set<std::size_t> components;
    for (std::size_t i = 0; i < mol.atom_count(); ++i) {
        if (mol.in_ring(i)) {
            ++ring_atoms;
            components.insert(find(i));
        }
    }
    const std::size_t rank = ring_bond_count + components.size() - ring_atoms;

    // Greedy GF(2) basis selection.
    std::vector<BitRow> basis;
    std::vector<std::size_t> pivots;
    std::vector<Ring> rings;
    for (const Ring& cand : candidates) {
        if (rings.size() == rank) {
            break;
        }
        BitRow row = bond_bits(mol, cand);
        for (std::size_t k = 0; k < basis.size(); ++k) {
            const std::size_t p = pivots[k];
            if (row[p / 64] >> (p % 64) & 1U) {
                for (std::size_t w = 0; w < row.size(); ++w) {
                    row[w] ^= basis[k][w];
                }
            }
        }
        std::size_t pivot = kNone;
        for (std::size_t w = 0; w < row.size() && pivot == kNone; ++w) {
            if (row[w] != 0) {
                pivot = w * 64 + static_cast<std::size_t>(__builtin_ctzll(row[w]));
            }
        }
        if (pivot == kNone) {
            continue;
        }
        basis.push_back(std::move(row));
        pivots.push_back(pivot);
        rings.push_back(cand);
    }
    return rings;
}

std::vector<std::vector<std::size_t>> ring_systems(const std::vector<Ring>& rings) {
    std::vector<std::size_t> parent(rings.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (std::size_t i = 0; i < rings.size(); ++i) {
        for (std::size_t j = i + 1; j < rings.size(); ++j) {
            const bool shares = std::any_of(rings[i].begin(), rings[i].end(), [&](std::size_t a) {
                return std::find(rings[j].begin(), rings[j].end(), a) != rings[j].end();
            });
            if (shares) {
                parent[find(i)] = find(j);
            }
        }
    }
    std::vector<std::vector<std::size_t>> systems;
    std::vector<std::size_t> root_of;
    for (std::size_t i = 0; i < rings.size(); ++i) {
        const std::size_t r = find(i);
        auto it = std::find(root_of.begin(), root_of.end(), r);
        if (it == root_of.end()) {
            root_of.push_back(r);
            systems.push_back({i});
        } else {
            systems[static_cast<std::size_t>(it - root_of.begin())].push_back(i);
        }
    }
    return systems;
}

}  // namespace toxpipe::chem
