// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/fingerprint/morgan.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <set>

#include "toxpipe/error.hpp"

namespace toxpipe::fingerprint {

Fingerprint::Fingerprint(std::size_t nbits, unsigned radius)
    : words_((nbits + 63) / 64, 0), nbits_(nbits), radius_(radius) {
    if (nbits == 0 || !std::has_single_bit(nbits)) {
        raise(ErrorCode::LengthMismatch, "fingerprint length must be a power of two, got " + std::to_string(nbits));
    }
}

std::size_t Fingerprint::popcount() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) {
        n += static_cast<std::size_t>(std::popcount(w));
    }
    return n;
}

std::string Fingerprint::to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    const std::size_t nbytes = (nbits_ + 7) / 8;
    out.reserve(nbytes * 2);
    for (std::size_t byte = 0; byte < nbytes; ++byte) {
        const auto v = static_cast<unsigned>((words_[byte / 8] >> ((byte % 8) * 8)) & 0xffU);
        out.push_back(kDigits[v >> 4]);
        out.push_back(kDigits[v & 0xfU]);
    }
    return out;
}

std::uint32_t bond_code(chem::BondOrder order) noexcept {
    switch (order) {
    case chem::BondOrder::Single: return 1;
    case chem::BondOrder::Double: return 2;
    case chem::BondOrder::Triple: return 3;
    case chem::BondOrder::Aromatic: return 12;
    }
    return 0;
}

std::uint32_t atom_invariant(const chem::Molecule& mol, std::size_t atom) {
    const chem::Atom& a = mol.atom(atom);
    std::uint32_t seed = 0;
    hash_combine(seed, static_cast<std::uint32_t>(a.element));
    hash_combine(seed, static_cast<std::uint32_t>(mol.degree(atom)));
    hash_combine(seed, static_cast<std::uint32_t>(mol.total_h(atom)));
    hash_combine(seed, static_cast<std::uint32_t>(a.formal_charge));
    hash_combine(seed, mol.in_ring(atom) ? 1U : 0U);
    hash_combine(seed, a.aromatic ? 1U : 0U);
    return seed;
}

std::vector<Environment> morgan_environments(const chem::Molecule& mol, unsigned max_radius) {
    const std::size_t n = mol.atom_count();
    const std::size_t words = (mol.bond_count() + 63) / 64;
    std::vector<std::uint32_t> ids(n);
    std::vector<std::vector<std::uint64_t>> bondsets(n, std::vector<std::uint64_t>(words, 0));
    std::vector<Environment> envs;
    envs.reserve(n * (max_radius + 1));
    for (std::size_t a = 0; a < n; ++a) {
        ids[a] = atom_invariant(mol, a);
        envs.push_back({ids[a], a, 0, bondsets[a]});
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> neighborhood;
    for (unsigned layer = 0; layer < max_radius; ++layer) {
        std::vector<std::uint32_t> next_ids(n);
        std::vector<std::vector<std::uint64_t>> next_sets = bondsets;
        for (std::size_t a = 0; a < n; ++a) {
            neighborhood.clear();
            for (const auto& nb : mol.neighbors(a)) {
                neighborhood.emplace_back(bond_code(mol.bond(nb.bond).order), ids[nb.atom]);
                next_sets[a][nb.bond / 64] |= std::uint64_t{1} << (nb.bond % 64);
                for (std::size_t w = 0; w < words; ++w) {
                    next_sets[a][w] |= bondsets[nb.atom][w];
                }
            }
            std::sort(neighborhood.begin(), neighborhood.end());
            std::uint32_t code = layer;
            hash_combine(code, ids[a]);
            for (const auto& [bond, id] : neighborhood) {
                hash_combine(code, bond);
                hash_combine(code, id);
            }
            next_ids[a] = code;
        }
        ids = std::move(next_ids);
        bondsets = std::move(next_sets);
        for (std::size_t a = 0; a < n; ++a) {
            envs.push_back({ids[a], a, layer + 1, bondsets[a]});
        }
    }
    return envs;
}

std::vector<std::uint32_t> deduplicate_environments(const std::vector<Environment>& envs) {
    std::vector<std::uint32_t> kept;
    std::set<std::vector<std::uint64_t>> seen;
    unsigned max_radius = 0;
    for (const auto& e : envs) {
        max_radius = std::max(max_radius, e.radius);
    }
    for (unsigned r = 0; r <= max_radius; ++r) {
        std::map<std::vector<std::uint64_t>, std::uint32_t> best;
        for (const auto& e : envs) {
            if (e.radius != r) {
                continue;
            }
            if (r == 0) {
                kept.push_back(e.id);
                continue;
            }
            const bool empty = std::all_of(e.bonds.begin(), e.bonds.end(), [](auto w) { return w == 0; });
            if (empty || seen.count(e.bonds) != 0) {
                continue;
            }
            auto [it, inserted] = best.emplace(e.bonds, e.id);
            if (!inserted) {
                it->second = std::min(it->second, e.id);
            }
        }
        for (const auto& [bonds, id] : best) {
            seen.insert(bonds);
            kept.push_back(id);
        }
    }
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    return kept;
}

Fingerprint morgan_fingerprint(const chem::Molecule& mol, unsigned radius, std::size_t nbits) {
    if (mol.empty()) {
        raise(ErrorCode::EmptyMolecule);
    }
    Fingerprint fp(nbits, radius);
    for (std::uint32_t id : deduplicate_environments(morgan_environments(mol, radius))) {
        fp.set(id % nbits);
    }
    return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
    if (a.nbits() != b.nbits()) {
        raise(ErrorCode::LengthMismatch, std::to_string(a.nbits()) + " vs " + std::to_string(b.nbits()));
    }
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t w = 0; w < a.words().size(); ++w) {
        inter += static_cast<std::size_t>(std::popcount(a.words()[w] & b.words()[w]));
        uni += static_cast<std::size_t>(std::popcount(a.words()[w] | b.words()[w]));
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace toxpipe::fingerprint
