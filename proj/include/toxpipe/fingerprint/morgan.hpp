// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "toxpipe/chem/smiles.hpp"

namespace toxpipe::fingerprint {

inline constexpr std::size_t kDefaultBits = 2048;
inline constexpr unsigned kDefaultRadius = 2;

/// boost::hash_combine on 32-bit words: seed ^= v + 0x9e3779b9 + (seed << 6) + (seed >> 2).
constexpr void hash_combine(std::uint32_t& seed, std::uint32_t value) noexcept {
    seed ^= value + 0x9e3779b9U + (seed << 6) + (seed >> 2);
}

/// Fixed-length binary fingerprint.
class Fingerprint {
public:
    Fingerprint() = default;
    /// nbits must be a power of two.
    Fingerprint(std::size_t nbits, unsigned radius);

    std::size_t nbits() const noexcept { return nbits_; }
    unsigned radius() const noexcept { return radius_; }
    bool test(std::size_t bit) const { return (words_.at(bit / 64) >> (bit % 64)) & 1U; }
    void set(std::size_t bit) { words_.at(bit / 64) |= std::uint64_t{1} << (bit % 64); }
    std::size_t popcount() const noexcept;
    const std::vector<std::uint64_t>& words() const noexcept { return words_; }

    /// Bit i is bit (i % 8) of byte i / 8; bytes are emitted in order as two lowercase hex digits.
    std::string to_hex() const;

    bool operator==(const Fingerprint&) const = default;

private:
    std::vector<std::uint64_t> words_;
    std::size_t nbits_ = 0;
    unsigned radius_ = 0;
};

/// Initial ECFP invariant: hash of (element, heavy degree, total H, formal charge, ring flag,
/// aromatic flag).
std::uint32_t atom_invariant(const chem::Molecule& mol, std::size_t atom);

/// Hash code of a bond order inside neighbor tuples.
std::uint32_t bond_code(chem::BondOrder order) noexcept;

struct Environment {
    std::uint32_t id;
    std::size_t atom;
    unsigned radius;
    std::vector<std::uint64_t> bonds;  // bit set over bond indices

    bool operator==(const Environment&) const = default;
};

/// Every (atom, radius) environment for radius 0..=max_radius, before deduplication. Order:
/// radius-major, then atom index.
std::vector<Environment> morgan_environments(const chem::Molecule& mol, unsigned max_radius);

/// Drops environments that repeat a bond set already covered at a lower radius, that did not grow
/// past radius 0, or that share a bond set with a smaller identifier at the same radius.
std::vector<std::uint32_t> deduplicate_environments(const std::vector<Environment>& envs);

/// ECFP-style fingerprint; identifier `id` sets bit id % nbits. Throws EmptyMolecule.
Fingerprint morgan_fingerprint(const chem::Molecule& mol, unsigned radius = kDefaultRadius,
                               std::size_t nbits = kDefaultBits);

/// |a & b| / |a | b|; 1 when both are empty. Throws LengthMismatch.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

}  // namespace toxpipe::fingerprint
