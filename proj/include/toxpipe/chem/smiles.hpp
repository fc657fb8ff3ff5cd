// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace toxpipe::chem {

enum class TokenKind : std::uint8_t {
    AtomOrganic,
    AtomBracket,
    Bond,
    RingClosureDigit,
    BranchOpen,
    BranchClose,
    Dot,
};

struct Token {
    TokenKind kind;
    std::string payload;
    std::size_t position;  // character index of the first payload byte

    bool operator==(const Token&) const = default;
};

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct Atom {
    int element = 6;
    bool aromatic = false;
    int formal_charge = 0;
    std::optional<int> explicit_h;  // set only for bracket atoms
    std::optional<int> isotope;
    std::size_t index = 0;

    bool is_bracket() const noexcept { return explicit_h.has_value(); }
    bool operator==(const Atom&) const = default;
};

struct Bond {
    std::size_t a = 0;
    std::size_t b = 0;
    BondOrder order = BondOrder::Single;

    std::size_t other(std::size_t atom) const noexcept { return atom == a ? b : a; }
    bool operator==(const Bond&) const = default;
};

struct Neighbor {
    std::size_t atom;
    std::size_t bond;

    bool operator==(const Neighbor&) const = default;
};

/// A validated molecular graph. Construction computes adjacency, implicit hydrogens and ring
/// membership, and rejects graphs that break the valence or bond invariants.
class Molecule {
public:
    Molecule() = default;
    /// Throws InvalidBond for self/duplicate/out-of-range bonds and ValenceViolation for
    /// over-valent atoms. Atom indices are rewritten to their position in `atoms`.
    Molecule(std::vector<Atom> atoms, std::vector<Bond> bonds, std::size_t fragment_count = 1);

    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    const std::vector<Bond>& bonds() const noexcept { return bonds_; }
    const Atom& atom(std::size_t i) const { return atoms_.at(i); }
    const Bond& bond(std::size_t i) const { return bonds_.at(i); }
    std::size_t atom_count() const noexcept { return atoms_.size(); }
    std::size_t bond_count() const noexcept { return bonds_.size(); }
    bool empty() const noexcept { return atoms_.empty(); }

    const std::vector<Neighbor>& neighbors(std::size_t i) const { return adjacency_.at(i); }
    std::size_t degree(std::size_t i) const { return adjacency_.at(i).size(); }
    std::optional<std::size_t> bond_between(std::size_t i, std::size_t j) const;

    int implicit_h(std::size_t i) const { return implicit_h_.at(i); }
    const std::vector<int>& implicit_h() const noexcept { return implicit_h_; }
    /// implicit + explicit hydrogens
    int total_h(std::size_t i) const;
    bool in_ring(std::size_t i) const { return ring_membership_.at(i) != 0; }
    const std::vector<std::uint8_t>& ring_membership() const noexcept { return ring_membership_; }
    bool bond_in_ring(std::size_t b) const { return ring_bonds_.at(b) != 0; }

    /// Number of dot-separated fragments in the source SMILES (before desalting).
    std::size_t fragment_count() const noexcept { return fragment_count_; }
    std::size_t heavy_atom_count() const noexcept;

    bool operator==(const Molecule&) const = default;

private:
    std::vector<Atom> atoms_;
    std::vector<Bond> bonds_;
    std::vector<std::vector<Neighbor>> adjacency_;
    std::vector<int> implicit_h_;
    std::vector<std::uint8_t> ring_membership_;
    std::vector<std::uint8_t> ring_bonds_;
    std::size_t fragment_count_ = 1;
};

/// Splits 7-bit SMILES text into tokens. Throws EmptyInput or UnknownCharacter(position).
std::vector<Token> tokenize(std::string_view smiles);

/// Parses SMILES into the largest fragment (by heavy atoms; first wins ties). Stereo marks are
/// accepted and dropped.
Molecule parse(std::string_view smiles);

/// Smallest default valence >= bond_order_sum, minus the sum, floored at zero. Aromatic atoms use
/// only their lowest default valence. `bond_order_sum` already includes the aromatic accounting
/// (1 per aromatic bond plus 1 for the aromatic atom itself).
int implicit_hydrogen_count(const Atom& atom, int bond_order_sum);

/// Bond-order sum used for implicit-H assignment, with the aromatic accounting applied.
int hydrogen_bond_order_sum(const Molecule& mol, std::size_t atom);

int bond_order_value(BondOrder order) noexcept;
char bond_order_symbol(BondOrder order) noexcept;

}  // namespace toxpipe::chem
