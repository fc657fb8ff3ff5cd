// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/chem/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <string>

#include "toxpipe/chem/elements.hpp"
#include "toxpipe/error.hpp"

namespace toxpipe::chem {

int bond_order_value(BondOrder order) noexcept {
    switch (order) {
    case BondOrder::Single: return 1;
    case BondOrder::Double: return 2;
    case BondOrder::Triple: return 3;
    case BondOrder::Aromatic: return 1;
    }
    return 1;
}

char bond_order_symbol(BondOrder order) noexcept {
    switch (order) {
    case BondOrder::Single: return '-';
    case BondOrder::Double: return '=';
    case BondOrder::Triple: return '#';
    case BondOrder::Aromatic: return ':';
    }
    return '-';
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace {

bool is_organic_start(char c) {
    switch (c) {
    case 'B':
    case 'C':
    case 'N':
    case 'O':
    case 'P':
    case 'S':
    case 'F':
    case 'I':
    case 'b':
    case 'c':
    case 'n':
    case 'o':
    case 'p':
    case 's': return true;
    default: return false;
    }
}

bool is_bond_char(char c) {
    return c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\';
}

}  // namespace

std::vector<Token> tokenize(std::string_view smiles) {
    if (smiles.empty()) {
        raise(ErrorCode::EmptyInput, "empty SMILES");
    }
    std::vector<Token> tokens;
    std::size_t i = 0;
    const std::size_t n = smiles.size();
    auto unknown = [&](std::size_t pos) {
        raise(ErrorCode::UnknownCharacter, "position " + std::to_string(pos));
    };
    while (i < n) {
        const char c = smiles[i];
        if (static_cast<unsigned char>(c) > 0x7f) {
            unknown(i);
        }
        if (c == '[') {
            const auto close = smiles.find(']', i + 1);
            if (close == std::string_view::npos) {
                unknown(i);
            }
            for (std::size_t k = i + 1; k < close; ++k) {
                const char b = smiles[k];
                if (static_cast<unsigned char>(b) > 0x7f || !(std::isalnum(static_cast<unsigned char>(b)) ||
                                                              b == '@' || b == '+' || b == '-' || b == ':')) {
                    unknown(k);
                }
            }
            tokens.push_back({TokenKind::AtomBracket, std::string(smiles.substr(i, close - i + 1)), i});
            i = close + 1;
        } else if (is_organic_start(c)) {
            std::size_t len = 1;
            if (i + 1 < n && ((c == 'C' && smiles[i + 1] == 'l') || (c == 'B' && smiles[i + 1] == 'r'))) {
                len = 2;
            }
            tokens.push_back({TokenKind::AtomOrganic, std::string(smiles.substr(i, len)), i});
            i += len;
        } else if (is_bond_char(c)) {
            tokens.push_back({TokenKind::Bond, std::string(1, c), i});
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            tokens.push_back({TokenKind::RingClosureDigit, std::string(1, c), i});
            ++i;
        } else if (c == '%') {
            if (i + 2 >= n || !std::isdigit(static_cast<unsigned char>(smiles[i + 1])) ||
                !std::isdigit(static_cast<unsigned char>(smiles[i + 2]))) {
                unknown(i);
            }
            tokens.push_back({TokenKind::RingClosureDigit, std::string(smiles.substr(i, 3)), i});
            i += 3;
        } else if (c == '(') {
            tokens.push_back({TokenKind::BranchOpen, "(", i});
            ++i;
        } else if (c == ')') {
            tokens.push_back({TokenKind::BranchClose, ")", i});
            ++i;
        } else if (c == '.') {
            tokens.push_back({TokenKind::Dot, ".", i});
            ++i;
        } else {
            unknown(i);
        }
    }
    return tokens;
}

// ---------------------------------------------------------------------------
// Atom payloads

namespace {

Atom parse_organic(const Token& tok) {
    Atom atom;
    const std::string& p = tok.payload;
    if (std::islower(static_cast<unsigned char>(p[0]))) {
        std::string upper = p;
        upper[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(upper[0])));
        atom.element = *element_from_symbol(upper);
        atom.aromatic = true;
    } else {
        atom.element = *element_from_symbol(p);
    }
    return atom;
}

Atom parse_bracket(const Token& tok) {
    const std::string_view body = std::string_view(tok.payload).substr(1, tok.payload.size() - 2);
    std::size_t i = 0;
    const std::size_t n = body.size();
    Atom atom;
    auto fail = [&](const std::string& what) {
        raise(ErrorCode::UnknownElement, "'" + tok.payload + "' at position " + std::to_string(tok.position) + ": " + what);
    };
    auto read_int = [&]() {
        int v = 0;
        while (i < n && std::isdigit(static_cast<unsigned char>(body[i]))) {
            v = v * 10 + (body[i] - '0');
            ++i;
        }
        return v;
    };

    if (i < n && std::isdigit(static_cast<unsigned char>(body[i]))) {
        atom.isotope = read_int();
    }
    if (i >= n || !std::isalpha(static_cast<unsigned char>(body[i]))) {
        fail("missing element symbol");
    }
    if (std::islower(static_cast<unsigned char>(body[i]))) {
        // aromatic symbol: se, as, or a single letter
        std::string sym;
        if (i + 1 < n && std::islower(static_cast<unsigned char>(body[i + 1]))) {
            sym = std::string(body.substr(i, 2));
            if (sym == "se" || sym == "as") {
                i += 2;
            } else {
                sym.resize(1);
                ++i;
            }
        } else {
            sym = std::string(1, body[i]);
            ++i;
        }
        sym[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sym[0])));
        const auto z = element_from_symbol(sym);
        if (!z || !aromatic_capable(*z)) {
            fail("element cannot be aromatic");
        }
        atom.element = *z;
        atom.aromatic = true;
    } else {
        std::optional<int> z;
        if (i + 1 < n && std::islower(static_cast<unsigned char>(body[i + 1]))) {
            z = element_from_symbol(body.substr(i, 2));
            if (z) {
                i += 2;
            }
        }
        if (!z) {
            z = element_from_symbol(body.substr(i, 1));
            if (!z) {
                fail("unknown element");
            }
            ++i;
        }
        atom.element = *z;
    }
    // chirality: @, @@, @TH1, @SP2, @OH12 ...
    if (i < n && body[i] == '@') {
        while (i < n && body[i] == '@') {
            ++i;
        }
        while (i < n && std::isupper(static_cast<unsigned char>(body[i])) && body[i] != 'H') {
            ++i;
        }
        read_int();
    }
    int hcount = 0;
    if (i < n && body[i] == 'H') {
        ++i;
        hcount = 1;
        if (i < n && std::isdigit(static_cast<unsigned char>(body[i]))) {
            hcount = read_int();
        }
    }
    atom.explicit_h = hcount;
    if (i < n && (body[i] == '+' || body[i] == '-')) {
        const char sign = body[i];
        const int s = sign == '+' ? 1 : -1;
        ++i;
        if (i < n && std::isdigit(static_cast<unsigned char>(body[i]))) {
            atom.formal_charge = s * read_int();
        } else {
            int count = 1;
            while (i < n && body[i] == sign) {
                ++count;
                ++i;
            }
            atom.formal_charge = s * count;
        }
    }
    if (i < n && body[i] == ':') {
        ++i;
        read_int();  // atom class, ignored
    }
    if (i != n) {
        fail("unexpected trailing characters");
    }
    return atom;
}

int raw_bond_order_sum(const std::vector<Bond>& bonds, const std::vector<std::vector<Neighbor>>& adjacency,
                       std::size_t atom) {
    int sum = 0;
    for (const auto& nb : adjacency[atom]) {
        sum += bond_order_value(bonds[nb.bond].order);
    }
    return sum;
}

}  // namespace

// ---------------------------------------------------------------------------
// Valence model

int implicit_hydrogen_count(const Atom& atom, int bond_order_sum) {
    const auto valences = default_valences(atom.element);
    if (valences.empty()) {
        return 0;
    }
    if (atom.aromatic) {
        return std::max(0, valences.front() - bond_order_sum);
    }
    for (int v : valences) {
        if (v >= bond_order_sum) {
            return v - bond_order_sum;
        }
    }
    return 0;
}

int hydrogen_bond_order_sum(const Molecule& mol, std::size_t atom) {
    int sum = 0;
    for (const auto& nb : mol.neighbors(atom)) {
        sum += bond_order_value(mol.bond(nb.bond).order);
    }
    if (mol.atom(atom).aromatic) {
        sum += 1;
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Molecule

Molecule::Molecule(std::vector<Atom> atoms, std::vector<Bond> bonds, std::size_t fragment_count)
    : atoms_(std::move(atoms)), bonds_(std::move(bonds)), fragment_count_(fragment_count) {
    const std::size_t n = atoms_.size();
    for (std::size_t i = 0; i < n; ++i) {
        atoms_[i].index = i;
        if (atoms_[i].aromatic && !aromatic_capable(atoms_[i].element)) {
            raise(ErrorCode::UnknownElement, "aromatic flag on non-aromatic element at atom " + std::to_string(i));
        }
    }
    adjacency_.assign(n, {});
    for (std::size_t bi = 0; bi < bonds_.size(); ++bi) {
        const Bond& b = bonds_[bi];
        if (b.a >= n || b.b >= n || b.a == b.b) {
            raise(ErrorCode::InvalidBond, "bond " + std::to_string(bi) + " has invalid endpoints");
        }
        for (const auto& nb : adjacency_[b.a]) {
            if (nb.atom == b.b) {
                raise(ErrorCode::InvalidBond, "duplicate bond between atoms " + std::to_string(b.a) + " and " +
                                                  std::to_string(b.b));
            }
        }
        adjacency_[b.a].push_back({b.b, bi});
        adjacency_[b.b].push_back({b.a, bi});
    }

    implicit_h_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const Atom& atom = atoms_[i];
        const int raw = raw_bond_order_sum(bonds_, adjacency_, i);
        const auto valences = default_valences(atom.element);
        if (!atom.is_bracket()) {
            const int h_sum = raw + (atom.aromatic ? 1 : 0);
            implicit_h_[i] = implicit_hydrogen_count(atom, h_sum);
            // The aromatic pi contribution counts against the valence unless a double bond already
            // supplies it (exocyclic C=O on pyridone-type rings).
            bool has_double = false;
            for (const auto& nb : adjacency_[i]) {
                has_double = has_double || bonds_[nb.bond].order == BondOrder::Double;
            }
            const int pi = atom.aromatic && !has_double ? 1 : 0;
            if (!valences.empty() && raw + pi + implicit_h_[i] > valences.back()) {
                raise(ErrorCode::ValenceViolation, "atom " + std::to_string(i));
            }
        } else if (!valences.empty()) {
            const int allowed = valences.back() + std::abs(atom.formal_charge);
            if (raw + *atom.explicit_h > allowed) {
                raise(ErrorCode::ValenceViolation, "atom " + std::to_string(i));
            }
        }
    }

    // Ring bonds are exactly the non-bridge edges (Tarjan low-link, iterative).
    ring_bonds_.assign(bonds_.size(), 0);
    ring_membership_.assign(n, 0);
    std::vector<int> disc(n, -1);
    std::vector<int> low(n, 0);
    std::vector<std::uint8_t> is_bridge(bonds_.size(), 0);
    int timer = 0;
    struct Frame {
        std::size_t atom;
        std::size_t parent_bond;
        std::size_t next;
    };
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    for (std::size_t root = 0; root < n; ++root) {
        if (disc[root] >= 0) {
            continue;
        }
        std::vector<Frame> stack{{root, kNone, 0}};
        disc[root] = low[root] = timer++;
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < adjacency_[f.atom].size()) {
                const Neighbor nb = adjacency_[f.atom][f.next++];
                if (nb.bond == f.parent_bond) {
                    continue;
                }
                if (disc[nb.atom] < 0) {
                    disc[nb.atom] = low[nb.atom] = timer++;
                    stack.push_back({nb.atom, nb.bond, 0});
                } else {
                    low[f.atom] = std::min(low[f.atom], disc[nb.atom]);
                }
            } else {
                const Frame done = f;
                stack.pop_back();
                if (!stack.empty()) {
                    Frame& parent = stack.back();
                    low[parent.atom] = std::min(low[parent.atom], low[done.atom]);
                    if (low[done.atom] > disc[parent.atom]) {
                        is_bridge[done.parent_bond] = 1;
                    }
                }
            }
        }
    }
    for (std::size_t bi = 0; bi < bonds_.size(); ++bi) {
        if (!is_bridge[bi]) {
            ring_bonds_[bi] = 1;
            ring_membership_[bonds_[bi].a] = 1;
            ring_membership_[bonds_[bi].b] = 1;
        }
    }
}

std::optional<std::size_t> Molecule::bond_between(std::size_t i, std::size_t j) const {
    for (const auto& nb : adjacency_.at(i)) {
        if (nb.atom == j) {
            return nb.bond;
        }
    }
    return std::nullopt;
}

int Molecule::total_h(std::size_t i) const { return implicit_h_.at(i) + atoms_.at(i).explicit_h.value_or(0); }

std::size_t Molecule::heavy_atom_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(atoms_.begin(), atoms_.end(), [](const Atom& a) { return a.element != 1; }));
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct PendingBond {
    std::optional<BondOrder> order;  // nullopt: implicit (also for / and \)
    bool present = false;
};

BondOrder resolve_implicit(const Atom& a, const Atom& b) {
    return (a.aromatic && b.aromatic) ? BondOrder::Aromatic : BondOrder::Single;
}

std::optional<BondOrder> bond_from_symbol(char c) {
    switch (c) {
    case '-': return BondOrder::Single;
    case '=': return BondOrder::Double;
    case '#': return BondOrder::Triple;
    case ':': return BondOrder::Aromatic;
    default: return std::nullopt;  // '/' and '\' carry stereo only
    }
}

struct RingOpen {
    std::size_t atom;
    std::optional<BondOrder> order;
};

}  // namespace

Molecule parse(std::string_view smiles) {
    const std::vector<Token> tokens = tokenize(smiles);

    std::vector<Atom> atoms;
    std::vector<Bond> bonds;
    std::optional<std::size_t> prev;
    std::vector<std::size_t> branch_stack;
    std::map<std::string, RingOpen> open_rings;
    PendingBond pending;

    auto add_bond = [&](std::size_t a, std::size_t b, BondOrder order, std::size_t pos) {
        if (a == b) {
            raise(ErrorCode::InvalidBond, "self bond at position " + std::to_string(pos));
        }
        for (const Bond& existing : bonds) {
            if ((existing.a == a && existing.b == b) || (existing.a == b && existing.b == a)) {
                raise(ErrorCode::InvalidBond, "duplicate bond at position " + std::to_string(pos));
            }
        }
        bonds.push_back({a, b, order});
    };

    for (const Token& tok : tokens) {
        switch (tok.kind) {
        case TokenKind::AtomOrganic:
        case TokenKind::AtomBracket: {
            Atom atom = tok.kind == TokenKind::AtomOrganic ? parse_organic(tok) : parse_bracket(tok);
            const std::size_t idx = atoms.size();
            atom.index = idx;
            atoms.push_back(atom);
            if (prev) {
                const BondOrder order = pending.order.value_or(resolve_implicit(atoms[*prev], atoms[idx]));
                add_bond(*prev, idx, order, tok.position);
            } else if (pending.present) {
                raise(ErrorCode::InvalidBond, "bond without preceding atom at position " + std::to_string(tok.position));
            }
            pending = {};
            prev = idx;
            break;
        }
        case TokenKind::Bond:
            if (!prev || pending.present) {
                raise(ErrorCode::InvalidBond, "misplaced bond at position " + std::to_string(tok.position));
            }
            pending.present = true;
            pending.order = bond_from_symbol(tok.payload[0]);
            break;
        case TokenKind::RingClosureDigit: {
            if (!prev) {
                raise(ErrorCode::InvalidBond, "ring closure without atom at position " + std::to_string(tok.position));
            }
            const std::string label = tok.payload[0] == '%' ? tok.payload.substr(1) : tok.payload;
            auto it = open_rings.find(label);
            if (it == open_rings.end()) {
                open_rings.emplace(label, RingOpen{*prev, pending.order});
            } else {
                const RingOpen open = it->second;
                open_rings.erase(it);
                std::optional<BondOrder> order = open.order;
                if (pending.order) {
                    if (order && *order != *pending.order) {
                        raise(ErrorCode::InvalidBond, "conflicting ring bond orders at position " +
                                                          std::to_string(tok.position));
                    }
                    order = pending.order;
                }
                add_bond(open.atom, *prev, order.value_or(resolve_implicit(atoms[open.atom], atoms[*prev])),
                         tok.position);
            }
            pending = {};
            break;
        }
        case TokenKind::BranchOpen:
            if (!prev || pending.present) {
                raise(ErrorCode::UnmatchedBranch, "branch without atom at position " + std::to_string(tok.position));
            }
            branch_stack.push_back(*prev);
            break;
        case TokenKind::BranchClose:
            if (branch_stack.empty() || pending.present) {
                raise(ErrorCode::UnmatchedBranch, "position " + std::to_string(tok.position));
            }
            prev = branch_stack.back();
            branch_stack.pop_back();
            break;
        case TokenKind::Dot:
            if (pending.present || !branch_stack.empty()) {
                raise(ErrorCode::InvalidBond, "dot inside branch or after bond at position " +
                                                  std::to_string(tok.position));
            }
            prev.reset();
            break;
        }
    }
    if (!branch_stack.empty()) {
        raise(ErrorCode::UnmatchedBranch, "unclosed branch");
    }
    if (!open_rings.empty()) {
        raise(ErrorCode::UnclosedRing, open_rings.begin()->first);
    }
    if (pending.present) {
        raise(ErrorCode::InvalidBond, "dangling bond at end of input");
    }
    if (atoms.empty()) {
        raise(ErrorCode::EmptyInput, "no atoms");
    }

    // Connected components by union-find; keep the largest by heavy-atom count.
    std::vector<std::size_t> parent(atoms.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const Bond& b : bonds) {
        parent[find(b.a)] = find(b.b);
    }
    std::vector<std::size_t> roots;
    std::map<std::size_t, std::size_t> heavy;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const std::size_t r = find(i);
        if (std::find(roots.begin(), roots.end(), r) == roots.end()) {
            roots.push_back(r);
        }
        heavy[r] += atoms[i].element != 1 ? 1 : 0;
    }
    if (roots.size() == 1) {
        return Molecule(std::move(atoms), std::move(bonds), 1);
    }
    std::size_t best = roots.front();
    for (std::size_t r : roots) {
        if (heavy[r] > heavy[best]) {
            best = r;
        }
    }
    std::vector<std::size_t> remap(atoms.size(), static_cast<std::size_t>(-1));
    std::vector<Atom> kept_atoms;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (find(i) == best) {
            remap[i] = kept_atoms.size();
            kept_atoms.push_back(atoms[i]);
        }
    }
    std::vector<Bond> kept_bonds;
    for (const Bond& b : bonds) {
        if (find(b.a) == best) {
            kept_bonds.push_back({remap[b.a], remap[b.b], b.order});
        }
    }
    return Molecule(std::move(kept_atoms), std::move(kept_bonds), roots.size());
}

}  // namespace toxpipe::chem
