// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <string>

#include "support/oracles.hpp"
#include "toxpipe/chem/elements.hpp"
#include "toxpipe/chem/rings.hpp"
#include "toxpipe/chem/smiles.hpp"
#include "toxpipe/error.hpp"
#include "toxpipe/pipeline/synthetic.hpp"

using namespace toxpipe;
using chem::BondOrder;
using chem::TokenKind;

namespace {

ErrorCode code_of(std::string_view smiles) {
    try {
        chem::parse(smiles);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a parse error for " << smiles);
    return ErrorCode::Io;
}

std::string joined(const std::vector<chem::Token>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        out += t.payload;
    }
    return out;
}

}  // namespace

TEST_CASE("tokenize: single atom, ring, branch") {
    auto t = chem::tokenize("C");
    REQUIRE(t.size() == 1);
    CHECK(t[0].kind == TokenKind::AtomOrganic);
    CHECK(t[0].payload == "C");

    t = chem::tokenize("c1ccccc1");
    REQUIRE(t.size() == 8);
    CHECK(t[1].kind == TokenKind::RingClosureDigit);
    CHECK(t[7].kind == TokenKind::RingClosureDigit);
    CHECK(t[1].payload == "1");
    for (std::size_t i : {0, 2, 3, 4, 5, 6}) {
        CHECK(t[i].kind == TokenKind::AtomOrganic);
        CHECK(t[i].payload == "c");
    }

    t = chem::tokenize("C(=O)O");
    REQUIRE(t.size() == 6);
    const TokenKind kinds[] = {TokenKind::AtomOrganic, TokenKind::BranchOpen, TokenKind::Bond,
                               TokenKind::AtomOrganic, TokenKind::BranchClose, TokenKind::AtomOrganic};
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(t[i].kind == kinds[i]);
    }
    CHECK(t[2].payload == "=");
}

TEST_CASE("tokenize: two-digit closures, brackets, dots and positions") {
    const auto t = chem::tokenize("C%12CC%12.[Na+]");
    CHECK(t[1].kind == TokenKind::RingClosureDigit);
    CHECK(t[1].payload == "%12");
    CHECK(t.back().kind == TokenKind::AtomBracket);
    CHECK(t.back().payload == "[Na+]");
    for (std::size_t i = 1; i < t.size(); ++i) {
        CHECK(t[i].position > t[i - 1].position);
    }
}

TEST_CASE("tokenize: payloads rebuild the input") {
    for (const char* s : {"CC(=O)Oc1ccccc1C(=O)O", "C[C@H](N)C(=O)O", "F/C=C/F", "[13CH4]", "C%10CC%10",
                          "[NH4+].[Cl-]", "c1ccc2ccccc2c1"}) {
        CHECK(joined(chem::tokenize(s)) == s);
    }
    for (std::uint64_t k = 0; k < 100; ++k) {
        const auto mol = pipeline::synthetic_molecule(k);
        CHECK(joined(chem::tokenize(mol.smiles)) == mol.smiles);
    }
}

TEST_CASE("tokenize: errors") {
    CHECK_THROWS_AS(chem::tokenize(""), Error);
    try {
        chem::tokenize("CC&C");
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownCharacter);
        CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
    CHECK(code_of("") == ErrorCode::EmptyInput);
}

TEST_CASE("parse: methane, cyclopropane, acetic acid") {
    auto m = chem::parse("C");
    CHECK(m.atom_count() == 1);
    CHECK(m.bond_count() == 0);
    CHECK(m.implicit_h() == std::vector<int>{4});

    m = chem::parse("C1CC1");
    CHECK(m.atom_count() == 3);
    CHECK(m.bond_count() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(m.in_ring(i));
    }

    m = chem::parse("CC(=O)O");
    REQUIRE(m.atom_count() == 4);
    REQUIRE(m.bond_count() == 3);
    CHECK(m.bond(0).order == BondOrder::Single);
    CHECK(m.bond(1).order == BondOrder::Double);
    CHECK(m.bond(2).order == BondOrder::Single);
    CHECK(m.implicit_h() == std::vector<int>{3, 0, 0, 1});
}

TEST_CASE("parse: aromatic accounting gives benzene and pyridine the usual hydrogens") {
    const auto benzene = chem::parse("c1ccccc1");
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(benzene.implicit_h(i) == 1);
        CHECK(benzene.atom(i).aromatic);
    }
    const auto pyridine = chem::parse("c1ccncc1");
    CHECK(pyridine.implicit_h(3) == 0);
    const auto pyrrole = chem::parse("c1cc[nH]c1");
    CHECK(pyrrole.total_h(3) == 1);
    CHECK(chem::parse("Cn1cccc1").implicit_h(1) == 0);
    const auto pyridone = chem::parse("O=c1cc[nH]cc1");
    CHECK(pyridone.implicit_h(1) == 0);
}

TEST_CASE("parse: brackets carry charge, hydrogens and isotope") {
    const auto m = chem::parse("[13CH3][N+](=O)[O-]");
    CHECK(m.atom(0).isotope == 13);
    CHECK(m.atom(0).explicit_h == 3);
    CHECK(m.atom(1).formal_charge == 1);
    CHECK(m.atom(3).formal_charge == -1);
    CHECK(m.implicit_h(1) == 0);
}

TEST_CASE("parse: stereo marks are dropped") {
    CHECK(chem::parse("F/C=C/F") == chem::parse("FC=CF"));
    CHECK(chem::parse("N[C@@H](C)C(=O)O").atom_count() == chem::parse("NC(C)C(=O)O").atom_count());
}

TEST_CASE("parse: desalting keeps the largest fragment") {
    const auto m = chem::parse("[Na+].CC(=O)[O-]");
    CHECK(m.fragment_count() == 2);
    CHECK(m.atom_count() == 4);
    CHECK(m.atom(0).element == 6);
}

TEST_CASE("parse: errors") {
    CHECK(code_of("C1CC") == ErrorCode::UnclosedRing);
    CHECK(code_of("C(C") == ErrorCode::UnmatchedBranch);
    CHECK(code_of("CC)C") == ErrorCode::UnmatchedBranch);
    CHECK(code_of("C(C)(C)(C)(C)C") == ErrorCode::ValenceViolation);
    CHECK(code_of("O=O=O") == ErrorCode::ValenceViolation);
    CHECK(code_of("[Xx]") == ErrorCode::UnknownElement);
    CHECK(code_of("c1(C)(C)ccccc1") == ErrorCode::ValenceViolation);
    CHECK(code_of("C&") == ErrorCode::UnknownCharacter);
    CHECK(code_of("C11") == ErrorCode::InvalidBond);
    try {
        chem::parse("C1CC");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find('1') != std::string::npos);
    }
}

TEST_CASE("implicit_hydrogen_count") {
    chem::Atom c;
    c.element = 6;
    chem::Atom n;
    n.element = 7;
    chem::Atom o;
    o.element = 8;
    CHECK(chem::implicit_hydrogen_count(c, 0) == 4);
    CHECK(chem::implicit_hydrogen_count(n, 1) == 2);
    CHECK(chem::implicit_hydrogen_count(o, 2) == 0);
    CHECK(chem::implicit_hydrogen_count(o, 3) == 0);
}

TEST_CASE("parse: valence soundness and determinism on generated molecules") {
    for (std::uint64_t k = 0; k < 200; ++k) {
        const auto smiles = pipeline::synthetic_molecule(k).smiles;
        const auto m = chem::parse(smiles);
        CHECK(m == chem::parse(smiles));
        for (std::size_t i = 0; i < m.atom_count(); ++i) {
            const auto& a = m.atom(i);
            const auto valences = chem::default_valences(a.element);
            if (a.is_bracket() || valences.empty()) {
                continue;
            }
            CHECK(chem::hydrogen_bond_order_sum(m, i) + m.implicit_h(i) <= valences.back());
        }
    }
}

TEST_CASE("rings: smallest set on fused and spiro systems") {
    CHECK(chem::find_rings(chem::parse("c1ccc2ccccc2c1")).size() == 2);
    CHECK(chem::find_rings(chem::parse("C12(CCC1)CCC2")).size() == 2);
    CHECK(chem::find_rings(chem::parse("CCO")).empty());
    const auto rings = chem::find_rings(chem::parse("c1ccc2ccccc2c1"));
    CHECK(chem::ring_systems(rings).size() == 1);
}

TEST_CASE("random traversal writer round-trips through the parser") {
    Rng rng(5);
    for (std::uint64_t k = 0; k < 50; ++k) {
        const auto m = chem::parse(pipeline::synthetic_molecule(k).smiles);
        const auto rewritten = oracle::random_smiles(m, rng);
        const auto again = chem::parse(rewritten);
        CHECK(again.atom_count() == m.atom_count());
        CHECK(again.bond_count() == m.bond_count());
    }
}
