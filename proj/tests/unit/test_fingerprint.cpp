// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "support/oracles.hpp"
#include "toxpipe/error.hpp"
#include "toxpipe/fingerprint/morgan.hpp"
#include "toxpipe/pipeline/synthetic.hpp"

using namespace toxpipe;
using fingerprint::morgan_fingerprint;

namespace {

fingerprint::Fingerprint fp(std::string_view smiles, unsigned radius = 2, std::size_t nbits = 2048) {
    return morgan_fingerprint(chem::parse(smiles), radius, nbits);
}

}  // namespace

TEST_CASE("atom invariants") {
    const auto ethane = chem::parse("CC");
    CHECK(fingerprint::atom_invariant(ethane, 0) == fingerprint::atom_invariant(ethane, 1));
    const auto methanol = chem::parse("CO");
    CHECK(fingerprint::atom_invariant(methanol, 0) != fingerprint::atom_invariant(methanol, 1));
    const auto mcp = chem::parse("C1CC1C");
    CHECK(fingerprint::atom_invariant(mcp, 2) != fingerprint::atom_invariant(mcp, 3));
}

TEST_CASE("invariant hash is fixed across builds") {
    // element 6, degree 0, 4 H, charge 0, no ring, not aromatic
    std::uint32_t seed = 0;
    for (std::uint32_t v : {6U, 0U, 4U, 0U, 0U, 0U}) {
        seed ^= v + 0x9e3779b9U + (seed << 6) + (seed >> 2);
    }
    CHECK(fingerprint::atom_invariant(chem::parse("C"), 0) == seed);
}

TEST_CASE("morgan: small cases") {
    CHECK(fp("C").popcount() == 1);
    CHECK(fp("CC", 1).popcount() <= 2);
    CHECK(fp("CC", 1).popcount() >= 1);
    CHECK(fp("OCC") == fp("CCO"));
    CHECK(fp("CCO").nbits() == 2048);
    CHECK_THROWS_AS(morgan_fingerprint(chem::Molecule{}, 2, 2048), Error);
    CHECK_THROWS_AS(fp("CC", 2, 1000), Error);
}

TEST_CASE("morgan: popcount positive and ids nest across radii") {
    for (std::uint64_t k = 0; k < 60; ++k) {
        const auto m = chem::parse(pipeline::synthetic_molecule(k).smiles);
        CHECK(morgan_fingerprint(m, 2, 1024).popcount() >= 1);
        const auto r1 = fingerprint::morgan_environments(m, 1);
        const auto r2 = fingerprint::morgan_environments(m, 2);
        REQUIRE(r2.size() >= r1.size());
        for (std::size_t i = 0; i < r1.size(); ++i) {
            CHECK(r1[i] == r2[i]);
        }
    }
}

TEST_CASE("morgan: environments match the neighbourhood oracle") {
    const char* small[] = {"C", "CC", "CCO", "C1CC1", "CC(=O)O", "c1ccccc1", "ClC(Cl)Cl", "C#N", "OC1CC1", "CC(C)(C)C"};
    for (const char* s : small) {
        const auto m = chem::parse(s);
        for (unsigned r = 0; r <= 3; ++r) {
            const auto envs = fingerprint::morgan_environments(m, r);
            for (const auto& e : envs) {
                CHECK(e.id == oracle::environment_id(m, e.atom, e.radius));
                std::vector<std::size_t> bonds;
                for (std::size_t b = 0; b < m.bond_count(); ++b) {
                    if ((e.bonds[b / 64] >> (b % 64)) & 1U) {
                        bonds.push_back(b);
                    }
                }
                CHECK(bonds == oracle::environment_bonds(m, e.atom, e.radius));
            }
            CHECK(fingerprint::deduplicate_environments(envs) == oracle::morgan_ids(m, r));
        }
    }
}

TEST_CASE("morgan: atom order does not matter") {
    Rng rng(11);
    for (std::uint64_t k = 0; k < 30; ++k) {
        const auto m = chem::parse(pipeline::synthetic_molecule(k).smiles);
        const auto reference = morgan_fingerprint(m);
        for (int rep = 0; rep < 3; ++rep) {
            const auto rewritten = oracle::random_smiles(m, rng);
            CHECK_MESSAGE(morgan_fingerprint(chem::parse(rewritten)) == reference, rewritten);
        }
    }
}

TEST_CASE("hex encoding") {
    fingerprint::Fingerprint f(16, 2);
    f.set(0);
    f.set(9);
    f.set(15);
    CHECK(f.to_hex() == "0182");
}

TEST_CASE("tanimoto") {
    const auto benzene = fp("c1ccccc1");
    const auto toluene = fp("Cc1ccccc1");
    CHECK(fingerprint::tanimoto(benzene, benzene) == 1.0);
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t b = 0; b < 2048; ++b) {
        inter += benzene.test(b) && toluene.test(b);
        uni += benzene.test(b) || toluene.test(b);
    }
    const double t = fingerprint::tanimoto(benzene, toluene);
    CHECK(t == doctest::Approx(static_cast<double>(inter) / static_cast<double>(uni)));
    CHECK(t > 0.0);
    CHECK(t < 1.0);

    fingerprint::Fingerprint a(64, 2);
    fingerprint::Fingerprint b(64, 2);
    CHECK(fingerprint::tanimoto(a, b) == 1.0);
    a.set(1);
    b.set(2);
    CHECK(fingerprint::tanimoto(a, b) == 0.0);
    CHECK_THROWS_AS(fingerprint::tanimoto(a, fingerprint::Fingerprint(128, 2)), Error);
}
