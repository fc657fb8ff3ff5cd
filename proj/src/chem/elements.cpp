// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/chem/elements.hpp"

#include <array>

namespace toxpipe::chem {

namespace {

constexpr std::array<std::string_view, kMaxAtomicNumber + 1> kSymbols = {
    "",   "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si",
    "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu",
    "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru",
    "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr",
    "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",
    "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn"};

constexpr std::array<int, 1> kValB{3};
constexpr std::array<int, 1> kValC{4};
constexpr std::array<int, 2> kValN{3, 5};
constexpr std::array<int, 1> kValO{2};
constexpr std::array<int, 2> kValP{3, 5};
constexpr std::array<int, 3> kValS{2, 4, 6};
constexpr std::array<int, 1> kValHalogen{1};

}  // namespace

std::optional<int> element_from_symbol(std::string_view symbol) noexcept {
    for (int z = 1; z <= kMaxAtomicNumber; ++z) {
        if (kSymbols[static_cast<std::size_t>(z)] == symbol) {
            return z;
        }
    }
    return std::nullopt;
}

std::string_view element_symbol(int atomic_number) noexcept {
    if (atomic_number < 1 || atomic_number > kMaxAtomicNumber) {
        return "?";
    }
    return kSymbols[static_cast<std::size_t>(atomic_number)];
}

std::span<const int> default_valences(int atomic_number) noexcept {
    switch (atomic_number) {
    case 5: return kValB;
    case 6: return kValC;
    case 7: return kValN;
    case 8: return kValO;
    case 15: return kValP;
    case 16: return kValS;
    case 9:
    case 17:
    case 35:
    case 53: return kValHalogen;
    default: return {};
    }
}

bool in_organic_subset(int atomic_number) noexcept { return !default_valences(atomic_number).empty(); }

bool aromatic_capable(int atomic_number) noexcept {
    switch (atomic_number) {
    case 5:
    case 6:
    case 7:
    case 8:
    case 15:
    case 16:
    case 33:
    case 34: return true;
    default: return false;
    }
}

}  // namespace toxpipe::chem
