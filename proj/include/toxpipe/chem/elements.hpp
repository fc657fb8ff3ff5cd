// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string_view>

namespace toxpipe::chem {

inline constexpr int kMaxAtomicNumber = 86;  // H through Rn

/// Atomic number for a capitalized element symbol ("C", "Cl", "Se"), or nullopt.
std::optional<int> element_from_symbol(std::string_view symbol) noexcept;

std::string_view element_symbol(int atomic_number) noexcept;

/// Default valence states of the organic subset, ascending. Empty for other elements.
std::span<const int> default_valences(int atomic_number) noexcept;

bool in_organic_subset(int atomic_number) noexcept;

/// Elements allowed to carry the aromatic flag: B, C, N, O, P, S, Se, As.
bool aromatic_capable(int atomic_number) noexcept;

}  // namespace toxpipe::chem
