// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "toxpipe/chem/smiles.hpp"
#include "toxpipe/depict/layout.hpp"

namespace toxpipe::depict {

inline constexpr int kDefaultImageSize = 224;

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kWhite{255, 255, 255};
inline constexpr Rgb kBlack{0, 0, 0};

/// Row-major H x W x 3 RGB bytes.
struct StructImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    StructImage() = default;
    StructImage(int w, int h, Rgb fill = kWhite);

    Rgb at(int x, int y) const;
    void put(int x, int y, Rgb color);
    bool operator==(const StructImage&) const = default;
};

/// Disk colour for a heteroatom; carbons have none and are drawn as line vertices only.
Rgb element_color(int atomic_number) noexcept;

/// Draws the molecule centred, scaled to leave a 10% margin (bond length capped at a tenth of
/// the image side), with 2 px lines per 224 px of width, parallel lines for multiple bonds and
/// palette disks for heteroatoms. Pixel-centre coverage only, so output is bit-exact.
StructImage rasterize(const chem::Molecule& mol, const Layout2D& layout, int width = kDefaultImageSize,
                      int height = kDefaultImageSize);

/// parse -> layout2d -> rasterize
StructImage render_smiles(std::string_view smiles, int size = kDefaultImageSize);

struct AugmentParams {
    double rotation_deg = 0.0;
    double shift_x = 0.0;  // fraction of width
    double shift_y = 0.0;  // fraction of height
};

/// Rotation in [-15, 15] degrees and shifts in [-0.05, 0.05], drawn from a counter-based
/// generator keyed by `seed`.
AugmentParams draw_augment(std::uint64_t seed);

/// Rotates about the image centre then shifts; nearest-neighbour inverse mapping, white fill.
StructImage apply_augment(const StructImage& img, const AugmentParams& params);

StructImage augment(const StructImage& img, std::uint64_t seed);

/// Lossless PNG. Throws Io on failure.
void write_png(const StructImage& img, const std::filesystem::path& path);

}  // namespace toxpipe::depict
