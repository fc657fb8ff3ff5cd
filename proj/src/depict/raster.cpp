// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/depict/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string_view>

#include "toxpipe/chem/rings.hpp"
#include "toxpipe/error.hpp"
#include "toxpipe/random.hpp"

namespace toxpipe::depict {

StructImage::StructImage(int w, int h, Rgb fill) : width(w), height(h) {
    pixels.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = fill[0];
        pixels[i + 1] = fill[1];
        pixels[i + 2] = fill[2];
    }
}

Rgb StructImage::at(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void StructImage::put(int x, int y, Rgb color) {
    const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
    pixels[i] = color[0];
    pixels[i + 1] = color[1];
    pixels[i + 2] = color[2];
}

Rgb element_color(int atomic_number) noexcept {
    switch (atomic_number) {
    case 6: return kBlack;
    case 7: return {0, 0, 255};
    case 8: return {255, 0, 0};
    case 16: return {255, 200, 0};
    case 9:
    case 17:
    case 35:
    case 53: return {0, 170, 0};
    case 15: return {255, 128, 0};
    default: return {255, 0, 255};
    }
}

namespace {

struct Vec {
    double x;
    double y;
};

Vec operator+(Vec a, Vec b) { return {a.x + b.x, a.y + b.y}; }
Vec operator-(Vec a, Vec b) { return {a.x - b.x, a.y - b.y}; }
Vec operator*(Vec a, double s) { return {a.x * s, a.y * s}; }
double dot(Vec a, Vec b) { return a.x * b.x + a.y * b.y; }

void draw_segment(StructImage& img, Vec p0, Vec p1, double half_width, Rgb color) {
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(p0.x, p1.x) - half_width - 1)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(p0.x, p1.x) + half_width + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(p0.y, p1.y) - half_width - 1)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(p0.y, p1.y) + half_width + 1)));
    const Vec d = p1 - p0;
    const double len2 = dot(d, d);
    const double hw2 = half_width * half_width;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const Vec c{x + 0.5, y + 0.5};
            double t = len2 > 0 ? dot(c - p0, d) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const Vec diff = c - (p0 + d * t);
            if (dot(diff, diff) <= hw2) {
                img.put(x, y, color);
            }
        }
    }
}

void draw_disk(StructImage& img, Vec center, double radius, Rgb color) {
    const int x0 = std::max(0, static_cast<int>(std::floor(center.x - radius - 1)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(center.x + radius + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(center.y - radius - 1)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(center.y + radius + 1)));
    const double r2 = radius * radius;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const Vec diff = Vec{x + 0.5, y + 0.5} - center;
            if (dot(diff, diff) <= r2) {
                img.put(x, y, color);
            }
        }
    }
}

}  // namespace

StructImage rasterize(const chem::Molecule& mol, const Layout2D& layout, int width, int height) {
    if (width <= 0 || height <= 0) {
        raise(ErrorCode::DegenerateExtent, "image size must be positive");
    }
    if (mol.empty() || layout.coords.size() != mol.atom_count()) {
        raise(ErrorCode::EmptyMolecule, "layout does not match molecule");
    }
    StructImage img(width, height);
    const double side = std::min(width, height);
    const double line_half = side / 224.0;
    const double max_bond_px = 0.1 * side;

    double min_x = std::numeric_limits<double>::infinity();
    double max_x = -min_x;
    double min_y = min_x;
    double max_y = -min_x;
    for (const auto& p : layout.coords) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    const double ex = max_x - min_x;
    const double ey = max_y - min_y;
    double scale = max_bond_px;
    if (ex > 1e-9) {
        scale = std::min(scale, 0.8 * width / ex);
    }
    if (ey > 1e-9) {
        scale = std::min(scale, 0.8 * height / ey);
    }
    const double cx = (min_x + max_x) / 2.0;
    const double cy = (min_y + max_y) / 2.0;
    std::vector<Vec> px(mol.atom_count());
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = {width / 2.0 + (layout.coords[i].x - cx) * scale, height / 2.0 - (layout.coords[i].y - cy) * scale};
    }

    const auto rings = chem::find_rings(mol);
    auto ring_center_for = [&](std::size_t a, std::size_t b) -> std::optional<Vec> {
        for (const auto& ring : rings) {
            const std::size_t n = ring.size();
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t u = ring[k];
                const std::size_t v = ring[(k + 1) % n];
                if ((u == a && v == b) || (u == b && v == a)) {
                    Vec c{0.0, 0.0};
                    for (std::size_t atom : ring) {
                        c = c + px[atom];
                    }
                    return c * (1.0 / static_cast<double>(n));
                }
            }
        }
        return std::nullopt;
    };

    const double offset = 0.2 * scale;
    for (const auto& bond : mol.bonds()) {
        const Vec p0 = px[bond.a];
        const Vec p1 = px[bond.b];
        const Vec d = p1 - p0;
        const double len = std::sqrt(dot(d, d));
        const Vec normal = len > 0 ? Vec{-d.y / len, d.x / len} : Vec{0.0, 0.0};
        draw_segment(img, p0, p1, line_half, kBlack);
        if (bond.order == chem::BondOrder::Single) {
            continue;
        }
        if (bond.order == chem::BondOrder::Triple) {
            draw_segment(img, p0 + normal * offset, p1 + normal * offset, line_half, kBlack);
            draw_segment(img, p0 - normal * offset, p1 - normal * offset, line_half, kBlack);
            continue;
        }
        // double or aromatic: second, shortened line toward the ring centre, or toward the
        // substituents for acyclic bonds
        const auto center = ring_center_for(bond.a, bond.b);
        Vec side_normal = normal;
        if (center) {
            if (dot(*center - p0, normal) < 0) {
                side_normal = normal * -1.0;
            }
        } else {
            double balance = 0.0;
            for (std::size_t end : {bond.a, bond.b}) {
                for (const auto& nb : mol.neighbors(end)) {
                    if (nb.atom != bond.a && nb.atom != bond.b) {
                        balance += dot(px[nb.atom] - p0, normal);
                    }
                }
            }
            if (balance < 0) {
                side_normal = normal * -1.0;
            }
        }
        const Vec q0 = p0 + d * 0.15 + side_normal * offset;
        const Vec q1 = p1 - d * 0.15 + side_normal * offset;
        draw_segment(img, q0, q1, line_half, kBlack);
    }

    const double disk_radius = 0.3 * scale;
    for (std::size_t i = 0; i < mol.atom_count(); ++i) {
        const int z = mol.atom(i).element;
        if (z != 6) {
            draw_disk(img, px[i], disk_radius, element_color(z));
        } else if (mol.degree(i) == 0) {
            draw_disk(img, px[i], std::max(2.0 * line_half, 0.15 * scale), kBlack);
        }
    }
    return img;
}

StructImage render_smiles(std::string_view smiles, int size) {
    const auto mol = chem::parse(smiles);
    return rasterize(mol, layout2d(mol), size, size);
}

AugmentParams draw_augment(std::uint64_t seed) {
    const std::uint64_t key = splitmix64(seed);
    AugmentParams p;
    p.rotation_deg = -15.0 + 30.0 * to_unit(splitmix64(key + 0));
    p.shift_x = -0.05 + 0.1 * to_unit(splitmix64(key + 1));
    p.shift_y = -0.05 + 0.1 * to_unit(splitmix64(key + 2));
    return p;
}

StructImage apply_augment(const StructImage& img, const AugmentParams& params) {
    StructImage out(img.width, img.height);
    const double theta = params.rotation_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const double cx = img.width / 2.0;
    const double cy = img.height / 2.0;
    const double tx = params.shift_x * img.width;
    const double ty = params.shift_y * img.height;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double qx = x + 0.5 - cx - tx;
            const double qy = y + 0.5 - cy - ty;
            const double sx = cs * qx + sn * qy + cx;
            const double sy = -sn * qx + cs * qy + cy;
            const int ix = static_cast<int>(std::floor(sx));
            const int iy = static_cast<int>(std::floor(sy));
            if (ix >= 0 && iy >= 0 && ix < img.width && iy < img.height) {
                out.put(x, y, img.at(ix, iy));
            }
        }
    }
    return out;
}

StructImage augment(const StructImage& img, std::uint64_t seed) { return apply_augment(img, draw_augment(seed)); }

void write_png(const StructImage& img, const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!file) {
        raise(ErrorCode::Io, "cannot open " + path.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        raise(ErrorCode::Io, "png allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        raise(ErrorCode::Io, "png write failed for " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        auto* row = const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3);
        png_write_row(png, row);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace toxpipe::depict
