// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/depict/layout.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "toxpipe/chem/rings.hpp"
#include "toxpipe/error.hpp"

namespace toxpipe::depict {

namespace {

using chem::Molecule;
using chem::Ring;

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kNone = static_cast<std::size_t>(-1);

Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
Point operator*(Point a, double s) { return {a.x * s, a.y * s}; }
double norm(Point a) { return std::hypot(a.x, a.y); }
Point unit_at(double angle) { return {std::cos(angle), std::sin(angle)}; }
double angle_of(Point a) { return std::atan2(a.y, a.x); }

double wrap_angle(double a) {
    while (a < 0) {
        a += 2 * kPi;
    }
    while (a >= 2 * kPi) {
        a -= 2 * kPi;
    }
    return a;
}

double circumradius(std::size_t n) { return 1.0 / (2.0 * std::sin(kPi / static_cast<double>(n))); }

class Placer {
public:
    Placer(const Molecule& mol, const LayoutOptions& options)
        : mol_(mol),
          options_(options),
          rings_(chem::find_rings(mol)),
          systems_(chem::ring_systems(rings_)),
          coords_(mol.atom_count()),
          placed_(mol.atom_count(), 0),
          turn_(mol.atom_count(), 1),
          system_of_atom_(mol.atom_count(), kNone),
          system_placed_(systems_.size(), 0) {
        for (std::size_t s = 0; s < systems_.size(); ++s) {
            for (std::size_t r : systems_[s]) {
                for (std::size_t a : rings_[r]) {
                    system_of_atom_[a] = s;
                }
            }
        }
    }

    Layout2D run() {
        std::deque<std::size_t> queue;
        for (std::size_t start = 0; start < mol_.atom_count(); ++start) {
            if (placed_[start]) {
                continue;
            }
            // Disconnected graphs are not expected after desalting; lay extra components to the
            // right of what exists.
            Point origin{0.0, 0.0};
            if (start > 0) {
                double max_x = 0.0;
                for (std::size_t i = 0; i < start; ++i) {
                    max_x = std::max(max_x, coords_[i].x);
                }
                origin = {max_x + 2.0, 0.0};
            }
            if (system_of_atom_[start] != kNone) {
                place_system(system_of_atom_[start], start, origin, {1.0, 0.0}, queue);
            } else {
                place_atom(start, origin);
                queue.push_back(start);
            }
            while (!queue.empty()) {
                const std::size_t a = queue.front();
                queue.pop_front();
                expand(a, queue);
            }
        }
        bool crowded = false;
        for (std::size_t i = 0; i < mol_.atom_count() && !crowded; ++i) {
            for (std::size_t j = i + 1; j < mol_.atom_count(); ++j) {
                if (!mol_.bond_between(i, j) && norm(coords_[i] - coords_[j]) < options_.crowding_distance) {
                    crowded = true;
                    break;
                }
            }
        }
        if (needs_refinement_ || crowded) {
            refine();
        }
        return Layout2D{coords_};
    }

private:
    void place_atom(std::size_t a, Point p) {
        coords_[a] = p;
        placed_[a] = 1;
    }

    bool is_linear_center(std::size_t a) const {
        int doubles = 0;
        for (const auto& nb : mol_.neighbors(a)) {
            const auto order = mol_.bond(nb.bond).order;
            if (order == chem::BondOrder::Triple) {
                return true;
            }
            doubles += order == chem::BondOrder::Double ? 1 : 0;
        }
        return doubles >= 2 && mol_.degree(a) == 2;
    }

    // Number of atoms reachable from `child` without passing through `parent`.
    std::size_t subtree_size(std::size_t parent, std::size_t child) const {
        std::vector<std::uint8_t> seen(mol_.atom_count(), 0);
        seen[parent] = 1;
        seen[child] = 1;
        std::vector<std::size_t> stack{child};
        std::size_t count = 0;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            ++count;
            for (const auto& nb : mol_.neighbors(cur)) {
                if (!seen[nb.atom]) {
                    seen[nb.atom] = 1;
                    stack.push_back(nb.atom);
                }
            }
        }
        return count;
    }

    void expand(std::size_t a, std::deque<std::size_t>& queue) {
        std::vector<double> placed_dirs;
        std::vector<std::size_t> fresh;
        for (const auto& nb : mol_.neighbors(a)) {
            if (placed_[nb.atom]) {
                placed_dirs.push_back(angle_of(coords_[nb.atom] - coords_[a]));
            } else {
                fresh.push_back(nb.atom);
            }
        }
        if (fresh.empty()) {
            return;
        }
        const std::size_t k = fresh.size();
        std::vector<double> angles;
        if (placed_dirs.empty()) {
            const double base = -kPi / 6.0;
            if (k == 2) {
                angles = {base, base + 2.0 * kPi / 3.0};
            } else {
                for (std::size_t j = 0; j < k; ++j) {
                    angles.push_back(base + 2.0 * kPi * static_cast<double>(j) / static_cast<double>(k));
                }
            }
        } else if (placed_dirs.size() == 1) {
            const double back = placed_dirs.front();
            if (k == 1) {
                if (is_linear_center(a)) {
                    angles = {back + kPi};
                } else {
                    angles = {back + kPi + turn_[a] * kPi / 3.0};
                }
            } else {
                // Main chain (largest subtree) continues the zigzag; the rest fan out evenly.
                std::stable_sort(fresh.begin(), fresh.end(), [&](std::size_t x, std::size_t y) {
                    return subtree_size(a, x) > subtree_size(a, y);
                });
                if (k == 2) {
                    const double main = back + kPi + turn_[a] * kPi / 3.0;
                    angles = {main, back - turn_[a] * 2.0 * kPi / 3.0};
                } else {
                    for (std::size_t j = 1; j <= k; ++j) {
                        angles.push_back(back + 2.0 * kPi * static_cast<double>(j) / static_cast<double>(k + 1));
                    }
                }
            }
        } else {
            std::vector<double> sorted;
            for (double d : placed_dirs) {
                sorted.push_back(wrap_angle(d));
            }
            std::sort(sorted.begin(), sorted.end());
            double best_gap = -1.0;
            double best_start = 0.0;
            for (std::size_t i = 0; i < sorted.size(); ++i) {
                const double from = sorted[i];
                const double to = i + 1 < sorted.size() ? sorted[i + 1] : sorted.front() + 2.0 * kPi;
                if (to - from > best_gap + 1e-9) {
                    best_gap = to - from;
                    best_start = from;
                }
            }
            for (std::size_t j = 1; j <= k; ++j) {
                angles.push_back(best_start + best_gap * static_cast<double>(j) / static_cast<double>(k + 1));
            }
        }

        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t child = fresh[j];
            if (placed_[child]) {
                continue;  // placed as part of a ring system anchored at an earlier sibling
            }
            const Point dir = unit_at(angles[j]);
            const Point p = coords_[a] + dir;
            if (system_of_atom_[child] != kNone && !system_placed_[system_of_atom_[child]]) {
                place_system(system_of_atom_[child], child, p, dir, queue);
            } else {
                place_atom(child, p);
                turn_[child] = -turn_[a];
                queue.push_back(child);
            }
        }
    }

    // Places ring `ring` as a regular polygon through `anchor` at `p`, centre along `outward`.
    void place_polygon(const Ring& ring, std::size_t anchor, Point p, Point outward) {
        const std::size_t n = ring.size();
        const double radius = circumradius(n);
        const Point center = p + outward * radius;
        const double theta0 = angle_of(p - center);
        const auto pos = static_cast<std::size_t>(std::find(ring.begin(), ring.end(), anchor) - ring.begin());
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t atom = ring[(pos + k) % n];
            if (!placed_[atom]) {
                place_atom(atom, center + unit_at(theta0 + 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n)) * radius);
            }
        }
    }

    Point free_direction(std::size_t atom) const {
        std::vector<double> dirs;
        for (const auto& nb : mol_.neighbors(atom)) {
            if (placed_[nb.atom]) {
                dirs.push_back(wrap_angle(angle_of(coords_[nb.atom] - coords_[atom])));
            }
        }
        if (dirs.empty()) {
            return {1.0, 0.0};
        }
        std::sort(dirs.begin(), dirs.end());
        double best_gap = -1.0;
        double best_mid = 0.0;
        for (std::size_t i = 0; i < dirs.size(); ++i) {
            const double from = dirs[i];
            const double to = i + 1 < dirs.size() ? dirs[i + 1] : dirs.front() + 2.0 * kPi;
            if (to - from > best_gap + 1e-9) {
                best_gap = to - from;
                best_mid = from + (to - from) / 2.0;
            }
        }
        return unit_at(best_mid);
    }

    Point centroid_of_placed_neighbors(std::size_t a, std::size_t b) const {
        Point sum{0.0, 0.0};
        int count = 0;
        for (std::size_t center : {a, b}) {
            for (const auto& nb : mol_.neighbors(center)) {
                if (placed_[nb.atom] && nb.atom != a && nb.atom != b) {
                    sum = sum + coords_[nb.atom];
                    ++count;
                }
            }
        }
        if (count == 0) {
            return (coords_[a] + coords_[b]) * 0.5;
        }
        return sum * (1.0 / count);
    }

    void place_fused(const Ring& ring, std::size_t ea, std::size_t eb) {
        // ea, eb: placed, adjacent in `ring`; the rest of the ring goes on the far side.
        const std::size_t n = ring.size();
        const Point pa = coords_[ea];
        const Point pb = coords_[eb];
        const Point mid = (pa + pb) * 0.5;
        const double side = norm(pb - pa);
        const Point along = (pb - pa) * (1.0 / side);
        const Point normal{-along.y, along.x};
        const double apothem = side / (2.0 * std::tan(kPi / static_cast<double>(n)));
        const Point away = centroid_of_placed_neighbors(ea, eb);
        const Point c1 = mid + normal * apothem;
        const Point c2 = mid - normal * apothem;
        const Point center = norm(c1 - away) >= norm(c2 - away) ? c1 : c2;
        const double radius = side / (2.0 * std::sin(kPi / static_cast<double>(n)));

        // Walk the ring from eb away from ea.
        const auto ib = static_cast<std::size_t>(std::find(ring.begin(), ring.end(), eb) - ring.begin());
        const bool forward = ring[(ib + n - 1) % n] == ea;
        const double theta_b = angle_of(pb - center);
        const double theta_a = angle_of(pa - center);
        const double step = 2.0 * kPi / static_cast<double>(n);
        // direction of rotation that does not pass over ea first
        double delta = wrap_angle(theta_a - theta_b);
        const double sign = std::abs(delta - (2.0 * kPi - step)) < std::abs(delta - step) ? 1.0 : -1.0;
        for (std::size_t k = 1; k < n - 1; ++k) {
            const std::size_t atom = forward ? ring[(ib + k) % n] : ring[(ib + n - k) % n];
            if (!placed_[atom]) {
                place_atom(atom, center + unit_at(theta_b + sign * step * static_cast<double>(k)) * radius);
            }
        }
    }

    // Unplaced run of ring atoms between two placed endpoints: spread along a bulge away from the
    // placed part of the system. Refinement cleans it up.
    void place_bridge(const std::vector<std::size_t>& run, std::size_t e1, std::size_t e2, Point away_from) {
        const Point p1 = coords_[e1];
        const Point p2 = coords_[e2];
        const Point mid = (p1 + p2) * 0.5;
        Point chord = p2 - p1;
        double len = norm(chord);
        Point normal = len > 1e-9 ? Point{-chord.y / len, chord.x / len} : Point{0.0, 1.0};
        if (norm(mid + normal - away_from) < norm(mid - normal - away_from)) {
            normal = normal * -1.0;
        }
        const std::size_t m = run.size();
        const double height = std::max(0.8, 0.5 * static_cast<double>(m));
        for (std::size_t k = 0; k < m; ++k) {
            const double t = static_cast<double>(k + 1) / static_cast<double>(m + 1);
            const Point base = p1 + chord * t;
            place_atom(run[k], base + normal * (height * std::sin(kPi * t)));
        }
    }

    void place_system(std::size_t system, std::size_t anchor, Point p, Point outward, std::deque<std::size_t>& queue) {
        system_placed_[system] = 1;
        const auto& ring_ids = systems_[system];
        if (ring_ids.size() > 2) {
            needs_refinement_ = true;
        }
        std::vector<std::uint8_t> done(ring_ids.size(), 0);
        std::size_t first = 0;
        for (std::size_t i = 0; i < ring_ids.size(); ++i) {
            const Ring& r = rings_[ring_ids[i]];
            if (std::find(r.begin(), r.end(), anchor) != r.end()) {
                first = i;
                break;
            }
        }
        place_polygon(rings_[ring_ids[first]], anchor, p, outward);
        done[first] = 1;

        for (;;) {
            // next ring: most placed atoms, then lowest index
            std::size_t next = kNone;
            std::size_t next_count = 0;
            for (std::size_t i = 0; i < ring_ids.size(); ++i) {
                if (done[i]) {
                    continue;
                }
                const Ring& r = rings_[ring_ids[i]];
                const auto count = static_cast<std::size_t>(
                    std::count_if(r.begin(), r.end(), [&](std::size_t a) { return placed_[a] != 0; }));
                if (count > next_count) {
                    next = i;
                    next_count = count;
                }
            }
            if (next == kNone) {
                break;
            }
            done[next] = 1;
            const Ring& ring = rings_[ring_ids[next]];
            const std::size_t n = ring.size();
            if (next_count == n) {
                continue;
            }
            std::vector<std::size_t> placed_pos;
            for (std::size_t k = 0; k < n; ++k) {
                if (placed_[ring[k]]) {
                    placed_pos.push_back(k);
                }
            }
            if (placed_pos.size() == 1) {
                const std::size_t shared = ring[placed_pos.front()];
                place_polygon(ring, shared, coords_[shared], free_direction(shared));
                continue;
            }
            if (placed_pos.size() == 2) {
                const std::size_t i0 = placed_pos[0];
                const std::size_t i1 = placed_pos[1];
                if (i1 == i0 + 1 || (i0 == 0 && i1 == n - 1)) {
                    place_fused(ring, ring[i0], ring[i1]);
                    continue;
                }
            }
            needs_refinement_ = true;
            // Each maximal unplaced run gets bridged between its placed endpoints.
            Point centroid{0.0, 0.0};
            int count = 0;
            for (std::size_t rid : ring_ids) {
                for (std::size_t a : rings_[rid]) {
                    if (placed_[a]) {
                        centroid = centroid + coords_[a];
                        ++count;
                    }
                }
            }
            centroid = centroid * (1.0 / count);
            const std::size_t start = placed_pos.front();
            std::vector<std::size_t> run;
            std::size_t last_placed = ring[start];
            for (std::size_t step = 1; step <= n; ++step) {
                const std::size_t atom = ring[(start + step) % n];
                if (placed_[atom]) {
                    if (!run.empty()) {
                        place_bridge(run, last_placed, atom, centroid);
                        run.clear();
                    }
                    last_placed = atom;
                } else {
                    run.push_back(atom);
                }
            }
        }
        for (std::size_t rid : ring_ids) {
            for (std::size_t a : rings_[rid]) {
                if (std::find(queue.begin(), queue.end(), a) == queue.end()) {
                    queue.push_back(a);
                }
            }
        }
    }

    void refine() {
        const std::size_t n = mol_.atom_count();
        for (int iter = 0; iter < options_.refine_iterations; ++iter) {
            std::vector<Point> force(n, Point{0.0, 0.0});
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i + 1; j < n; ++j) {
                    Point d = coords_[j] - coords_[i];
                    double dist = norm(d);
                    if (dist < 1e-9) {
                        // deterministic split direction for coincident atoms
                        const double ang = static_cast<double>((i * 7919 + j * 104729) % 360) * kPi / 180.0;
                        d = unit_at(ang) * 1e-3;
                        dist = 1e-3;
                    }
                    const Point u = d * (1.0 / dist);
                    double f = 0.0;
                    if (mol_.bond_between(i, j)) {
                        f = options_.spring * (dist - 1.0);
                    } else {
                        const double clamped = std::max(dist, 0.1);
                        f = -options_.repulsion / (clamped * clamped);
                    }
                    force[i] = force[i] + u * f;
                    force[j] = force[j] - u * f;
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                Point step = force[i];
                const double len = norm(step);
                if (len > options_.max_step) {
                    step = step * (options_.max_step / len);
                }
                coords_[i] = coords_[i] + step;
            }
        }
    }

    const Molecule& mol_;
    const LayoutOptions& options_;
    std::vector<Ring> rings_;
    std::vector<std::vector<std::size_t>> systems_;
    std::vector<Point> coords_;
    std::vector<std::uint8_t> placed_;
    std::vector<int> turn_;
    std::vector<std::size_t> system_of_atom_;
    std::vector<std::uint8_t> system_placed_;
    bool needs_refinement_ = false;
};

}  // namespace

bool layout_is_valid(const chem::Molecule& mol, const Layout2D& layout) {
    if (layout.coords.size() != mol.atom_count()) {
        return false;
    }
    for (const auto& b : mol.bonds()) {
        const double d = norm(layout.coords[b.a] - layout.coords[b.b]);
        if (!(d >= 0.5 && d <= 2.0)) {
            return false;
        }
    }
    for (std::size_t i = 0; i < layout.coords.size(); ++i) {
        for (std::size_t j = i + 1; j < layout.coords.size(); ++j) {
            if (!(norm(layout.coords[i] - layout.coords[j]) > 1e-6)) {
                return false;
            }
        }
    }
    return true;
}

Layout2D layout2d(const chem::Molecule& mol, const LayoutOptions& options) {
    if (mol.empty()) {
        raise(ErrorCode::EmptyMolecule);
    }
    Layout2D layout = Placer(mol, options).run();
    if (!layout_is_valid(mol, layout)) {
        raise(ErrorCode::LayoutOverlap, "placement left coincident atoms or stretched bonds");
    }
    return layout;
}

}  // namespace toxpipe::depict
