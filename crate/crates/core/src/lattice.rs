//! Lattice geometries, snake-path orderings, and fixture files.
//!
//! Two geometries are supported: the rotated surface code on an
//! `Lx × Ly` grid of data qubits, and the ruby lattice (aspect ratio `√3`,
//! six atoms per cell) on a cylinder that is periodic along `y` and open
//! along `x`. Both carry a snake-path ordering mapping lattice sites onto a
//! 1-D chain; all MPS/MPO site indices refer to that ordering.
//!
//! A [`LatticeSpec`] serializes to JSON so the exact geometry a run used —
//! including the boundary-field membership, which the reference material
//! only fixes pictorially — is pinned by fixture files under `fixtures/`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LATTICE_FIXTURE_VERSION: u32 = 1;

/// Ruby-lattice spacing (nearest-neighbor distance) in lattice units.
pub const RUBY_SPACING: f64 = 1.0;
/// Interaction cutoff: third-nearest neighbors, `r ≤ 2a`.
pub const RUBY_CUTOFF: f64 = 2.0 * RUBY_SPACING;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    SurfaceCodeSquare,
    RubyCylinder,
}

/// One lattice site in snake order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSite {
    pub x: f64,
    pub y: f64,
    /// Basis index within a unit cell (always 0 for the surface code).
    pub sublattice: usize,
}

/// Stabilizer descriptor for the surface code, in snake-site indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilizerSpec {
    /// `"X"` or `"Z"`.
    pub kind: String,
    pub sites: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub version: u32,
    pub geometry: Geometry,
    pub lx: usize,
    pub ly: usize,
    pub n: usize,
    /// Site data indexed by snake position.
    pub sites: Vec<LatticeSite>,
    /// Surface code only: plaquette and boundary stabilizers.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stabilizers: Vec<StabilizerSpec>,
    /// Ruby only: unordered pairs within the interaction cutoff.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub neighbor_pairs: Vec<(usize, usize)>,
    /// Ruby only: open-boundary sites carrying the compensating field.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundary_sites: Vec<usize>,
    /// Ruby only: Z-string diagnostics (site lists under snake order).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub logical_string: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fm_open_string: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fm_closed_loop: Vec<usize>,
}

impl LatticeSpec {
    /// Rotated surface code: data qubits on an `Lx × Ly` grid (`n = Lx·Ly`),
    /// `n−1` stabilizers alternating X/Z in a checkerboard with weight-2
    /// boundary plaquettes. The snake path is a column-major serpentine.
    pub fn surface_code(lx: usize, ly: usize) -> Result<Self> {
        if lx < 2 || ly < 2 {
            return Err(Error::invalid_argument(
                "surface code needs lx >= 2 and ly >= 2",
            ));
        }
        let n = lx * ly;
        let site_of = |x: usize, y: usize| -> usize {
            let yy = if x % 2 == 0 { y } else { ly - 1 - y };
            x * ly + yy
        };
        let mut sites = vec![
            LatticeSite {
                x: 0.0,
                y: 0.0,
                sublattice: 0
            };
            n
        ];
        for x in 0..lx {
            for y in 0..ly {
                sites[site_of(x, y)] = LatticeSite {
                    x: x as f64,
                    y: y as f64,
                    sublattice: 0,
                };
            }
        }

        // Checkerboard coloring: plaquette (px, py) is Z-type when px+py is
        // even. Bulk plaquettes touch four qubits; boundary half-plaquettes
        // (top/bottom rows X-type, left/right columns Z-type) touch two.
        let mut stabilizers = Vec::new();
        for px in 0..lx - 1 {
            for py in 0..ly - 1 {
                let kind = if (px + py) % 2 == 0 { "Z" } else { "X" };
                stabilizers.push(StabilizerSpec {
                    kind: kind.to_string(),
                    sites: vec![
                        site_of(px, py),
                        site_of(px + 1, py),
                        site_of(px, py + 1),
                        site_of(px + 1, py + 1),
                    ],
                });
            }
        }
        for px in (0..lx.saturating_sub(1)).step_by(2) {
            // Top row (y = 0): X-type halves at even px.
            stabilizers.push(StabilizerSpec {
                kind: "X".to_string(),
                sites: vec![site_of(px, 0), site_of(px + 1, 0)],
            });
        }
        for px in 0..lx.saturating_sub(1) {
            // Bottom row: X-type halves at px ≡ ly (mod 2).
            if px % 2 == ly % 2 {
                stabilizers.push(StabilizerSpec {
                    kind: "X".to_string(),
                    sites: vec![site_of(px, ly - 1), site_of(px + 1, ly - 1)],
                });
            }
        }
        for py in 0..ly.saturating_sub(1) {
            // Left column: Z-type halves at odd py.
            if py % 2 == 1 {
                stabilizers.push(StabilizerSpec {
                    kind: "Z".to_string(),
                    sites: vec![site_of(0, py), site_of(0, py + 1)],
                });
            }
        }
        for py in 0..ly.saturating_sub(1) {
            // Right column: Z-type halves at py ≡ lx−1 (mod 2).
            if py % 2 == (lx - 1) % 2 {
                stabilizers.push(StabilizerSpec {
                    kind: "Z".to_string(),
                    sites: vec![site_of(lx - 1, py), site_of(lx - 1, py + 1)],
                });
            }
        }
        debug_assert_eq!(stabilizers.len(), n - 1);

        Ok(LatticeSpec {
            version: LATTICE_FIXTURE_VERSION,
            geometry: Geometry::SurfaceCodeSquare,
            lx,
            ly,
            n,
            sites,
            stabilizers,
            neighbor_pairs: Vec::new(),
            boundary_sites: Vec::new(),
            logical_string: Vec::new(),
            fm_open_string: Vec::new(),
            fm_closed_loop: Vec::new(),
        })
    }

    /// Ruby lattice (six atoms per cell) on a cylinder: periodic along the
    /// second cell vector, open along the first, `n = 6·Lx·Ly`. The snake
    /// path orders cells column by column (serpentine in `y`) and keeps the
    /// six atoms of each cell contiguous.
    pub fn ruby_cylinder(lx: usize, ly: usize) -> Result<Self> {
        if lx < 1 || ly < 1 {
            return Err(Error::invalid_argument("ruby cylinder needs lx, ly >= 1"));
        }
        let sqrt3 = 3f64.sqrt();
        let a1 = [4.0, 0.0];
        let a2 = [2.0, 2.0 * sqrt3];
        // Up-triangle and down-triangle atoms of one cell, in units of the
        // nearest-neighbor spacing a = 1.
        let basis = [
            [1.5, 0.5 * sqrt3],
            [2.5, 0.5 * sqrt3],
            [2.0, sqrt3],
            [4.0, sqrt3],
            [3.5, 1.5 * sqrt3],
            [4.5, 1.5 * sqrt3],
        ];
        let n = 6 * lx * ly;
        let mut sites = Vec::with_capacity(n);
        for cx in 0..lx {
            for step in 0..ly {
                let cy = if cx % 2 == 0 { step } else { ly - 1 - step };
                for (b, off) in basis.iter().enumerate() {
                    sites.push(LatticeSite {
                        x: cx as f64 * a1[0] + cy as f64 * a2[0] + off[0],
                        y: cx as f64 * a1[1] + cy as f64 * a2[1] + off[1],
                        sublattice: b,
                    });
                }
            }
        }

        // Minimum-image distance on the cylinder (wrap along a2 · ly).
        let wrap = [a2[0] * ly as f64, a2[1] * ly as f64];
        let dist = |i: usize, j: usize| -> f64 {
            let mut best = f64::INFINITY;
            for k in -1i32..=1 {
                let dx = sites[i].x - sites[j].x + k as f64 * wrap[0];
                let dy = sites[i].y - sites[j].y + k as f64 * wrap[1];
                best = best.min((dx * dx + dy * dy).sqrt());
            }
            best
        };

        let mut neighbor_pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if dist(i, j) <= RUBY_CUTOFF + 1e-9 {
                    neighbor_pairs.push((i, j));
                }
            }
        }

        // Boundary region: every site whose coordination is truncated by the
        // open x-boundary, i.e. fewer in-range neighbors than the bulk.
        let mut counts = vec![0usize; n];
        for &(i, j) in &neighbor_pairs {
            counts[i] += 1;
            counts[j] += 1;
        }
        let bulk = counts.iter().copied().max().unwrap_or(0);
        let boundary_sites: Vec<usize> = (0..n).filter(|&i| counts[i] < bulk).collect();

        // Z-string diagnostics: the logical string winds around the cylinder
        // through the first cell column (two atoms per cell); the FM open
        // string is the first half of that loop, renormalized by the closed
        // loop it came from.
        let cell_site = |cx: usize, step: usize, b: usize| -> usize {
            (cx * ly + step) * 6 + b
        };
        let mut logical_string = Vec::new();
        for step in 0..ly {
            logical_string.push(cell_site(0, step, 2));
            logical_string.push(cell_site(0, step, 4));
        }
        let half = (logical_string.len() / 2).max(1);
        let fm_open_string = logical_string[..half].to_vec();
        let fm_closed_loop = logical_string.clone();

        Ok(LatticeSpec {
            version: LATTICE_FIXTURE_VERSION,
            geometry: Geometry::RubyCylinder,
            lx,
            ly,
            n,
            sites,
            stabilizers: Vec::new(),
            neighbor_pairs,
            boundary_sites,
            logical_string,
            fm_open_string,
            fm_closed_loop,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lattice spec serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Format(e.to_string()))
    }

    /// Minimum-image distance between two sites (cylinder wrap applied for
    /// ruby geometry).
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (dx, dy) = (self.sites[i].x - self.sites[j].x, self.sites[i].y - self.sites[j].y);
        match self.geometry {
            Geometry::SurfaceCodeSquare => (dx * dx + dy * dy).sqrt(),
            Geometry::RubyCylinder => {
                let sqrt3 = 3f64.sqrt();
                let wrap = [2.0 * self.ly as f64, 2.0 * sqrt3 * self.ly as f64];
                let mut best = f64::INFINITY;
                for k in -1i32..=1 {
                    let ddx = dx + k as f64 * wrap[0];
                    let ddy = dy + k as f64 * wrap[1];
                    best = best.min((ddx * ddx + ddy * ddy).sqrt());
                }
                best
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_code_3x3_has_expected_counts() {
        let spec = LatticeSpec::surface_code(3, 3).unwrap();
        assert_eq!(spec.n, 9);
        assert_eq!(spec.stabilizers.len(), 8);
        let x_count = spec.stabilizers.iter().filter(|s| s.kind == "X").count();
        let z_count = spec.stabilizers.iter().filter(|s| s.kind == "Z").count();
        assert_eq!(x_count, 4);
        assert_eq!(z_count, 4);
    }

    #[test]
    fn surface_code_snake_is_bijective() {
        for (lx, ly) in [(2, 2), (3, 3), (4, 3), (15, 3)] {
            let spec = LatticeSpec::surface_code(lx, ly).unwrap();
            assert_eq!(spec.sites.len(), lx * ly);
            let mut seen = std::collections::HashSet::new();
            for s in &spec.sites {
                assert!(seen.insert((s.x as usize, s.y as usize)));
            }
            assert_eq!(spec.stabilizers.len(), spec.n - 1);
        }
    }

    #[test]
    fn surface_code_stabilizers_commute_pairwise() {
        let spec = LatticeSpec::surface_code(3, 3).unwrap();
        for a in &spec.stabilizers {
            for b in &spec.stabilizers {
                if a.kind == b.kind {
                    continue;
                }
                let overlap = a.sites.iter().filter(|s| b.sites.contains(s)).count();
                assert_eq!(overlap % 2, 0, "stabilizers {a:?} and {b:?} anticommute");
            }
        }
    }

    #[test]
    fn surface_code_rejects_small_lattices() {
        assert!(LatticeSpec::surface_code(1, 3).is_err());
    }

    #[test]
    fn ruby_cell_count_and_snake() {
        let spec = LatticeSpec::ruby_cylinder(1, 2).unwrap();
        assert_eq!(spec.n, 12);
        let spec = LatticeSpec::ruby_cylinder(4, 2).unwrap();
        assert_eq!(spec.n, 48);
        // Cells are contiguous in snake order.
        for cell in 0..8 {
            for b in 0..6 {
                assert_eq!(spec.sites[cell * 6 + b].sublattice, b);
            }
        }
    }

    #[test]
    fn ruby_bulk_coordination_is_six_and_translation_invariant() {
        let spec = LatticeSpec::ruby_cylinder(3, 2).unwrap();
        let mut counts = vec![0usize; spec.n];
        for &(i, j) in &spec.neighbor_pairs {
            counts[i] += 1;
            counts[j] += 1;
        }
        assert_eq!(counts.iter().copied().max().unwrap(), 6);
        // y-translation symmetry: equivalent sites in the same cell column
        // have identical coordination.
        for cx in 0..3 {
            for b in 0..6 {
                let c0 = counts[(cx * 2) * 6 + b];
                let c1 = counts[(cx * 2 + 1) * 6 + b];
                assert_eq!(c0, c1, "column {cx} sublattice {b}");
            }
        }
        // Middle column is fully coordinated; boundary set is exactly the
        // deficient sites.
        for b in 0..6 {
            assert_eq!(counts[(2 * 1) * 6 + b], 6);
        }
        for &site in &spec.boundary_sites {
            assert!(counts[site] < 6);
        }
    }

    #[test]
    fn ruby_neighbor_distances_take_three_values() {
        let spec = LatticeSpec::ruby_cylinder(2, 2).unwrap();
        for &(i, j) in &spec.neighbor_pairs {
            let d = spec.distance(i, j);
            let near = [1.0, 3f64.sqrt(), 2.0]
                .iter()
                .any(|&r| (d - r).abs() < 1e-9);
            assert!(near, "unexpected neighbor distance {d}");
        }
    }

    #[test]
    fn json_round_trip() {
        let spec = LatticeSpec::ruby_cylinder(1, 2).unwrap();
        let json = spec.to_json();
        let back = LatticeSpec::from_json(&json).unwrap();
        assert_eq!(spec, back);
    }
}
