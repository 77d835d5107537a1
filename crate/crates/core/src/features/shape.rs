//! 5-shell × 12-sector occupancy histogram of a centered frame.

use crate::trajio::Vec3;

use super::geometry::centroid;

pub const SHELLS: usize = 5;
pub const SECTORS: usize = 12;
pub const CELLS: usize = SHELLS * SECTORS;

/// Unit directions to the 12 vertices of a regular icosahedron, in a fixed order.
pub fn icosahedron_directions() -> [Vec3; SECTORS] {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (0.0, 1.0, phi),
        (0.0, 1.0, -phi),
        (0.0, -1.0, phi),
        (0.0, -1.0, -phi),
        (1.0, phi, 0.0),
        (1.0, -phi, 0.0),
        (-1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (phi, 0.0, 1.0),
        (phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
    ];
    raw.map(|(x, y, z)| Vec3::new(x, y, z).normalize())
}

/// Sector of direction `p`: the vertex with largest dot product, lowest index on ties.
pub fn sector_of(p: &Vec3, dirs: &[Vec3; SECTORS]) -> usize {
    if p.norm() == 0.0 {
        return 0;
    }
    let u = p.normalize();
    let mut best = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for (i, d) in dirs.iter().enumerate() {
        let dot = u.dot(d);
        if dot > best_dot {
            best = i;
            best_dot = dot;
        }
    }
    best
}

/// Normalized histogram (`shell * 12 + sector` indexing) for one frame.
pub fn frame_histogram(frame: &[Vec3], dirs: &[Vec3; SECTORS]) -> [f64; CELLS] {
    let c = centroid(frame.iter().copied());
    let centered: Vec<Vec3> = frame.iter().map(|p| p - c).collect();
    let r_max = centered.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let mut hist = [0.0; CELLS];
    let weight = 1.0 / frame.len() as f64;
    for p in &centered {
        let r = p.norm();
        let (shell, sector) = if r == 0.0 || r_max == 0.0 {
            (0, 0)
        } else {
            let s = ((r / r_max) * SHELLS as f64).floor() as usize;
            (s.min(SHELLS - 1), sector_of(p, dirs))
        };
        hist[shell * SECTORS + sector] += weight;
    }
    hist
}
