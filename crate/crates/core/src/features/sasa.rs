//! Shrake–Rupley solvent accessible surface area.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::trajio::Vec3;

use super::geometry::centroid;

pub const DEFAULT_PROBE_RADIUS: f64 = 1.4;
pub const DEFAULT_SPHERE_POINTS: usize = 960;
pub const MIN_SPHERE_POINTS: usize = 32;

/// Deterministic golden-spiral point set on the unit sphere.
pub fn golden_spiral(n: usize) -> Vec<Vec3> {
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            Vec3::new(r * phi.cos(), y, r * phi.sin())
        })
        .collect()
}

/// Orthonormal frame attached to a point cloud: principal axes of the
/// centered positions, each sign chosen so the third moment along it is
/// nonnegative. Rotating the cloud rotates the frame with it.
pub fn principal_frame(points: &[Vec3]) -> Matrix3<f64> {
    let c = centroid(points.iter().copied());
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut frame = Matrix3::zeros();
    for (k, &i) in order.iter().enumerate() {
        let mut axis = eig.eigenvectors.column(i).into_owned();
        let skew: f64 = points.iter().map(|p| (p - c).dot(&axis).powi(3)).sum();
        if skew < 0.0 {
            axis = -axis;
        }
        frame.set_column(k, &axis);
    }
    frame
}

/// Accessible area of every atom, in the units of `centers`².
///
/// A surface point of atom `a` is buried when it lies strictly inside the
/// probe-expanded sphere of any other atom.
pub fn atom_sasa(centers: &[Vec3], radii: &[f64], probe: f64, sphere: &[Vec3]) -> Vec<f64> {
    let expanded: Vec<f64> = radii.iter().map(|r| r + probe).collect();
    let n = centers.len();
    (0..n)
        .map(|a| {
            let ra = expanded[a];
            let neighbors: Vec<usize> = (0..n)
                .filter(|&b| {
                    b != a && (centers[a] - centers[b]).norm() < ra + expanded[b]
                })
                .collect();
            let mut last_hit = 0usize;
            let accessible = sphere
                .iter()
                .filter(|u| {
                    let p = centers[a] + *u * ra;
                    let buried_by = |b: usize| (p - centers[b]).norm_squared() < expanded[b] * expanded[b];
                    // Points cluster spatially, so the last occluder is a good first guess.
                    if !neighbors.is_empty() && buried_by(neighbors[last_hit]) {
                        return false;
                    }
                    match neighbors.iter().position(|&b| buried_by(b)) {
                        Some(i) => {
                            last_hit = i;
                            false
                        }
                        None => true,
                    }
                })
                .count();
            4.0 * PI * ra * ra * accessible as f64 / sphere.len() as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_atom_is_full_sphere() {
        let pts = golden_spiral(DEFAULT_SPHERE_POINTS);
        let s = atom_sasa(&[Vec3::zeros()], &[1.5], 1.4, &pts);
        let exact = 4.0 * PI * 2.9 * 2.9;
        assert!((s[0] - exact).abs() < 1e-9);
        assert!((exact - 105.68).abs() < 0.01);
    }

    #[test]
    fn distant_pair_has_no_occlusion() {
        let pts = golden_spiral(100);
        let single = atom_sasa(&[Vec3::zeros()], &[1.5], 1.4, &pts)[0];
        let pair = atom_sasa(&[Vec3::zeros(), Vec3::new(100.0, 0.0, 0.0)], &[1.5, 1.5], 1.4, &pts);
        assert!((pair.iter().sum::<f64>() - 2.0 * single).abs() < 1e-9);
    }

    #[test]
    fn enclosed_atom_is_buried() {
        let shell: Vec<Vec3> = golden_spiral(30).into_iter().map(|u| u * 3.5).collect();
        let mut centers = vec![Vec3::zeros()];
        centers.extend(shell);
        let mut radii = vec![1.5];
        radii.extend(std::iter::repeat(3.0).take(30));
        let pts = golden_spiral(DEFAULT_SPHERE_POINTS);
        // Oracle: every surface point of the center atom is inside some shell sphere.
        let ra = 2.9;
        let all_buried = pts.iter().all(|u| {
            let p = u * ra;
            centers[1..].iter().any(|c| (p - c).norm() < 4.4)
        });
        assert!(all_buried);
        let s = atom_sasa(&centers, &radii, 1.4, &pts);
        assert!(s[0] <= 0.01 * 4.0 * PI * ra * ra);
    }

    #[test]
    fn spiral_points_are_unit() {
        for p in golden_spiral(64) {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }
}
