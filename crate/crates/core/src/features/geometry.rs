//! Dihedral angles and rigid-body superposition.

use nalgebra::{Matrix3, Rotation3};

use crate::error::{Error, Result};
use crate::trajio::{Trajectory, Vec3};

/// Relative tolerance below which two bond vectors count as collinear.
const COLLINEAR_EPS: f64 = 1e-12;

/// Signed torsion angle of the chain `p1-p2-p3-p4` in `(-π, π]`.
///
/// IUPAC sign convention: positive when `p4` is rotated clockwise relative
/// to `p1` looking down `p2 → p3`.
pub fn dihedral(p1: &Vec3, p2: &Vec3, p3: &Vec3, p4: &Vec3) -> Result<f64> {
    let b1 = p2 - p1;
    let b2 = p3 - p2;
    let b3 = p4 - p3;
    let n1 = b1.cross(&b2);
    let n2 = b2.cross(&b3);
    let scale = |a: &Vec3, b: &Vec3| a.norm() * b.norm();
    if n1.norm() <= COLLINEAR_EPS * scale(&b1, &b2) || n1.norm() == 0.0 {
        return Err(Error::Geometry("p1, p2, p3 are collinear".into()));
    }
    if n2.norm() <= COLLINEAR_EPS * scale(&b2, &b3) || n2.norm() == 0.0 {
        return Err(Error::Geometry("p2, p3, p4 are collinear".into()));
    }
    let y = b2.norm() * b1.dot(&n2);
    let x = n1.dot(&n2);
    let angle = y.atan2(x);
    // atan2(-0.0, -1) is -π; fold onto the half-open range.
    Ok(if angle <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        angle
    })
}

pub fn centroid(points: impl IntoIterator<Item = Vec3>) -> Vec3 {
    let mut sum = Vec3::zeros();
    let mut n = 0usize;
    for p in points {
        sum += p;
        n += 1;
    }
    if n == 0 {
        sum
    } else {
        sum / n as f64
    }
}

/// Least-squares rotation taking centered `mobile` onto centered `target`.
pub fn kabsch(mobile: &[Vec3], target: &[Vec3]) -> Result<Rotation3<f64>> {
    if mobile.len() != target.len() {
        return Err(Error::Dimension(format!(
            "kabsch: {} mobile vs {} target points",
            mobile.len(),
            target.len()
        )));
    }
    if mobile.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "alignment needs at least 3 atoms, got {}",
            mobile.len()
        )));
    }
    let mut h = Matrix3::zeros();
    for (p, q) in mobile.iter().zip(target) {
        h += p * q.transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d));
    Ok(Rotation3::from_matrix_unchecked(v * correction * u.transpose()))
}

pub fn rmsd(a: &[Vec3], b: &[Vec3]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum();
    (sum / a.len().max(1) as f64).sqrt()
}

/// Translates every frame so the `subset` centroid sits at the origin, then
/// rotates frames `1..` onto frame 0 using the subset's optimal rotation.
pub fn center_and_align(traj: &Trajectory, subset: &[usize]) -> Result<Trajectory> {
    if subset.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "alignment subset needs at least 3 atoms, got {}",
            subset.len()
        )));
    }
    if let Some(&bad) = subset.iter().find(|&&a| a >= traj.topology.atom_count()) {
        return Err(Error::InvalidArgument(format!("subset atom {bad} out of range")));
    }
    let mut frames: Vec<Vec<Vec3>> = traj
        .frames
        .iter()
        .map(|frame| {
            let c = centroid(subset.iter().map(|&a| frame[a]));
            frame.iter().map(|p| p - c).collect()
        })
        .collect();
    let reference: Vec<Vec3> = subset.iter().map(|&a| frames[0][a]).collect();
    for frame in frames.iter_mut().skip(1) {
        let mobile: Vec<Vec3> = subset.iter().map(|&a| frame[a]).collect();
        let rot = kabsch(&mobile, &reference)?;
        for p in frame.iter_mut() {
            *p = rot * *p;
        }
    }
    Ok(Trajectory {
        topology: traj.topology.clone(),
        frames,
        dt: traj.dt,
    })
}
