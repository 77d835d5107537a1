//! Trajectory featurization into the data matrix `X`.
//!
//! Six featurizers are available and may be concatenated. Every featurizer
//! is a per-frame map; frames are evaluated in parallel and collected in order.

mod geometry;
mod matrix;
pub mod sasa;
pub mod shape;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajio::{BackboneRole, Trajectory, Vec3};

pub use geometry::{center_and_align, centroid, dihedral, kabsch, rmsd};
pub use matrix::{FeatureLabel, FeatureMatrix, Scaling};

/// Featurizers in canonical concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Featurizer {
    Coords,
    Backbone,
    Distances,
    Flex,
    Sasa,
    Shape,
}

impl Featurizer {
    pub const ALL: [Featurizer; 6] = [
        Featurizer::Coords,
        Featurizer::Backbone,
        Featurizer::Distances,
        Featurizer::Flex,
        Featurizer::Sasa,
        Featurizer::Shape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Featurizer::Coords => "coords",
            Featurizer::Backbone => "backbone",
            Featurizer::Distances => "distances",
            Featurizer::Flex => "flex",
            Featurizer::Sasa => "sasa",
            Featurizer::Shape => "shape",
        }
    }
}

impl fmt::Display for Featurizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Featurizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Featurizer::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown featurizer `{s}`")))
    }
}

/// How backbone angles enter the data matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleEncoding {
    Raw,
    #[default]
    Cossin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOptions {
    pub angles: AngleEncoding,
    pub probe_radius: f64,
    pub sphere_points: usize,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            angles: AngleEncoding::Cossin,
            probe_radius: sasa::DEFAULT_PROBE_RADIUS,
            sphere_points: sasa::DEFAULT_SPHERE_POINTS,
        }
    }
}

/// Builds a `d × n_frames` matrix from a per-frame feature function.
fn per_frame<F>(traj: &Trajectory, name: &str, dim: usize, f: F) -> Result<FeatureMatrix>
where
    F: Fn(&[Vec3]) -> Result<Vec<f64>> + Sync,
{
    let columns: Vec<Vec<f64>> = traj
        .frames
        .par_iter()
        .map(|frame| f(frame))
        .collect::<Result<_>>()?;
    let mut values = DMatrix::zeros(dim, columns.len());
    for (t, col) in columns.iter().enumerate() {
        debug_assert_eq!(col.len(), dim);
        values.column_mut(t).copy_from_slice(col);
    }
    FeatureMatrix::from_values(name, values)
}

fn push_angle(out: &mut Vec<f64>, angle: f64, enc: AngleEncoding) {
    match enc {
        AngleEncoding::Raw => out.push(angle),
        AngleEncoding::Cossin => {
            out.push(angle.cos());
            out.push(angle.sin());
        }
    }
}

fn angle_width(enc: AngleEncoding) -> usize {
    match enc {
        AngleEncoding::Raw => 1,
        AngleEncoding::Cossin => 2,
    }
}

/// CA coordinates after centering and alignment to frame 0, flattened `x,y,z` per atom.
pub fn cartesian_coords(traj: &Trajectory) -> Result<FeatureMatrix> {
    let ca = traj.topology.ca_atoms();
    let aligned = center_and_align(traj, &ca)?;
    per_frame(&aligned, Featurizer::Coords.name(), 3 * ca.len(), |frame| {
        Ok(ca.iter().flat_map(|&a| [frame[a].x, frame[a].y, frame[a].z]).collect())
    })
}

/// φ for residues `1..R` followed by ψ for residues `0..R-1`.
pub fn backbone_torsions(traj: &Trajectory, enc: AngleEncoding) -> Result<FeatureMatrix> {
    let topo = &traj.topology;
    let n_res = topo.residue_count();
    if n_res < 2 {
        return Err(Error::InvalidArgument(format!(
            "backbone torsions need at least 2 residues, got {n_res}"
        )));
    }
    let atom = |res: usize, role: BackboneRole| {
        topo.backbone_atom(res, role).ok_or_else(|| {
            Error::Validation(format!("residue {res} is missing backbone atom {role}"))
        })
    };
    let mut quads = Vec::with_capacity(2 * n_res - 2);
    for i in 1..n_res {
        quads.push([
            atom(i - 1, BackboneRole::C)?,
            atom(i, BackboneRole::N)?,
            atom(i, BackboneRole::CA)?,
            atom(i, BackboneRole::C)?,
        ]);
    }
    for i in 0..n_res - 1 {
        quads.push([
            atom(i, BackboneRole::N)?,
            atom(i, BackboneRole::CA)?,
            atom(i, BackboneRole::C)?,
            atom(i + 1, BackboneRole::N)?,
        ]);
    }
    torsion_features(traj, Featurizer::Backbone.name(), &quads, enc)
}

/// χ torsions from every residue's side-chain chain, as `(cos, sin)` pairs.
pub fn flexible_torsions(traj: &Trajectory) -> Result<FeatureMatrix> {
    let quads: Vec<[usize; 4]> = traj
        .topology
        .chi_chains()
        .iter()
        .flat_map(|chain| chain.windows(4).map(|w| [w[0], w[1], w[2], w[3]]))
        .collect();
    if quads.is_empty() {
        return Err(Error::InvalidArgument("no flexible torsions defined".into()));
    }
    torsion_features(traj, Featurizer::Flex.name(), &quads, AngleEncoding::Cossin)
}

fn torsion_features(
    traj: &Trajectory,
    name: &str,
    quads: &[[usize; 4]],
    enc: AngleEncoding,
) -> Result<FeatureMatrix> {
    per_frame(traj, name, quads.len() * angle_width(enc), |frame| {
        let mut out = Vec::with_capacity(quads.len() * 2);
        for q in quads {
            let angle = dihedral(&frame[q[0]], &frame[q[1]], &frame[q[2]], &frame[q[3]])?;
            push_angle(&mut out, angle, enc);
        }
        Ok(out)
    })
}

/// `exp(-d)` of the minimal heavy-atom distance for residue pairs `j - i ≥ 3`.
pub fn heavy_atom_min_distances(traj: &Trajectory) -> Result<FeatureMatrix> {
    let topo = &traj.topology;
    let n_res = topo.residue_count();
    if n_res < 4 {
        return Err(Error::InvalidArgument(format!(
            "distance features need at least 4 residues, got {n_res}"
        )));
    }
    let heavy: Vec<Vec<usize>> = (0..n_res)
        .map(|r| {
            let h: Vec<usize> = topo
                .residue_atoms(r)
                .filter(|&a| topo.atoms()[a].is_heavy())
                .collect();
            if h.is_empty() {
                Err(Error::Validation(format!("residue {r} has no heavy atoms")))
            } else {
                Ok(h)
            }
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..n_res)
        .flat_map(|i| (i + 3..n_res).map(move |j| (i, j)))
        .collect();
    per_frame(traj, Featurizer::Distances.name(), pairs.len(), |frame| {
        Ok(pairs
            .iter()
            .map(|&(i, j)| {
                let d = heavy[i]
                    .iter()
                    .flat_map(|&a| heavy[j].iter().map(move |&b| (frame[a] - frame[b]).norm()))
                    .fold(f64::INFINITY, f64::min);
                (-d).exp()
            })
            .collect())
    })
}

/// Per-residue SASA (Å²) by the Shrake–Rupley point method.
pub fn sasa_per_residue(traj: &Trajectory, probe_radius: f64, sphere_points: usize) -> Result<FeatureMatrix> {
    if !(probe_radius >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "probe radius must be nonnegative, got {probe_radius}"
        )));
    }
    if sphere_points < sasa::MIN_SPHERE_POINTS {
        return Err(Error::InvalidArgument(format!(
            "need at least {} sphere points, got {sphere_points}",
            sasa::MIN_SPHERE_POINTS
        )));
    }
    let topo = &traj.topology;
    let radii: Vec<f64> = topo.atoms().iter().map(|a| a.vdw_radius).collect();
    let sphere = sasa::golden_spiral(sphere_points);
    let n_res = topo.residue_count();
    per_frame(traj, Featurizer::Sasa.name(), n_res, |frame| {
        // Sphere points ride with the molecule so the estimate is rotation invariant.
        let axes = sasa::principal_frame(frame);
        let oriented: Vec<Vec3> = sphere.iter().map(|u| axes * u).collect();
        let per_atom = sasa::atom_sasa(frame, &radii, probe_radius, &oriented);
        let mut per_res = vec![0.0; n_res];
        for (a, s) in per_atom.iter().enumerate() {
            per_res[topo.atoms()[a].residue_index] += s;
        }
        Ok(per_res)
    })
}

/// 60-cell occupancy histogram over all atoms; each column sums to 1.
pub fn shape_histogram(traj: &Trajectory) -> Result<FeatureMatrix> {
    if traj.topology.atom_count() == 0 {
        return Err(Error::InvalidArgument("shape histogram of zero atoms".into()));
    }
    let dirs = shape::icosahedron_directions();
    per_frame(traj, Featurizer::Shape.name(), shape::CELLS, |frame| {
        Ok(shape::frame_histogram(frame, &dirs).to_vec())
    })
}

pub fn featurize(traj: &Trajectory, f: Featurizer, opts: &FeatureOptions) -> Result<FeatureMatrix> {
    let out = match f {
        Featurizer::Coords => cartesian_coords(traj),
        Featurizer::Backbone => backbone_torsions(traj, opts.angles),
        Featurizer::Distances => heavy_atom_min_distances(traj),
        Featurizer::Flex => flexible_torsions(traj),
        Featurizer::Sasa => sasa_per_residue(traj, opts.probe_radius, opts.sphere_points),
        Featurizer::Shape => shape_histogram(traj),
    };
    out.map_err(|e| Error::Featurizer {
        name: f.name(),
        source: Box::new(e),
    })
}

/// Concatenates the selected featurizers in canonical order, then scales.
pub fn assemble_features(
    traj: &Trajectory,
    selection: &BTreeSet<Featurizer>,
    scaling: Scaling,
    opts: &FeatureOptions,
) -> Result<FeatureMatrix> {
    if selection.is_empty() {
        return Err(Error::InvalidArgument("empty featurizer selection".into()));
    }
    let parts = selection
        .iter()
        .map(|&f| featurize(traj, f, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix::concat(parts)?.with_scaling(scaling))
}
