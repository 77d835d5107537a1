//! Plain-text topology and trajectory formats.
//!
//! Both formats are line oriented UTF-8. Blank lines and lines starting with
//! `#` are ignored. See `docs/formats.md` for the grammar.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Position of an atom within its residue's backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackboneRole {
    N,
    CA,
    C,
    O,
    SideChain,
}

impl BackboneRole {
    pub fn as_str(self) -> &'static str {
        match self {
            BackboneRole::N => "N",
            BackboneRole::CA => "CA",
            BackboneRole::C => "C",
            BackboneRole::O => "O",
            BackboneRole::SideChain => "SC",
        }
    }
}

impl fmt::Display for BackboneRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackboneRole {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "N" => Ok(BackboneRole::N),
            "CA" => Ok(BackboneRole::CA),
            "C" => Ok(BackboneRole::C),
            "O" => Ok(BackboneRole::O),
            "SC" | "side_chain" => Ok(BackboneRole::SideChain),
            other => Err(format!("unknown backbone role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: String,
    pub vdw_radius: f64,
    pub residue_index: usize,
    pub role: BackboneRole,
}

impl Atom {
    pub fn is_heavy(&self) -> bool {
        !self.element.eq_ignore_ascii_case("H")
    }
}

/// Atom table plus per-residue side-chain torsion chains.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    atoms: Vec<Atom>,
    /// `chi_chains[r]` lists atom indices whose consecutive quadruples
    /// define the side-chain torsions of residue `r`. Empty when none.
    chi_chains: Vec<Vec<usize>>,
}

/// Longest permitted chain: five torsions need eight atoms.
const MAX_CHI_CHAIN: usize = 8;

impl Topology {
    /// Builds a topology and checks every invariant.
    pub fn new(atoms: Vec<Atom>, chi_chains: Vec<(usize, Vec<usize>)>) -> Result<Self> {
        let n_res = atoms.last().map_or(0, |a| a.residue_index + 1);
        let mut chains = vec![Vec::new(); n_res];
        for (res, chain) in chi_chains {
            if res >= n_res {
                return Err(Error::Validation(format!(
                    "chi chain references residue {res} but topology has {n_res} residues"
                )));
            }
            chains[res] = chain;
        }
        let topo = Topology {
            atoms,
            chi_chains: chains,
        };
        topo.validate()?;
        Ok(topo)
    }

    fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::Validation("topology has no atoms".into()));
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            if !(atom.vdw_radius > 0.0) || !atom.vdw_radius.is_finite() {
                return Err(Error::Validation(format!(
                    "atom {i}: vdw_radius must be positive, got {}",
                    atom.vdw_radius
                )));
            }
            if i > 0 && atom.residue_index < self.atoms[i - 1].residue_index {
                return Err(Error::Validation(format!(
                    "atom {i}: residue_index {} decreases from {}",
                    atom.residue_index,
                    self.atoms[i - 1].residue_index
                )));
            }
        }
        for res in 0..self.residue_count() {
            for role in [BackboneRole::N, BackboneRole::CA, BackboneRole::C] {
                let count = self
                    .residue_atoms(res)
                    .filter(|&a| self.atoms[a].role == role)
                    .count();
                if count > 1 {
                    return Err(Error::Validation(format!(
                        "residue {res} has {count} atoms with role {role}"
                    )));
                }
            }
        }
        for (res, chain) in self.chi_chains.iter().enumerate() {
            if chain.is_empty() {
                continue;
            }
            if chain.len() < 4 || chain.len() > MAX_CHI_CHAIN {
                return Err(Error::Validation(format!(
                    "residue {res}: chi chain needs 4..={MAX_CHI_CHAIN} atoms, got {}",
                    chain.len()
                )));
            }
            if let Some(&bad) = chain.iter().find(|&&a| a >= self.atoms.len()) {
                return Err(Error::Validation(format!(
                    "residue {res}: chi chain atom {bad} out of range"
                )));
            }
        }
        Ok(())
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Number of residues, `last residue_index + 1`.
    pub fn residue_count(&self) -> usize {
        self.chi_chains.len()
    }

    pub fn chi_chains(&self) -> &[Vec<usize>] {
        &self.chi_chains
    }

    pub fn residue_atoms(&self, residue: usize) -> impl Iterator<Item = usize> + '_ {
        let start = self.atoms.partition_point(|a| a.residue_index < residue);
        let end = self.atoms.partition_point(|a| a.residue_index <= residue);
        start..end
    }

    /// Index of the atom with `role` in `residue`, if any.
    pub fn backbone_atom(&self, residue: usize, role: BackboneRole) -> Option<usize> {
        self.residue_atoms(residue)
            .find(|&a| self.atoms[a].role == role)
    }

    /// Indices of every CA atom in order.
    pub fn ca_atoms(&self) -> Vec<usize> {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.role == BackboneRole::CA)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("atoms {}\n", self.atoms.len());
        for a in &self.atoms {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                a.element, a.vdw_radius, a.residue_index, a.role
            );
        }
        for (res, chain) in self.chi_chains.iter().enumerate() {
            if chain.is_empty() {
                continue;
            }
            let _ = write!(out, "chi {res}");
            for a in chain {
                let _ = write!(out, " {a}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub topology: Topology,
    pub frames: Vec<Vec<Vec3>>,
    pub dt: f64,
}

impl Trajectory {
    pub fn new(topology: Topology, frames: Vec<Vec<Vec3>>, dt: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Validation("trajectory has zero frames".into()));
        }
        for (f, frame) in frames.iter().enumerate() {
            if frame.len() != topology.atom_count() {
                return Err(Error::Validation(format!(
                    "frame {f} has {} atoms, topology has {}",
                    frame.len(),
                    topology.atom_count()
                )));
            }
            if frame.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
                return Err(Error::Validation(format!(
                    "frame {f} contains a non-finite coordinate"
                )));
            }
        }
        Ok(Trajectory {
            topology,
            frames,
            dt,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    /// Applies `f` to every coordinate, keeping topology and timing.
    pub fn map_coords(&self, f: impl Fn(&Vec3) -> Vec3) -> Trajectory {
        Trajectory {
            topology: self.topology.clone(),
            frames: self
                .frames
                .iter()
                .map(|frame| frame.iter().map(&f).collect())
                .collect(),
            dt: self.dt,
        }
    }

    /// Serializes to the trajectory text format. Coordinates are written
    /// with shortest round-trip precision, so reloading is lossless.
    pub fn to_text(&self) -> String {
        let mut out = format!("dt {}\n", self.dt);
        for (i, frame) in self.frames.iter().enumerate() {
            let _ = writeln!(out, "frame {i}");
            for p in frame {
                let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
            }
        }
        out
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        (!l.is_empty() && !l.starts_with('#')).then_some((i + 1, l))
    })
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn field<T: FromStr>(path: &Path, line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(path, line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} `{tok}`")))
}

/// Parses topology text. `path` is only used for error messages.
pub fn parse_topology(text: &str, path: &Path) -> Result<Topology> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty topology file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("atoms") {
        return Err(parse_err(path, hline, "expected header `atoms N`"));
    }
    let n: usize = field(path, hline, toks.next(), "atom count")?;

    let mut atoms = Vec::with_capacity(n);
    let mut chis = Vec::new();
    for (lineno, line) in lines {
        let mut toks = line.split_whitespace();
        let first = toks.next().unwrap_or_default();
        if first == "chi" {
            let res: usize = field(path, lineno, toks.next(), "chi residue index")?;
            let chain = toks
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| parse_err(path, lineno, format!("invalid atom index `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            chis.push((res, chain));
            continue;
        }
        if !chis.is_empty() {
            return Err(parse_err(path, lineno, "atom line after chi block"));
        }
        if atoms.len() == n {
            return Err(parse_err(path, lineno, format!("more than {n} atom lines")));
        }
        let vdw_radius: f64 = field(path, lineno, toks.next(), "vdw_radius")?;
        let residue_index: usize = field(path, lineno, toks.next(), "residue_index")?;
        let role_tok = toks
            .next()
            .ok_or_else(|| parse_err(path, lineno, "missing backbone_role"))?;
        let role = role_tok
            .parse()
            .map_err(|e: String| parse_err(path, lineno, e))?;
        if toks.next().is_some() {
            return Err(parse_err(path, lineno, "trailing tokens on atom line"));
        }
        atoms.push(Atom {
            element: first.to_string(),
            vdw_radius,
            residue_index,
            role,
        });
    }
    if atoms.len() != n {
        return Err(parse_err(
            path,
            hline,
            format!("header declares {n} atoms, found {}", atoms.len()),
        ));
    }
    Topology::new(atoms, chis)
}

/// Parses trajectory text against `topology`.
pub fn parse_trajectory(text: &str, path: &Path, topology: &Topology) -> Result<Trajectory> {
    let natoms = topology.atom_count();
    let mut dt = 1.0;
    let mut frames: Vec<Vec<Vec3>> = Vec::new();
    let mut last_line = 1;
    let close = |frames: &[Vec<Vec3>], line: usize| -> Result<()> {
        match frames.last() {
            Some(f) if f.len() != natoms => Err(parse_err(
                path,
                line,
                format!(
                    "frame {} has {} coordinate lines, topology has {natoms} atoms",
                    frames.len() - 1,
                    f.len()
                ),
            )),
            _ => Ok(()),
        }
    };
    for (lineno, line) in content_lines(text) {
        last_line = lineno;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("dt") if frames.is_empty() => {
                dt = field(path, lineno, toks.next(), "dt")?;
            }
            Some("frame") => {
                close(&frames, lineno)?;
                let idx: usize = field(path, lineno, toks.next(), "frame index")?;
                if idx != frames.len() {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("expected frame {}, found frame {idx}", frames.len()),
                    ));
                }
                frames.push(Vec::with_capacity(natoms));
            }
            Some(x) => {
                let frame = frames
                    .last_mut()
                    .ok_or_else(|| parse_err(path, lineno, "coordinate before first `frame` line"))?;
                if frame.len() == natoms {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("frame has more than {natoms} coordinate lines"),
                    ));
                }
                let x: f64 = field(path, lineno, Some(x), "x coordinate")?;
                let y: f64 = field(path, lineno, toks.next(), "y coordinate")?;
                let z: f64 = field(path, lineno, toks.next(), "z coordinate")?;
                if toks.next().is_some() {
                    return Err(parse_err(path, lineno, "trailing tokens on coordinate line"));
                }
                frame.push(Vec3::new(x, y, z));
            }
            None => unreachable!("content lines are nonempty"),
        }
    }
    close(&frames, last_line)?;
    if frames.is_empty() {
        return Err(parse_err(path, last_line, "trajectory has zero frames"));
    }
    Trajectory::new(topology.clone(), frames, dt)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

pub fn load_topology(path: impl AsRef<Path>) -> Result<Topology> {
    let path = path.as_ref();
    parse_topology(&read(path)?, path)
}

pub fn load_trajectory(path: impl AsRef<Path>, topology: &Topology) -> Result<Trajectory> {
    let path = path.as_ref();
    parse_trajectory(&read(path)?, path, topology)
}

pub fn write_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, traj.to_text()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn write_topology(path: impl AsRef<Path>, topo: &Topology) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, topo.to_text()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
