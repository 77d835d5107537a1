//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use moscito::bench::{ari, segment_count, SynthSpec};
use moscito::dictlearn::{fit, SolverConfig, VOperator};
use moscito::features::{self, dihedral, FeatureOptions, Featurizer};
use moscito::graphclust::DiscreteTrajectory;
use moscito::msm::{koopman_matrix, vamp_r};
use moscito::pipeline::{self, cluster_method, load_features, Method, PipelineConfig, Report};
use moscito::tempreg::{regularizer_value, TemporalLaplacian, TemporalWeightConfig, WeightMode};
use moscito::trajio::{Atom, BackboneRole, Topology, Trajectory, Vec3};
use nalgebra::{DMatrix, Rotation3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(0.0..1.0))
}

fn random_weights(rng: &mut ChaCha8Rng) -> TemporalWeightConfig {
    let mode = WeightMode::ALL[rng.gen_range(0..4)];
    TemporalWeightConfig {
        s: rng.gen_range(1..8),
        mode,
        gaussian_sigma: rng.gen_bool(0.5).then(|| rng.gen_range(0.5..4.0)),
        exp_theta: rng.gen_range(0.3..3.0),
    }
}

/// Dense Laplacian built from the weight function alone.
fn dense_laplacian(n: usize, cfg: &TemporalWeightConfig) -> DMatrix<f64> {
    let w = DMatrix::from_fn(n, n, |i, j| cfg.weight(i.abs_diff(j)));
    let mut l = -w.clone();
    for i in 0..n {
        l[(i, i)] += w.row(i).sum();
    }
    l
}

fn c1_cg_vs_kronecker() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0f64;
    for _ in 0..25 {
        let d = rng.gen_range(1..=10);
        let n = rng.gen_range(2..=200 / d);
        let d_feat = rng.gen_range(2..12);
        let wcfg = random_weights(&mut rng);
        let lap = TemporalLaplacian::<f64>::from_config(n, &wcfg).map_err(|e| e.to_string())?;
        let u = uniform(d_feat, d, &mut rng);
        let shift = rng.gen_range(0.01..1.0);
        let lambda2 = rng.gen_range(0.1..20.0);
        let rhs = DMatrix::from_fn(d, n, |_, _| rng.gen_range(-1.0..1.0));
        let op = VOperator::new(&u, shift, lambda2, &lap);
        let cg = op
            .solve_cg(&rhs, &DMatrix::zeros(d, n), 1e-12, 20_000)
            .map_err(|e| e.to_string())?;

        // I_n ⊗ G + λ₂ (L ⊗ I_d) on column-stacked vec(V).
        let mut g = u.transpose() * &u;
        for i in 0..d {
            g[(i, i)] += shift;
        }
        let l = dense_laplacian(n, &wcfg);
        let k = DMatrix::identity(n, n).kronecker(&g) + l.kronecker(&DMatrix::identity(d, d)) * lambda2;
        let b = nalgebra::DVector::from_column_slice(rhs.as_slice());
        let exact = k.lu().solve(&b).ok_or("dense system singular")?;
        let exact = DMatrix::from_column_slice(d, n, exact.as_slice());
        worst = worst.max((&cg - &exact).norm() / exact.norm());
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-6 && secs < 10.0, format!("max rel err {worst:.2e}, {secs:.2}s"))
}

fn constraints_hold(d: &DMatrix<f64>, z: &DMatrix<f64>) -> bool {
    z.iter().all(|&v| v >= 0.0)
        && d.iter().all(|&v| v >= 0.0)
        && d.column_iter().all(|c| c.norm() <= 1.0 + 1e-12)
}

fn c2_admm_feasibility() -> Outcome {
    let start = Instant::now();
    let (mut rose_v, mut rose_u, mut violations) = (Vec::new(), Vec::new(), Vec::new());
    let mut ratios_u = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = uniform(20, 100, &mut rng);
        let lap = TemporalLaplacian::from_config(100, &TemporalWeightConfig::default()).unwrap();
        let cfg = SolverConfig { d: 10, seed, ..Default::default() };
        let full = fit(&x, &lap, &cfg).map_err(|e| e.to_string())?;
        let its = &full.diagnostics.iterations;
        let (first, last) = (&its[0], its.last().unwrap());
        if last.rel_res_v > first.rel_res_v {
            rose_v.push(seed);
        }
        if last.rel_res_u > first.rel_res_u {
            rose_u.push(seed);
        }
        ratios_u.push(format!("{:.2}->{:.2}", first.rel_res_u, last.rel_res_u));
        // The solver is deterministic, so stopping after t iterations
        // exposes the iterate at step t.
        for t in 1..=its.len() {
            let part = fit(&x, &lap, &SolverConfig { max_iters: t, tol: 0.0, ..cfg.clone() }).map_err(|e| e.to_string())?;
            if !constraints_hold(&part.state.d, &part.state.z) {
                violations.push((seed, t));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        rose_v.is_empty() && rose_u.is_empty() && violations.is_empty() && secs < 60.0,
        format!(
            "constraint violations {violations:?}; ||V-Z||/||Z|| rose for seeds {rose_v:?}; \
             ||U-D||/||D|| rose for seeds {rose_u:?} ({}); {secs:.2}s",
            ratios_u.join(" ")
        ),
    )
}

fn c3_planted_recovery() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut d_true = uniform(8, 4, &mut rng);
    for mut c in d_true.column_iter_mut() {
        c /= c.norm();
    }
    let z_true = uniform(4, 40, &mut rng);
    let x = &d_true * &z_true;
    let lap = TemporalLaplacian::from_config(40, &TemporalWeightConfig::default()).unwrap();
    let cfg = SolverConfig { d: 4, lambda1: 1e-3, lambda2: 1e-3, max_iters: 200, tol: 1e-10, ..Default::default() };
    let res = fit(&x, &lap, &cfg).map_err(|e| e.to_string())?;
    let rel = (&x - res.dictionary() * res.coding()).norm() / x.norm();
    let iters = res.diagnostics.iterations.len();
    let secs = start.elapsed().as_secs_f64();
    check(rel < 0.1 && iters <= 200 && secs < 10.0, format!("rel {rel:.3e} after {iters} iterations, {secs:.2}s"))
}

fn c4_trace_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0f64;
    let mut modes = BTreeMap::new();
    for i in 0..100 {
        let mut wcfg = random_weights(&mut rng);
        wcfg.mode = WeightMode::ALL[i % 4];
        let n = rng.gen_range(2..40);
        let z = uniform(rng.gen_range(1..6), n, &mut rng);
        let lap = TemporalLaplacian::from_config(n, &wcfg).map_err(|e| e.to_string())?;
        let trace = regularizer_value(&z, &lap).map_err(|e| e.to_string())?;
        let mut sum = 0.0;
        for a in 0..n {
            for b in 0..n {
                sum += wcfg.weight(a.abs_diff(b)) * (z.column(a) - z.column(b)).norm_squared();
            }
        }
        worst = worst.max((trace - 0.5 * sum).abs());
        *modes.entry(wcfg.mode.name()).or_insert(0) += 1;
    }
    check(worst < 1e-10 && modes.len() == 4, format!("max abs diff {worst:.2e} over {modes:?}"))
}

fn c5_vamp() -> Outcome {
    let alt = DiscreteTrajectory::from_labels((0..1000).map(|i| i % 2).collect());
    let s_alt = vamp_r(&alt, 1, 2, 2.0).map_err(|e| e.to_string())?;
    let constant = DiscreteTrajectory::from_labels(vec![0; 1000]);
    let s_const = vamp_r(&constant, 1, 2, 2.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut max_sigma = 0f64;
    for _ in 0..20 {
        let k = rng.gen_range(2..8);
        let n = rng.gen_range(50..500);
        let d = DiscreteTrajectory::from_labels((0..n).map(|_| rng.gen_range(0..k)).collect());
        let tau = rng.gen_range(1..5);
        let comp = koopman_matrix::<f64>(&d, tau, 5).map_err(|e| e.to_string())?;
        max_sigma = max_sigma.max(comp.sigma[0]);
    }
    check(
        (s_alt - 2.0).abs() <= 1e-9 && s_const == 1.0 && max_sigma <= 1.0 + 1e-6,
        format!("alternating {s_alt}, constant {s_const}, max sigma1 {max_sigma}"),
    )
}

fn median<T: PartialOrd + Copy>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn synth_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.seed = seed;
    cfg.solver.seed = seed;
    cfg.input.synth = Some(SynthSpec { seed, ..Default::default() });
    cfg.clustering.k = vec![3];
    cfg
}

fn moscito_labels(cfg: &PipelineConfig) -> Result<(DiscreteTrajectory, DiscreteTrajectory), String> {
    let (x, planted) = load_features(cfg).map_err(|e| e.to_string())?;
    let mut warnings = Vec::new();
    let mut d = cluster_method(cfg, Method::Moscito, &x, &[3], &mut warnings).map_err(|e| e.to_string())?;
    Ok((d.remove(0), planted.expect("synthetic input has labels")))
}

fn c6_synthetic_segmentation() -> Outcome {
    let start = Instant::now();
    let (mut aris, mut seg5, mut seg0) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..5 {
        let cfg = synth_config(seed);
        let (d, planted) = moscito_labels(&cfg)?;
        aris.push(ari(&d, &planted).map_err(|e| e.to_string())?);
        for (s, out) in [(5, &mut seg5), (0, &mut seg0)] {
            let mut c = cfg.clone();
            c.tempreg.s = s;
            out.push(segment_count(&moscito_labels(&c)?.0));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let (a, s5, s0) = (median(aris.clone()), median(seg5.clone()), median(seg0.clone()));
    check(
        a >= 0.9 && s5 <= s0 && secs < 300.0,
        format!("median ARI {a:.3} {aris:.3?}, segments s=5 {s5} {seg5:?} vs s=0 {s0} {seg0:?}, {secs:.1}s"),
    )
}

fn run_cluster_and_score(cfg: &PipelineConfig) -> Result<Report, String> {
    let mut report = pipeline::cmd_cluster(cfg).map_err(|e| e.to_string())?;
    let scored = pipeline::cmd_score(cfg).map_err(|e| e.to_string())?;
    report.written.extend(scored.written);
    Ok(report)
}

fn c7_baseline_parity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = synth_config(0);
    cfg.output_dir = dir.path().to_path_buf();
    cfg.methods = Method::ALL.to_vec();
    cfg.clustering.k = vec![3, 10];
    cfg.msm.tau = vec![1, 10];
    cfg.msm.m = 5;
    cfg.msm.r = 2.0;
    run_cluster_and_score(&cfg)?;
    let rows = pipeline::score_rows(&cfg, &mut Report::default()).map_err(|e| e.to_string())?;
    let complete = rows.len() == 16 && rows.iter().all(|r| r.m == 5 && r.score.is_finite());
    let cell: Vec<_> = rows.iter().filter(|r| r.k == 3 && r.tau == 1).collect();
    let best = cell.iter().map(|r| r.score).fold(f64::MIN, f64::max);
    let ours = cell.iter().find(|r| r.method == "moscito").map(|r| r.score).ok_or("no moscito row")?;
    let table: Vec<String> = cell.iter().map(|r| format!("{} {:.4}", r.method, r.score)).collect();
    check(
        complete && ours >= 0.9 * best,
        format!("{} rows; k=3 tau=1: {}", rows.len(), table.join(", ")),
    )
}

fn atom(el: &str, radius: f64, res: usize, role: BackboneRole) -> Atom {
    Atom { element: el.into(), vdw_radius: radius, residue_index: res, role }
}

fn chain() -> Trajectory {
    let mut atoms = Vec::new();
    for r in 0..5 {
        atoms.push(atom("N", 1.55, r, BackboneRole::N));
        atoms.push(atom("C", 1.7, r, BackboneRole::CA));
        atoms.push(atom("C", 1.7, r, BackboneRole::C));
        atoms.push(atom("O", 1.52, r, BackboneRole::SideChain));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let frames = (0..3)
        .map(|_| {
            (0..atoms.len())
                .map(|i| Vec3::new(1.3 * i as f64, 0.0, 0.0) + Vec3::from_fn(|_, _| rng.gen_range(-0.6..0.6)))
                .collect()
        })
        .collect();
    Trajectory::new(Topology::new(atoms, vec![]).unwrap(), frames, 1.0).unwrap()
}

fn c8_featurizer_oracles() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let (r, probe) = (1.7, 1.4);
    let lone = Topology::new(vec![atom("C", r, 0, BackboneRole::CA)], vec![]).unwrap();
    let lone = Trajectory::new(lone, vec![vec![Vec3::new(3.0, -1.0, 2.0)]], 1.0).unwrap();
    let area = features::sasa_per_residue(&lone, probe, 960).map_err(|e| e.to_string())?.values[(0, 0)];
    let exact = 4.0 * PI * (r + probe) * (r + probe);
    let rel = (area - exact).abs() / exact;
    ok &= rel < 0.005;
    notes.push(format!("sasa rel {rel:.1e}"));

    let (p1, p2, p3) = (Vec3::new(0.0, 1.0, 0.0), Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0));
    let anti = dihedral(&p1, &p2, &p3, &Vec3::new(1.0, -1.0, 0.0)).map_err(|e| e.to_string())?;
    let syn = dihedral(&p1, &p2, &p3, &Vec3::new(1.0, 1.0, 0.0)).map_err(|e| e.to_string())?;
    let dih_err = (anti.abs() - PI).abs().max(syn.abs());
    ok &= dih_err < 1e-9;
    notes.push(format!("dihedral err {dih_err:.1e}"));

    let traj = chain();
    let shape = features::shape_histogram(&traj).map_err(|e| e.to_string())?;
    let col_err = shape.values.column_iter().map(|c| (c.sum() - 1.0).abs()).fold(0.0, f64::max);
    ok &= col_err < 1e-12;
    notes.push(format!("shape column sum err {col_err:.1e}"));

    let rot = Rotation3::from_euler_angles(0.7, -0.4, 2.3);
    let moved = traj.map_coords(|p| rot * p + Vec3::new(-4.0, 1.5, 9.0));
    let opts = FeatureOptions::default();
    let mut rot_err = 0f64;
    for f in [Featurizer::Backbone, Featurizer::Distances, Featurizer::Sasa] {
        let a = features::featurize(&traj, f, &opts).map_err(|e| e.to_string())?;
        let b = features::featurize(&moved, f, &opts).map_err(|e| e.to_string())?;
        rot_err = rot_err.max((a.values - b.values).amax());
    }
    ok &= rot_err < 1e-9;
    notes.push(format!("rotation err {rot_err:.1e}"));
    check(ok, notes.join(", "))
}

fn file_bytes(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        out.insert(name, fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn c9_determinism() -> Outcome {
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = synth_config(9);
        cfg.input.synth.as_mut().unwrap().n_frames = 400;
        cfg.solver.d = 30;
        cfg.output_dir = dir.path().to_path_buf();
        cfg.methods = Method::ALL.to_vec();
        cfg.clustering.k = vec![3, 6];
        cfg.msm.tau = vec![1, 5];
        run_cluster_and_score(&cfg)?;
        outputs.push(file_bytes(dir.path())?);
    }
    let csv_svg = outputs[0].keys().filter(|n| n.ends_with(".csv") || n.ends_with(".svg")).count();
    check(
        outputs[0] == outputs[1] && csv_svg > 0,
        format!("{} files identical ({csv_svg} csv/svg)", outputs[0].len()),
    )
}

fn c10_defaults() -> Outcome {
    let dump = PipelineConfig::default().to_toml();
    let resolved = PipelineConfig::from_toml(&dump).map_err(|e| e.to_string())?;
    let s = &resolved.solver;
    let expected = ["d = 60", "s = 3", "lambda1 = 0.01", "lambda2 = 15.0", "alpha = 0.1", "beta = 0.1"];
    let missing: Vec<_> = expected.iter().filter(|l| !dump.lines().any(|x| x == **l)).collect();
    check(
        missing.is_empty()
            && (s.d, resolved.tempreg.s, s.lambda1, s.lambda2, s.alpha, s.beta) == (60, 3, 0.01, 15.0, 0.1, 0.1),
        if missing.is_empty() { "d=60 s=3 lambda1=0.01 lambda2=15 alpha=0.1 beta=0.1".into() } else { format!("missing {missing:?}") },
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("CG matches dense Kronecker solve", c1_cg_vs_kronecker),
        ("ADMM feasibility", c2_admm_feasibility),
        ("planted factorization recovery", c3_planted_recovery),
        ("trace / double-sum identity", c4_trace_identity),
        ("VAMP exactness", c5_vamp),
        ("synthetic segmentation", c6_synthetic_segmentation),
        ("baseline parity", c7_baseline_parity),
        ("featurizer oracles", c8_featurizer_oracles),
        ("determinism", c9_determinism),
        ("config defaults", c10_defaults),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
