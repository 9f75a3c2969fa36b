//! Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! Tolerances and thresholds are pinned below.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mobo_pc::acquisition::{AcquisitionContext, AcquisitionSettings, CellEvaluation, SearchSpace};
use mobo_pc::benchmarks::get_benchmark;
use mobo_pc::cone::{ConeBasis, PreferenceTuple};
use mobo_pc::gp::{GpModel, KernelSpec};
use mobo_pc::hypervolume::{hypervolume, weighted_expected_hv, ArchivePoint, ParetoArchive};
use mobo_pc::optimizer::{execute, Direction, RunConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONE_VECTORS: usize = 1000;
const CONE_LATTICE: usize = 6;
const CONE_BUDGET: Duration = Duration::from_secs(10);
const ORTHOGONALITY_TOL: f64 = 1e-12;
const HV_INSTANCES: usize = 200;
const HV_TOL: f64 = 1e-9;
const FD_MODELS: usize = 20;
const FD_POINTS: usize = 100;
const FD_STEP: f64 = 1e-3;
const FD_REL_TOL: f64 = 1e-4;
const PEHI_STATES: usize = 50;
const PEHI_SE_FACTOR: f64 = 3.0;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const SCHAFFER_ITERATIONS: usize = 20;
const SCHAFFER_MIN_COMPLIANCE: f64 = 0.80;
const POLONI_ITERATIONS: usize = 50;
const POLONI_MIN_COMPLIANCE: f64 = 0.60;
const RUN_BUDGET: Duration = Duration::from_secs(300);
const EHI_MIN_GAP: f64 = 0.25;

struct Verdict {
    pass: bool,
    detail: String,
}

fn random_unit(r: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// Non-zero points of `{0, 1/k, ..., 1}^m` inside the cone of the canonical
/// tuple `(0, ..., q)`, normalised to unit length.
fn cone_lattice(q: usize, m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let total = (CONE_LATTICE + 1).pow(m as u32);
    for code in 1..total {
        let mut c = code;
        let s: Vec<f64> = (0..m)
            .map(|_| {
                let d = c % (CONE_LATTICE + 1);
                c /= CONE_LATTICE + 1;
                d as f64 / CONE_LATTICE as f64
            })
            .collect();
        if (0..q).all(|i| s[i] >= s[i + 1]) {
            let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            out.push(s.iter().map(|x| x / norm).collect());
        }
    }
    out
}

fn cone_oracle() -> Verdict {
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    let mut disagreements = 0;
    for m in 2..=4 {
        for q in 1..m {
            let basis = ConeBasis::build(&PreferenceTuple::canonical(q, m).unwrap());
            let lattice = cone_lattice(q, m);
            for _ in 0..CONE_VECTORS {
                let v = random_unit(&mut r, m);
                let tol = 1e-9;
                let (lo, hi) = lattice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    let d: f64 = s.iter().zip(&v).map(|(a, b)| a * b).sum();
                    (lo.min(d), hi.max(d))
                });
                // some cone member is orthogonal to v iff s.v takes both signs
                let oracle = lo <= tol && hi >= -tol;
                if oracle != basis.in_s_perp(&v, tol) {
                    disagreements += 1;
                }
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    Verdict {
        pass: disagreements == 0 && elapsed < CONE_BUDGET,
        detail: format!("{disagreements} disagreements in {checked} vectors, {:.2}s", elapsed.as_secs_f64()),
    }
}

fn proof_case(i: usize, j: usize, q: usize) -> usize {
    match (i <= q, j < q) {
        (true, true) if j < i => 0,
        (true, true) => 1,
        (true, false) => 2,
        (false, true) => 3,
        (false, false) if j < i => 4,
        (false, false) => 5,
    }
}

fn orthogonality() -> Verdict {
    let mut worst = [0.0f64; 6];
    let mut counts = [0usize; 6];
    for m in 2..=6 {
        for q in 1..m {
            let basis = ConeBasis::build(&PreferenceTuple::canonical(q, m).unwrap());
            let (a, at) = (basis.polyhedral_normals(), basis.extreme_directions());
            for (i, ai) in at.iter().enumerate() {
                for j in (0..m).filter(|&j| j != i) {
                    let d: f64 = ai.iter().zip(&a[j]).map(|(x, y)| x * y).sum();
                    let c = proof_case(i, j, q);
                    worst[c] = worst[c].max(d.abs());
                    counts[c] += 1;
                }
            }
        }
    }
    let cases: Vec<String> = (0..6).map(|c| format!("case {}: {} pairs, max {:.1e}", c + 1, counts[c], worst[c])).collect();
    Verdict {
        pass: worst.iter().all(|w| *w <= ORTHOGONALITY_TOL) && counts.iter().all(|c| *c > 0),
        detail: cases.join("; "),
    }
}

fn inclusion_exclusion(points: &[Vec<f64>], z: &[f64]) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let vol: f64 = (0..z.len())
            .map(|i| {
                let lo = (0..n).filter(|j| mask >> j & 1 == 1).map(|j| points[j][i]).fold(f64::INFINITY, f64::min);
                (lo - z[i]).max(0.0)
            })
            .product();
        total += if mask.count_ones() % 2 == 1 { vol } else { -vol };
    }
    total
}

fn hypervolume_exactness() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(23);
    let mut worst_hv = 0.0f64;
    let mut worst_weighted = 0.0f64;
    for _ in 0..HV_INSTANCES {
        let n = r.random_range(1..=6);
        let m = r.random_range(1..=3);
        // coarse values make ties and shared coordinates common
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| r.random_range(-2..=6) as f64 * 0.5).collect()).collect();
        let z = vec![-0.25; m];
        let hv = hypervolume(&points, &z).unwrap();
        worst_hv = worst_hv.max((hv - inclusion_exclusion(&points, &z)).abs());

        let probs: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let archive = ParetoArchive {
            points: points
                .iter()
                .zip(&probs)
                .map(|(y, p)| ArchivePoint { x: vec![], y: y.clone(), prob: Some(*p) })
                .collect(),
            reference: z.clone(),
        };
        let mut expected = 0.0;
        for mask in 0u32..(1 << n) {
            let weight: f64 = (0..n).map(|j| if mask >> j & 1 == 1 { probs[j] } else { 1.0 - probs[j] }).product();
            let valid: Vec<Vec<f64>> = (0..n).filter(|j| mask >> j & 1 == 1).map(|j| points[j].clone()).collect();
            if !valid.is_empty() {
                expected += weight * inclusion_exclusion(&valid, &z);
            }
        }
        worst_weighted = worst_weighted.max((weighted_expected_hv(&archive).unwrap() - expected).abs());
    }
    Verdict {
        pass: worst_hv <= HV_TOL && worst_weighted <= HV_TOL,
        detail: format!("max |hv - oracle| {worst_hv:.1e}, max |weighted - enumeration| {worst_weighted:.1e}"),
    }
}

fn random_model(r: &mut ChaCha8Rng) -> GpModel {
    let dim = r.random_range(1..=3);
    let n_obs = r.random_range(3..=12);
    let inputs = DMatrix::from_fn(n_obs, dim, |_, _| r.random::<f64>());
    let targets = DVector::from_fn(n_obs, |_, _| r.random::<f64>() * 2.0 - 1.0);
    let ls: Vec<f64> = (0..dim).map(|_| 0.15 + r.random::<f64>()).collect();
    let kernel = KernelSpec::new(0.2 + 2.0 * r.random::<f64>(), ls, 1e-6 + 1e-2 * r.random::<f64>()).unwrap();
    GpModel::new(kernel, inputs, targets).unwrap()
}

fn gradient_posterior_fd() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for _ in 0..FD_MODELS {
        let model = random_model(&mut r);
        let dim = model.dim();
        for _ in 0..FD_POINTS {
            let x: Vec<f64> = (0..dim).map(|_| r.random::<f64>() * 1.4 - 0.2).collect();
            let g = model.gradient_posterior(&x).unwrap().mean;
            let fd: Vec<f64> = (0..dim)
                .map(|j| {
                    let f = |d: f64| {
                        let mut p = x.clone();
                        p[j] += d * FD_STEP;
                        model.posterior(&p).unwrap().0
                    };
                    // five-point central stencil
                    (f(-2.0) - 8.0 * f(-1.0) + 8.0 * f(1.0) - f(2.0)) / (12.0 * FD_STEP)
                })
                .collect();
            let scale = fd.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-6);
            let err = (0..dim).fold(0.0f64, |a, j| a.max((g[j] - fd[j]).abs()));
            worst = worst.max(err / scale);
        }
    }
    Verdict {
        pass: worst < FD_REL_TOL,
        detail: format!("max relative error {worst:.2e} over {FD_MODELS} models x {FD_POINTS} points"),
    }
}

fn pehi_degeneracy() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(47);
    let basis = ConeBasis::build(&PreferenceTuple::canonical(1, 2).unwrap());
    let mut worst_ratio = 0.0f64;
    let mut zero_ok = true;
    for state in 0..PEHI_STATES {
        let n_obs = r.random_range(3..=8);
        let xs: Vec<Vec<f64>> = (0..n_obs).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![(3.0 * x[0]).sin() + x[1], x[0] * x[1] - x[1]]).collect();
        let inputs = DMatrix::from_fn(n_obs, 2, |i, j| xs[i][j]);
        let models: Vec<GpModel> = (0..2)
            .map(|k| {
                let kernel = KernelSpec::new(1.0, vec![0.4, 0.6], 1e-4).unwrap();
                GpModel::new(kernel, inputs.clone(), DVector::from_iterator(n_obs, ys.iter().map(|y| y[k]))).unwrap()
            })
            .collect();
        let z = vec![-3.0, -3.0];
        let x = [r.random::<f64>(), r.random::<f64>()];
        let key = 1000 + state as u64;
        let tabulated = AcquisitionSettings { acquisition_samples: 2000, ..Default::default() };
        let rebuild = AcquisitionSettings { cell_evaluation: CellEvaluation::Rebuild, ..tabulated.clone() };
        let ehi_ctx = AcquisitionContext::new(models.clone(), ys.clone(), z.clone(), vec![], tabulated, 0).unwrap();
        let pehi_ctx = AcquisitionContext::new(models, ys, z, vec![basis.clone()], rebuild, 0)
            .unwrap()
            .with_archive_probs(vec![1.0; n_obs])
            .unwrap();
        let e = ehi_ctx.ehi_estimate(&x, key).unwrap();
        let p = pehi_ctx.pehi_given_prob(&x, 1.0, key).unwrap();
        let se = (e.std_error.powi(2) + p.std_error.powi(2)).sqrt();
        let diff = (e.value - p.value).abs();
        let ratio = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
        worst_ratio = worst_ratio.max(ratio);
        zero_ok &= pehi_ctx.pehi_given_prob(&x, 0.0, key).unwrap().value == 0.0;
    }
    Verdict {
        pass: worst_ratio < PEHI_SE_FACTOR && zero_ok,
        detail: format!("max |pehi - ehi| / SE {worst_ratio:.3} over {PEHI_STATES} states; s_x = 0 gives 0: {zero_ok}"),
    }
}

struct Study {
    compliance: Vec<f64>,
    slowest: Duration,
}

fn study(benchmark: &str, iterations: usize, constrained: bool) -> Study {
    let spec = get_benchmark(benchmark).unwrap();
    let space = SearchSpace::Box(spec.design_bounds());
    let results: Vec<(f64, Duration)> = std::thread::scope(|s| {
        let handles: Vec<_> = SEEDS
            .iter()
            .map(|&seed| {
                let (spec, space) = (&spec, &space);
                s.spawn(move || {
                    let mut config = RunConfig::new(vec![Direction::Minimise; spec.num_objectives], iterations, seed);
                    config.initial_design = Some(5);
                    if constrained {
                        config.preferences = vec![vec![0, 1]];
                    } else {
                        config.compliance_preferences = Some(vec![vec![0, 1]]);
                    }
                    let start = Instant::now();
                    let outcome = execute(spec, space, &config).unwrap();
                    (outcome.compliance.unwrap().fraction, start.elapsed())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    Study {
        compliance: results.iter().map(|r| r.0).collect(),
        slowest: results.iter().map(|r| r.1).max().unwrap(),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("poloni.toml");
    std::fs::write(
        &config,
        "iterations = 5\ninitial_design = 5\nseed = 12\npreferences = [[0, 1]]\n[objective]\nbenchmark = \"poloni\"\n",
    )
    .unwrap();
    let pareto = |name: &str| {
        let out = dir.path().join(name);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_mobo-pc"))
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("pareto.json")).unwrap()
    };
    let (a, b) = (pareto("a"), pareto("b"));
    Verdict {
        pass: a == b,
        detail: format!("pareto.json {} bytes, identical: {}", a.len(), a == b),
    }
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |id: usize, name: &str, v: Verdict| {
        all &= v.pass;
        println!("[{}] {id}. {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    };
    report(1, "cone oracle equivalence", cone_oracle());
    report(2, "basis orthogonality", orthogonality());
    report(3, "hypervolume exactness", hypervolume_exactness());
    report(4, "gradient posterior vs finite differences", gradient_posterior_fd());
    report(5, "PEHI degeneracy", pehi_degeneracy());

    let schaffer = study("schaffer_n1", SCHAFFER_ITERATIONS, true);
    let poloni = study("poloni", POLONI_ITERATIONS, true);
    let (s_mean, p_mean) = (mean(&schaffer.compliance), mean(&poloni.compliance));
    let slowest = schaffer.slowest.max(poloni.slowest);
    report(
        6,
        "benchmark compliance",
        Verdict {
            pass: s_mean >= SCHAFFER_MIN_COMPLIANCE && p_mean >= POLONI_MIN_COMPLIANCE && slowest < RUN_BUDGET,
            detail: format!(
                "schaffer mean {s_mean:.3} [{}] (>= {SCHAFFER_MIN_COMPLIANCE}), poloni mean {p_mean:.3} [{}] (>= {POLONI_MIN_COMPLIANCE}), slowest run {:.1}s",
                fmt_list(&schaffer.compliance),
                fmt_list(&poloni.compliance),
                slowest.as_secs_f64()
            ),
        },
    );

    let ehi = study("schaffer_n1", SCHAFFER_ITERATIONS, false);
    let e_mean = mean(&ehi.compliance);
    report(
        7,
        "baseline contrast",
        Verdict {
            pass: s_mean - e_mean >= EHI_MIN_GAP,
            detail: format!("constrained {s_mean:.3} vs plain EHI {e_mean:.3} [{}], gap {:.3} (>= {EHI_MIN_GAP})", fmt_list(&ehi.compliance), s_mean - e_mean),
        },
    );

    report(8, "determinism", determinism());

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
