//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use compreg_core::robust::{constant_score, linear_score, local_mad, local_s_scale, s_scale};
use compreg_core::{
    aitchison_dist, alr, closure, clr, error_sample, fit_local_linear_ls, fit_local_linear_m,
    fit_local_m, generate_replication, ilr, inv_alr, inv_clr, inv_ilr, ise, kernel_weights,
    perturb, pivot_contrast_matrix, power, select_bandwidth, true_regression, CvConfig,
    CvCriterion, Dataset, ErrorLaw, FitOptions, Folds, KernelSpec, LocalDegree, McScenario,
    Method, MSmootherConfig, RhoSpec, RngStream, ScaleKind, ScaleSpec, SimplexPoint, Smoother,
};
use rand::Rng;
use sha2::{Digest, Sha256};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// One row of `mise_bias.csv`.
struct Cell {
    estimator: String,
    scenario: String,
    mise: f64,
    bias2: f64,
}

struct McRun {
    dir: PathBuf,
    cells: Vec<Cell>,
    elapsed: Duration,
}

impl McRun {
    fn cell(&self, estimator: &str, scenario: &str) -> &Cell {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.scenario == scenario)
            .unwrap_or_else(|| panic!("no cell {estimator} / {scenario}"))
    }
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run_mc(config_file: &str, threads: usize, out: &Path) -> McRun {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_compreg"))
        .arg("mc")
        .arg("--config")
        .arg(config(config_file))
        .arg("--threads")
        .arg(threads.to_string())
        .arg("--out")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("compreg runs");
    let elapsed = start.elapsed();
    assert!(status.success(), "compreg mc failed: {status}");
    let text = fs::read_to_string(out.join("mise_bias.csv")).expect("mise_bias.csv");
    let cells = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            Cell {
                estimator: f[0].to_string(),
                scenario: f[1].to_string(),
                mise: f[2].parse().expect("MISE"),
                bias2: f[3].parse().expect("Bias2"),
            }
        })
        .collect();
    McRun {
        dir: out.to_path_buf(),
        cells,
        elapsed,
    }
}

fn within_relative(run: &McRun, scenario: &str, targets: [f64; 4], tol: f64) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (est, target) in ["CL0", "CL1", "ROB0", "ROB1"].iter().zip(targets) {
        let got = run.cell(est, scenario).mise;
        let rel = (got - target) / target;
        pass &= rel.abs() <= tol;
        parts.push(format!("{est} {got:.4} vs {target} ({:+.1}%)", 100.0 * rel));
    }
    Outcome::new(pass, parts.join(", "))
}

fn criterion_1(t1: &McRun) -> Outcome {
    let mut o = within_relative(t1, "a5-7-1_C0", [0.2856, 0.0489, 0.2853, 0.0539], 0.15);
    let fast = t1.elapsed <= Duration::from_secs(15 * 60);
    o.pass &= fast;
    o.detail += &format!("; runtime {:.1}s", t1.elapsed.as_secs_f64());
    o
}

fn criterion_2(t1: &McRun) -> Outcome {
    let rob10 = t1.cell("ROB1", "a5-7-1_C1_0.10_10").mise;
    let cl10 = t1.cell("CL1", "a5-7-1_C1_0.10_10").mise;
    let rob5 = t1.cell("ROB1", "a5-7-1_C1_0.10_5").mise;
    Outcome::new(
        rob10 <= 0.08 && cl10 >= 1.0 && rob5 <= 0.12,
        format!("C1(0.10,10): ROB1 {rob10:.4} <= 0.08, CL1 {cl10:.4} >= 1.0; C1(0.10,5): ROB1 {rob5:.4} <= 0.12"),
    )
}

fn criterion_3(t2: &McRun) -> Outcome {
    within_relative(t2, "a5-7-4_C0", [0.1801, 0.0456, 0.1794, 0.0481], 0.15)
}

fn criterion_4(t1: &McRun, t2: &McRun) -> Outcome {
    let bad: Vec<String> = t1
        .cells
        .iter()
        .chain(&t2.cells)
        .filter(|c| c.bias2 > c.mise)
        .map(|c| format!("{}/{}", c.estimator, c.scenario))
        .collect();
    let cl1 = t1.cell("CL1", "a5-7-1_C0").bias2;
    Outcome::new(
        bad.is_empty() && cl1 <= 0.03,
        format!(
            "{} cells with Bias2 > MISE{}; CL1 C0 Bias2 {cl1:.4} <= 0.03",
            bad.len(),
            if bad.is_empty() { String::new() } else { format!(" ({})", bad.join(" ")) }
        ),
    )
}

fn random_composition(rng: &mut RngStream, d: usize) -> SimplexPoint {
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(1e-3..1.0)).collect();
    closure(&raw).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_5() -> Outcome {
    let mut rng = RngStream::new(5, 0);
    let (mut iso, mut trip, mut group) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let d = rng.random_range(2..=10);
        let x = random_composition(&mut rng, d);
        let y = random_composition(&mut rng, d);
        let z = random_composition(&mut rng, d);
        let a = rng.random_range(-3.0..3.0);
        iso = iso.max((aitchison_dist(&x, &y).unwrap() - ilr(&x).distance(&ilr(&y))).abs());
        trip = trip
            .max(max_diff(inv_ilr(&ilr(&x)).unwrap().parts(), x.parts()))
            .max(max_diff(inv_clr(&clr(&x)).unwrap().parts(), x.parts()))
            .max(max_diff(inv_alr(&alr(&x)).unwrap().parts(), x.parts()));
        let xy = perturb(&x, &y).unwrap();
        let neutral = SimplexPoint::neutral(d).unwrap();
        let checks = [
            max_diff(xy.parts(), perturb(&y, &x).unwrap().parts()),
            max_diff(
                perturb(&xy, &z).unwrap().parts(),
                perturb(&x, &perturb(&y, &z).unwrap()).unwrap().parts(),
            ),
            max_diff(perturb(&x, &neutral).unwrap().parts(), x.parts()),
            max_diff(perturb(&x, &x.inverse()).unwrap().parts(), neutral.parts()),
            max_diff(
                power(a, &xy).unwrap().parts(),
                perturb(&power(a, &x).unwrap(), &power(a, &y).unwrap()).unwrap().parts(),
            ),
        ];
        group = checks.iter().copied().fold(group, f64::max);
    }
    let mut contrast = 0.0f64;
    for d in 2..=10 {
        let m = pivot_contrast_matrix(d).unwrap();
        let u = m.as_matrix();
        let utu = u.transpose() * u;
        let uut = u * u.transpose();
        for i in 0..d {
            for j in 0..d {
                let centering = if i == j { 1.0 } else { 0.0 } - 1.0 / d as f64;
                contrast = contrast.max((uut[(i, j)] - centering).abs());
                if i < d - 1 && j < d - 1 {
                    contrast = contrast.max((utu[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs());
                }
            }
        }
    }
    Outcome::new(
        iso <= 1e-10 && trip <= 1e-12 && group <= 1e-12 && contrast <= 1e-12,
        format!(
            "10^4 points: isometry {iso:.1e}, round trips {trip:.1e}, group laws {group:.1e}, contrast identities {contrast:.1e}"
        ),
    )
}

fn normal(rng: &mut RngStream) -> f64 {
    error_sample(&ErrorLaw::clean(), rng)
}

fn point(c: &[f64]) -> SimplexPoint {
    inv_ilr(&compreg_core::IlrVector::new(c.to_vec()).unwrap()).unwrap()
}

fn random_data(rng: &mut RngStream, n: usize, f: impl Fn(&[f64]) -> f64) -> Dataset {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..n {
        let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        ys.push(f(&c) + normal(rng));
        xs.push(point(&c));
    }
    Dataset::new(xs, ys).unwrap()
}

/// Weighted normal equations with rows `(1, u_i - x)`, Gaussian weights, Gaussian elimination.
fn brute_force_intercept(data: &Dataset, x: &[f64], h: f64) -> f64 {
    let mut a = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for (u, y) in data.covariates().iter().zip(data.responses()) {
        let c = ilr(u);
        let row = [1.0, c.coords()[0] - x[0], c.coords()[1] - x[1]];
        let w = (-((row[1]).powi(2) + (row[2]).powi(2)) / (2.0 * h * h)).exp();
        for r in 0..3 {
            b[r] += w * row[r] * y;
            for s in 0..3 {
                a[r][s] += w * row[r] * row[s];
            }
        }
    }
    for col in 0..3 {
        let p = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for k in col..3 {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut beta = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|k| a[r][k] * beta[k]).sum();
        beta[r] = (b[r] - s) / a[r][r];
    }
    beta[0]
}

fn criterion_6() -> Outcome {
    let mut rng = RngStream::new(6, 0);
    let mut worst_a = 0.0f64;
    for _ in 0..100 {
        let data = random_data(&mut rng, 10, |c| 1.0 + c[0] - c[1]);
        let h = rng.random_range(0.5..2.0);
        let q = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let fitted = fit_local_linear_ls(&KernelSpec::isotropic(h, 2).unwrap(), &data, &point(&q))
            .unwrap()
            .intercept;
        let oracle = brute_force_intercept(&data, &q, h);
        worst_a = worst_a.max((fitted - oracle).abs() / (1.0 + oracle.abs()));
    }

    let spec = ScaleSpec::new(ScaleKind::LocalS, RhoSpec::hard_rejection(), 0.5).unwrap();
    let mut worst_b = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(5..50);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| 2.0 * normal(&mut rng)).collect();
        let m = normal(&mut rng);
        let s = local_s_scale(&w, &y, m, &spec).unwrap();
        let mad = local_mad(&w, &y, m).unwrap();
        worst_b = worst_b.max((s - mad).abs() / mad);
    }

    let d = MSmootherConfig::default();
    let huber = MSmootherConfig::new(RhoSpec::huber(1e6).unwrap(), *d.scale(), 200, 1e-12, LocalDegree::Linear)
        .unwrap();
    let mut worst_c = 0.0f64;
    for _ in 0..100 {
        let data = random_data(&mut rng, 30, |c| c[0] * c[1]);
        let x = point(&[rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]);
        let spec = KernelSpec::isotropic(0.8, 2).unwrap();
        let m = fit_local_linear_m(&spec, &huber, &data, &x, 1.0).unwrap().estimate;
        let ls = fit_local_linear_ls(&spec, &data, &x).unwrap().intercept;
        worst_c = worst_c.max((m - ls).abs());
    }
    Outcome::new(
        worst_a <= 1e-10 && worst_b <= 1e-10 && worst_c <= 1e-6,
        format!(
            "(a) local linear vs brute force {worst_a:.1e}; (b) hard-rejection S vs MAD {worst_b:.1e}; (c) Huber 1e6 vs LS {worst_c:.1e}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let (mut fits, mut converged, mut worst) = (0, 0, 0.0f64);
    for law in [ErrorLaw::clean(), ErrorLaw::contaminated(0.1, 10.0).unwrap()] {
        let sc = McScenario::alpha_571(law, 7).unwrap();
        let spec = KernelSpec::isotropic(sc.h, 2).unwrap();
        for r in 0..5 {
            let rep = generate_replication(&sc, r).unwrap();
            let sigma = Smoother::new(&rep.data, &spec, &FitOptions::new(Method::Rob1))
                .unwrap()
                .global_scale()
                .unwrap();
            for x in rep.prediction_points.iter().take(50) {
                let w = kernel_weights(&spec, &rep.data, x).unwrap();
                let cfg = sc.robust.with_degree(LocalDegree::Constant);
                let f = fit_local_m(&spec, &cfg, &rep.data, x, sigma).unwrap();
                fits += 1;
                if f.converged {
                    converged += 1;
                    let s = constant_score(w.as_slice(), rep.data.responses(), f.estimate, sigma, cfg.rho1());
                    worst = worst.max(s.abs());
                }
                let cfg = sc.robust.with_degree(LocalDegree::Linear);
                fits += 1;
                if let Ok(f) = fit_local_linear_m(&spec, &cfg, &rep.data, x, sigma) {
                    if f.converged {
                        converged += 1;
                        let slope = f.slope.as_ref().unwrap();
                        let s = linear_score(w.as_slice(), &rep.data, &ilr(x), f.estimate, slope, sigma, cfg.rho1());
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
    }
    Outcome::new(
        worst <= 1e-6,
        format!("{converged}/{fits} fits converged; worst normalized score {worst:.1e} <= 1e-6"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = RngStream::new(8, 0);
    let r: Vec<f64> = (0..100_000).map(|_| normal(&mut rng)).collect();
    let w = vec![1.0; r.len()];
    let s = s_scale(&w, &r, &RhoSpec::tukey(1.54764).unwrap(), 0.5).unwrap();
    Outcome::new((0.98..=1.02).contains(&s), format!("scale {s:.4} in [0.98, 1.02]"))
}

fn ise_at(data: &Dataset, h: f64, method: Method, queries: &[SimplexPoint], truths: &[f64]) -> f64 {
    let spec = KernelSpec::isotropic(h, 2).unwrap();
    let sm = Smoother::new(data, &spec, &FitOptions::new(method)).unwrap();
    let est: Vec<f64> = queries
        .iter()
        .map(|q| sm.fit_point(&ilr(q)).unwrap().estimate)
        .collect();
    ise(&est, truths).unwrap()
}

fn criterion_9() -> Outcome {
    let grid = vec![0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0];
    let mut passed = 0;
    let mut notes = Vec::new();
    for seed in 1..=20u64 {
        let sc = McScenario::alpha_571(ErrorLaw::contaminated(0.1, 10.0).unwrap(), 900 + seed).unwrap();
        let rep = generate_replication(&sc, 0).unwrap();
        let truths: Vec<f64> = rep
            .prediction_points
            .iter()
            .map(|x| true_regression(x, &sc.b_comp).unwrap())
            .collect();
        let rob_ise: Vec<f64> = grid
            .iter()
            .map(|h| ise_at(&rep.data, *h, Method::Rob1, &rep.prediction_points, &truths))
            .collect();
        let oracle = rob_ise.iter().copied().fold(f64::INFINITY, f64::min);

        let robust_cfg = CvConfig::new(grid.clone(), Folds::K(5), CvCriterion::Robust, seed).unwrap();
        let h_rob = select_bandwidth(&rep.data, &robust_cfg, &FitOptions::new(Method::Rob1))
            .unwrap()
            .chosen_h;
        let ls_cfg = CvConfig::new(grid.clone(), Folds::K(5), CvCriterion::LeastSquares, seed).unwrap();
        let h_ls = select_bandwidth(&rep.data, &ls_cfg, &FitOptions::new(Method::Cl1))
            .unwrap()
            .chosen_h;
        let rob_ratio = ise_at(&rep.data, h_rob, Method::Rob1, &rep.prediction_points, &truths) / oracle;
        let ls_ratio = ise_at(&rep.data, h_ls, Method::Cl1, &rep.prediction_points, &truths) / oracle;
        if rob_ratio <= 2.0 && ls_ratio >= 5.0 {
            passed += 1;
        } else {
            notes.push(format!("seed {seed}: robust {rob_ratio:.2}x, ls {ls_ratio:.1}x"));
        }
    }
    let mut detail = format!("{passed}/20 seeds pass (need 16)");
    if !notes.is_empty() {
        detail += &format!("; misses: {}", notes.join(", "));
    }
    Outcome::new(passed >= 16, detail)
}

fn sha256(path: &Path) -> String {
    let bytes = fs::read(path).expect("output file");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn criterion_10(one: &McRun, many: &McRun) -> Outcome {
    let files = ["mise_bias.csv", "ise.csv"];
    let same = files
        .iter()
        .all(|f| sha256(&one.dir.join(f)) == sha256(&many.dir.join(f)));
    Outcome::new(
        same,
        format!(
            "sha256 of mise_bias.csv {} with 1 and 8 threads",
            if same { "and ise.csv identical" } else { "or ise.csv differ" }
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let t1 = run_mc("alpha-5-7-1.toml", 8, &tmp.path().join("a571_t8"));
    let t1_single = run_mc("alpha-5-7-1.toml", 1, &tmp.path().join("a571_t1"));
    let t2 = run_mc("alpha-5-7-4.toml", 8, &tmp.path().join("a574"));

    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "alpha (5,7,1) clean MISE", criterion_1(&t1)),
        (2, "alpha (5,7,1) contaminated", criterion_2(&t1)),
        (3, "alpha (5,7,4) clean MISE", criterion_3(&t2)),
        (4, "Bias2 <= MISE", criterion_4(&t1, &t2)),
        (5, "geometry properties", criterion_5()),
        (6, "oracle equivalences", criterion_6()),
        (7, "fixed-point certificates", criterion_7()),
        (8, "S-scale Fisher consistency", criterion_8()),
        (9, "robust CV sanity", criterion_9()),
        (10, "thread-count determinism", criterion_10(&t1_single, &t1)),
    ];
    let mut failed = 0;
    for (id, name, o) in &results {
        println!(
            "criterion {id:>2} {:<28} {}  {}",
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
