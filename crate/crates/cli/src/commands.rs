use std::path::PathBuf;

use compreg_core::bandwidth::{CvConfig, CvCriterion, Dispersion, Folds};
use compreg_core::io::{flag_outliers, make_grid, read_dataset, ternary, write_dataset, GridSpec};
use compreg_core::mc::{error_law_label, generate_replication, run_study, McReport, McScenario, REFERENCE_B};
use compreg_core::robust::{TUKEY_LOCATION_C1, TUKEY_SCALE_C0, S_SCALE_B};
use compreg_core::{
    ilr, select_bandwidth, Dataset, DirichletParams, ErrorLaw, FitOptions, IlrVector,
    KernelSpec, MSmootherConfig, Method, PointFit, RhoSpec, ScaleKind, ScaleMode, ScaleSpec,
    SimplexPoint, Smoother,
};

use crate::config::{FoldsSetting, RunConfig, DEFAULT_SEED, SCHEMA_VERSION};
use crate::error::CliError;
use crate::output::{num, opt_num, out_dir, preamble, write_resolved_config, write_table};

const DEFAULT_ALPHA: [f64; 3] = [5.0, 7.0, 1.0];
const DEFAULT_CONTAMINATIONS: [[f64; 2]; 3] = [[0.0, 0.0], [0.1, 5.0], [0.1, 10.0]];

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn fill_common(cfg: &mut RunConfig) {
    cfg.schema_version = Some(SCHEMA_VERSION);
    cfg.seed.get_or_insert(DEFAULT_SEED);
    cfg.threads = Some(rayon::current_num_threads());
    cfg.out_dir.get_or_insert_with(|| PathBuf::from("."));
}

fn fill_robust(cfg: &mut RunConfig) {
    cfg.c0.get_or_insert(TUKEY_SCALE_C0);
    cfg.c1.get_or_insert(TUKEY_LOCATION_C1);
    cfg.b.get_or_insert(S_SCALE_B);
    cfg.max_iter.get_or_insert(100);
    cfg.tol.get_or_insert(1e-8);
}

fn fill_estimator(cfg: &mut RunConfig) {
    cfg.method.get_or_insert_with(|| "rob1".into());
    cfg.scale_mode.get_or_insert_with(|| "global".into());
    if cfg.scale_mode.as_deref() == Some("local") {
        cfg.local_scale.get_or_insert_with(|| "s".into());
    }
    cfg.fallback.get_or_insert(true);
    fill_robust(cfg);
}

fn robust_config(cfg: &RunConfig, kind: ScaleKind, method: Method) -> Result<MSmootherConfig, CliError> {
    let rho0 = RhoSpec::tukey(cfg.c0.expect("filled"))?;
    let scale = ScaleSpec::new(kind, rho0, cfg.b.expect("filled"))?;
    Ok(MSmootherConfig::new(
        RhoSpec::tukey(cfg.c1.expect("filled"))?,
        scale,
        cfg.max_iter.expect("filled"),
        cfg.tol.expect("filled"),
        method.degree(),
    )?)
}

fn fit_options(cfg: &RunConfig) -> Result<FitOptions, CliError> {
    let method: Method = cfg.method.as_deref().expect("filled").parse()?;
    let (scale_mode, kind) = match cfg.scale_mode.as_deref().expect("filled") {
        "global" => (ScaleMode::Global, ScaleKind::GlobalS),
        "local" => match cfg.local_scale.as_deref().expect("filled") {
            "mad" => (ScaleMode::Local, ScaleKind::LocalMad),
            "s" => (ScaleMode::Local, ScaleKind::LocalS),
            other => return Err(usage(format!("local_scale: expected mad or s, got {other:?}"))),
        },
        other => return Err(usage(format!("scale_mode: expected global or local, got {other:?}"))),
    };
    Ok(FitOptions {
        method,
        robust: robust_config(cfg, kind, method)?,
        scale_mode,
        fallback_to_constant: cfg.fallback.expect("filled"),
    })
}

fn load_data(cfg: &RunConfig) -> Result<compreg_core::io::DataFile, CliError> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| usage("no dataset: set --data or data in the config"))?;
    Ok(read_dataset(path)?)
}

fn require_h(cfg: &RunConfig) -> Result<f64, CliError> {
    cfg.h.ok_or_else(|| usage("no bandwidth: set --h or h in the config"))
}

fn grid_points(cfg: &RunConfig, parts: usize) -> Result<Option<(Vec<IlrVector>, Vec<SimplexPoint>)>, CliError> {
    let Some(text) = &cfg.grid else {
        return Ok(None);
    };
    let gs = GridSpec::parse(text)?;
    if gs.coord_dim() + 1 != parts {
        return Err(usage(format!(
            "grid has {} ilr axes but the data have {parts} parts",
            gs.coord_dim()
        )));
    }
    Ok(Some(make_grid(&gs)))
}

/// Grid rows leave `residual` empty.
fn point_header(parts: usize) -> Vec<String> {
    let mut h = vec!["point_id".to_string()];
    h.extend((1..=parts).map(|j| format!("x{j}")));
    h.extend((1..parts).map(|j| format!("ilr{j}")));
    h.push("estimate".into());
    h.push("residual".into());
    h.push("converged".into());
    if parts == 3 {
        h.push("tern_x".into());
        h.push("tern_y".into());
    }
    h
}

fn point_row(id: usize, x: &SimplexPoint, fit: &Option<PointFit>, residual: Option<f64>) -> Vec<String> {
    let mut row = vec![id.to_string()];
    row.extend(x.parts().iter().map(|v| num(*v)));
    row.extend(ilr(x).coords().iter().map(|v| num(*v)));
    row.push(fit.as_ref().map(|f| num(f.estimate)).unwrap_or_else(|| "NaN".into()));
    row.push(opt_num(residual));
    row.push(fit.as_ref().is_some_and(|f| f.converged).to_string());
    if let Some((tx, ty)) = ternary(x) {
        row.push(num(tx));
        row.push(num(ty));
    }
    row
}

fn fitted_smoother<'a>(cfg: &RunConfig, data: &'a Dataset) -> Result<Smoother<'a>, CliError> {
    let h = require_h(cfg)?;
    let spec = KernelSpec::isotropic(h, data.parts() - 1)?;
    Ok(Smoother::new(data, &spec, &fit_options(cfg)?)?)
}

fn write_grid_fits(
    cfg: &RunConfig,
    smoother: &Smoother,
    grid: &(Vec<IlrVector>, Vec<SimplexPoint>),
    file: &str,
    command: &str,
) -> Result<usize, CliError> {
    let fits = smoother.fit_points(&grid.0);
    let failures = fits.iter().filter(|f| f.is_err()).count();
    let rows: Vec<Vec<String>> = grid
        .1
        .iter()
        .zip(fits)
        .enumerate()
        .map(|(i, (x, f))| point_row(i + 1, x, &f.ok(), None))
        .collect();
    let dir = out_dir(cfg)?;
    write_table(
        &dir.join(file),
        &preamble(command, cfg),
        &point_header(grid.1[0].dim()),
        &rows,
    )?;
    Ok(failures)
}

pub fn simulate(mut cfg: RunConfig) -> Result<(), CliError> {
    fill_common(&mut cfg);
    let alpha = cfg.alpha.get_or_insert_with(|| DEFAULT_ALPHA.to_vec()).clone();
    let b_comp = cfg.b_comp.get_or_insert_with(|| REFERENCE_B.to_vec()).clone();
    let n = *cfg.n.get_or_insert(100);
    let sigma = *cfg.sigma.get_or_insert(1.0);
    let delta = *cfg.delta.get_or_insert(0.0);
    let shift = *cfg.shift.get_or_insert(0.0);
    let sd = *cfg.sd_contam.get_or_insert(0.1);
    let rep = *cfg.rep.get_or_insert(0);
    let sc = McScenario {
        name: "simulate".into(),
        alpha: DirichletParams::new(alpha)?,
        b_comp: SimplexPoint::new(&b_comp)?,
        sigma,
        error_law: ErrorLaw::new(delta, shift, sd)?,
        n,
        n_reps: 1,
        n_pred: 1,
        h: 1.0,
        methods: Method::ALL.to_vec(),
        robust: MSmootherConfig::default(),
        seed: cfg.seed.expect("filled"),
    };
    sc.validate()?;
    let replication = generate_replication(&sc, rep)?;
    let dir = out_dir(&cfg)?;
    write_resolved_config(&dir, &cfg)?;
    let path = dir.join("data.csv");
    let mut text = Vec::new();
    compreg_core::io::write_comment_block(&mut text, &preamble("simulate", &cfg))
        .and_then(|_| write_dataset(&mut text, &replication.data))
        .map_err(|e| CliError::io("data.csv", e))?;
    std::fs::write(&path, text).map_err(|e| CliError::io(&path.display().to_string(), e))?;
    let outliers = replication.contaminated.iter().filter(|c| **c).count();
    println!("wrote {} ({n} observations, {outliers} contaminated)", path.display());
    Ok(())
}

pub fn fit(mut cfg: RunConfig) -> Result<(), CliError> {
    fill_common(&mut cfg);
    fill_estimator(&mut cfg);
    let file = load_data(&cfg)?;
    let data = &file.dataset;
    let grid = grid_points(&cfg, data.parts())?;
    let smoother = fitted_smoother(&cfg, data)?;
    let dir = out_dir(&cfg)?;
    write_resolved_config(&dir, &cfg)?;

    let fits: Vec<Option<PointFit>> = smoother
        .fit_points(data.ilr_coords())
        .into_iter()
        .map(|f| f.ok())
        .collect();
    if fits.iter().all(|f| f.is_none()) {
        return Err(CliError::Numerical(
            "the fit failed at every observation; try a larger bandwidth".into(),
        ));
    }
    let residuals: Vec<Option<f64>> = fits
        .iter()
        .zip(data.responses())
        .map(|(f, y)| f.as_ref().map(|f| y - f.estimate))
        .collect();
    let rows: Vec<Vec<String>> = data
        .covariates()
        .iter()
        .zip(&fits)
        .zip(&residuals)
        .enumerate()
        .map(|(i, ((x, f), r))| point_row(i + 1, x, f, *r))
        .collect();
    let pre = preamble("fit", &cfg);
    write_table(&dir.join("fit_data.csv"), &pre, &point_header(data.parts()), &rows)?;

    let usable: Vec<(usize, f64)> = residuals
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|r| (i, r)))
        .collect();
    let values: Vec<f64> = usable.iter().map(|(_, r)| *r).collect();
    let report = flag_outliers(&values);
    let flagged: Vec<usize> = report.flagged.iter().map(|&k| usable[k].0).collect();
    let outlier_rows: Vec<Vec<String>> = usable
        .iter()
        .map(|&(i, r)| {
            vec![
                (i + 1).to_string(),
                file.lines[i].to_string(),
                num(r),
                flagged.contains(&i).to_string(),
            ]
        })
        .collect();
    let fences = format!(
        "{pre}q1 = {}\nq3 = {}\nlower_fence = {}\nupper_fence = {}\n",
        num(report.q1),
        num(report.q3),
        num(report.lower_fence),
        num(report.upper_fence)
    );
    let header: Vec<String> = ["point_id", "line", "residual", "flagged"].map(String::from).to_vec();
    write_table(&dir.join("outliers.csv"), &fences, &header, &outlier_rows)?;

    let failed = fits.iter().filter(|f| f.is_none()).count();
    println!(
        "fitted {} at {} observations ({failed} failed); {} flagged as outlying",
        fit_options(&cfg)?.method,
        data.len(),
        flagged.len()
    );
    if !flagged.is_empty() {
        let ids: Vec<String> = flagged.iter().map(|i| (i + 1).to_string()).collect();
        println!("outlying point_ids: {}", ids.join(" "));
    }
    if let Some(grid) = grid {
        let failures = write_grid_fits(&cfg, &smoother, &grid, "fit_grid.csv", "fit")?;
        println!("grid: {} points ({failures} failed)", grid.0.len());
    }
    Ok(())
}

pub fn predict(mut cfg: RunConfig) -> Result<(), CliError> {
    fill_common(&mut cfg);
    fill_estimator(&mut cfg);
    let file = load_data(&cfg)?;
    let data = &file.dataset;
    let grid = grid_points(&cfg, data.parts())?
        .ok_or_else(|| usage("no grid: set --grid or grid in the config"))?;
    let smoother = fitted_smoother(&cfg, data)?;
    let dir = out_dir(&cfg)?;
    write_resolved_config(&dir, &cfg)?;
    let failures = write_grid_fits(&cfg, &smoother, &grid, "predict.csv", "predict")?;
    if failures == grid.0.len() {
        return Err(CliError::Numerical(
            "prediction failed at every grid point; try a larger bandwidth".into(),
        ));
    }
    println!("predicted at {} grid points ({failures} failed)", grid.0.len());
    Ok(())
}

fn default_h_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

pub fn cv(mut cfg: RunConfig) -> Result<(), CliError> {
    fill_common(&mut cfg);
    fill_estimator(&mut cfg);
    let options = fit_options(&cfg)?;
    cfg.h_grid.get_or_insert_with(default_h_grid);
    cfg.folds.get_or_insert(FoldsSetting::K(5));
    cfg.criterion.get_or_insert_with(|| {
        if options.method.is_robust() { "robust" } else { "ls" }.into()
    });
    if cfg.criterion.as_deref() == Some("robust") {
        cfg.dispersion.get_or_insert_with(|| "mad".into());
    }
    let folds = match cfg.folds.as_ref().expect("filled") {
        FoldsSetting::K(k) => Folds::K(*k),
        FoldsSetting::Named(s) if s == "loo" => Folds::LeaveOneOut,
        FoldsSetting::Named(s) => return Err(usage(format!("folds: expected an integer or \"loo\", got {s:?}"))),
    };
    let criterion = match cfg.criterion.as_deref().expect("filled") {
        "ls" => CvCriterion::LeastSquares,
        "robust" => CvCriterion::Robust,
        other => return Err(usage(format!("criterion: expected ls or robust, got {other:?}"))),
    };
    let mut cv_cfg = CvConfig::new(
        cfg.h_grid.clone().expect("filled"),
        folds,
        criterion,
        cfg.seed.expect("filled"),
    )?;
    if let Some(d) = &cfg.dispersion {
        cv_cfg = cv_cfg.with_dispersion(match d.as_str() {
            "mad" => Dispersion::Mad,
            "tau" => Dispersion::Tau,
            "s" => Dispersion::S,
            other => return Err(usage(format!("dispersion: expected mad, tau or s, got {other:?}"))),
        });
    }
    match (cfg.refine_step, cfg.refine_radius) {
        (Some(step), Some(radius)) => cv_cfg = cv_cfg.with_refinement(step, radius)?,
        (None, None) => {}
        _ => return Err(usage("refine_step and refine_radius must be given together")),
    }

    let file = load_data(&cfg)?;
    let data = &file.dataset;
    if let Folds::K(k) = folds {
        if k > data.len() {
            return Err(usage(format!("{k} folds for {} observations", data.len())));
        }
    }
    let result = select_bandwidth(data, &cv_cfg, &options)?;
    let dir = out_dir(&cfg)?;
    write_resolved_config(&dir, &cfg)?;
    let pre = format!(
        "{}chosen_h = {}\npartition_fingerprint = {:016x}\n",
        preamble("cv", &cfg),
        num(result.chosen_h),
        result.partition_fingerprint
    );
    let score_rows: Vec<Vec<String>> = result
        .entries
        .iter()
        .map(|e| {
            vec![
                num(e.h),
                opt_num(e.score),
                e.n_failures.to_string(),
                e.refined.to_string(),
                (e.h == result.chosen_h).to_string(),
            ]
        })
        .collect();
    let header: Vec<String> = ["h", "score", "n_failures", "refined", "chosen"].map(String::from).to_vec();
    write_table(&dir.join("cv_scores.csv"), &pre, &header, &score_rows)?;
    let residual_rows: Vec<Vec<String>> = result
        .entries
        .iter()
        .flat_map(|e| {
            e.residuals
                .iter()
                .enumerate()
                .map(move |(i, r)| vec![num(e.h), (i + 1).to_string(), opt_num(*r)])
        })
        .collect();
    let header: Vec<String> = ["h", "point_id", "residual"].map(String::from).to_vec();
    write_table(&dir.join("cv_residuals.csv"), &pre, &header, &residual_rows)?;
    for e in &result.entries {
        println!(
            "h = {:<8} score = {:<14} failures = {}",
            num(e.h),
            e.score.map(num).unwrap_or_else(|| "excluded".into()),
            e.n_failures
        );
    }
    println!("chosen_h = {}", num(result.chosen_h));
    Ok(())
}

fn default_h_for(alpha: &[f64]) -> Option<f64> {
    match alpha {
        [a, b, c] if [*a, *b, *c] == [5.0, 7.0, 1.0] => Some(2.0),
        [a, b, c] if [*a, *b, *c] == [5.0, 7.0, 4.0] => Some(1.0),
        _ => None,
    }
}

pub fn mc(mut cfg: RunConfig) -> Result<(), CliError> {
    fill_common(&mut cfg);
    fill_robust(&mut cfg);
    let alpha = cfg.alpha.get_or_insert_with(|| DEFAULT_ALPHA.to_vec()).clone();
    if cfg.h.is_none() {
        cfg.h = default_h_for(&alpha);
    }
    let h = cfg
        .h
        .ok_or_else(|| usage("no bandwidth rule for this alpha: set --h or h in the config"))?;
    let b_comp = cfg.b_comp.get_or_insert_with(|| REFERENCE_B.to_vec()).clone();
    let sigma = *cfg.sigma.get_or_insert(1.0);
    let n = *cfg.n.get_or_insert(100);
    let n_reps = *cfg.n_reps.get_or_insert(500);
    let n_pred = *cfg.n_pred.get_or_insert(100);
    let sd = *cfg.sd_contam.get_or_insert(0.1);
    let contaminations = cfg
        .contaminations
        .get_or_insert_with(|| DEFAULT_CONTAMINATIONS.to_vec())
        .clone();
    let methods: Vec<Method> = cfg
        .methods
        .get_or_insert_with(|| Method::ALL.iter().map(|m| m.label().to_lowercase()).collect())
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_, _>>()?;
    let prefix = cfg
        .scenario
        .get_or_insert_with(|| {
            let parts: Vec<String> = alpha.iter().map(|a| a.to_string()).collect();
            format!("a{}", parts.join("-"))
        })
        .clone();
    let robust = robust_config(&cfg, ScaleKind::GlobalS, Method::Rob1)?;

    let mut reports: Vec<McReport> = Vec::new();
    for [delta, shift] in &contaminations {
        let law = ErrorLaw::new(*delta, *shift, sd)?;
        let sc = McScenario {
            name: format!("{prefix}_{}", error_law_label(&law)),
            alpha: DirichletParams::new(alpha.clone())?,
            b_comp: SimplexPoint::new(&b_comp)?,
            sigma,
            error_law: law,
            n,
            n_reps,
            n_pred,
            h,
            methods: methods.clone(),
            robust,
            seed: cfg.seed.expect("filled"),
        };
        reports.push(run_study(&sc)?);
    }

    let dir = out_dir(&cfg)?;
    write_resolved_config(&dir, &cfg)?;
    let pre = preamble("mc", &cfg);
    let mut summary_rows = Vec::new();
    let mut ise_rows = Vec::new();
    for report in &reports {
        for e in &report.estimators {
            summary_rows.push(vec![
                e.method.label().to_string(),
                report.scenario.clone(),
                num(e.mise),
                num(e.bias2),
                e.n_failures.to_string(),
            ]);
            for (r, v) in e.ise.iter().enumerate() {
                ise_rows.push(vec![
                    e.method.label().to_string(),
                    report.scenario.clone(),
                    r.to_string(),
                    opt_num(*v),
                ]);
            }
        }
    }
    let header: Vec<String> = ["estimator", "scenario", "MISE", "Bias2", "n_failures"].map(String::from).to_vec();
    write_table(&dir.join("mise_bias.csv"), &pre, &header, &summary_rows)?;
    let header: Vec<String> = ["estimator", "scenario", "replication", "ise"].map(String::from).to_vec();
    write_table(&dir.join("ise.csv"), &pre, &header, &ise_rows)?;

    println!("{:<10} {:<22} {:>14} {:>14} {:>9}", "estimator", "scenario", "MISE", "Bias2", "failures");
    for row in &summary_rows {
        println!("{:<10} {:<22} {:>14} {:>14} {:>9}", row[0], row[1], row[2], row[3], row[4]);
    }
    let over: Vec<&str> = reports
        .iter()
        .filter(|r| !r.within_exclusion_budget())
        .map(|r| r.scenario.as_str())
        .collect();
    if !over.is_empty() {
        return Err(CliError::Numerical(format!(
            "more than 1% of replications excluded in: {}",
            over.join(", ")
        )));
    }
    Ok(())
}
