//! Coupled-path Monte Carlo estimates of the strong error
//! `(E‖X_T − Y_N‖²)^{1/2}`.
//!
//! For each path a fine grid with `reference_steps` rows is drawn from the
//! path's own stream, the reference endpoint is computed on it, and every
//! tested resolution is obtained by coarsening the same grid. Per-path results
//! are reduced in path-index order, so tables do not depend on whether the
//! paths ran serially or on a thread pool.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use crate::brownian::BrownianGrid;
use crate::error::HarnessError;
use crate::model::{norm, SdeModel};
use crate::schemes::{check_path_inputs, terminal_state, SchemeKind, Stepper};

/// Tamed schemes may blow up on at most this fraction of paths.
pub const TAMED_BLOW_UP_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

impl Execution {
    fn run<T, F>(self, paths: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        match self {
            Execution::Serial => (0..paths as u64).map(job).collect(),
            Execution::Parallel => (0..paths as u64).into_par_iter().map(job).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub step_counts: Vec<usize>,
    pub paths: usize,
    pub master_seed: u64,
    /// Resolution of the fine grid every tested resolution is coarsened from.
    pub reference_steps: usize,
    pub execution: Execution,
    pub allow_noncommutative: bool,
}

impl ExperimentConfig {
    /// Reference resolution `ref_multiplier × max(step_counts)`.
    pub fn new(step_counts: Vec<usize>, paths: usize, master_seed: u64, ref_multiplier: usize) -> Self {
        let finest = step_counts.iter().copied().max().unwrap_or(0);
        Self {
            step_counts,
            paths,
            master_seed,
            reference_steps: finest * ref_multiplier,
            execution: Execution::default(),
            allow_noncommutative: false,
        }
    }

    pub fn serial(mut self) -> Self {
        self.execution = Execution::Serial;
        self
    }

    fn validated_steps(&self) -> Result<Vec<usize>, HarnessError> {
        if self.paths < 2 {
            return Err(HarnessError::TooFewPaths(self.paths));
        }
        let mut steps = self.step_counts.clone();
        steps.sort_unstable();
        steps.dedup();
        if steps.is_empty() {
            return Err(HarnessError::NoStepCounts);
        }
        for &n in &steps {
            if n == 0 || !self.reference_steps.is_multiple_of(n) {
                return Err(HarnessError::NotDivisor {
                    steps: n,
                    reference: self.reference_steps,
                });
            }
            if self.reference_steps / n < 4 {
                return Err(HarnessError::ReferenceTooCoarse {
                    steps: n,
                    reference: self.reference_steps,
                });
            }
        }
        Ok(steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Closed-form endpoint evaluated at the fine grid's `W_T`.
    Oracle,
    /// Tamed Milstein on the fine grid.
    FineGrid { steps: usize },
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceKind::Oracle => f.write_str("oracle"),
            ReferenceKind::FineGrid { steps } => write!(f, "fine-grid(N_ref={steps})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub steps: usize,
    pub mesh_width: f64,
    pub mse: f64,
    /// Sample standard deviation of the per-path squared errors over `√M`.
    pub mse_stderr: f64,
    pub rmse: f64,
    /// Integration time summed over all paths.
    pub runtime_ms: f64,
    pub paths: usize,
    pub blow_ups: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub scheme: SchemeKind,
    pub model: String,
    pub reference: ReferenceKind,
    /// Sorted by decreasing mesh width.
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn row(&self, steps: usize) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.steps == steps)
    }

    /// Copy with every runtime set to zero, for comparing runs.
    pub fn without_runtime(&self) -> Self {
        let mut t = self.clone();
        for r in &mut t.rows {
            r.runtime_ms = 0.0;
        }
        t
    }
}

fn reference_kind(model: &SdeModel, reference_steps: usize) -> ReferenceKind {
    if model.has_exact_endpoint() {
        ReferenceKind::Oracle
    } else {
        ReferenceKind::FineGrid {
            steps: reference_steps,
        }
    }
}

fn path_index(grid: &BrownianGrid) -> u64 {
    grid.provenance().path.map_or(0, |p| p.path_index)
}

/// Reference terminal state on `fine_grid`: the closed-form endpoint when the
/// model has one, tamed Milstein on the fine grid otherwise.
pub fn reference_endpoint(model: &SdeModel, fine_grid: &BrownianGrid) -> Result<Vec<f64>, HarnessError> {
    reference_endpoint_with(model, fine_grid, false)
}

fn reference_endpoint_with(
    model: &SdeModel,
    fine_grid: &BrownianGrid,
    allow_noncommutative: bool,
) -> Result<Vec<f64>, HarnessError> {
    if model.has_exact_endpoint() {
        check_path_inputs(SchemeKind::Euler, model, fine_grid, true)?;
        let w = fine_grid.terminal_value();
        return Ok(model.exact_endpoint(&w).expect("oracle present"));
    }
    check_path_inputs(SchemeKind::TamedMilstein, model, fine_grid, allow_noncommutative)?;
    let mut stepper = Stepper::new(SchemeKind::TamedMilstein, model);
    terminal_state(&mut stepper, model.initial_state(), fine_grid).map_err(|step| {
        HarnessError::ReferenceBlowUp {
            path: path_index(fine_grid),
            step,
        }
    })
}

struct Sample {
    squared_error: f64,
    nanos: u128,
    blew_up: bool,
}

fn simulate_path(
    model: &SdeModel,
    schemes: &[SchemeKind],
    steps: &[usize],
    cfg: &ExperimentConfig,
    path: u64,
) -> Result<Vec<Sample>, HarnessError> {
    let fine = BrownianGrid::for_path(
        cfg.master_seed,
        path,
        cfg.reference_steps,
        model.noise_dim(),
        model.horizon(),
    )?;
    let reference = reference_endpoint_with(model, &fine, cfg.allow_noncommutative)?;
    let coarse: Vec<BrownianGrid> = steps
        .iter()
        .map(|&n| fine.coarsen(cfg.reference_steps / n))
        .collect::<Result<_, _>>()?;
    let mut samples = Vec::with_capacity(schemes.len() * steps.len());
    for &scheme in schemes {
        let mut stepper = Stepper::new(scheme, model);
        for grid in &coarse {
            let start = Instant::now();
            let end = terminal_state(&mut stepper, model.initial_state(), grid);
            let nanos = start.elapsed().as_nanos();
            let (squared_error, blew_up) = match end {
                Ok(y) => {
                    let diff: Vec<f64> = y.iter().zip(&reference).map(|(a, b)| a - b).collect();
                    let e = norm(&diff);
                    (e * e, false)
                }
                Err(_) => (f64::INFINITY, true),
            };
            samples.push(Sample {
                squared_error,
                nanos,
                blew_up,
            });
        }
    }
    Ok(samples)
}

/// Mean and standard error (sample std / √M) of `values`, summed in order.
fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let count = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / count;
    if !mean.is_finite() {
        return (mean, f64::INFINITY);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
    (mean, (var / count).sqrt())
}

/// Error tables for several schemes driven by the same paths and reference.
pub fn strong_error_tables(
    model: &SdeModel,
    schemes: &[SchemeKind],
    cfg: &ExperimentConfig,
) -> Result<Vec<ErrorTable>, HarnessError> {
    let steps = cfg.validated_steps()?;
    let probe = BrownianGrid::from_increments(
        vec![0.0; model.noise_dim()],
        model.noise_dim(),
        model.horizon(),
    )?;
    for &scheme in schemes {
        check_path_inputs(scheme, model, &probe, cfg.allow_noncommutative)?;
    }

    let per_path: Vec<Vec<Sample>> = cfg
        .execution
        .run(cfg.paths, |path| simulate_path(model, schemes, &steps, cfg, path))
        .into_iter()
        .collect::<Result<_, _>>()?;

    let reference = reference_kind(model, cfg.reference_steps);
    let mut tables = Vec::with_capacity(schemes.len());
    for (s, &scheme) in schemes.iter().enumerate() {
        let mut rows = Vec::with_capacity(steps.len());
        for (k, &n) in steps.iter().enumerate() {
            let slot = s * steps.len() + k;
            let samples = per_path.iter().map(|p| &p[slot]);
            let (mse, mse_stderr) = mean_and_stderr(samples.clone().map(|x| x.squared_error));
            let blow_ups = samples.clone().filter(|x| x.blew_up).count();
            let nanos: u128 = samples.map(|x| x.nanos).sum();
            if scheme.is_tamed() && blow_ups as f64 > TAMED_BLOW_UP_LIMIT * cfg.paths as f64 {
                return Err(HarnessError::TamedBlowUp {
                    scheme,
                    steps: n,
                    blow_ups,
                    paths: cfg.paths,
                });
            }
            rows.push(ErrorRow {
                steps: n,
                mesh_width: model.horizon() / n as f64,
                mse,
                mse_stderr,
                rmse: mse.sqrt(),
                runtime_ms: nanos as f64 / 1e6,
                paths: cfg.paths,
                blow_ups,
            });
        }
        tables.push(ErrorTable {
            scheme,
            model: model.name().to_string(),
            reference,
            rows,
        });
    }
    Ok(tables)
}

pub fn strong_error_table(
    model: &SdeModel,
    scheme: SchemeKind,
    cfg: &ExperimentConfig,
) -> Result<ErrorTable, HarnessError> {
    Ok(strong_error_tables(model, &[scheme], cfg)?.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    /// Empirical strong order.
    pub slope: f64,
    /// `log C` in `rmse ≈ C h^slope`.
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

impl ConvergenceReport {
    /// Fitted `C h^slope`.
    pub fn predict(&self, h: f64) -> f64 {
        (self.intercept + self.slope * h.ln()).exp()
    }
}

/// Least-squares line through `(ln h, ln rmse)`; points with zero or
/// non-finite error are skipped.
pub fn fit_log_log(points: &[(f64, f64)]) -> Result<ConvergenceReport, HarnessError> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0 && e.is_finite() && h.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if usable.len() < 2 {
        return Err(HarnessError::TooFewPoints(usable.len()));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::TooFewPoints(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = usable
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(ConvergenceReport {
        slope,
        intercept,
        r_squared,
        points_used: usable.len(),
    })
}

pub fn fit_order(table: &ErrorTable) -> Result<ConvergenceReport, HarnessError> {
    let points: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.mesh_width, r.rmse)).collect();
    fit_log_log(&points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub steps: usize,
    /// Monte Carlo estimate of `E‖Y_N‖^p`; infinite if any path blew up.
    pub moment: f64,
    pub stderr: f64,
    pub blow_ups: usize,
}

/// `E‖Y_N‖^p` for each `N`, all resolutions coarsened from one grid per path
/// at the finest `N`.
pub fn moment_probe(
    model: &SdeModel,
    scheme: SchemeKind,
    p: f64,
    step_counts: &[usize],
    paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<MomentEstimate>, HarnessError> {
    if !(p >= 1.0) {
        return Err(HarnessError::BadMomentOrder(p));
    }
    if paths < 2 {
        return Err(HarnessError::TooFewPaths(paths));
    }
    let mut steps = step_counts.to_vec();
    steps.sort_unstable();
    steps.dedup();
    let finest = *steps.last().ok_or(HarnessError::NoStepCounts)?;
    if let Some(&n) = steps.iter().find(|&&n| n == 0 || finest % n != 0) {
        return Err(HarnessError::NotDivisor {
            steps: n,
            reference: finest,
        });
    }
    let probe = BrownianGrid::from_increments(
        vec![0.0; model.noise_dim()],
        model.noise_dim(),
        model.horizon(),
    )?;
    check_path_inputs(scheme, model, &probe, false)?;

    let per_path: Vec<Vec<Option<f64>>> = execution
        .run(paths, |path| -> Result<Vec<Option<f64>>, HarnessError> {
            let fine = BrownianGrid::for_path(seed, path, finest, model.noise_dim(), model.horizon())?;
            let mut stepper = Stepper::new(scheme, model);
            steps
                .iter()
                .map(|&n| {
                    let grid = fine.coarsen(finest / n)?;
                    Ok(terminal_state(&mut stepper, model.initial_state(), &grid)
                        .ok()
                        .map(|y| norm(&y).powf(p)))
                })
                .collect()
        })
        .into_iter()
        .collect::<Result<_, _>>()?;

    Ok(steps
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let values = per_path.iter().map(|v| v[k].unwrap_or(f64::INFINITY));
            let (moment, stderr) = mean_and_stderr(values);
            MomentEstimate {
                steps: n,
                moment,
                stderr,
                blow_ups: per_path.iter().filter(|v| v[k].is_none()).count(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyResult {
    pub scheme: SchemeKind,
    /// First row (in increasing `N`) with `rmse < target`; `None` if unmet.
    pub met: Option<ErrorRow>,
    pub table: ErrorTable,
}

impl EfficiencyResult {
    pub fn steps_needed(&self) -> Option<usize> {
        self.met.as_ref().map(|r| r.steps)
    }
}

/// Smallest tested `N` at which each scheme gets below `target_eps`, on a
/// shared set of paths.
pub fn efficiency_benchmark(
    model: &SdeModel,
    schemes: &[SchemeKind],
    target_eps: f64,
    cfg: &ExperimentConfig,
) -> Result<Vec<EfficiencyResult>, HarnessError> {
    if !(target_eps > 0.0) {
        return Err(HarnessError::BadTarget(target_eps));
    }
    let tables = strong_error_tables(model, schemes, cfg)?;
    Ok(tables.into_iter().map(|t| efficiency_from_table(t, target_eps)).collect())
}

pub fn efficiency_from_table(table: ErrorTable, target_eps: f64) -> EfficiencyResult {
    EfficiencyResult {
        scheme: table.scheme,
        met: table.rows.iter().find(|r| r.rmse < target_eps).cloned(),
        table,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gbm, noncomm2, poly5, vector_field};

    fn still() -> SdeModel {
        SdeModel::new(
            "still",
            vec![1.0],
            1.0,
            vector_field(|_, out| out.fill(0.0)),
            vec![vector_field(|_, out| out.fill(0.0))],
        )
        .unwrap()
    }

    #[test]
    fn fit_exact_power_laws() {
        let hs: Vec<f64> = (1..=6).map(|k| 2f64.powi(-k)).collect();
        let lin: Vec<_> = hs.iter().map(|&h| (h, 3.0 * h)).collect();
        let r = fit_log_log(&lin).unwrap();
        assert!((r.slope - 1.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        assert!((r.intercept - 3f64.ln()).abs() < 1e-12);
        assert_eq!(r.points_used, 6);

        let half: Vec<_> = hs.iter().map(|&h| (h, h.sqrt())).collect();
        assert!((fit_log_log(&half).unwrap().slope - 0.5).abs() < 1e-12);

        let mut with_zero = lin.clone();
        with_zero[2].1 = 0.0;
        let r = fit_log_log(&with_zero).unwrap();
        assert_eq!(r.points_used, 5);
        assert!((r.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_needs_two_points() {
        assert_eq!(fit_log_log(&[(0.5, 0.1)]), Err(HarnessError::TooFewPoints(1)));
        assert_eq!(
            fit_log_log(&[(0.5, 0.0), (0.25, 0.0)]),
            Err(HarnessError::TooFewPoints(0))
        );
    }

    #[test]
    fn constant_solution_has_zero_error() {
        let cfg = ExperimentConfig::new(vec![4, 8, 16], 8, 1, 16);
        for t in strong_error_tables(&still(), &SchemeKind::ALL, &cfg).unwrap() {
            assert_eq!(t.rows.len(), 3);
            for r in &t.rows {
                assert_eq!(r.rmse, 0.0);
                assert_eq!(r.mse_stderr, 0.0);
                assert_eq!(r.blow_ups, 0);
            }
            assert_eq!(t.reference, ReferenceKind::FineGrid { steps: 256 });
        }
    }

    #[test]
    fn rows_sorted_by_decreasing_mesh_width() {
        let cfg = ExperimentConfig::new(vec![32, 8, 16, 8], 4, 2, 8);
        let t = strong_error_table(&gbm(-0.5, 0.5), SchemeKind::TamedEuler, &cfg).unwrap();
        let steps: Vec<_> = t.rows.iter().map(|r| r.steps).collect();
        assert_eq!(steps, vec![8, 16, 32]);
        assert_eq!(t.reference, ReferenceKind::Oracle);
        for r in &t.rows {
            assert_eq!(r.rmse, r.mse.sqrt());
            assert_eq!(r.paths, 4);
        }
    }

    #[test]
    fn config_validation() {
        let model = poly5();
        let s = SchemeKind::TamedEuler;
        let mut cfg = ExperimentConfig::new(vec![8, 16], 1, 0, 16);
        assert_eq!(strong_error_table(&model, s, &cfg), Err(HarnessError::TooFewPaths(1)));
        cfg.paths = 4;
        cfg.reference_steps = 72;
        assert!(matches!(
            strong_error_table(&model, s, &cfg),
            Err(HarnessError::NotDivisor { steps: 16, .. })
        ));
        cfg.reference_steps = 32;
        assert!(matches!(
            strong_error_table(&model, s, &cfg),
            Err(HarnessError::ReferenceTooCoarse { steps: 16, .. })
        ));
        cfg.step_counts.clear();
        assert_eq!(strong_error_table(&model, s, &cfg), Err(HarnessError::NoStepCounts));
    }

    #[test]
    fn milstein_refused_for_noncommutative_model() {
        let cfg = ExperimentConfig::new(vec![4, 8], 4, 0, 4);
        let err = strong_error_table(&noncomm2(), SchemeKind::Milstein, &cfg).unwrap_err();
        assert!(matches!(err, HarnessError::Scheme(_)), "{err}");
    }

    #[test]
    fn reference_uses_oracle_for_gbm() {
        let model = gbm(-0.5, 0.5);
        let grid = BrownianGrid::for_path(1, 0, 64, 1, 1.0).unwrap();
        let w = grid.terminal_value()[0];
        let r = reference_endpoint(&model, &grid).unwrap();
        assert_eq!(r, vec![crate::model::gbm_exact_endpoint(-0.5, 0.5, 1.0, 1.0, w)]);
    }

    #[test]
    fn reference_without_noise_matches_ode_solution() {
        // b = 0 without the oracle: tamed Milstein reduces to tamed Euler on
        // x' = a x, error O(h).
        let model = gbm(-0.5, 0.0).with_initial_state(vec![1.0]).unwrap();
        let grid = BrownianGrid::for_path(1, 0, 4096, 1, 1.0).unwrap();
        let r = reference_endpoint(&model, &grid).unwrap();
        assert!((r[0] - (-0.5f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn reference_blow_up_is_reported() {
        let model = SdeModel::new(
            "explode",
            vec![1.0],
            1.0,
            vector_field(|_, out| out[0] = f64::INFINITY),
            vec![vector_field(|_, out| out[0] = 0.0)],
        )
        .unwrap();
        let grid = BrownianGrid::for_path(1, 3, 16, 1, 1.0).unwrap();
        assert!(matches!(
            reference_endpoint(&model, &grid),
            Err(HarnessError::ReferenceBlowUp { path: 3, .. })
        ));
    }

    #[test]
    fn moments_of_constant_solution() {
        for p in [1.0, 2.0, 4.5] {
            let est = moment_probe(&still(), SchemeKind::TamedMilstein, p, &[4, 16], 5, 0, Execution::Serial)
                .unwrap();
            assert_eq!(est.len(), 2);
            for e in est {
                assert_eq!(e.moment, 1.0);
                assert_eq!(e.stderr, 0.0);
            }
        }
    }

    #[test]
    fn moment_probe_validation() {
        let m = poly5();
        let s = SchemeKind::TamedEuler;
        assert!(matches!(
            moment_probe(&m, s, 0.5, &[4], 4, 0, Execution::Serial),
            Err(HarnessError::BadMomentOrder(_))
        ));
        assert!(matches!(
            moment_probe(&m, s, 2.0, &[4], 1, 0, Execution::Serial),
            Err(HarnessError::TooFewPaths(1))
        ));
        assert!(matches!(
            moment_probe(&m, s, 2.0, &[3, 4], 4, 0, Execution::Serial),
            Err(HarnessError::NotDivisor { .. })
        ));
        assert!(matches!(
            moment_probe(&m, s, 2.0, &[], 4, 0, Execution::Serial),
            Err(HarnessError::NoStepCounts)
        ));
    }

    #[test]
    fn efficiency_extremes() {
        let model = gbm(-0.5, 0.5);
        let cfg = ExperimentConfig::new(vec![8, 16, 32], 20, 5, 8);
        let schemes = [SchemeKind::TamedEuler, SchemeKind::TamedMilstein];
        for r in efficiency_benchmark(&model, &schemes, 1e300, &cfg).unwrap() {
            assert_eq!(r.steps_needed(), Some(8));
        }
        for r in efficiency_benchmark(&model, &schemes, 1e-12, &cfg).unwrap() {
            assert_eq!(r.steps_needed(), None);
        }
        assert!(matches!(
            efficiency_benchmark(&model, &schemes, 0.0, &cfg),
            Err(HarnessError::BadTarget(_))
        ));
    }

    #[test]
    fn serial_and_parallel_agree() {
        let model = poly5();
        let cfg = ExperimentConfig::new(vec![8, 16, 32], 40, 9, 8);
        let schemes = [SchemeKind::Euler, SchemeKind::TamedMilstein];
        let par: Vec<_> = strong_error_tables(&model, &schemes, &cfg)
            .unwrap()
            .iter()
            .map(ErrorTable::without_runtime)
            .collect();
        let ser: Vec<_> = strong_error_tables(&model, &schemes, &cfg.clone().serial())
            .unwrap()
            .iter()
            .map(ErrorTable::without_runtime)
            .collect();
        assert_eq!(par, ser);
    }
}
