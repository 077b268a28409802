//! One-step methods and the path integrator.
//!
//! All four schemes share the layout
//!
//! ```text
//! Y_{n+1} = Y_n + h·D(Y_n) + Σ_j σ_j(Y_n) ΔW^j_n + [Σ_{j1,j2} L^{j1}σ_{j2}(Y_n) · ½(ΔW^{j1}ΔW^{j2} − δ_{j1 j2} h)]
//! ```
//!
//! where `D = μ` for the explicit schemes and `D = μ / (1 + h‖μ‖)` for the
//! tamed ones, and the bracketed Milstein correction is present only for the
//! Milstein variants. The correction is only the Milstein scheme when the
//! noise is commutative; [`integrate_path`] refuses non-commutative models
//! unless explicitly overridden.

use std::fmt;
use std::str::FromStr;

use crate::brownian::{pair_products_into, BrownianGrid};
use crate::error::SchemeError;
use crate::model::{norm, SdeModel};

/// States with a component above this magnitude count as blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Euler,
    TamedEuler,
    Milstein,
    TamedMilstein,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::Euler,
        SchemeKind::TamedEuler,
        SchemeKind::Milstein,
        SchemeKind::TamedMilstein,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Euler => "euler",
            SchemeKind::TamedEuler => "tamed-euler",
            SchemeKind::Milstein => "milstein",
            SchemeKind::TamedMilstein => "tamed-milstein",
        }
    }

    pub fn is_tamed(self) -> bool {
        matches!(self, SchemeKind::TamedEuler | SchemeKind::TamedMilstein)
    }

    pub fn is_milstein(self) -> bool {
        matches!(self, SchemeKind::Milstein | SchemeKind::TamedMilstein)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownScheme(pub String);

impl fmt::Display for UnknownScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown scheme `{}` (expected euler, tamed-euler, milstein or tamed-milstein)",
            self.0
        )
    }
}

impl std::error::Error for UnknownScheme {}

impl FromStr for SchemeKind {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().replace('_', "-").as_str() {
            "euler" => Ok(SchemeKind::Euler),
            "tamed-euler" => Ok(SchemeKind::TamedEuler),
            "milstein" => Ok(SchemeKind::Milstein),
            "tamed-milstein" => Ok(SchemeKind::TamedMilstein),
            _ => Err(UnknownScheme(s.to_string())),
        }
    }
}

/// `v / (1 + h‖v‖)`. The tamed drift increment is `h · tame(v, h)`, whose
/// norm never exceeds `min(1, h‖v‖)`.
pub fn tame(drift_value: &[f64], h: f64) -> Vec<f64> {
    let scale = tame_factor(drift_value, h);
    drift_value.iter().map(|v| v * scale).collect()
}

fn tame_factor(drift_value: &[f64], h: f64) -> f64 {
    1.0 / (1.0 + h * norm(drift_value))
}

/// A step produced a non-finite component or one above [`BLOW_UP_THRESHOLD`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlowUp {
    /// The offending state.
    pub state: Vec<f64>,
}

impl fmt::Display for BlowUp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "state left the finite range: {:?}", self.state)
    }
}

impl std::error::Error for BlowUp {}

fn out_of_range(y: &[f64]) -> bool {
    y.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD)
}

/// Reusable scratch space for repeated steps on one model.
pub struct Stepper<'a> {
    scheme: SchemeKind,
    model: &'a SdeModel,
    drift: Vec<f64>,
    column: Vec<f64>,
    columns: Vec<f64>,
    jacobian: Vec<f64>,
    pairs: Vec<f64>,
    next: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(scheme: SchemeKind, model: &'a SdeModel) -> Self {
        let d = model.state_dim();
        let m = model.noise_dim();
        Self {
            scheme,
            model,
            drift: vec![0.0; d],
            column: vec![0.0; d],
            columns: vec![0.0; m * d],
            jacobian: vec![0.0; d * d],
            pairs: vec![0.0; m * m],
            next: vec![0.0; d],
        }
    }

    /// Advances `y` in place by one step. On blow-up `y` holds the offending
    /// state.
    pub fn advance(&mut self, y: &mut [f64], h: f64, dw: &[f64]) -> Result<(), BlowUp> {
        let d = self.model.state_dim();
        let m = self.model.noise_dim();
        debug_assert_eq!(y.len(), d);
        debug_assert_eq!(dw.len(), m);

        self.model.drift_into(y, &mut self.drift);
        let scale = if self.scheme.is_tamed() {
            h * tame_factor(&self.drift, h)
        } else {
            h
        };
        for k in 0..d {
            self.next[k] = y[k] + scale * self.drift[k];
        }

        for (j, w) in dw.iter().enumerate() {
            self.model.diffusion_column_into(j, y, &mut self.column);
            for k in 0..d {
                self.next[k] += self.column[k] * w;
            }
            self.columns[j * d..(j + 1) * d].copy_from_slice(&self.column);
        }

        if self.scheme.is_milstein() {
            pair_products_into(dw, h, &mut self.pairs);
            for j2 in 0..m {
                self.model.diffusion_jacobian_into(j2, y, &mut self.jacobian);
                for j1 in 0..m {
                    let weight = self.pairs[j1 * m + j2];
                    let sigma = &self.columns[j1 * d..(j1 + 1) * d];
                    for k in 0..d {
                        let row = &self.jacobian[k * d..(k + 1) * d];
                        let l: f64 = row.iter().zip(sigma).map(|(a, b)| a * b).sum();
                        self.next[k] += l * weight;
                    }
                }
            }
        }

        y.copy_from_slice(&self.next);
        if out_of_range(y) {
            return Err(BlowUp { state: y.to_vec() });
        }
        Ok(())
    }
}

/// One step from `y` with mesh width `h` and increment `dw`.
///
/// Does not consult the commutativity gate.
pub fn step(
    scheme: SchemeKind,
    model: &SdeModel,
    y: &[f64],
    h: f64,
    dw: &[f64],
) -> Result<Vec<f64>, SchemeError> {
    if y.len() != model.state_dim() {
        return Err(SchemeError::StateDimMismatch {
            expected: model.state_dim(),
            got: y.len(),
        });
    }
    if dw.len() != model.noise_dim() {
        return Err(SchemeError::IncrementDimMismatch {
            expected: model.noise_dim(),
            got: dw.len(),
        });
    }
    if !(h > 0.0) {
        return Err(SchemeError::BadMeshWidth(h));
    }
    let mut state = y.to_vec();
    Stepper::new(scheme, model)
        .advance(&mut state, h, dw)
        .map_err(|b| SchemeError::BlowUp { state: b.state })?;
    Ok(state)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PathOptions {
    /// Keep every `Y_n`; otherwise only `Y_0` and the last state.
    pub record_full: bool,
    /// Run the Milstein variants on non-commutative models. The result is
    /// not a valid Milstein approximation; meant for negative tests only.
    pub allow_noncommutative: bool,
}

impl PathOptions {
    pub fn full() -> Self {
        Self {
            record_full: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    state_dim: usize,
    states: Vec<f64>,
    indices: Vec<usize>,
    mesh_width: f64,
    blow_up: Option<usize>,
}

impl Trajectory {
    pub fn mesh_width(&self) -> f64 {
        self.mesh_width
    }

    pub fn blew_up(&self) -> bool {
        self.blow_up.is_some()
    }

    /// Grid index of the first out-of-range state.
    pub fn blow_up_index(&self) -> Option<usize> {
        self.blow_up
    }

    /// Number of stored states.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The `i`-th stored state together with its grid index.
    pub fn state(&self, i: usize) -> (usize, &[f64]) {
        let d = self.state_dim;
        (self.indices[i], &self.states[i * d..(i + 1) * d])
    }

    pub fn states(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.states.chunks_exact(self.state_dim))
    }

    /// `Y_N`, or the offending state when the path blew up.
    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1).1
    }

    pub fn initial(&self) -> &[f64] {
        self.state(0).1
    }
}

pub(crate) fn check_path_inputs(
    scheme: SchemeKind,
    model: &SdeModel,
    grid: &BrownianGrid,
    allow_noncommutative: bool,
) -> Result<(), SchemeError> {
    if grid.noise_dim() != model.noise_dim() {
        return Err(SchemeError::NoiseDimMismatch {
            grid: grid.noise_dim(),
            model: model.noise_dim(),
        });
    }
    let tol = 1e-12 * model.horizon();
    if (grid.horizon() - model.horizon()).abs() > tol {
        return Err(SchemeError::HorizonMismatch {
            grid: grid.horizon(),
            model: model.horizon(),
        });
    }
    if scheme.is_milstein() && !allow_noncommutative {
        let check = model.commutativity()?;
        if !check.commutative {
            return Err(SchemeError::NonCommutative {
                scheme,
                model: model.name().to_string(),
                violation: check.max_violation,
            });
        }
    }
    Ok(())
}

/// Runs `scheme` over every row of `grid`, starting at the model's initial
/// state. Stops at the first blow-up and flags it.
pub fn integrate_path(
    scheme: SchemeKind,
    model: &SdeModel,
    grid: &BrownianGrid,
    options: PathOptions,
) -> Result<Trajectory, SchemeError> {
    check_path_inputs(scheme, model, grid, options.allow_noncommutative)?;
    let d = model.state_dim();
    let h = grid.mesh_width();
    let mut y = model.initial_state().to_vec();
    let mut states = y.clone();
    let mut indices = vec![0];
    let mut blow_up = None;
    let mut stepper = Stepper::new(scheme, model);
    let mut last = 0;

    for (n, dw) in grid.rows().enumerate() {
        let result = stepper.advance(&mut y, h, dw);
        last = n + 1;
        if options.record_full {
            states.extend_from_slice(&y);
            indices.push(last);
        }
        if result.is_err() {
            blow_up = Some(last);
            break;
        }
    }
    if !options.record_full {
        states.extend_from_slice(&y);
        indices.push(last);
    }
    debug_assert_eq!(states.len(), indices.len() * d);

    Ok(Trajectory {
        state_dim: d,
        states,
        indices,
        mesh_width: h,
        blow_up,
    })
}

/// Terminal state only; `Err` carries the blow-up index.
pub(crate) fn terminal_state(
    stepper: &mut Stepper<'_>,
    initial: &[f64],
    grid: &BrownianGrid,
) -> Result<Vec<f64>, usize> {
    let h = grid.mesh_width();
    let mut y = initial.to_vec();
    for (n, dw) in grid.rows().enumerate() {
        if stepper.advance(&mut y, h, dw).is_err() {
            return Err(n + 1);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{diag2, gbm, noncomm2, poly5, vector_field};

    fn still() -> SdeModel {
        SdeModel::new(
            "still",
            vec![0.7, -1.2],
            1.0,
            vector_field(|_, out| out.fill(0.0)),
            vec![vector_field(|_, out| out.fill(0.0))],
        )
        .unwrap()
    }

    fn one(scheme: SchemeKind, model: &SdeModel, y: &[f64], h: f64, dw: &[f64]) -> Vec<f64> {
        step(scheme, model, y, h, dw).unwrap()
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in SchemeKind::ALL {
            assert_eq!(s.name().parse::<SchemeKind>().unwrap(), s);
        }
        assert_eq!("tamed_milstein".parse::<SchemeKind>().unwrap(), SchemeKind::TamedMilstein);
        assert!("rk4".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn tame_values() {
        assert_eq!(tame(&[0.0, 0.0], 0.1), vec![0.0, 0.0]);
        assert!((tame(&[-1.0], 0.5)[0] + 2.0 / 3.0).abs() < 1e-16);
        let big = tame(&[1e6], 0.01);
        assert!(big[0] <= 100.0);
        assert!((big[0] - 1e6 / (1.0 + 1e4)).abs() < 1e-9);
    }

    #[test]
    fn poly5_single_steps() {
        let m = poly5();
        let tm = one(SchemeKind::TamedMilstein, &m, &[1.0], 0.5, &[0.0])[0];
        assert!((tm - 5.0 / 12.0).abs() <= 2.0 * f64::EPSILON);
        assert_eq!(one(SchemeKind::Milstein, &m, &[1.0], 0.5, &[0.0]), vec![0.25]);
        assert_eq!(one(SchemeKind::Euler, &m, &[1.0], 0.5, &[0.0]), vec![0.5]);
        // Tamed Euler: 1 − 0.5/1.5.
        let te = one(SchemeKind::TamedEuler, &m, &[1.0], 0.5, &[0.0])[0];
        assert!((te - 2.0 / 3.0).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn noiseless_drift_free_model_does_not_move() {
        let m = still();
        for s in SchemeKind::ALL {
            assert_eq!(one(s, &m, &[0.7, -1.2], 0.1, &[0.3]), vec![0.7, -1.2]);
        }
    }

    #[test]
    fn taming_difference_for_small_h() {
        let m = poly5();
        let h = 2f64.powi(-10);
        let e = one(SchemeKind::Euler, &m, &[1.0], h, &[0.0])[0];
        let te = one(SchemeKind::TamedEuler, &m, &[1.0], h, &[0.0])[0];
        let expect = h * h / (1.0 + h);
        assert!(((te - e) - expect).abs() < 1e-15, "{}", te - e);
        assert!((expect - 9.5e-7).abs() < 1e-8);
    }

    #[test]
    fn multidimensional_milstein_correction_by_hand() {
        // diag2 at x = (1, -0.5), dW = (0.2, -0.1), h = 0.25:
        // L^{j}σ_{j} = ¼ x_j e_j, off-diagonal terms vanish.
        let m = diag2();
        let x = [1.0, -0.5];
        let dw = [0.2, -0.1];
        let h = 0.25;
        let got = one(SchemeKind::Milstein, &m, &x, h, &dw);
        let r2 = 1.25;
        for k in 0..2 {
            let mu = -x[k] - x[k] * r2;
            let expect = x[k] + h * mu + 0.5 * x[k] * dw[k] + 0.25 * x[k] * 0.5 * (dw[k] * dw[k] - h);
            assert!((got[k] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn step_validates_inputs() {
        let m = poly5();
        assert!(matches!(
            step(SchemeKind::Euler, &m, &[1.0, 2.0], 0.1, &[0.0]),
            Err(SchemeError::StateDimMismatch { .. })
        ));
        assert!(matches!(
            step(SchemeKind::Euler, &m, &[1.0], 0.1, &[0.0, 1.0]),
            Err(SchemeError::IncrementDimMismatch { .. })
        ));
        assert!(matches!(
            step(SchemeKind::Euler, &m, &[1.0], 0.0, &[0.0]),
            Err(SchemeError::BadMeshWidth(_))
        ));
    }

    #[test]
    fn step_reports_blow_up() {
        let m = poly5();
        let r = step(SchemeKind::Euler, &m, &[1e70], 0.5, &[0.0]);
        assert!(matches!(r, Err(SchemeError::BlowUp { .. })));
    }

    #[test]
    fn single_step_path_matches_step() {
        let m = gbm(-0.5, 0.5);
        let grid = BrownianGrid::generate(11, 1, 1, 1.0).unwrap();
        for s in SchemeKind::ALL {
            let t = integrate_path(s, &m, &grid, PathOptions::full()).unwrap();
            let direct = one(s, &m, &[1.0], 1.0, grid.increment(0));
            assert_eq!(t.terminal(), direct.as_slice());
            assert_eq!(t.len(), 2);
        }
    }

    #[test]
    fn deterministic_gbm_euler_error() {
        let m = gbm(-0.5, 0.0);
        let n = 1024;
        let grid = BrownianGrid::generate(0, n, 1, 1.0).unwrap();
        let t = integrate_path(SchemeKind::Euler, &m, &grid, PathOptions::default()).unwrap();
        let exact = (-0.5f64).exp();
        assert!((t.terminal()[0] - exact).abs() < 3e-4);
        // Same as iterating (1 + a h)^N directly.
        let direct = (1.0 - 0.5 / n as f64).powi(n as i32);
        assert!((t.terminal()[0] - direct).abs() < 1e-13);
    }

    #[test]
    fn explicit_euler_blows_up_from_ten() {
        let m = poly5().with_initial_state(vec![10.0]).unwrap();
        let grid = BrownianGrid::from_increments(vec![0.0; 64], 1, 1.0).unwrap();
        let t = integrate_path(SchemeKind::Euler, &m, &grid, PathOptions::full()).unwrap();
        assert_eq!(t.state(1).1, &[-1552.5]);
        assert!(t.state(3).1[0].abs() > 1e10);
        assert!(t.blew_up());
        assert_eq!(t.blow_up_index(), Some(4));
        assert_eq!(t.len(), 5);
    }

    #[test]
    fn terminal_only_keeps_endpoints() {
        let m = poly5();
        let grid = BrownianGrid::generate(4, 32, 1, 1.0).unwrap();
        let full = integrate_path(SchemeKind::TamedEuler, &m, &grid, PathOptions::full()).unwrap();
        let end = integrate_path(SchemeKind::TamedEuler, &m, &grid, PathOptions::default()).unwrap();
        assert_eq!(full.len(), 33);
        assert_eq!(end.len(), 2);
        assert_eq!(end.state(1), (32, full.terminal()));
        assert_eq!(end.initial(), &[1.0]);
    }

    #[test]
    fn integrate_validates_grid() {
        let m = poly5();
        let g2 = BrownianGrid::generate(1, 8, 2, 1.0).unwrap();
        assert!(matches!(
            integrate_path(SchemeKind::Euler, &m, &g2, PathOptions::default()),
            Err(SchemeError::NoiseDimMismatch { .. })
        ));
        let gt = BrownianGrid::generate(1, 8, 1, 2.0).unwrap();
        assert!(matches!(
            integrate_path(SchemeKind::Euler, &m, &gt, PathOptions::default()),
            Err(SchemeError::HorizonMismatch { .. })
        ));
    }

    #[test]
    fn milstein_gate_on_noncommutative_noise() {
        let m = noncomm2();
        let grid = BrownianGrid::generate(1, 8, 2, 1.0).unwrap();
        for s in [SchemeKind::Milstein, SchemeKind::TamedMilstein] {
            let err = integrate_path(s, &m, &grid, PathOptions::default()).unwrap_err();
            assert!(matches!(err, SchemeError::NonCommutative { .. }), "{err}");
            let forced = PathOptions {
                allow_noncommutative: true,
                ..PathOptions::default()
            };
            assert!(integrate_path(s, &m, &grid, forced).is_ok());
        }
        assert!(integrate_path(SchemeKind::TamedEuler, &m, &grid, PathOptions::default()).is_ok());
    }
}
