//! Autonomous Itô SDEs `dX = μ(X) dt + Σ_j σ_j(X) dW^j` with deterministic
//! initial data, plus the builtin test problems.
//!
//! Diffusion Jacobians are optional. When a model does not supply them they
//! are approximated by central differences with step `1e-5 (1 + ‖x‖)`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;

/// `f(x, out)` writes a `d`-vector into `out`.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// `f(x, out)` writes a `d × d` row-major Jacobian, `out[k * d + l] = ∂f_k/∂x_l`.
pub type JacobianField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Closed-form terminal state as a function of `W_T - W_0`.
pub type EndpointOracle = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

pub fn vector_field<F>(f: F) -> VectorField
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
{
    Arc::new(f)
}

pub fn jacobian_field<F>(f: F) -> JacobianField
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
{
    Arc::new(f)
}

pub const DEFAULT_COMMUTATIVITY_TOL: f64 = 1e-8;

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone)]
pub struct SdeModel {
    name: String,
    state_dim: usize,
    noise_dim: usize,
    drift: VectorField,
    diffusion: Vec<VectorField>,
    jacobians: Option<Vec<JacobianField>>,
    initial_state: Vec<f64>,
    horizon: f64,
    exact_endpoint: Option<EndpointOracle>,
    commutativity: Arc<OnceLock<Result<CommutativityCheck, ModelError>>>,
}

impl fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeModel")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim)
            .field("initial_state", &self.initial_state)
            .field("horizon", &self.horizon)
            .field("analytic_jacobians", &self.jacobians.is_some())
            .field("exact_endpoint", &self.exact_endpoint.is_some())
            .finish()
    }
}

impl SdeModel {
    /// The state dimension is `initial_state.len()` and the noise dimension
    /// is the number of diffusion columns.
    pub fn new(
        name: impl Into<String>,
        initial_state: Vec<f64>,
        horizon: f64,
        drift: VectorField,
        diffusion: Vec<VectorField>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        if initial_state.is_empty() || diffusion.is_empty() {
            return Err(ModelError::EmptyDimension(name));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ModelError::BadHorizon(horizon));
        }
        if initial_state.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite {
                what: "initial state",
            });
        }
        Ok(Self {
            name,
            state_dim: initial_state.len(),
            noise_dim: diffusion.len(),
            drift,
            diffusion,
            jacobians: None,
            initial_state,
            horizon,
            exact_endpoint: None,
            commutativity: Arc::default(),
        })
    }

    /// Supplies `σ_j'` for every diffusion column, replacing the
    /// finite-difference fallback.
    pub fn with_jacobians(mut self, jacobians: Vec<JacobianField>) -> Result<Self, ModelError> {
        if jacobians.len() != self.noise_dim {
            return Err(ModelError::JacobianCount {
                model: self.name,
                expected: self.noise_dim,
                got: jacobians.len(),
            });
        }
        self.jacobians = Some(jacobians);
        self.commutativity = Arc::default();
        Ok(self)
    }

    pub fn with_exact_endpoint(mut self, oracle: EndpointOracle) -> Self {
        self.exact_endpoint = Some(oracle);
        self
    }

    /// Same coefficients started from a different point. Drops the
    /// closed-form oracle, which is tied to the original initial state.
    pub fn with_initial_state(mut self, initial_state: Vec<f64>) -> Result<Self, ModelError> {
        if initial_state.len() != self.state_dim {
            return Err(ModelError::PointDimension {
                expected: self.state_dim,
                got: initial_state.len(),
            });
        }
        if initial_state.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite {
                what: "initial state",
            });
        }
        self.initial_state = initial_state;
        self.exact_endpoint = None;
        // The default probes include the initial state.
        self.commutativity = Arc::new(OnceLock::new());
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn has_analytic_jacobians(&self) -> bool {
        self.jacobians.is_some()
    }

    pub fn exact_endpoint(&self, w_terminal: &[f64]) -> Option<Vec<f64>> {
        self.exact_endpoint.as_ref().map(|f| f(w_terminal))
    }

    pub fn has_exact_endpoint(&self) -> bool {
        self.exact_endpoint.is_some()
    }

    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    pub fn diffusion_column_into(&self, j: usize, x: &[f64], out: &mut [f64]) {
        (self.diffusion[j])(x, out)
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.drift_into(x, &mut out);
        out
    }

    pub fn diffusion_column(&self, j: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.diffusion_column_into(j, x, &mut out);
        out
    }

    /// `σ_j'(x)` as a `d × d` row-major matrix; finite differences when no
    /// analytic Jacobian was supplied.
    pub fn diffusion_jacobian_into(&self, j: usize, x: &[f64], out: &mut [f64]) {
        match &self.jacobians {
            Some(jac) => (jac[j])(x, out),
            None => self.finite_difference_jacobian(j, x, out),
        }
    }

    pub fn diffusion_jacobian(&self, j: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim * self.state_dim];
        self.diffusion_jacobian_into(j, x, &mut out);
        out
    }

    pub fn finite_difference_jacobian(&self, j: usize, x: &[f64], out: &mut [f64]) {
        let d = self.state_dim;
        let delta = 1e-5 * (1.0 + norm(x));
        let mut shifted = x.to_vec();
        let mut plus = vec![0.0; d];
        let mut minus = vec![0.0; d];
        for l in 0..d {
            shifted[l] = x[l] + delta;
            self.diffusion_column_into(j, &shifted, &mut plus);
            shifted[l] = x[l] - delta;
            self.diffusion_column_into(j, &shifted, &mut minus);
            shifted[l] = x[l];
            for k in 0..d {
                out[k * d + l] = (plus[k] - minus[k]) / (2.0 * delta);
            }
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.state_dim {
            return Err(ModelError::PointDimension {
                expected: self.state_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Result of [`check_commutativity`] on [`default_probes`], computed once
    /// per model and shared between clones.
    pub fn commutativity(&self) -> Result<CommutativityCheck, ModelError> {
        self.commutativity
            .get_or_init(|| {
                check_commutativity(self, &default_probes(self), DEFAULT_COMMUTATIVITY_TOL)
            })
            .clone()
    }
}

/// The Milstein coefficients `L^{j1} σ_{j2}(x) = σ_{j2}'(x) σ_{j1}(x)` for all
/// `j1, j2`, each a `d`-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LCoefficients {
    noise_dim: usize,
    state_dim: usize,
    data: Vec<f64>,
}

impl LCoefficients {
    /// `L^{j1} σ_{j2}`.
    pub fn get(&self, j1: usize, j2: usize) -> &[f64] {
        let d = self.state_dim;
        let start = (j1 * self.noise_dim + j2) * d;
        &self.data[start..start + d]
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }
}

pub fn l_operator(model: &SdeModel, x: &[f64]) -> Result<LCoefficients, ModelError> {
    model.check_point(x)?;
    let d = model.state_dim();
    let m = model.noise_dim();
    let columns: Vec<Vec<f64>> = (0..m).map(|j| model.diffusion_column(j, x)).collect();
    let mut data = vec![0.0; m * m * d];
    let mut jac = vec![0.0; d * d];
    for j2 in 0..m {
        model.diffusion_jacobian_into(j2, x, &mut jac);
        for (j1, sigma) in columns.iter().enumerate() {
            let out = &mut data[(j1 * m + j2) * d..(j1 * m + j2 + 1) * d];
            for (k, o) in out.iter_mut().enumerate() {
                *o = dot(&jac[k * d..(k + 1) * d], sigma);
            }
        }
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite {
            what: "L-operator coefficient",
        });
    }
    Ok(LCoefficients {
        noise_dim: m,
        state_dim: d,
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommutativityCheck {
    pub commutative: bool,
    /// Largest `|L^{j1} σ_{k,j2} − L^{j2} σ_{k,j1}|` over probes, components
    /// and noise pairs.
    pub max_violation: f64,
    /// Probe where `max_violation` was attained.
    pub worst_probe: usize,
}

/// Checks `L^{j1} σ_{k,j2} = L^{j2} σ_{k,j1}` at every probe, with the
/// tolerance scaled by `1 + ‖x‖`.
pub fn check_commutativity(
    model: &SdeModel,
    probes: &[Vec<f64>],
    tol: f64,
) -> Result<CommutativityCheck, ModelError> {
    if probes.is_empty() {
        return Err(ModelError::NoProbes);
    }
    if !(tol > 0.0) {
        return Err(ModelError::NonPositive {
            what: "commutativity tolerance",
            value: tol,
        });
    }
    let m = model.noise_dim();
    let mut result = CommutativityCheck {
        commutative: true,
        max_violation: 0.0,
        worst_probe: 0,
    };
    if m == 1 {
        return Ok(result);
    }
    for (i, x) in probes.iter().enumerate() {
        let l = l_operator(model, x)?;
        let allowed = tol * (1.0 + norm(x));
        for j1 in 0..m {
            for j2 in j1 + 1..m {
                for (a, b) in l.get(j1, j2).iter().zip(l.get(j2, j1)) {
                    let v = (a - b).abs();
                    if v > allowed {
                        result.commutative = false;
                    }
                    if v > result.max_violation {
                        result.max_violation = v;
                        result.worst_probe = i;
                    }
                }
            }
        }
    }
    Ok(result)
}

/// Probe set used for the cached gate: the initial state, the origin, and 32
/// seeded points in a box around them.
pub fn default_probes(model: &SdeModel) -> Vec<Vec<f64>> {
    let d = model.state_dim();
    let radius = 2.0 * (1.0 + model.initial_state().iter().fold(0.0f64, |a, x| a.max(x.abs())));
    let mut rng = ChaCha8Rng::seed_from_u64(0x636f_6d6d_7574_6521);
    let mut probes = vec![model.initial_state().to_vec(), vec![0.0; d]];
    probes.extend((0..32).map(|_| (0..d).map(|_| rng.random_range(-radius..=radius)).collect()));
    probes
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Maximum of `⟨x−y, μ(x)−μ(y)⟩ / ‖x−y‖²` over the probe pairs. Reported
    /// raw, so it is negative for strictly dissipative drifts.
    pub one_sided_lipschitz_estimate: f64,
    /// Maximum of `‖σ(x)−σ(y)‖ / ‖x−y‖` with the spectral norm.
    pub diffusion_lipschitz_estimate: f64,
    /// Maximum over `j1, j2` of `‖L^{j1}σ_{j2}(x) − L^{j1}σ_{j2}(y)‖ / ‖x−y‖`.
    pub l_coefficient_lipschitz_estimate: f64,
    pub probe_count: usize,
    pub probe_box: f64,
}

/// Draws `sample_count` pairs uniformly from `[-box_radius, box_radius]^d`
/// and reports empirical Lipschitz-type constants. Advisory only.
pub fn probe_assumptions(
    model: &SdeModel,
    sample_count: usize,
    box_radius: f64,
    seed: u64,
) -> Result<AssumptionReport, ModelError> {
    if sample_count < 2 {
        return Err(ModelError::TooFewSamples {
            min: 2,
            got: sample_count,
        });
    }
    if !(box_radius > 0.0 && box_radius.is_finite()) {
        return Err(ModelError::NonPositive {
            what: "probe box radius",
            value: box_radius,
        });
    }
    let d = model.state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<f64> {
        (0..d)
            .map(|_| rng.random_range(-box_radius..=box_radius))
            .collect()
    };
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..sample_count).map(|_| (draw(), draw())).collect();
    let mut report = probe_assumptions_on_pairs(model, &pairs)?;
    report.probe_box = box_radius;
    Ok(report)
}

/// Same estimates over an explicit list of pairs; pairs with `x == y` are
/// skipped. `probe_box` is the largest coordinate magnitude seen.
pub fn probe_assumptions_on_pairs(
    model: &SdeModel,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<AssumptionReport, ModelError> {
    let d = model.state_dim();
    let m = model.noise_dim();
    let mut report = AssumptionReport {
        one_sided_lipschitz_estimate: f64::NEG_INFINITY,
        diffusion_lipschitz_estimate: 0.0,
        l_coefficient_lipschitz_estimate: 0.0,
        probe_count: 0,
        probe_box: 0.0,
    };
    let mut sigma_diff = vec![0.0; d * m];
    for (x, y) in pairs {
        model.check_point(x)?;
        model.check_point(y)?;
        let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let dist = norm(&dx);
        if dist == 0.0 {
            continue;
        }
        report.probe_count += 1;
        report.probe_box = x
            .iter()
            .chain(y)
            .fold(report.probe_box, |acc, v| acc.max(v.abs()));

        let dmu: Vec<f64> = model
            .drift(x)
            .iter()
            .zip(model.drift(y))
            .map(|(a, b)| a - b)
            .collect();
        let one_sided = dot(&dx, &dmu) / (dist * dist);
        if !one_sided.is_finite() {
            return Err(ModelError::NonFinite { what: "drift" });
        }
        report.one_sided_lipschitz_estimate = report.one_sided_lipschitz_estimate.max(one_sided);

        for j in 0..m {
            let sx = model.diffusion_column(j, x);
            let sy = model.diffusion_column(j, y);
            for k in 0..d {
                sigma_diff[k * m + j] = sx[k] - sy[k];
            }
        }
        let sigma_quot = spectral_norm(&sigma_diff, d, m) / dist;
        if !sigma_quot.is_finite() {
            return Err(ModelError::NonFinite { what: "diffusion" });
        }
        report.diffusion_lipschitz_estimate = report.diffusion_lipschitz_estimate.max(sigma_quot);

        let lx = l_operator(model, x)?;
        let ly = l_operator(model, y)?;
        for j1 in 0..m {
            for j2 in 0..m {
                let diff: Vec<f64> = lx
                    .get(j1, j2)
                    .iter()
                    .zip(ly.get(j1, j2))
                    .map(|(a, b)| a - b)
                    .collect();
                report.l_coefficient_lipschitz_estimate =
                    report.l_coefficient_lipschitz_estimate.max(norm(&diff) / dist);
            }
        }
    }
    if report.probe_count == 0 {
        return Err(ModelError::TooFewSamples { min: 1, got: 0 });
    }
    Ok(report)
}

/// Largest singular value of a row-major `rows × cols` matrix. Exact for a
/// single row or column, power iteration on `AᵀA` otherwise.
fn spectral_norm(a: &[f64], rows: usize, cols: usize) -> f64 {
    if rows == 1 || cols == 1 {
        return norm(a);
    }
    let mut gram = vec![0.0; cols * cols];
    for i in 0..cols {
        for j in 0..cols {
            gram[i * cols + j] = (0..rows).map(|k| a[k * cols + i] * a[k * cols + j]).sum();
        }
    }
    let mut v = vec![1.0 / (cols as f64).sqrt(); cols];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..cols)
            .map(|i| dot(&gram[i * cols..(i + 1) * cols], &v))
            .collect();
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let converged = (nw - lambda).abs() <= 1e-14 * nw;
        lambda = nw;
        v = w.into_iter().map(|x| x / nw).collect();
        if converged {
            break;
        }
    }
    lambda.sqrt()
}

/// `ξ exp((a − b²/2) T + b W_T)`, the exact GBM endpoint.
pub fn gbm_exact_endpoint(a: f64, b: f64, xi: f64, horizon: f64, w_terminal: f64) -> f64 {
    xi * ((a - 0.5 * b * b) * horizon + b * w_terminal).exp()
}

pub const GBM_DEFAULT_DRIFT: f64 = -0.5;
pub const GBM_DEFAULT_VOLATILITY: f64 = 0.5;

/// `dX = -X⁵ dt + X dW`, `X_0 = 1` on `[0, 1]`.
pub fn poly5() -> SdeModel {
    SdeModel::new(
        "poly5",
        vec![1.0],
        1.0,
        vector_field(|x, out| out[0] = -x[0].powi(5)),
        vec![vector_field(|x, out| out[0] = x[0])],
    )
    .and_then(|m| m.with_jacobians(vec![jacobian_field(|_, out| out[0] = 1.0)]))
    .expect("poly5 is well formed")
}

/// `dX = a X dt + b X dW`, `X_0 = 1` on `[0, 1]`, with the closed-form
/// endpoint attached.
pub fn gbm(a: f64, b: f64) -> SdeModel {
    let xi = 1.0;
    let horizon = 1.0;
    SdeModel::new(
        "gbm",
        vec![xi],
        horizon,
        vector_field(move |x, out| out[0] = a * x[0]),
        vec![vector_field(move |x, out| out[0] = b * x[0])],
    )
    .and_then(|m| m.with_jacobians(vec![jacobian_field(move |_, out| out[0] = b)]))
    .expect("gbm is well formed")
    .with_exact_endpoint(Arc::new(move |w| {
        vec![gbm_exact_endpoint(a, b, xi, horizon, w[0])]
    }))
}

/// Two-dimensional diagonal noise with a cubic dissipative drift:
/// `μ(x) = −x − x‖x‖²`, `σ_i(x) = ½ x_i e_i`.
pub fn diag2() -> SdeModel {
    let column = |i: usize| {
        vector_field(move |x, out| {
            out.fill(0.0);
            out[i] = 0.5 * x[i];
        })
    };
    let jacobian = |i: usize| {
        jacobian_field(move |_, out| {
            out.fill(0.0);
            out[i * 2 + i] = 0.5;
        })
    };
    SdeModel::new(
        "diag2",
        vec![1.0, -0.5],
        1.0,
        vector_field(|x, out| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            out[0] = -x[0] - x[0] * r2;
            out[1] = -x[1] - x[1] * r2;
        }),
        vec![column(0), column(1)],
    )
    .and_then(|m| m.with_jacobians(vec![jacobian(0), jacobian(1)]))
    .expect("diag2 is well formed")
}

/// `σ_1(x) = (x_2, 0)`, `σ_2(x) = (0, x_1)`: violates commutativity. Only
/// meant for negative tests.
pub fn noncomm2() -> SdeModel {
    SdeModel::new(
        "noncomm2",
        vec![1.0, 2.0],
        1.0,
        vector_field(|x, out| {
            out[0] = -x[0];
            out[1] = -x[1];
        }),
        vec![
            vector_field(|x, out| {
                out[0] = x[1];
                out[1] = 0.0;
            }),
            vector_field(|x, out| {
                out[0] = 0.0;
                out[1] = x[0];
            }),
        ],
    )
    .and_then(|m| {
        m.with_jacobians(vec![
            jacobian_field(|_, out| out.copy_from_slice(&[0.0, 1.0, 0.0, 0.0])),
            jacobian_field(|_, out| out.copy_from_slice(&[0.0, 0.0, 1.0, 0.0])),
        ])
    })
    .expect("noncomm2 is well formed")
}

pub const BUILTIN_MODEL_NAMES: [&str; 4] = ["poly5", "gbm", "diag2", "noncomm2"];

pub fn builtin_models() -> Vec<SdeModel> {
    vec![
        poly5(),
        gbm(GBM_DEFAULT_DRIFT, GBM_DEFAULT_VOLATILITY),
        diag2(),
        noncomm2(),
    ]
}

pub fn builtin_model(name: &str) -> Option<SdeModel> {
    builtin_models().into_iter().find(|m| m.name() == name)
}
