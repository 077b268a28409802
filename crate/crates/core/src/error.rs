use thiserror::Error;

use crate::schemes::SchemeKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("a Brownian grid needs at least one step")]
    ZeroSteps,
    #[error("a Brownian grid needs at least one noise component")]
    ZeroNoiseDim,
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("{len} increments cannot be split into rows of {noise_dim}")]
    RaggedIncrements { len: usize, noise_dim: usize },
    #[error("coarsening factor {factor} does not divide {steps} steps")]
    BadCoarsening { factor: usize, steps: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model `{0}` has an empty state or noise dimension")]
    EmptyDimension(String),
    #[error("model `{model}`: expected {expected} diffusion Jacobians, got {got}")]
    JacobianCount {
        model: String,
        expected: usize,
        got: usize,
    },
    #[error("point has dimension {got}, model expects {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("{what} evaluated to a non-finite value")]
    NonFinite { what: &'static str },
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("at least one probe point is required")]
    NoProbes,
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("grid has {grid} noise components but the model has {model}")]
    NoiseDimMismatch { grid: usize, model: usize },
    #[error("grid horizon {grid} differs from the model horizon {model}")]
    HorizonMismatch { grid: f64, model: f64 },
    #[error("state has dimension {got}, model expects {expected}")]
    StateDimMismatch { expected: usize, got: usize },
    #[error("increment has dimension {got}, model expects {expected}")]
    IncrementDimMismatch { expected: usize, got: usize },
    #[error("mesh width must be positive, got {0}")]
    BadMeshWidth(f64),
    #[error(
        "{scheme} requires commutative noise; model `{model}` violates the commutativity condition by {violation:e}"
    )]
    NonCommutative {
        scheme: SchemeKind,
        model: String,
        violation: f64,
    },
    #[error("step left the finite range: {state:?}")]
    BlowUp { state: Vec<f64> },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("no step counts given")]
    NoStepCounts,
    #[error("step count {steps} does not divide the reference resolution {reference}")]
    NotDivisor { steps: usize, reference: usize },
    #[error("reference resolution {reference} is less than 4x the step count {steps}")]
    ReferenceTooCoarse { steps: usize, reference: usize },
    #[error("need at least 2 paths, got {0}")]
    TooFewPaths(usize),
    #[error("moment order must be at least 1, got {0}")]
    BadMomentOrder(f64),
    #[error("target precision must be positive, got {0}")]
    BadTarget(f64),
    #[error("reference solution blew up on path {path} at step {step}")]
    ReferenceBlowUp { path: u64, step: usize },
    #[error("{scheme} blew up on {blow_ups} of {paths} paths at N = {steps}")]
    TamedBlowUp {
        scheme: SchemeKind,
        steps: usize,
        blow_ups: usize,
        paths: usize,
    },
    #[error("log-log fit needs at least 2 rows with positive finite error, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}
