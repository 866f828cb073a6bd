use thiserror::Error;

/// Errors raised by the simulation core.
///
/// Kernel validation messages name the violated model assumption: (A1) is
/// the dispersal-kernel contract (finite-range, zero-mean, aperiodic,
/// stochastic), (A2) the competition-kernel contract (finite-range,
/// nonnegative, positive on-site coefficient).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum CoreError {
    #[error("dispersal kernel violates (A1): empty support")]
    KernelEmpty,
    #[error("kernel offset {offset:?} has dimension {got}, expected {expected}")]
    KernelDimensionMismatch { offset: Vec<i64>, got: usize, expected: usize },
    #[error("kernel has duplicate offset {offset:?}")]
    KernelDuplicateOffset { offset: Vec<i64> },
    #[error("dispersal kernel violates (A1): negative weight {weight} at offset {offset:?}")]
    KernelNegativeWeight { offset: Vec<i64>, weight: f64 },
    #[error("dispersal kernel violates (A1): weight sum {sum} is not 1 (tolerance 1e-9)")]
    KernelBadSum { sum: f64 },
    #[error("dispersal kernel violates (A1): mean offset {mean:?} is not the zero vector")]
    KernelNonzeroMean { mean: Vec<f64> },
    #[error(
        "dispersal kernel violates (A1): support is periodic (gcd of return times up to horizon {horizon} is {gcd})"
    )]
    KernelPeriodic { gcd: u64, horizon: u64 },
    #[error("competition kernel violates (A2): on-site coefficient {value} is not positive")]
    CompetitionNonpositiveOnSite { value: f64 },
    #[error("competition kernel violates (A2): negative entry {weight} at offset {offset:?}")]
    CompetitionNegativeEntry { offset: Vec<i64>, weight: f64 },

    #[error("torus extent {extent} along axis {axis} is below the minimum {minimum} for the kernel ranges")]
    ExtentTooSmall { axis: usize, extent: usize, minimum: usize },
    #[error("geometry dimension {got} does not match kernel dimension {expected}")]
    GeometryDimensionMismatch { got: usize, expected: usize },
    #[error("fields do not share geometry")]
    GeometryMismatch,
    #[error("nested boxes of radius {radius} exceed the torus (extent {extent} along axis {axis})")]
    BoxExceedsTorus { radius: i64, extent: usize, axis: usize },

    #[error("colonization horizon not reached within {cap} kernel powers (growth factor too close to 1)")]
    HorizonCapExceeded { cap: u32 },
    #[error("growth factor must exceed 1, got {value}")]
    GrowthFactorTooSmall { value: f64 },

    #[error("map value {value} escapes the domain [0, {bound}] at site index {site}")]
    MapRangeEscape { value: f64, bound: f64, site: usize },
    #[error("perturbation {delta} at site index {site} undercuts -mean {mean} beyond tolerance")]
    PerturbationBelowMean { delta: f64, mean: f64, site: usize },

    #[error("no feasible upper margin: m = {m} leaves no room given shift {delta}")]
    NoFeasibleMargin { m: f64, delta: f64 },
    #[error("growth rate m = {m} outside the supported interval ({lo}, {hi})")]
    GrowthRateOutOfRange { m: f64, lo: f64, hi: f64 },
    #[error("interval sequence construction failed verification after {retries} retries (m = {m}, eps = {eps})")]
    IntervalConstructionFailed { m: f64, eps: f64, retries: u32 },
    #[error("lower sandwich map degenerate: m*kappa_hat = {product} >= m - 1 = {limit}")]
    SandwichDegenerate { product: f64, limit: f64 },
    #[error("configuration box leaves the positive-part region (bracket hits 0 inside the box)")]
    BoxLeavesPositivePart,
    #[error("no contraction constants exist for m = {m}, delta = {delta}")]
    NoContractionConstants { m: f64, delta: f64 },

    #[error("sandbox preconditions not met: {reason}")]
    SandboxPrecondition { reason: String },

    #[error("draw recording absent: run the trajectory with recording enabled")]
    RecordingAbsent,
    #[error("open probability {theta} outside [0, 1]")]
    ThetaOutOfRange { theta: f64 },

    #[error("{0}")]
    Invalid(String),
}

pub type CoreResult<T> = Result<T, CoreError>;
