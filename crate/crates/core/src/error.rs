use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of the numerical routines.
///
/// Every variant is a precondition or conditioning failure of the input data;
/// none of them indicate a bug. The command-line tool maps all of them to the
/// same "numerical failure" exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("ill-conditioned system: {0}")]
    IllConditioned(&'static str),
    #[error("rank deficient design matrix (rank {rank}, need {needed})")]
    RankDeficient { rank: usize, needed: usize },
    #[error("rays are parallel")]
    ParallelRays,
    #[error("rays miss each other by {gap} (tolerance {tol})")]
    GapExceeded { gap: f64, tol: f64 },
    #[error("ray is parallel to plane")]
    ParallelToPlane,
    #[error("homography decomposition is not physical: {0}")]
    NonPhysical(&'static str),
    #[error("point maps to infinity under homography")]
    PointAtInfinity,
    #[error("laser line labels differ between calibration planes")]
    LabelMismatch,
    #[error("reconstruction matrix is singular (camera ray lies in the laser plane)")]
    SingularGeometry,
    #[error("reflected-ray support points coincide")]
    CoincidentPoints,
    #[error("projection center is ill-conditioned (incident rays nearly parallel)")]
    CenterIllConditioned,
    #[error("line count mismatch: {left} left vs {right} right")]
    CountMismatch { left: usize, right: usize },
    #[error("left and right line orders disagree")]
    OrderViolation,
    #[error("disparity {0} is not positive")]
    NonPositiveDisparity(f64),
    #[error("phase shifting needs at least 3 steps, got {0}")]
    InsufficientSteps(usize),
    #[error("carrier frequency {0} is below 2 cycles per image")]
    CarrierTooLow(f64),
    #[error("valid-pixel mask is disconnected for the chosen unwrap mode")]
    DisconnectedMask,
    #[error("profile has {got} samples, need at least {needed}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("no feature candidate clears the prominence threshold")]
    NoFeatures,
    #[error("required profile features are missing: {0}")]
    MissingFeatures(&'static str),
    #[error("no dominant line found by the Hough transform")]
    NoDominantLine,
    #[error("groove flanks are nearly parallel")]
    NearParallelFlanks,
    #[error("no abrupt jump in the sequence")]
    NoJump,
    #[error("laser does not intersect the surface extent")]
    NoIntersection,
}

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
