use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point ({0}, {1}) is outside the map domain")]
    OutsideDomain(f64, f64),
    #[error("point ({0}, {1}) lies on the singular set")]
    OnSingularSet(f64, f64),
    #[error("orbit reached the singular guard at index {0}")]
    SingularEncounter(usize),
    #[error("orbit left the domain at index {0}")]
    OrbitEscaped(usize),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("matrix is exactly zero")]
    ZeroMatrix,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("no hyperbolic coordinates at order {k}: co-eccentricity {coecc} is not below 1")]
    NoHyperbolicCoordinates { k: usize, coecc: f64 },
    #[error("conformal derivative: every direction is critical")]
    ConformalDegenerate,
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("ledger violates a structural inequality: {0}")]
    InvalidLedger(String),
    #[error("co-eccentricity at order {0} is not below 1")]
    DegenerateCoeccentricity(usize),
    #[error("one-step co-eccentricity vanishes at index {0}")]
    DegenerateStep(usize),
    #[error("zero determinant at index {0}")]
    ZeroDeterminant(usize),
    #[error("certificate required: {0}")]
    CertificateRequired(String),
    #[error("frame sign alignment is ambiguous (|dot| = {0})")]
    FrameFlipUnresolvable(f64),
    #[error("stencil frame failed: {0}")]
    StencilDegenerate(String),
    #[error("no frame at curve start: {0}")]
    NoFrameAtStart(String),
    #[error("unknown map `{0}`")]
    UnknownMap(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
