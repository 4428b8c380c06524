//! Error taxonomy shared by the integrator, simulator, and optimizer.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    /// A state component left the trusted numeric range or became NaN/inf.
    #[error("state became non-finite or left the trusted range at t = {t}: ({x1}, {x2})")]
    NonFiniteState { t: f64, x1: f64, x2: f64 },

    /// Step-size control collapsed below the minimum useful step.
    #[error("step size control failed at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },

    /// An event function dipped to zero without a resolvable sign change.
    #[error("event function grazed zero near t = {t} without a clean crossing")]
    TangencyUnresolved { t: f64 },

    /// The hybrid simulation exceeded the transition budget or transitions
    /// accumulated faster than the event tolerance can separate.
    #[error("transition accumulation suggests Zeno behavior near t = {t} ({count} transitions)")]
    ZenoSuspected { t: f64, count: usize },

    /// Invalid configuration: bad parameter values, malformed model files,
    /// inconsistent tolerance settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// A section curve fails its construction requirements (e.g. the mode-1
    /// flow does not cross it transversally over the parameter range).
    #[error("invalid section curve: {0}")]
    CurveInvalid(String),

    /// A flow that must reach the switching surface ran out its horizon.
    #[error("guard not reached: {0}")]
    GuardNotReached(String),

    /// A flow that must return to the section ran out its horizon.
    #[error("section not reached: {0}")]
    SectionNotReached(String),

    /// A curve-curve search found no intersection inside its window.
    #[error("no intersection: {0}")]
    NoIntersection(String),

    /// A time window falls outside the span of the trajectory it slices.
    #[error("range error: {0}")]
    Range(String),

    /// Two trajectories cannot be joined: endpoint states disagree.
    #[error("mismatch error: {0}")]
    Mismatch(String),

    /// A geometric precondition of the return-map construction does not hold
    /// at the requested point (e.g. the point is outside the section).
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    /// The optimizer found no feasible candidate point.
    #[error("no feasible point: {0}")]
    NoFeasiblePoint(String),

    /// Closed-orbit verification failed: residual above tolerance.
    #[error("verification failed: residual {residual:e} exceeds tolerance {tol:e}")]
    VerificationFailed { residual: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, SolverError>;

impl SolverError {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            SolverError::Config(_) => 2,
            SolverError::NoFeasiblePoint(_) => 4,
            SolverError::VerificationFailed { .. } => 5,
            // All numeric failures share one code.
            SolverError::NonFiniteState { .. }
            | SolverError::StepFailure { .. }
            | SolverError::TangencyUnresolved { .. }
            | SolverError::ZenoSuspected { .. }
            | SolverError::CurveInvalid(_)
            | SolverError::GuardNotReached(_)
            | SolverError::SectionNotReached(_)
            | SolverError::NoIntersection(_)
            | SolverError::Range(_)
            | SolverError::Mismatch(_)
            | SolverError::PreconditionViolated(_) => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(SolverError::Config("x".into()).exit_code(), 2);
        assert_eq!(
            SolverError::NonFiniteState { t: 0.0, x1: 0.0, x2: 0.0 }.exit_code(),
            3
        );
        assert_eq!(SolverError::StepFailure { t: 0.0, h: 0.0 }.exit_code(), 3);
        assert_eq!(SolverError::NoFeasiblePoint("x".into()).exit_code(), 4);
        assert_eq!(
            SolverError::VerificationFailed { residual: 1.0, tol: 0.1 }.exit_code(),
            5
        );
    }

    #[test]
    fn messages_are_informative() {
        let e = SolverError::NonFiniteState { t: 1.5, x1: f64::NAN, x2: 2.0 };
        let msg = e.to_string();
        assert!(msg.contains("1.5"));
        let e = SolverError::VerificationFailed { residual: 1e-3, tol: 1e-6 };
        assert!(e.to_string().contains("residual"));
    }
}
