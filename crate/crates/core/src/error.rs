use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input parameter lies outside its allowed range.
    #[error("invalid parameter `{name}`: {reason}")]
    Domain { name: &'static str, reason: String },

    /// The transport system has no unique solution (exact pole, lossless and decoupled).
    #[error("singular transport system at detuning {delta} Γ0")]
    Singular { delta: f64 },

    /// A closed-form expression was evaluated at a zero of its denominator.
    #[error("closed-form pole: {0}")]
    Pole(&'static str),

    /// Routing efficiency needs some transmitted flux.
    #[error("routing efficiency undefined: no transmitted flux")]
    UndefinedEfficiency,

    /// Mean top-guide transmission is zero, so the localization length diverges.
    #[error("localization length unbounded: mean top transmission is zero")]
    ZeroTransmission,

    #[error("disorder sampler rejected {attempts} consecutive draws (min separation {min_separation_nm} nm)")]
    SamplerExhausted { attempts: u64, min_separation_nm: f64 },

    #[error("realization {index}: {source}")]
    Realization {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }

    /// Strips realization tags to get at the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Realization { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::Singular { .. } | Error::Pole(_) | Error::SamplerExhausted { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
