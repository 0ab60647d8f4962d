//! Certified quantizers realizing the two upper-bound nets.
//!
//! Nets are never enumerated. A quantizer maps a path to an integer code and
//! the code decodes to a net element; only touched codes are materialized.
//!
//! - [`large`]: cube grid over (jump size, jump time) for `X^ε`, radius `ε^B`
//!   in the J-distance.
//! - [`small`]: band-crossing approximation of `X_ε`, radius `3ε` in the sup
//!   norm with `ω(y, 2ε^B) ≤ 2ε`.
//! - [`PathQuantizer`]: their sum, certified at `6ε`.

pub mod large;
pub mod small;

use serde::{Deserialize, Serialize};

use crate::cadlag::StepFunction;
use crate::error::{invalid, Error, Result};
use crate::levy::{PathPair, StableParams};
use crate::skorokhod::{within, Decision};

pub use large::{choose_m, choose_window, log_card_large, quantize_large, LargeCode, LargeJumpQuantizer};
pub use small::{
    build_y, discretize_y, estimate_a, estimate_a_with, log_card_small, quantize_small, AEstimate, BandPath, SmallCode,
    SmallJumpQuantizer,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureFlag {
    JumpCountOutOfWindow,
    JumpSizeExceedsM,
    TooManySteps,
    ShortStep,
}

impl FailureFlag {
    pub const ALL: [FailureFlag; 4] = [
        FailureFlag::JumpCountOutOfWindow,
        FailureFlag::JumpSizeExceedsM,
        FailureFlag::TooManySteps,
        FailureFlag::ShortStep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FailureFlag::JumpCountOutOfWindow => "JumpCountOutOfWindow",
            FailureFlag::JumpSizeExceedsM => "JumpSizeExceedsM",
            FailureFlag::TooManySteps => "TooManySteps",
            FailureFlag::ShortStep => "ShortStep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Large,
    Small,
    Path,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NetCode {
    Large(LargeCode),
    Small(SmallCode),
    Path { large: LargeCode, small: SmallCode },
}

impl NetCode {
    pub fn kind(&self) -> ElementKind {
        match self {
            NetCode::Large(_) => ElementKind::Large,
            NetCode::Small(_) => ElementKind::Small,
            NetCode::Path { .. } => ElementKind::Path,
        }
    }
}

/// A decoded net element together with the radius it is certified at.
///
/// Large elements are certified in the J-distance, small ones in the sup
/// norm, path elements in the J-distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetElement {
    pub code: NetCode,
    pub path: StepFunction,
    pub radius: f64,
}

impl NetElement {
    pub fn kind(&self) -> ElementKind {
        self.code.kind()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantizeOutcome {
    Element(NetElement),
    Failed(FailureFlag),
}

impl QuantizeOutcome {
    pub fn element(&self) -> Option<&NetElement> {
        match self {
            QuantizeOutcome::Element(e) => Some(e),
            QuantizeOutcome::Failed(_) => None,
        }
    }

    pub fn into_element(self) -> Option<NetElement> {
        match self {
            QuantizeOutcome::Element(e) => Some(e),
            QuantizeOutcome::Failed(_) => None,
        }
    }

    pub fn flag(&self) -> Option<FailureFlag> {
        match self {
            QuantizeOutcome::Element(_) => None,
            QuantizeOutcome::Failed(f) => Some(*f),
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, QuantizeOutcome::Element(_))
    }
}

/// Both quantizers at one scale `ε`, each run with a third of the failure
/// budget `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathQuantizer {
    pub eps: f64,
    pub large: LargeJumpQuantizer,
    pub small: SmallJumpQuantizer,
}

impl PathQuantizer {
    /// `a_cap` is the step-count constant `A` of the small quantizer.
    pub fn new(params: &StableParams, eps: f64, b: f64, delta: f64, a_cap: f64) -> Result<Self> {
        params.validate()?;
        if !(b > 1.0 && b > 2.0 * params.alpha) {
            return Err(invalid(
                "B",
                format!(
                    "must exceed max(1, 2 alpha) = {}, got {b}",
                    1f64.max(2.0 * params.alpha)
                ),
            ));
        }
        Ok(PathQuantizer {
            eps,
            large: LargeJumpQuantizer::new(params, eps, b, delta / 3.0)?,
            small: SmallJumpQuantizer::new(params.alpha, eps, b, a_cap)?,
        })
    }

    /// Radius of the J-ball every emitted element is certified at.
    pub fn radius(&self) -> f64 {
        6.0 * self.eps
    }

    pub fn log_cardinality(&self) -> f64 {
        log_card_large(&self.large) + log_card_small(&self.small)
    }

    pub fn decode(&self, large: &LargeCode, small: &SmallCode) -> Result<StepFunction> {
        self.large.decode(large)?.add(&self.small.decode(small)?)
    }

    /// Checks the `6ε` certificate of `element` against the full path.
    pub fn certify(&self, x: &StepFunction, element: &NetElement) -> Result<Decision> {
        within(x, &element.path, element.radius)
    }
}

/// Quantizes both halves of `pair` and sums the elements; the first failure
/// flag wins.
pub fn quantize_path(pair: &PathPair, q: &PathQuantizer) -> Result<QuantizeOutcome> {
    if (pair.split - q.eps).abs() > 1e-12 * q.eps {
        return Err(Error::Precondition(format!(
            "pair split at {} but quantizer scale is {}",
            pair.split, q.eps
        )));
    }
    let large = match quantize_large(&pair.large, &q.large)? {
        QuantizeOutcome::Element(e) => e,
        failed => return Ok(failed),
    };
    let small = match quantize_small(&pair.small, &q.small)? {
        QuantizeOutcome::Element(e) => e,
        failed => return Ok(failed),
    };
    let (NetCode::Large(lc), NetCode::Small(sc)) = (large.code, small.code) else {
        unreachable!("quantizers emit their own code kinds")
    };
    Ok(QuantizeOutcome::Element(NetElement {
        path: large.path.add(&small.path)?,
        code: NetCode::Path { large: lc, small: sc },
        radius: q.radius(),
    }))
}

/// Total code length in nats: the log-size of the code space the element
/// was drawn from.
pub fn code_length_nats(code: &NetCode, q: &PathQuantizer) -> f64 {
    match code {
        NetCode::Large(c) => q.large.code_length_nats(c),
        NetCode::Small(c) => q.small.code_length_nats(c),
        NetCode::Path { large, small } => q.large.code_length_nats(large) + q.small.code_length_nats(small),
    }
}
