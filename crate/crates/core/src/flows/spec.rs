use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowVariant {
    Static,
    Ricci,
    List,
    RicciHarmonic,
    McfEuclideanGraph,
    McfLorentzianGraph,
}

impl FlowVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::Ricci => "ricci",
            Self::List => "list",
            Self::RicciHarmonic => "ricci_harmonic",
            Self::McfEuclideanGraph => "mcf_euclidean_graph",
            Self::McfLorentzianGraph => "mcf_lorentzian_graph",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "static" => Self::Static,
            "ricci" => Self::Ricci,
            "list" => Self::List,
            "ricci_harmonic" => Self::RicciHarmonic,
            "mcf_euclidean_graph" => Self::McfEuclideanGraph,
            "mcf_lorentzian_graph" => Self::McfLorentzianGraph,
            _ => return None,
        })
    }

    pub fn is_graph(&self) -> bool {
        matches!(self, Self::McfEuclideanGraph | Self::McfLorentzianGraph)
    }

    /// Sign the paper's results give for the closed-form D, if any:
    /// `+1` for D ≥ 0, `-1` for D ≤ 0.
    pub fn expected_d_sign(&self) -> Option<i8> {
        match self {
            Self::List | Self::RicciHarmonic | Self::McfLorentzianGraph => Some(1),
            Self::McfEuclideanGraph => Some(-1),
            Self::Static | Self::Ricci => None,
        }
    }
}

/// Coupling function `α(t)` of the Ricci–harmonic flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSchedule {
    Constant(f64),
    /// `α(t) = start + rate·t`.
    Linear { start: f64, rate: f64 },
}

impl AlphaSchedule {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Self::Constant(a) => a,
            Self::Linear { start, rate } => start + rate * t,
        }
    }

    pub fn derivative(&self, _t: f64) -> f64 {
        match *self {
            Self::Constant(_) => 0.0,
            Self::Linear { rate, .. } => rate,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub variant: FlowVariant,
    pub alpha: AlphaSchedule,
    /// Number of components of the flat-target map (ricci_harmonic).
    pub target_dim: usize,
}

impl FlowSpec {
    pub fn new(variant: FlowVariant) -> Self {
        Self { variant, alpha: AlphaSchedule::Constant(0.0), target_dim: 0 }
    }

    pub fn ricci_harmonic(alpha: AlphaSchedule, target_dim: usize) -> Self {
        Self { variant: FlowVariant::RicciHarmonic, alpha, target_dim }
    }

    /// Checks `α ≥ 0` on `[0, t_end]`; returns warnings for hypotheses that
    /// fail without making the flow ill-posed.
    pub fn validate(&self, t_end: f64) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.variant == FlowVariant::RicciHarmonic {
            if self.target_dim == 0 {
                return Err(Error::MissingField { variant: "ricci_harmonic", field: "phi" });
            }
            for t in [0.0, t_end] {
                if self.alpha.value(t) < 0.0 {
                    return Err(Error::ConfigCheck {
                        check: "alpha_nonnegative",
                        message: format!("alpha({t}) = {} < 0", self.alpha.value(t)),
                    });
                }
            }
            if self.alpha.derivative(0.0) > 0.0 {
                warnings.push(format!(
                    "alpha is increasing (rate {}); D >= 0 is not guaranteed and negative regions are recorded",
                    self.alpha.derivative(0.0)
                ));
            }
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_roundtrip() {
        for v in [
            FlowVariant::Static,
            FlowVariant::Ricci,
            FlowVariant::List,
            FlowVariant::RicciHarmonic,
            FlowVariant::McfEuclideanGraph,
            FlowVariant::McfLorentzianGraph,
        ] {
            assert_eq!(FlowVariant::parse(v.name()), Some(v));
        }
    }

    #[test]
    fn increasing_alpha_warns_negative_alpha_fails() {
        let up = FlowSpec::ricci_harmonic(AlphaSchedule::Linear { start: 1.0, rate: 0.5 }, 2);
        assert_eq!(up.validate(1.0).unwrap().len(), 1);
        let neg = FlowSpec::ricci_harmonic(AlphaSchedule::Linear { start: 1.0, rate: -2.0 }, 2);
        assert!(neg.validate(1.0).is_err());
        let ok = FlowSpec::ricci_harmonic(AlphaSchedule::Constant(1.0), 2);
        assert!(ok.validate(1.0).unwrap().is_empty());
    }
}
