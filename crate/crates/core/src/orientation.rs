/// Forwards or backwards reading of the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Forwards,
    Backwards,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Forwards => "forwards",
            Self::Backwards => "backwards",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "forwards" | "forward" => Some(Self::Forwards),
            "backwards" | "backward" => Some(Self::Backwards),
            _ => None,
        }
    }
}

/// A mode plus the flow time at which the orientation time `s` vanishes.
///
/// Forwards `s = t − origin`; backwards `s = τ = origin − t`. In orientation
/// time the metric evolves by `∂_s g = −2σS` with `σ` the hat sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeOrientation {
    pub mode: Mode,
    pub origin: f64,
}

impl TimeOrientation {
    pub fn forwards(origin: f64) -> Self {
        Self { mode: Mode::Forwards, origin }
    }

    pub fn backwards(origin: f64) -> Self {
        Self { mode: Mode::Backwards, origin }
    }

    pub fn hat_sign(&self) -> f64 {
        match self.mode {
            Mode::Forwards => 1.0,
            Mode::Backwards => -1.0,
        }
    }

    pub fn s_of(&self, t: f64) -> f64 {
        self.hat_sign() * (t - self.origin)
    }

    pub fn t_of(&self, s: f64) -> f64 {
        self.origin + self.hat_sign() * s
    }

    pub fn name(&self) -> &'static str {
        self.mode.name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for o in [TimeOrientation::forwards(0.25), TimeOrientation::backwards(1.5)] {
            for t in [0.3, 0.9] {
                assert!((o.t_of(o.s_of(t)) - t).abs() < 1e-15);
            }
        }
        assert_eq!(TimeOrientation::backwards(1.5).s_of(1.0), 0.5);
        assert_eq!(Mode::parse("backwards"), Some(Mode::Backwards));
    }
}
