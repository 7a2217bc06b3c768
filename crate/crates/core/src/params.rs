//! Scenario parameters and per-slot arrival event probabilities.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} = {value} is outside [0, 1]")]
    ArrivalRate { name: &'static str, value: f64 },
    #[error("buffer capacity {name} must be at least 1")]
    Capacity { name: &'static str },
    #[error("{name} = {value} must be finite and positive")]
    NotPositive { name: &'static str, value: f64 },
}

/// All scenario constants for one two-way relay instance.
///
/// Arrival rates are Bernoulli probabilities per slot, capacities are in
/// packets, the delay budget is in slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub d_max: f64,
    pub rate_r: f64,
    pub scale_a: f64,
    pub scale_b: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            lambda_a: 0.5,
            lambda_b: 0.5,
            n_a: 15,
            n_b: 15,
            d_max: 3.0,
            rate_r: 1.0,
            scale_a: 1.0,
            scale_b: 1.0,
        }
    }
}

impl SystemParams {
    /// Validated constructor with unit rate and unit Rayleigh scales.
    pub fn new(
        lambda_a: f64,
        lambda_b: f64,
        n_a: usize,
        n_b: usize,
        d_max: f64,
    ) -> Result<Self, ParamError> {
        let p = Self {
            lambda_a,
            lambda_b,
            n_a,
            n_b,
            d_max,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, value) in [("lambda_a", self.lambda_a), ("lambda_b", self.lambda_b)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ParamError::ArrivalRate { name, value });
            }
        }
        if self.n_a < 1 {
            return Err(ParamError::Capacity { name: "n_a" });
        }
        if self.n_b < 1 {
            return Err(ParamError::Capacity { name: "n_b" });
        }
        for (name, value) in [
            ("d_max", self.d_max),
            ("scale_a", self.scale_a),
            ("scale_b", self.scale_b),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::NotPositive { name, value });
            }
        }
        if !(self.rate_r.is_finite() && self.rate_r >= 0.0) {
            return Err(ParamError::NotPositive {
                name: "rate_r",
                value: self.rate_r,
            });
        }
        Ok(())
    }

    /// Total offered load `lambda_a + lambda_b`.
    pub fn total_arrival_rate(&self) -> f64 {
        self.lambda_a + self.lambda_b
    }

    /// The same scenario with the roles of A and B exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            lambda_a: self.lambda_b,
            lambda_b: self.lambda_a,
            n_a: self.n_b,
            n_b: self.n_a,
            scale_a: self.scale_b,
            scale_b: self.scale_a,
            ..*self
        }
    }
}

/// Probabilities of the four joint arrival events in a slot:
/// both arrive, only A, only B, none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalProbs {
    pub both: f64,
    pub a_only: f64,
    pub b_only: f64,
    pub none: f64,
}

impl ArrivalProbs {
    /// Events in the fixed order (both, A only, B only, none), each paired
    /// with the number of arrivals it adds to (A, B).
    pub fn events(&self) -> [(f64, usize, usize); 4] {
        [
            (self.both, 1, 1),
            (self.a_only, 1, 0),
            (self.b_only, 0, 1),
            (self.none, 0, 0),
        ]
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.both, self.a_only, self.b_only, self.none]
    }
}

pub fn arrival_probs(params: &SystemParams) -> ArrivalProbs {
    let (la, lb) = (params.lambda_a, params.lambda_b);
    ArrivalProbs {
        both: la * lb,
        a_only: la * (1.0 - lb),
        b_only: (1.0 - la) * lb,
        none: (1.0 - la) * (1.0 - lb),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(la: f64, lb: f64) -> [f64; 4] {
        let p = SystemParams {
            lambda_a: la,
            lambda_b: lb,
            ..SystemParams::default()
        };
        arrival_probs(&p).as_array()
    }

    #[test]
    fn arrival_probability_examples() {
        assert_eq!(probs(0.5, 0.5), [0.25, 0.25, 0.25, 0.25]);
        assert_eq!(probs(0.0, 0.0), [0.0, 0.0, 0.0, 1.0]);
        let f = probs(0.5, 0.3);
        for (got, want) in f.iter().zip([0.15, 0.35, 0.15, 0.35]) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn arrival_probabilities_sum_to_one() {
        for k in 0..=20 {
            for l in 0..=20 {
                let f = probs(k as f64 / 20.0, l as f64 / 20.0);
                assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(f.iter().all(|x| (0.0..=1.0).contains(x)));
            }
        }
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(SystemParams::new(1.2, 0.1, 3, 3, 3.0).is_err());
        assert!(SystemParams::new(0.2, -0.1, 3, 3, 3.0).is_err());
        assert!(SystemParams::new(0.2, 0.1, 0, 3, 3.0).is_err());
        assert!(SystemParams::new(0.2, 0.1, 3, 3, 0.0).is_err());
        let bad_scale = SystemParams {
            scale_b: 0.0,
            ..SystemParams::default()
        };
        assert!(matches!(
            bad_scale.validate(),
            Err(ParamError::NotPositive {
                name: "scale_b",
                ..
            })
        ));
        assert!(SystemParams::new(0.0, 0.0, 1, 1, 0.5).is_ok());
    }
}
