use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-event Beta evidence `(α, β)`, both `≥ 1`.
///
/// `α` backs the positive (event) outcome and `β` the negative one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEvidence {
    pub alpha: f64,
    pub beta: f64,
}

/// Everything derived from one [`BetaEvidence`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaPrediction {
    /// Belief in the event.
    pub b1: f64,
    /// Belief in the non-event.
    pub b2: f64,
    pub uncertainty: f64,
    /// Mean event probability `α / (α + β)`.
    pub prob: f64,
    /// `α > β`; a tie (including zero evidence) resolves to "no event".
    pub positive: bool,
}

impl BetaEvidence {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 1.0 && beta >= 1.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidEvidence(format!("alpha={alpha}, beta={beta} (need finite values >= 1)")));
        }
        Ok(Self { alpha, beta })
    }

    /// `α = relu(z₁) + 1`, `β = relu(z₂) + 1`.
    pub fn from_logits(z_pos: f64, z_neg: f64) -> Self {
        Self { alpha: z_pos.max(0.0) + 1.0, beta: z_neg.max(0.0) + 1.0 }
    }

    pub fn strength(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn uncertainty(&self) -> f64 {
        2.0 / self.strength()
    }

    pub fn prob(&self) -> f64 {
        self.alpha / self.strength()
    }

    pub fn belief(&self) -> (f64, f64) {
        let s = self.strength();
        ((self.alpha - 1.0) / s, (self.beta - 1.0) / s)
    }

    pub fn is_positive(&self) -> bool {
        self.alpha > self.beta
    }

    pub fn predict(&self) -> Result<BetaPrediction> {
        Self::new(self.alpha, self.beta)?;
        let (b1, b2) = self.belief();
        Ok(BetaPrediction { b1, b2, uncertainty: self.uncertainty(), prob: self.prob(), positive: self.is_positive() })
    }

    pub fn as_dirichlet(&self) -> DirichletEvidence {
        DirichletEvidence { alpha: vec![self.alpha, self.beta] }
    }
}

/// Class-wise Dirichlet evidence `α ∈ [1, ∞)^C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletEvidence {
    pub alpha: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletPrediction {
    pub belief: Vec<f64>,
    pub class: usize,
    pub uncertainty: f64,
    pub prob: Vec<f64>,
}

impl DirichletEvidence {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidEvidence("empty alpha".into()));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a >= 1.0) || !a.is_finite()) {
            return Err(Error::InvalidEvidence(format!("alpha component {a} < 1")));
        }
        Ok(Self { alpha })
    }

    /// The zero-evidence prior `α = [1, …, 1]`.
    pub fn uniform(classes: usize) -> Self {
        Self { alpha: vec![1.0; classes] }
    }

    pub fn strength(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn uncertainty(&self) -> f64 {
        self.alpha.len() as f64 / self.strength()
    }

    pub fn predict(&self) -> Result<DirichletPrediction> {
        Self::new(self.alpha.clone())?;
        let s = self.strength();
        let prob: Vec<f64> = self.alpha.iter().map(|a| a / s).collect();
        let class = argmax(&prob);
        Ok(DirichletPrediction {
            belief: self.alpha.iter().map(|a| (a - 1.0) / s).collect(),
            class,
            uncertainty: self.uncertainty(),
            prob,
        })
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logits_to_evidence() {
        let e = BetaEvidence::from_logits(0.0, 0.0);
        assert_eq!((e.alpha, e.beta, e.uncertainty()), (1.0, 1.0, 1.0));
        let e = BetaEvidence::from_logits(2.0, 0.0);
        assert_eq!((e.alpha, e.beta), (3.0, 1.0));
        let e = BetaEvidence::from_logits(-5.0, -5.0);
        assert_eq!((e.alpha, e.beta), (1.0, 1.0));
    }

    #[test]
    fn beta_prediction_values() {
        let p = BetaEvidence::new(3.0, 1.0).unwrap().predict().unwrap();
        assert_eq!((p.b1, p.b2, p.uncertainty, p.prob), (0.5, 0.0, 0.5, 0.75));
        assert!(p.positive);
        let p = BetaEvidence::new(10.0, 10.0).unwrap().predict().unwrap();
        assert_eq!((p.prob, p.uncertainty), (0.5, 0.1));
        assert!(!p.positive);
    }

    #[test]
    fn dirichlet_prior_has_full_uncertainty() {
        let p = DirichletEvidence::uniform(3).predict().unwrap();
        assert_eq!(p.belief, vec![0.0; 3]);
        assert_eq!(p.uncertainty, 1.0);
        assert_eq!(p.class, 0);
    }

    #[test]
    fn dirichlet_argmax_tie_breaks_low() {
        let p = DirichletEvidence::new(vec![1.0, 4.0, 4.0]).unwrap().predict().unwrap();
        assert_eq!(p.class, 1);
    }

    #[test]
    fn sub_unit_alpha_is_rejected() {
        assert!(BetaEvidence::new(0.5, 1.0).is_err());
        assert!(BetaEvidence { alpha: 0.9, beta: 2.0 }.predict().is_err());
        assert!(DirichletEvidence::new(vec![1.0, 0.99]).is_err());
    }
}
