use super::special::{digamma, ln_gamma, trigamma};
use crate::error::{Error, Result};

fn check_domain(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() {
        return Err(Error::Domain("empty concentration vector".into()));
    }
    match alpha.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        Some(a) => Err(Error::Domain(format!("concentration {a} must be positive and finite"))),
        None => Ok(()),
    }
}

/// `ln B(α) = Σ ln Γ(α_c) − ln Γ(S)`.
pub fn ln_multivariate_beta(alpha: &[f64]) -> f64 {
    alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(alpha.iter().sum())
}

/// Differential entropy of `Dir(α)`:
/// `H = ln B(α) + (S − C) ψ(S) − Σ_c (α_c − 1) ψ(α_c)`.
pub fn dirichlet_entropy(alpha: &[f64]) -> Result<f64> {
    check_domain(alpha)?;
    let s: f64 = alpha.iter().sum();
    let c = alpha.len() as f64;
    Ok(ln_multivariate_beta(alpha) + (s - c) * digamma(s) - alpha.iter().map(|&a| (a - 1.0) * digamma(a)).sum::<f64>())
}

/// `∂H/∂α_k = (S − C) ψ'(S) − (α_k − 1) ψ'(α_k)`.
pub fn dirichlet_entropy_grad(alpha: &[f64]) -> Result<Vec<f64>> {
    check_domain(alpha)?;
    let s: f64 = alpha.iter().sum();
    let shared = (s - alpha.len() as f64) * trigamma(s);
    Ok(alpha.iter().map(|&a| shared - (a - 1.0) * trigamma(a)).collect())
}

pub fn beta_entropy(alpha: f64, beta: f64) -> Result<f64> {
    dirichlet_entropy(&[alpha, beta])
}

/// Beta density at `x ∈ (0, 1)`; used by quadrature checks.
pub fn beta_pdf(x: f64, alpha: f64, beta: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return match (x <= 0.0, alpha == 1.0, beta == 1.0) {
            (true, true, _) => beta,
            (false, _, true) => alpha,
            _ => 0.0,
        };
    }
    ((alpha - 1.0) * x.ln() + (beta - 1.0) * (-x).ln_1p() - ln_multivariate_beta(&[alpha, beta])).exp()
}
