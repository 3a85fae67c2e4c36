//! Beta / Dirichlet evidence: belief mass, uncertainty, entropy and the
//! entropy-regularized evidential losses.

pub mod entropy;
pub mod evidence;
pub mod loss;
pub mod special;

pub use entropy::{beta_entropy, beta_pdf, dirichlet_entropy, dirichlet_entropy_grad};
pub use evidence::{argmax, BetaEvidence, BetaPrediction, DirichletEvidence, DirichletPrediction};
pub use loss::{beta_term, dirichlet_edl_loss, dirichlet_edl_term, edl_loss, edl_loss_logits, LossConfig};
