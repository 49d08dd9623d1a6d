//! Exact tabular verification of the model-based improvement bound, the
//! supporting lemmas and the Γ(α) law.

mod exact;
mod gamma;
mod instances;
mod lemmas;
mod live;

pub use exact::{discounted_visitation, exact_value, policy_matrix, state_values, tvd, TabularPolicy};
pub use gamma::{gamma_curve, GammaPoint};
pub use instances::{
    perturb_model, random_lemma1_instance, random_policy, run_theory_suite, Lemma1Instance, LemmaSummary,
    TheorySuiteReport, PERTURBATION_LEVELS,
};
pub use lemmas::{check_lemma1, check_lemma2, check_lemma3, lemma1_bound, Lemma2Outcome, Lemma3Outcome, TheoryReport};
pub use live::{federated_tabular_model, live_lemma1_check, LiveCheck};
