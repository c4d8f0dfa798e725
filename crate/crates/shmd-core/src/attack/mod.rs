//! The black-box adversary: label-only oracles over the victim, proxy
//! reverse engineering from oracle answers, and gradient-guided
//! instruction injection built on the proxy.

mod evasion;
mod oracle;
mod proxy;

pub use evasion::{
    generate_evasive_set, identify_evasion_features, plan_from_direction,
    synthesize_evasive_trace, AttackConfig, EvasionDirection, EvasionOutcome, EvasionPlan,
    EvasiveVariant, Scenario,
};
pub use oracle::{
    label_with_oracle, majority_label, DetectorOracle, DeterministicOracle, EnsembleOracle,
    StochasticOracle,
};
pub use proxy::{
    load_proxy, reverse_engineer, save_proxy, LogisticModel, ProxyArchitecture, ProxyConfig,
    ProxyModel, Stump, StumpEnsemble,
};
