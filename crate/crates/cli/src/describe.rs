//! The check catalogue printed by `roughwave describe`.

use roughwave::verify::{
    CoifmanFeffermanParams, CommutatorParams, CzParams, DecayParams, DominationParams,
    EndpointParams, RefinementParams, SharpParams, WeakTypeParams, THRESHOLDS,
};
use serde::Serialize;

pub struct CheckInfo {
    /// Key under `checks` in the config.
    pub key: &'static str,
    pub anchor: &'static str,
    pub corpus: &'static str,
    pub summary: &'static str,
    pub defaults: fn() -> serde_json::Value,
}

fn json<T: Serialize>(t: T) -> serde_json::Value {
    serde_json::to_value(t).expect("params serialise")
}

pub const CHECKS: [CheckInfo; 9] = [
    CheckInfo {
        key: "domination",
        anchor: "Theorem 1.5",
        corpus: "pairs",
        summary: "|<g, T*f>| against r' A(L1, Lr) + A(LPhi, Lr) over a sparse family",
        defaults: || json(DominationParams::default()),
    },
    CheckInfo {
        key: "weak_type_tstar",
        anchor: "Theorem 1.2 Eq. (1.2)",
        corpus: "spikes",
        summary: "w({T*f > a}) against [w]_A1 [w]_Ainf log(e + [w]_Ainf) int Phi(|f|/a) w",
        defaults: || json(WeakTypeParams::default()),
    },
    CheckInfo {
        key: "grand_maximal_endpoint",
        anchor: "Theorem 2.1 Eq. (2.8)",
        corpus: "spikes",
        summary: "|{M_lambda f > a}| against (1 + log 1/lambda) |f|_1/a + int Phi(|f|/a)",
        defaults: || json(EndpointParams::default()),
    },
    CheckInfo {
        key: "sharp_weak_type",
        anchor: "Eq. (3.3)",
        corpus: "spikes",
        summary: "|{M_p f > a}| against p |f|_1/a + int Phi(|f|/a)",
        defaults: || json(SharpParams::default()),
    },
    CheckInfo {
        key: "coifman_fefferman",
        anchor: "Theorem 3.2",
        corpus: "smooth",
        summary: "|T*f|_Lp(w) against [w]_Ainf^2 |Mf|_Lp(w) + [w]_Ainf log(e + [w]_Ainf) |M_Phi f|_Lp(w)",
        defaults: || json(CoifmanFeffermanParams::default()),
    },
    CheckInfo {
        key: "mollification_decay",
        anchor: "Lemma 2.4 Eq. (2.1)/(2.3)",
        corpus: "random bank",
        summary: "log2 |T - T_l| falls with l; |H_m**| strictly decreasing in m",
        defaults: || json(DecayParams::default()),
    },
    CheckInfo {
        key: "refinement",
        anchor: "Eq. (2.4)",
        corpus: "rough",
        summary: "<f>_Phi,Q against log(1 + r') <f>_Q + <f>_r,Q over every cube",
        defaults: || json(RefinementParams::default()),
    },
    CheckInfo {
        key: "commutator",
        anchor: "Theorem 3.4 / Corollary 3.5",
        corpus: "pairs, spikes",
        summary: "[b, T]* against the four-term sparse form, and its weak type against int Psi2(|f|/a) w",
        defaults: || json(CommutatorParams::default()),
    },
    CheckInfo {
        key: "cz_constants",
        anchor: "Section 2.1 (i)-(iv), Eq. (2.6)",
        corpus: "rough",
        summary: "measured constants of the level-set Calderon-Zygmund decomposition",
        defaults: || json(CzParams::default()),
    },
];

pub fn describe() -> String {
    let mut out = String::new();
    out += &format!(
        "A check passes when max <= {} x median of its ratios (plus its trend bound).\n\n",
        THRESHOLDS.spread
    );
    for c in &CHECKS {
        out += &format!("{:<24} {}\n", c.key, c.anchor);
        out += &format!("    {}\n", c.summary);
        out += &format!("    corpus: {}\n", c.corpus);
        out += &format!("    defaults: {}\n\n", (c.defaults)());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_config_key_is_described() {
        let text = describe();
        assert!(text.lines().any(|l| l.starts_with("domination") && l.ends_with("Theorem 1.5")));
        let mut keys: Vec<_> = CHECKS.iter().map(|c| c.key).collect();
        assert_eq!(describe(), text);
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), CHECKS.len());
        // the default parameters parse back as a config entry
        for c in &CHECKS {
            let cfg = format!(r#"{{"schema_version": 1, "checks": {{"{}": {}}}}}"#, c.key, (c.defaults)());
            crate::config::ExperimentConfig::parse(&cfg, std::path::Path::new("x")).unwrap();
        }
    }
}
