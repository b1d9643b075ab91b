//! The eight inequality checks.

use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_slope, median, Corpus, CorpusItem, FitItem, FitReport, THRESHOLDS};
use crate::czd::{cz_decompose, CzConstants, CzReport, DEFAULT_C1};
use crate::dyadic::{domain_lattices, DyadicLattice, SparseFamily};
use crate::error::{invalid, Error, Result};
use crate::grid::{compensated_sum, integrate, lp_norm, superlevel_measure, weighted_superlevel_measure, Domain, GridFunction};
use crate::kernel::{build_all_pieces, mollified_kernel, Mollifier, RoughKernel};
use crate::operators::{
    bmo_seminorm, commutator_maximal, convolve, hl_maximal, local_maximals, OperatorHandle,
    OperatorKind, TruncationGrid,
};
use crate::orlicz::{orlicz_maximal, refinement_ratio, YoungFunction};
use crate::params;
use crate::sparse::{bilinear_form, build_sparse_family_traced, domination_ratio, SparseBuildParams, SparseRunReport};
use crate::weights::Weight;

/// Default sweep of `α` relative to the largest value of the function being
/// thresholded: three decades in half-decade steps.
pub fn default_alphas() -> Vec<f64> {
    (0..7).map(|k| 10f64.powf(-3.25 + 0.5 * k as f64)).collect()
}

fn default_weights() -> Vec<String> {
    vec![
        "const:1".into(),
        "power:-0.5:0.75:0.75".into(),
        "power:-1:0.75:0.75".into(),
    ]
}

fn nonempty(corpus: &Corpus) -> Result<()> {
    if corpus.is_empty() {
        return Err(invalid("corpus", "empty corpus"));
    }
    Ok(())
}

fn nonempty_list(name: &'static str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(invalid(name, "empty list"));
    }
    Ok(())
}

fn phi_integral(f: &GridFunction, alpha: f64, phi: YoungFunction, w: Option<&Weight>) -> f64 {
    let h2 = f.domain().cell_area();
    let vals = f.values();
    let s = match w {
        None => compensated_sum(vals.iter().map(|v| phi.eval(v.abs() / alpha))),
        Some(w) => compensated_sum(
            vals.iter()
                .zip(w.values().values())
                .map(|(v, wv)| phi.eval(v.abs() / alpha) * wv),
        ),
    };
    s * h2
}

fn measure(g: &GridFunction, alpha: f64, w: Option<&Weight>) -> Result<f64> {
    match w {
        None => Ok(superlevel_measure(g, alpha)),
        Some(w) => weighted_superlevel_measure(g, alpha, w.values()),
    }
}

/// Whether `{|g| > α}` reaches the edge of the grid, where its measure is
/// truncated rather than measured.
fn saturated(g: &GridFunction, alpha: f64) -> bool {
    let n = g.domain().resolution();
    let v = g.values();
    (0..n).any(|k| {
        [v[k], v[(n - 1) * n + k], v[k * n], v[k * n + n - 1]]
            .iter()
            .any(|x| x.abs() > alpha)
    })
}

fn weighted_norm(g: &GridFunction, p: f64, w: &Weight) -> f64 {
    let s = compensated_sum(
        g.values()
            .iter()
            .zip(w.values().values())
            .map(|(v, wv)| v.abs().powf(p) * wv),
    );
    (s * g.domain().cell_area()).powf(1.0 / p)
}

/// `((α, α / max|g|), name suffix)` for the function `g` being thresholded,
/// so the top of the sweep always has a non-empty superlevel set.
fn alpha_sweep(g: &GridFunction, rel: &[f64]) -> Vec<((f64, f64), String)> {
    let m = g.max_abs();
    rel.iter().map(|r| ((r * m, *r), format!("a={r:.3e}"))).collect()
}

struct Collected {
    items: Vec<FitItem>,
    skipped: Vec<String>,
    /// Range of the relative `α` values that produced a ratio.
    alpha_range: Option<(f64, f64)>,
}

impl Collected {
    fn new() -> Self {
        Self {
            items: Vec::new(),
            skipped: Vec::new(),
            alpha_range: None,
        }
    }

    /// Records the superlevel ratio for `{|g| > α}`, skipping sets that
    /// reach the grid's edge.
    fn push_level(&mut self, name: String, g: &GridFunction, alpha: (f64, f64), num: f64, den: f64) {
        if saturated(g, alpha.0) {
            self.skipped.push(format!("{name} (saturated)"));
            return;
        }
        let before = self.items.len();
        self.push(name, num, den);
        if self.items.len() > before {
            let rel = alpha.1;
            self.alpha_range = Some(self.alpha_range.map_or((rel, rel), |(lo, hi)| (lo.min(rel), hi.max(rel))));
        }
    }

    /// Records `num / den`, skipping empty superlevel sets.
    fn push(&mut self, name: String, num: f64, den: f64) {
        if num == 0.0 || !(den > 0.0) {
            self.skipped.push(name);
        } else {
            self.items.push(FitItem { name, ratio: num / den });
        }
    }

    fn report(
        self,
        check: &str,
        mut params: BTreeMap<String, serde_json::Value>,
        slope: Option<f64>,
        extra: bool,
    ) -> FitReport {
        if !self.skipped.is_empty() {
            params.insert("skipped".into(), serde_json::json!(self.skipped));
        }
        if let Some((lo, hi)) = self.alpha_range {
            params.insert("alpha_decades".into(), serde_json::json!((hi / lo).log10()));
        }
        FitReport::new(check, params, self.items, slope, extra)
    }
}

// ---------------------------------------------------------------------------
// domination

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DominationParams {
    pub r_list: Vec<f64>,
    pub sparse: SparseBuildParams,
}

impl Default for DominationParams {
    fn default() -> Self {
        Self {
            r_list: vec![1.25, 1.5, 2.0, 4.0],
            sparse: SparseBuildParams::default(),
        }
    }
}

/// A domination report together with the sparse runs behind it.
#[derive(Debug, Clone)]
pub struct DominationOutcome {
    pub report: FitReport,
    /// One entry per `(item, r)`, in report order.
    pub runs: Vec<(String, SparseRunReport)>,
    /// One family per item with a `g`.
    pub families: Vec<SparseFamily>,
}

/// `|∫ g T^*f|` against `‖Ω‖_∞ (r' 𝒜_{S,L¹,L^r} + 𝒜_{S,L^Φ,L^r})`.
pub fn check_domination(
    corpus: &Corpus,
    kernel: &RoughKernel,
    p: &DominationParams,
) -> Result<DominationOutcome> {
    nonempty(corpus)?;
    nonempty_list("r_list", &p.r_list)?;
    let dom = corpus.domain;
    let lattices = domain_lattices(&dom);
    let op = OperatorHandle::new(OperatorKind::MaximalTruncation, kernel, &dom)?;
    let sup = kernel.sup_norm();
    let mut out = Collected::new();
    let mut runs = Vec::new();
    let mut families = Vec::new();
    let mut per_r: Vec<Vec<f64>> = vec![Vec::new(); p.r_list.len()];
    for item in &corpus.items {
        let Some(g) = &item.g else {
            out.skipped.push(format!("{} (no g)", item.name));
            continue;
        };
        if item.f.is_zero() {
            out.skipped.push(format!("{} (f = 0)", item.name));
            continue;
        }
        // the family depends on f and T only, so one build serves every r
        let build = build_sparse_family_traced(&item.f, &op, p.r_list[0], &p.sparse, &lattices)?;
        let tf = op.apply(&item.f)?;
        for (k, &r) in p.r_list.iter().enumerate() {
            let name = format!("{} r={r}", item.name);
            match domination_ratio(&item.f, g, &tf, &build.family, r, sup) {
                Ok(ratio) => {
                    runs.push((
                        name.clone(),
                        SparseRunReport {
                            r,
                            num_cubes: build.family.cubes.len(),
                            eta_achieved: build.eta_achieved,
                            escalations: build.escalations,
                            ratio,
                        },
                    ));
                    per_r[k].push(ratio);
                    out.push(name, ratio, 1.0);
                }
                Err(Error::Degenerate(_)) => out.skipped.push(name),
                Err(e) => return Err(e),
            }
        }
        families.push(build.family);
    }
    let xs: Vec<f64> = p.r_list.iter().map(|r| (r / (r - 1.0)).ln()).collect();
    let ys: Vec<f64> = per_r.iter().map(|v| median(v).ln()).collect();
    let slope = (p.r_list.len() > 1 && ys.iter().all(|y| y.is_finite())).then(|| fit_slope(&xs, &ys));
    let trend_ok = slope.is_none_or(|s| s <= THRESHOLDS.domination_slope);
    let report = out.report(
        "domination",
        params! {
            "r_list" => p.r_list,
            "n" => dom.resolution(),
            "seed" => corpus.seed,
            "threshold_multiplier" => p.sparse.threshold_multiplier,
            "eta_target" => p.sparse.eta_target,
        },
        slope,
        trend_ok,
    );
    Ok(DominationOutcome {
        report,
        runs,
        families,
    })
}

// ---------------------------------------------------------------------------
// weak type of T^*

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakTypeParams {
    /// `α` relative to the largest value of `T^*f`.
    pub alphas: Vec<f64>,
    /// Weight presets; one report per weight, plus the unweighted one.
    pub weights: Vec<String>,
}

impl Default for WeakTypeParams {
    fn default() -> Self {
        Self {
            alphas: default_alphas(),
            weights: default_weights(),
        }
    }
}

/// `[w]_{A₁}[w]_{A_∞} log(e + [w]_{A_∞})` with the constants.
fn weak_factor(w: &Weight, ainf_power: i32) -> Result<(f64, f64, f64)> {
    let a1 = w.a1()?;
    let ainf = w.ainf()?;
    Ok((a1, ainf, a1 * ainf.powi(ainf_power) * (std::f64::consts::E + ainf).ln()))
}

/// `w({T^*f > α})` against `[w]_{A₁}[w]_{A_∞} log(e+[w]_{A_∞}) ∫Φ(|f|/α) w`:
/// the unweighted report `|{T^*f > α}|` against `∫Φ(|f|/α)` first, then one
/// per weight.
pub fn check_weak_type_tstar(
    corpus: &Corpus,
    kernel: &RoughKernel,
    p: &WeakTypeParams,
) -> Result<Vec<FitReport>> {
    nonempty(corpus)?;
    nonempty_list("alphas", &p.alphas)?;
    let dom = corpus.domain;
    let op = OperatorHandle::new(OperatorKind::MaximalTruncation, kernel, &dom)?;
    let outputs: Vec<GridFunction> = corpus.items.iter().map(|i| op.apply(&i.f)).collect::<Result<_>>()?;
    let mut weights = vec![None];
    for spec in &p.weights {
        weights.push(Some((spec, Weight::preset(dom, spec)?)));
    }
    let phi = YoungFunction::PhiLogLog;
    let mut reports = Vec::new();
    for entry in &weights {
        let weight = entry.as_ref().map(|(_, w)| w);
        let (factor, mut params) = match entry {
            None => (1.0, params! {"weight" => "none"}),
            Some((spec, w)) => {
                let (a1, ainf, factor) = weak_factor(w, 1)?;
                (factor, params! {"weight" => spec, "a1" => a1, "ainf" => ainf, "factor" => factor})
            }
        };
        params.insert("alphas".into(), serde_json::json!(p.alphas));
        params.insert("n".into(), serde_json::json!(dom.resolution()));
        let mut out = Collected::new();
        for (item, tf) in corpus.items.iter().zip(&outputs) {
            for (a, suffix) in alpha_sweep(tf, &p.alphas) {
                let alpha = a.0;
                let num = measure(tf, alpha, weight)?;
                let den = factor * phi_integral(&item.f, alpha, phi, weight);
                out.push_level(format!("{} {suffix}", item.name), tf, a, num, den);
            }
        }
        reports.push(out.report("weak_type_tstar", params, None, true));
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
// grand maximal endpoint

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointParams {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub operator: OperatorKind,
}

impl Default for EndpointParams {
    fn default() -> Self {
        Self {
            lambdas: vec![0.5, 0.125, 1.0 / 64.0],
            alphas: default_alphas(),
            operator: OperatorKind::Lacunary,
        }
    }
}

/// `|{M_{λ,T} f > α}|` against `(1 + log(1/λ)) ‖f‖₁/α + ∫Φ(|f|/α)`.
pub fn check_grand_maximal_endpoint(
    corpus: &Corpus,
    kernel: &RoughKernel,
    p: &EndpointParams,
) -> Result<FitReport> {
    nonempty(corpus)?;
    nonempty_list("lambdas", &p.lambdas)?;
    nonempty_list("alphas", &p.alphas)?;
    if !p.operator.is_maximal() {
        return Err(invalid("operator", "the endpoint check needs a maximal operator"));
    }
    let dom = corpus.domain;
    let lattices = domain_lattices(&dom);
    let op = OperatorHandle::new(p.operator, kernel, &dom)?;
    let phi = YoungFunction::PhiLogLog;
    let mut out = Collected::new();
    for item in &corpus.items {
        let lm = local_maximals(&item.f, &op, &lattices, &p.lambdas, &[])?;
        let f1 = lp_norm(&item.f, 1.0)?;
        for (m, &lambda) in lm.grand.iter().zip(&p.lambdas) {
            for (a, suffix) in alpha_sweep(m, &p.alphas) {
                let alpha = a.0;
                let num = superlevel_measure(m, alpha);
                let den = (1.0 + (1.0 / lambda).ln()) * f1 / alpha + phi_integral(&item.f, alpha, phi, None);
                out.push_level(format!("{} lambda={lambda} {suffix}", item.name), m, a, num, den);
            }
        }
    }
    Ok(out.report(
        "grand_maximal_endpoint",
        params! {
            "lambdas" => p.lambdas,
            "alphas" => p.alphas,
            "operator" => p.operator.to_string(),
            "n" => dom.resolution(),
        },
        None,
        true,
    ))
}

// ---------------------------------------------------------------------------
// sharp maximal weak type

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SharpParams {
    pub p_list: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl Default for SharpParams {
    fn default() -> Self {
        Self {
            p_list: vec![2.0, 4.0, 8.0],
            alphas: default_alphas(),
        }
    }
}

/// `|{𝓜_{p,T^*} f > α}|` against `p ‖f‖₁/α + ∫Φ(|f|/α)`.
pub fn check_sharp_weak_type(
    corpus: &Corpus,
    kernel: &RoughKernel,
    p: &SharpParams,
) -> Result<FitReport> {
    nonempty(corpus)?;
    nonempty_list("p_list", &p.p_list)?;
    nonempty_list("alphas", &p.alphas)?;
    let dom = corpus.domain;
    let lattices = domain_lattices(&dom);
    let op = OperatorHandle::new(OperatorKind::MaximalTruncation, kernel, &dom)?;
    let phi = YoungFunction::PhiLogLog;
    let mut out = Collected::new();
    for item in &corpus.items {
        let lm = local_maximals(&item.f, &op, &lattices, &[], &p.p_list)?;
        let f1 = lp_norm(&item.f, 1.0)?;
        for (m, &pp) in lm.sharp.iter().zip(&p.p_list) {
            for (a, suffix) in alpha_sweep(m, &p.alphas) {
                let alpha = a.0;
                let num = superlevel_measure(m, alpha);
                let den = pp * f1 / alpha + phi_integral(&item.f, alpha, phi, None);
                out.push_level(format!("{} p={pp} {suffix}", item.name), m, a, num, den);
            }
        }
    }
    Ok(out.report(
        "sharp_weak_type",
        params! {"p_list" => p.p_list, "alphas" => p.alphas, "n" => dom.resolution()},
        None,
        true,
    ))
}

// ---------------------------------------------------------------------------
// Coifman–Fefferman

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoifmanFeffermanParams {
    pub p_list: Vec<f64>,
    pub weights: Vec<String>,
}

impl Default for CoifmanFeffermanParams {
    fn default() -> Self {
        Self {
            p_list: vec![1.5, 2.0, 4.0],
            weights: default_weights(),
        }
    }
}

/// `‖T^*f‖_{L^p(w)}` against
/// `‖Ω‖_∞ ([w]²_{A_∞} ‖Mf‖_{L^p(w)} + [w]_{A_∞} log(e+[w]_{A_∞}) ‖M_Φ f‖_{L^p(w)})`,
/// one report per weight.
pub fn check_coifman_fefferman(
    corpus: &Corpus,
    kernel: &RoughKernel,
    p: &CoifmanFeffermanParams,
) -> Result<Vec<FitReport>> {
    nonempty(corpus)?;
    nonempty_list("p_list", &p.p_list)?;
    if p.weights.is_empty() {
        return Err(invalid("weights", "empty list"));
    }
    let dom = corpus.domain;
    let lattices = domain_lattices(&dom);
    let op = OperatorHandle::new(OperatorKind::MaximalTruncation, kernel, &dom)?;
    let sup = kernel.sup_norm();
    let items: Vec<&CorpusItem> = corpus.items.iter().filter(|i| !i.f.is_zero()).collect();
    let outputs: Vec<[GridFunction; 3]> = items
        .iter()
        .map(|i| {
            Ok([
                op.apply(&i.f)?,
                hl_maximal(&i.f, &lattices, 1.0)?,
                orlicz_maximal(&i.f, YoungFunction::PhiLogLog, &lattices)?,
            ])
        })
        .collect::<Result<_>>()?;
    let mut reports = Vec::new();
    for spec in &p.weights {
        let weight = Weight::preset(dom, spec)?;
        let ainf = weight.ainf()?;
        let mut out = Collected::new();
        for (item, [tf, mf, mphi]) in items.iter().zip(&outputs) {
            for &pp in &p.p_list {
                let lhs = weighted_norm(tf, pp, &weight);
                let rhs = sup
                    * (ainf * ainf * weighted_norm(mf, pp, &weight)
                        + ainf * (std::f64::consts::E + ainf).ln() * weighted_norm(mphi, pp, &weight));
                out.push(format!("{} p={pp}", item.name), lhs, rhs);
            }
        }
        reports.push(out.report(
            "coifman_fefferman",
            params! {"weight" => spec, "p_list" => p.p_list, "ainf" => ainf, "n" => dom.resolution()},
            None,
            true,
        ));
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
// mollification decay

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayParams {
    /// Mollification depths; the slope is fitted over the positive ones.
    pub l_list: Vec<i32>,
    pub m_list: Vec<u32>,
    pub bank_size: usize,
    pub seed: u64,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self {
            l_list: (0..=5).collect(),
            m_list: vec![1, 2, 3],
            bank_size: 32,
            seed: 1,
        }
    }
}

/// Random unit-`L²` functions: white noise and smooth bumps, alternating,
/// supported in the central half of the box.
pub fn random_bank(dom: Domain, seed: u64, size: usize) -> Vec<GridFunction> {
    let n = dom.resolution();
    (0..size)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_F491_4F6C_DD1D).wrapping_add(k as u64));
            let f = if k % 2 == 0 {
                let mut f = GridFunction::zeros(dom);
                for i in n / 4..3 * n / 4 {
                    for j in n / 4..3 * n / 4 {
                        f.set(i, j, rng.random_range(-1.0..1.0));
                    }
                }
                f
            } else {
                let c = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
                let s: f64 = rng.random_range(0.02..0.1);
                let freq: f64 = rng.random_range(5.0..40.0);
                GridFunction::from_fn(dom, |x, y| {
                    let r2 = ((x - c[0]).powi(2) + (y - c[1]).powi(2)) / (s * s);
                    if r2 < 9.0 && x.abs() < 0.5 && y.abs() < 0.5 {
                        (-r2).exp() * (freq * x).cos()
                    } else {
                        0.0
                    }
                })
            };
            let norm = lp_norm(&f, 2.0).expect("p = 2");
            f.scale(1.0 / norm)
        })
        .collect()
}

fn bank_norm(bank: &[GridFunction], apply: impl Fn(&GridFunction) -> Result<GridFunction> + Sync) -> Result<f64> {
    let norms: Vec<f64> = bank
        .par_iter()
        .map(|f| lp_norm(&apply(f)?, 2.0))
        .collect::<Result<_>>()?;
    Ok(norms.into_iter().fold(0.0, f64::max))
}

/// Norm estimates of `T_Ω - T_l` over `l` (`T_Ω` the full piece sum) and of
/// `H_m^{**}` over `m`, as the largest `‖·f‖₂` over a unit bank.
pub fn check_mollification_decay(
    dom: Domain,
    kernel: &RoughKernel,
    p: &DecayParams,
) -> Result<FitReport> {
    if p.l_list.is_empty() || p.bank_size == 0 {
        return Err(invalid("l_list", "need at least one l and a non-empty bank"));
    }
    let bank = random_bank(dom, p.seed, p.bank_size);
    let pieces = build_all_pieces(kernel, &dom)?;
    let exact = mollified_kernel(&pieces, &Mollifier::Delta, 0)?;
    let moll = Mollifier::bump();
    let mut items = Vec::new();
    let mut ls = Vec::new();
    let mut logs = Vec::new();
    let mut l_norms = Vec::new();
    for &l in &p.l_list {
        let diff = exact.add(&mollified_kernel(&pieces, &moll, l)?, -1.0);
        let est = bank_norm(&bank, |f| convolve(&diff, f))?;
        items.push(FitItem {
            name: format!("l={l}"),
            ratio: est,
        });
        l_norms.push(est);
        if l > 0 {
            ls.push(l as f64);
            logs.push(est.log2());
        }
    }
    let mut h_norms = Vec::new();
    for &m in &p.m_list {
        let op = OperatorHandle::new(OperatorKind::DifferenceSup(m), kernel, &dom)?;
        let est = bank_norm(&bank, |f| op.apply(f))?;
        items.push(FitItem {
            name: format!("H_m={m}"),
            ratio: est,
        });
        h_norms.push(est);
    }
    let slope = (ls.len() > 1).then(|| fit_slope(&ls, &logs));
    let slack = THRESHOLDS.decay_slack * l_norms[0].max(1.0);
    let monotone = l_norms.windows(2).all(|w| w[1] <= w[0] + slack);
    let strictly = h_norms.windows(2).all(|w| w[1] < w[0]);
    let h_slope = (h_norms.len() > 1).then(|| {
        let xs: Vec<f64> = p.m_list.iter().map(|m| 2f64.powi(*m as i32)).collect();
        let ys: Vec<f64> = h_norms.iter().map(|v| v.log2()).collect();
        fit_slope(&xs, &ys)
    });
    let pass = slope.is_some_and(|s| s <= THRESHOLDS.decay_slope) && monotone && strictly;
    let ratios_ok = items.iter().all(|i| i.ratio.is_finite());
    let mut report = FitReport::new(
        "mollification_decay",
        params! {
            "l_list" => p.l_list,
            "m_list" => p.m_list,
            "bank_size" => p.bank_size,
            "seed" => p.seed,
            "n" => dom.resolution(),
            "monotone_in_l" => monotone,
            "h_strictly_decreasing" => strictly,
            "h_log2_slope_vs_2m" => h_slope,
        },
        items,
        slope,
        pass,
    );
    // decay, not boundedness, is the criterion here
    report.pass = pass && ratios_ok;
    Ok(report)
}

// ---------------------------------------------------------------------------
// refinement

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefinementParams {
    pub r_list: Vec<f64>,
}

impl Default for RefinementParams {
    fn default() -> Self {
        Self {
            r_list: vec![1.1, 1.25, 1.5, 2.0, 4.0, 16.0],
        }
    }
}

fn max_refinement(f: &GridFunction, lattice: &DyadicLattice, r: f64) -> f64 {
    let dom = f.domain();
    let n = dom.resolution();
    let rects: Vec<_> = lattice
        .levels()
        .flat_map(|k| lattice.cubes_in_domain(dom, k))
        .map(|(_, rect)| rect)
        .collect();
    rects
        .par_iter()
        .map(|rect| {
            let mut vals = Vec::with_capacity(rect.count());
            for i in rect.i0..rect.i1 {
                vals.extend_from_slice(&f.values()[i * n + rect.j0..i * n + rect.j1]);
            }
            refinement_ratio(&vals, r)
        })
        .reduce(|| 0.0, f64::max)
}

/// `max_Q ⟨f⟩_{Φ,Q} / (log(1+r')⟨f⟩_Q + ⟨f⟩_{r,Q})` per item and `r`, over
/// the grid's own dyadic cubes.
pub fn check_refinement(corpus: &Corpus, p: &RefinementParams) -> Result<FitReport> {
    nonempty(corpus)?;
    nonempty_list("r_list", &p.r_list)?;
    if let Some(r) = p.r_list.iter().find(|r| !(**r > 1.0)) {
        return Err(invalid("r_list", format!("need r > 1, got {r}")));
    }
    let lattice = corpus.domain.standard_lattice();
    let mut out = Collected::new();
    for item in &corpus.items {
        for &r in &p.r_list {
            let v = max_refinement(&item.f, &lattice, r);
            out.push(format!("{} r={r}", item.name), v, 1.0);
        }
    }
    Ok(out.report(
        "refinement",
        params! {"r_list" => p.r_list, "n" => corpus.domain.resolution()},
        None,
        true,
    ))
}

// ---------------------------------------------------------------------------
// commutator

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommutatorParams {
    pub r_list: Vec<f64>,
    /// Symbols: `log` (centred at the item's largest value), `log:x0:y0`,
    /// or `smooth`.
    pub b_list: Vec<String>,
    pub alphas: Vec<f64>,
    pub weights: Vec<String>,
    pub sparse: SparseBuildParams,
}

impl Default for CommutatorParams {
    fn default() -> Self {
        Self {
            r_list: vec![1.25, 1.5, 2.0, 4.0],
            b_list: vec!["log".into()],
            alphas: default_alphas(),
            weights: default_weights(),
            sparse: SparseBuildParams::default(),
        }
    }
}

fn peak(f: &GridFunction) -> [f64; 2] {
    let dom = f.domain();
    let n = dom.resolution();
    let (k, _) = f
        .values()
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (k, v)| if v.abs() > best.1 { (k, v.abs()) } else { best });
    dom.center(k / n, k % n)
}

/// The symbol `b` for one item.
pub fn commutator_symbol(spec: &str, item: &CorpusItem) -> Result<GridFunction> {
    let dom = *item.f.domain();
    let h = dom.cell_size();
    let log_at = |c: [f64; 2]| {
        GridFunction::from_fn(dom, move |x, y| ((x - c[0]).hypot(y - c[1]) + h / 2.0).ln())
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["log"] => Ok(log_at(peak(&item.f))),
        ["log", x, y] => {
            let parse = |s: &str| s.parse::<f64>().map_err(|_| invalid("b", format!("bad number `{s}`")));
            Ok(log_at([parse(x)?, parse(y)?]))
        }
        ["smooth"] => Ok(GridFunction::from_fn(dom, |x, y| {
            (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).cos()
        })),
        _ => Err(invalid("b", format!("unknown symbol `{spec}`"))),
    }
}

/// Domination of `[b, T_Ω]^*` by the four-term sparse bound, with `b`
/// normalised to unit mean oscillation. The family is the one built for
/// `T^*` and `f`.
pub fn check_commutator_domination(
    corpus: &Corpus,
    kernel: &RoughKernel,
    p: &CommutatorParams,
) -> Result<FitReport> {
    nonempty(corpus)?;
    nonempty_list("r_list", &p.r_list)?;
    if p.b_list.is_empty() {
        return Err(invalid("b_list", "empty list"));
    }
    let dom = corpus.domain;
    let lattices = domain_lattices(&dom);
    let op = OperatorHandle::new(OperatorKind::MaximalTruncation, kernel, &dom)?;
    let grid = TruncationGrid::geometric(&dom);
    let sup = kernel.sup_norm();
    let mut out = Collected::new();
    let mut per_r: Vec<Vec<f64>> = vec![Vec::new(); p.r_list.len()];
    for item in &corpus.items {
        let Some(g) = &item.g else {
            out.skipped.push(format!("{} (no g)", item.name));
            continue;
        };
        if item.f.is_zero() {
            out.skipped.push(format!("{} (f = 0)", item.name));
            continue;
        }
        let family = build_sparse_family_traced(&item.f, &op, p.r_list[0], &p.sparse, &lattices)?.family;
        for spec in &p.b_list {
            let b = commutator_symbol(spec, item)?;
            let osc = bmo_seminorm(&b, &lattices);
            let cf = commutator_maximal(&item.f, &b, kernel, &grid)?;
            let num = integrate(&g.zip_with(&cf, |a, c| a * c)?).abs() / osc;
            for (k, &r) in p.r_list.iter().enumerate() {
                let rd = r / (r - 1.0);
                let lr = YoungFunction::power(r)?;
                let form = |phi| bilinear_form(&family, &item.f, g, phi, lr);
                let den = sup
                    * (rd * rd * form(YoungFunction::Power(1.0))
                        + rd * form(YoungFunction::PhiLogLog)
                        + rd * form(YoungFunction::Psi1)
                        + form(YoungFunction::Psi2));
                let name = format!("{} b={spec} r={r}", item.name);
                if num > 0.0 && den > 0.0 {
                    per_r[k].push(num / den);
                }
                out.push(name, num, den);
            }
        }
    }
    let xs: Vec<f64> = p.r_list.iter().map(|r| (r / (r - 1.0)).ln()).collect();
    let ys: Vec<f64> = per_r.iter().map(|v| median(v).ln()).collect();
    let slope = (p.r_list.len() > 1 && ys.iter().all(|y| y.is_finite())).then(|| fit_slope(&xs, &ys));
    let trend_ok = slope.is_none_or(|s| s <= THRESHOLDS.domination_slope);
    Ok(out.report(
        "commutator",
        params! {"r_list" => p.r_list, "b_list" => p.b_list, "part" => "domination", "n" => dom.resolution()},
        slope,
        trend_ok,
    ))
}

/// `w({[b,T_Ω]^* f > α})` against
/// `[w]_{A₁}[w]²_{A_∞} log(e+[w]_{A_∞}) ∫Ψ₂(|f|/α) w`, `b` normalised to unit
/// mean oscillation; one report per weight.
pub fn check_commutator_weak_type(
    corpus: &Corpus,
    kernel: &RoughKernel,
    b_spec: &str,
    alphas: &[f64],
    weights: &[String],
) -> Result<Vec<FitReport>> {
    nonempty(corpus)?;
    nonempty_list("alphas", alphas)?;
    let dom = corpus.domain;
    let lattices = domain_lattices(&dom);
    let grid = TruncationGrid::geometric(&dom);
    let outputs: Vec<GridFunction> = corpus
        .items
        .iter()
        .map(|item| {
            let b = commutator_symbol(b_spec, item)?;
            let osc = bmo_seminorm(&b, &lattices);
            commutator_maximal(&item.f, &b.scale(1.0 / osc), kernel, &grid)
        })
        .collect::<Result<_>>()?;
    let psi2 = YoungFunction::Psi2;
    let mut reports = Vec::new();
    for spec in weights {
        let weight = Weight::preset(dom, spec)?;
        let (a1, ainf, factor) = weak_factor(&weight, 2)?;
        let mut out = Collected::new();
        for (item, cf) in corpus.items.iter().zip(&outputs) {
            for (a, suffix) in alpha_sweep(cf, alphas) {
                let alpha = a.0;
                let num = measure(cf, alpha, Some(&weight))?;
                let den = factor * phi_integral(&item.f, alpha, psi2, Some(&weight));
                out.push_level(format!("{} {suffix}", item.name), cf, a, num, den);
            }
        }
        reports.push(out.report(
            "commutator",
            params! {
                "part" => "weak_type",
                "b" => b_spec,
                "weight" => spec,
                "alphas" => alphas,
                "a1" => a1,
                "ainf" => ainf,
                "factor" => factor,
                "n" => dom.resolution(),
            },
            None,
            true,
        ));
    }
    Ok(reports)
}

/// The domination report followed by one weak-type report per weight.
pub fn check_commutator(
    pairs: &Corpus,
    spikes: &Corpus,
    kernel: &RoughKernel,
    p: &CommutatorParams,
) -> Result<Vec<FitReport>> {
    let mut out = vec![check_commutator_domination(pairs, kernel, p)?];
    out.extend(check_commutator_weak_type(spikes, kernel, "log", &p.alphas, &p.weights)?);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Calderón–Zygmund constants

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CzParams {
    pub lambdas: Vec<f64>,
    pub c1: f64,
}

impl Default for CzParams {
    fn default() -> Self {
        Self {
            lambdas: vec![0.5, 0.125],
            c1: DEFAULT_C1,
        }
    }
}

/// Decomposes every item at every `λ` on the grid's own lattice and reports
/// each measured constant as a ratio family, one report per constant.
pub fn check_cz_constants(corpus: &Corpus, p: &CzParams) -> Result<(Vec<CzReport>, Vec<FitReport>)> {
    nonempty(corpus)?;
    nonempty_list("lambdas", &p.lambdas)?;
    let lattice = corpus.domain.standard_lattice();
    let mut reports = Vec::new();
    let mut names = Vec::new();
    for item in &corpus.items {
        for &lambda in &p.lambdas {
            reports.push(cz_decompose(&item.f, lambda, &lattice, p.c1)?.report()?);
            names.push(format!("{} lambda={lambda}", item.name));
        }
    }
    let pick: [(&str, fn(&CzConstants) -> f64); 4] = [
        ("cz_ii", |c| c.ii),
        ("cz_iii", |c| c.iii),
        ("cz_iv", |c| c.iv),
        ("cz_eq2_6", |c| c.eq2_6),
    ];
    let fits = pick
        .iter()
        .map(|(check, get)| {
            let mut out = Collected::new();
            for (name, r) in names.iter().zip(&reports) {
                out.push(name.clone(), get(&r.constants), 1.0);
            }
            out.report(
                check,
                params! {"lambdas" => p.lambdas, "c1" => p.c1, "n" => corpus.domain.resolution()},
                None,
                true,
            )
        })
        .collect();
    Ok((reports, fits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::CorpusKind;

    fn dom(n: usize) -> Domain {
        Domain::new(1.0, n).unwrap()
    }

    fn kernel() -> RoughKernel {
        RoughKernel::preset("sign4", 256).unwrap()
    }

    #[test]
    fn saturation_looks_only_at_the_edge() {
        let d = dom(16);
        let mut g = GridFunction::zeros(d);
        g.set(8, 8, 5.0);
        assert!(!saturated(&g, 1.0));
        g.set(0, 3, 2.0);
        assert!(saturated(&g, 1.0));
        assert!(!saturated(&g, 2.0));
        g.set(15, 15, -3.0);
        assert!(saturated(&g, 2.5));
    }

    #[test]
    fn sweep_is_relative_to_the_thresholded_function() {
        let d = dom(16);
        let mut g = GridFunction::zeros(d);
        g.set(3, 4, -8.0);
        let s = alpha_sweep(&g, &[0.5, 0.25]);
        assert_eq!(s[0].0, (4.0, 0.5));
        assert_eq!(s[1].0, (2.0, 0.25));
        let a = default_alphas();
        assert!(((a[6] / a[0]).log10() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn collected_tracks_alpha_span_and_skips() {
        let d = dom(16);
        let mut g = GridFunction::zeros(d);
        g.set(8, 8, 1.0);
        let mut c = Collected::new();
        c.push_level("a".into(), &g, (0.5, 0.5), 1.0, 2.0);
        c.push_level("b".into(), &g, (0.5, 0.005), 1.0, 4.0);
        c.push_level("c".into(), &g, (0.5, 0.001), 0.0, 4.0);
        g.set(0, 0, 1.0);
        c.push_level("d".into(), &g, (0.5, 0.0001), 1.0, 1.0);
        let r = c.report("demo", BTreeMap::new(), None, true);
        assert_eq!(r.ratios(), vec![0.5, 0.25]);
        assert!((r.params["alpha_decades"].as_f64().unwrap() - 2.0).abs() < 1e-12);
        let skipped = r.params["skipped"].as_array().unwrap();
        assert_eq!(skipped.len(), 2);
        assert!(skipped[1].as_str().unwrap().ends_with("(saturated)"));
    }

    #[test]
    fn params_reject_unknown_fields_and_fill_defaults() {
        let p: RefinementParams = serde_json::from_str("{}").unwrap();
        assert_eq!(p, RefinementParams::default());
        assert!(serde_json::from_str::<DominationParams>(r#"{"r": [2]}"#).is_err());
        let p: DominationParams = serde_json::from_str(r#"{"r_list": [3]}"#).unwrap();
        assert_eq!(p.r_list, vec![3.0]);
        assert_eq!(p.sparse, SparseBuildParams::default());
    }

    #[test]
    fn empty_sweeps_are_rejected() {
        let c = Corpus::generate(dom(16), CorpusKind::Rough, 1, 2);
        let p = RefinementParams { r_list: vec![] };
        assert!(matches!(check_refinement(&c, &p), Err(Error::InvalidParameter { .. })));
        let p = RefinementParams { r_list: vec![1.0] };
        assert!(check_refinement(&c, &p).is_err());
        let empty = Corpus::generate(dom(16), CorpusKind::Rough, 1, 0);
        assert!(check_refinement(&empty, &RefinementParams::default()).is_err());
        let p = DominationParams {
            r_list: vec![],
            ..Default::default()
        };
        assert!(check_domination(&c, &kernel(), &p).is_err());
    }

    #[test]
    fn bank_has_unit_norm_and_is_seeded() {
        let d = dom(32);
        let a = random_bank(d, 3, 4);
        let b = random_bank(d, 3, 4);
        assert_eq!(a, b);
        for f in &a {
            assert!((lp_norm(f, 2.0).unwrap() - 1.0).abs() < 1e-12);
            // supported in the central half
            let s = f.support_rect();
            assert!(s.i0 >= 8 && s.i1 <= 24 && s.j0 >= 8 && s.j1 <= 24);
        }
        assert_ne!(a[0], random_bank(d, 4, 1)[0]);
    }

    #[test]
    fn small_runs_are_well_formed() {
        let d = dom(32);
        let k = kernel();
        let pairs = Corpus::generate(d, CorpusKind::Pairs, 5, 3);
        let spikes = Corpus::generate(d, CorpusKind::Spikes, 5, 3);
        let dom_out = check_domination(&pairs, &k, &DominationParams::default()).unwrap();
        assert_eq!(dom_out.runs.len(), 12);
        assert_eq!(dom_out.families.len(), 3);
        assert!(dom_out.report.slope.is_some());
        let mut reports = vec![dom_out.report];
        reports.extend(check_weak_type_tstar(&spikes, &k, &WeakTypeParams::default()).unwrap());
        reports.push(check_sharp_weak_type(&spikes, &k, &SharpParams::default()).unwrap());
        reports.push(check_grand_maximal_endpoint(&spikes, &k, &EndpointParams::default()).unwrap());
        reports.extend(check_coifman_fefferman(&spikes, &k, &CoifmanFeffermanParams::default()).unwrap());
        reports.extend(check_commutator(&pairs, &spikes, &k, &CommutatorParams::default()).unwrap());
        assert_eq!(reports.len(), 1 + 4 + 1 + 1 + 3 + 4);
        for r in &reports {
            assert!(!r.items.is_empty(), "{}", r.check);
            assert!(r.items.iter().all(|i| i.ratio.is_finite() && i.ratio > 0.0), "{}", r.check);
            assert_eq!(r.params["n"], 32);
        }
    }

    #[test]
    fn endpoint_needs_a_maximal_operator() {
        let c = Corpus::generate(dom(16), CorpusKind::Spikes, 1, 1);
        let p = EndpointParams {
            operator: OperatorKind::Singular,
            ..Default::default()
        };
        assert!(check_grand_maximal_endpoint(&c, &kernel(), &p).is_err());
    }

    #[test]
    fn cz_reports_one_family_per_constant() {
        let c = Corpus::generate(dom(32), CorpusKind::Rough, 2, 3);
        let (reps, fits) = check_cz_constants(&c, &CzParams::default()).unwrap();
        assert_eq!(reps.len(), 6);
        let names: Vec<_> = fits.iter().map(|f| f.check.as_str()).collect();
        assert_eq!(names, ["cz_ii", "cz_iii", "cz_iv", "cz_eq2_6"]);
        // stopping cubes have average at most 2^d λ^{-1}
        assert!(reps.iter().all(|r| r.constants.iii <= 4.0 + 1e-12));
    }

    #[test]
    fn log_symbol_is_centred_at_the_peak() {
        let d = dom(16);
        let mut f = GridFunction::zeros(d);
        f.set(5, 9, -3.0);
        f.set(7, 7, 1.0);
        let item = CorpusItem {
            name: "x".into(),
            seed: 0,
            f,
            g: None,
        };
        let b = commutator_symbol("log", &item).unwrap();
        let h = d.cell_size();
        assert!((b.get(5, 9) - (h / 2.0).ln()).abs() < 1e-15);
        assert!(commutator_symbol("log:0:0", &item).is_ok());
        assert!(commutator_symbol("log:a:0", &item).is_err());
        assert!(commutator_symbol("cubic", &item).is_err());
    }
}
