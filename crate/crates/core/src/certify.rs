//! Convergence certificates.
//!
//! Computes the contraction constants of the tracking controller and checks
//! the maximum-modulus inequalities on sampled trajectories:
//!
//! ```text
//! D+ h   <= M0 Ns (c - h)                       open loop, a.e.
//! D+ c   <= 0                                   open loop
//! D+ c_e <= -κ c_e                              closed loop
//! c(t) <= c(sK),  h(t) <= h(sK) + c(sK)         t in [sK, (s+1)K]
//! c_e(t) <= e^{-κ (t - sK0)} c_e(sK0),  h_e(t) <= h_e(sK0) + c_e(sK0)
//! h_e[n] <= α1 h_e[n-1] + (2 - α2) c_e[n-1],  c_e[n] <= β̃^n c_e[0]
//! h_e(end) <= (3 - α2 - α1) / (1 - α1) · c_e[last]
//! ```
//!
//! The constants underflow `f64` for realistic networks (`ξ0^d0` is often
//! below 1e-300), so every constant is also carried as its natural log and
//! the comparisons that need it are made in log space.
//!
//! All checks are one-sided: a tolerance only widens the bound in the
//! direction being proven.

use serde::Serialize;

use crate::dynamics::{integrate_with_root, Mode, Scenario, Trajectory};
use crate::error::{CertifyError, DynamicsError};
use crate::graph::{
    check_persistent_balance, check_uniform_qs_connectivity, longest_path_from_roots,
    union_graph, BalanceVerdict, ConnectivityOptions, ConnectivityReport, NodeSet,
    DEFAULT_PATH_NODE_LIMIT,
};

/// Constants of the convergence argument, with their logarithms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremConstants {
    pub n: usize,
    pub m0: f64,
    pub n_s: usize,
    pub m_s: f64,
    pub d0: usize,
    pub window: f64,
    pub delta: f64,
    pub kappa_lower: f64,
    pub k0: f64,
    pub zeta: f64,
    pub xi0: f64,
    pub chi: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta_tilde: f64,
    pub ln_zeta: f64,
    pub ln_xi0: f64,
    pub ln_chi: f64,
    /// `ln(1 - α1) = d0 ln ξ0 + ln ζ + (d0 - 1) ln χ`
    pub ln_one_minus_alpha1: f64,
    pub ln_alpha2: f64,
    pub ln_beta_tilde: f64,
}

impl TheoremConstants {
    /// Names of the constants that leave their admissible range. Ranges are
    /// judged on the logarithms, which stay meaningful after underflow.
    pub fn range_violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let open_unit = |ln: f64| ln.is_finite() && ln < 0.0;
        if !open_unit(self.ln_zeta) {
            out.push("zeta");
        }
        if !open_unit(self.ln_xi0) {
            out.push("xi0");
        }
        if !open_unit(self.ln_beta_tilde) {
            out.push("beta_tilde");
        }
        if !open_unit(self.ln_one_minus_alpha1) {
            out.push("alpha1");
        }
        if !(self.ln_alpha2.is_finite() && self.ln_alpha2 <= 0.0) {
            out.push("alpha2");
        }
        out
    }
}

/// Constants for root set size `n_s`, longest path `d0`, and `χ` (defaults
/// to `ζ`).
pub fn compute_constants(
    scenario: &Scenario,
    root: &NodeSet,
    d0: usize,
    chi: Option<f64>,
) -> Result<TheoremConstants, CertifyError> {
    let n = scenario.n_agents();
    let n_s = root.len();
    if n_s >= n {
        return Err(CertifyError::NotApplicable);
    }
    if d0 == 0 {
        return Err(CertifyError::Inconsistent);
    }
    let m0 = scenario.schedule.max_abs_weight();
    let t = scenario.window;
    let delta = scenario.delta;
    let kappa = scenario.gains.kappa_lower();
    let k0 = d0 as f64 * t;

    let ln_zeta = -m0 * (n - n_s - 1) as f64 * t + (-(-delta * t).exp_m1()).ln();
    let ln_xi0 = -((n - 1) as f64) * m0 * k0;
    let ln_chi = match chi {
        Some(c) if c > 0.0 && c.is_finite() => c.ln(),
        Some(c) => {
            return Err(CertifyError::Dynamics(DynamicsError::InvalidScenario(format!(
                "chi must be finite and positive, got {c}"
            ))))
        }
        None => ln_zeta,
    };
    let d = d0 as f64;
    let ln_alpha2 = d * ln_xi0 + (d - 1.0) * ln_chi;
    let ln_one_minus_alpha1 = ln_alpha2 + ln_zeta;
    let ln_beta_tilde = -kappa * k0;

    Ok(TheoremConstants {
        n,
        m0,
        n_s,
        m_s: m0 * n_s as f64,
        d0,
        window: t,
        delta,
        kappa_lower: kappa,
        k0,
        zeta: ln_zeta.exp(),
        xi0: ln_xi0.exp(),
        chi: ln_chi.exp(),
        alpha1: -ln_one_minus_alpha1.exp_m1(),
        alpha2: ln_alpha2.exp(),
        beta_tilde: ln_beta_tilde.exp(),
        ln_zeta,
        ln_xi0,
        ln_chi,
        ln_one_minus_alpha1,
        ln_alpha2,
        ln_beta_tilde,
    })
}

/// Tolerances for the sampled inequality checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// `tol_dini = dini_factor · dt · (M0 N)^2 · max|state(t0)|`
    pub dini_factor: f64,
    /// Relative slack for the monotonicity, window and contraction checks.
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            dini_factor: 10.0,
            rel: 1e-6,
        }
    }
}

/// Outcome of one inequality over all samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub samples_checked: usize,
    pub violations: usize,
    /// Smallest `bound - value` seen; negative means the raw inequality
    /// failed at least once (possibly within tolerance).
    pub worst_margin: f64,
    /// Largest tolerance applied.
    pub tolerance_used: f64,
    pub first_violation_time: Option<f64>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Tally(InequalityReport);

impl Tally {
    fn new(name: impl Into<String>) -> Self {
        Self(InequalityReport {
            name: name.into(),
            samples_checked: 0,
            violations: 0,
            worst_margin: f64::MAX,
            tolerance_used: 0.0,
            first_violation_time: None,
        })
    }

    /// Records `value <= bound + tol` at time `t`.
    fn check(&mut self, t: f64, value: f64, bound: f64, tol: f64) {
        let r = &mut self.0;
        r.samples_checked += 1;
        r.tolerance_used = r.tolerance_used.max(tol);
        let margin = if bound == f64::INFINITY {
            f64::MAX
        } else {
            bound - value
        };
        r.worst_margin = r.worst_margin.min(margin);
        if !(margin >= -tol) {
            r.violations += 1;
            r.first_violation_time.get_or_insert(t);
        }
    }

    fn finish(self) -> InequalityReport {
        self.0
    }
}

fn max_step(traj: &Trajectory) -> f64 {
    traj.times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max)
}

/// `D+ h <= M0 Ns (c - h)` by forward differences, skipping switch instants.
///
/// As stated this bound is false whenever `h > c`: the right side is then
/// negative, while a receiver with no root-set neighbour at that moment may
/// hold its value. See [`check_dini_h_clipped`] for the form that holds.
pub fn check_dini_h(
    traj: &Trajectory,
    constants: &TheoremConstants,
    tol: &Tolerances,
) -> Result<InequalityReport, CertifyError> {
    dini_h(traj, constants, tol, false)
}

/// `D+ h <= M0 Ns max(c - h, 0)`: the stated bound when `h <= c`, and
/// `D+ h <= 0` otherwise.
pub fn check_dini_h_clipped(
    traj: &Trajectory,
    constants: &TheoremConstants,
    tol: &Tolerances,
) -> Result<InequalityReport, CertifyError> {
    dini_h(traj, constants, tol, true)
}

fn dini_h(
    traj: &Trajectory,
    constants: &TheoremConstants,
    tol: &Tolerances,
    clipped: bool,
) -> Result<InequalityReport, CertifyError> {
    if traj.mode != Mode::Open {
        return Err(CertifyError::Misuse("check_dini_h"));
    }
    let scale = traj
        .states
        .first()
        .map(|x| x.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .unwrap_or(0.0);
    let mn = constants.m0 * constants.n as f64;
    let tol_dini = tol.dini_factor * max_step(traj) * mn * mn * scale;

    let mut tally = Tally::new(if clipped { "dini_h_clipped" } else { "dini_h" });
    for k in 0..traj.len().saturating_sub(1) {
        if traj.at_switch[k] {
            continue;
        }
        let (m0, m1) = (&traj.monitors[k], &traj.monitors[k + 1]);
        let (Some(h0), Some(h1)) = (m0.h, m1.h) else {
            return Err(CertifyError::NotApplicable);
        };
        let fd = (h1 - h0) / (traj.times[k + 1] - traj.times[k]);
        let gap = if clipped { (m0.c - h0).max(0.0) } else { m0.c - h0 };
        tally.check(traj.times[k], fd, constants.m_s * gap, tol_dini);
    }
    Ok(tally.finish())
}

/// Open loop: `c` is non-increasing. Closed loop:
/// `c_e(t + dt) <= c_e(t) e^{-κ dt} (1 + rel)`.
pub fn check_dini_c(
    traj: &Trajectory,
    constants: &TheoremConstants,
    tol: &Tolerances,
) -> InequalityReport {
    let mut tally = Tally::new(match traj.mode {
        Mode::Open => "dini_c",
        Mode::Closed => "dini_c_e",
    });
    for k in 0..traj.len().saturating_sub(1) {
        let (m0, m1) = (&traj.monitors[k], &traj.monitors[k + 1]);
        let step = traj.times[k + 1] - traj.times[k];
        match traj.mode {
            Mode::Open => tally.check(traj.times[k + 1], m1.c, m0.c, tol.rel * m0.c),
            Mode::Closed => {
                let bound = m0.c_e * (-constants.kappa_lower * step).exp();
                tally.check(traj.times[k + 1], m1.c_e, bound, tol.rel * bound);
            }
        }
    }
    tally.finish()
}

/// Grid indices of `t0 + s K0` for `s = 0..=count`.
fn window_marks(traj: &Trajectory, k0: f64, min_windows: usize) -> Result<Vec<usize>, CertifyError> {
    let t0 = traj.times[0];
    let horizon = traj.times[traj.len() - 1] - t0;
    let count = ((horizon / k0) * (1.0 + 1e-12)).floor() as usize;
    if count < min_windows {
        return Err(CertifyError::HorizonTooShort {
            horizon,
            needed: min_windows as f64 * k0,
        });
    }
    (0..=count)
        .map(|s| {
            traj.index_at(t0 + s as f64 * k0)
                .ok_or(CertifyError::HorizonTooShort {
                    horizon,
                    needed: s as f64 * k0,
                })
        })
        .collect()
}

/// Per-window bounds over consecutive windows of length `K0 = d0 T`.
pub fn check_window_bounds(
    traj: &Trajectory,
    constants: &TheoremConstants,
    tol: &Tolerances,
) -> Result<InequalityReport, CertifyError> {
    let marks = window_marks(traj, constants.k0, 2)?;
    let mut tally = Tally::new(match traj.mode {
        Mode::Open => "window_bounds",
        Mode::Closed => "window_bounds_e",
    });
    for w in marks.windows(2) {
        let (start, end) = (w[0], w[1]);
        let m = &traj.monitors[start];
        let t_s = traj.times[start];
        for k in start..=end {
            let mk = &traj.monitors[k];
            let t = traj.times[k];
            match traj.mode {
                Mode::Open => {
                    tally.check(t, mk.c, m.c, tol.rel * m.c);
                    if let (Some(h), Some(hs)) = (mk.h, m.h) {
                        let b = hs + m.c;
                        tally.check(t, h, b, tol.rel * b);
                    }
                }
                Mode::Closed => {
                    let b = (-constants.kappa_lower * (t - t_s)).exp() * m.c_e;
                    tally.check(t, mk.c_e, b, tol.rel * b);
                    if let (Some(h), Some(hs)) = (mk.h_e, m.h_e) {
                        let b = hs + m.c_e;
                        tally.check(t, h, b, tol.rel * b);
                    }
                }
            }
        }
    }
    Ok(tally.finish())
}

/// Sampled contraction of `(h_e[n], c_e[n]) = (h_e(nK0), c_e(nK0))` over at
/// least three windows: the recursion, the geometric decay of `c_e`, and the
/// limit envelope on the final `h_e`.
pub fn check_contraction(
    traj: &Trajectory,
    constants: &TheoremConstants,
    tol: &Tolerances,
) -> Result<InequalityReport, CertifyError> {
    let marks = window_marks(traj, constants.k0, 3)?;
    let h = |k: usize| traj.monitors[k].h_e.unwrap_or(0.0);
    let c = |k: usize| traj.monitors[k].c_e;
    let name = if constants.ln_chi == constants.ln_zeta {
        "contraction".to_string()
    } else {
        format!("contraction[chi={}]", constants.chi)
    };
    let mut tally = Tally::new(name);
    let c0 = c(marks[0]);
    for (n, w) in marks.windows(2).enumerate() {
        let (prev, cur) = (w[0], w[1]);
        let t = traj.times[cur];
        let b = constants.alpha1 * h(prev) + (2.0 - constants.alpha2) * c(prev);
        tally.check(t, h(cur), b, tol.rel * b);
        let b = ((n + 1) as f64 * constants.ln_beta_tilde).exp() * c0;
        tally.check(t, c(cur), b, tol.rel * b);
    }

    let last = traj.len() - 1;
    let c_last = c(*marks.last().expect("at least three windows"));
    let factor_ln = (3.0 - constants.alpha2 - constants.alpha1).ln() - constants.ln_one_minus_alpha1;
    let envelope = if c_last > 0.0 {
        (factor_ln + c_last.ln()).exp()
    } else {
        0.0
    };
    tally.check(traj.times[last], h(last), envelope, tol.rel * envelope);
    Ok(tally.finish())
}

/// Measured per-window ratio `c_e[n+1] / c_e[n]` against `β̃`.
pub fn check_contraction_ratio(
    traj: &Trajectory,
    constants: &TheoremConstants,
    tol: &Tolerances,
) -> Result<InequalityReport, CertifyError> {
    let marks = window_marks(traj, constants.k0, 3)?;
    let mut tally = Tally::new("contraction_ratio");
    for w in marks.windows(2) {
        let (a, b) = (traj.monitors[w[0]].c_e, traj.monitors[w[1]].c_e);
        let t = traj.times[w[1]];
        if a > 0.0 {
            tally.check(t, b / a, constants.beta_tilde, tol.rel);
        } else {
            tally.check(t, b, 0.0, 0.0);
        }
    }
    Ok(tally.finish())
}

/// Options for [`certify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub chi: Option<f64>,
    pub final_threshold: f64,
    pub tolerances: Tolerances,
    pub connectivity: ConnectivityOptions,
    pub path_node_limit: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            chi: None,
            final_threshold: 1e-2,
            tolerances: Tolerances::default(),
            connectivity: ConnectivityOptions::default(),
            path_node_limit: DEFAULT_PATH_NODE_LIMIT,
        }
    }
}

fn one_based(set: &NodeSet) -> Vec<usize> {
    set.iter().map(|v| v + 1).collect()
}

/// Distinct root sets found across the checked windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootSetCount {
    pub root: Option<Vec<usize>>,
    pub windows: usize,
    pub first_start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectivitySummary {
    pub holds: bool,
    pub window_t: f64,
    pub delta: f64,
    pub windows_checked: usize,
    pub failed_at: Option<f64>,
    pub fixed_root_set: Option<Vec<usize>>,
    pub root_sets: Vec<RootSetCount>,
}

impl From<&ConnectivityReport> for ConnectivitySummary {
    fn from(r: &ConnectivityReport) -> Self {
        let mut root_sets: Vec<RootSetCount> = Vec::new();
        for w in &r.windows {
            let root = w.root.as_ref().map(one_based);
            match root_sets.iter_mut().find(|c| c.root == root) {
                Some(c) => c.windows += 1,
                None => root_sets.push(RootSetCount {
                    root,
                    windows: 1,
                    first_start: w.start,
                }),
            }
        }
        Self {
            holds: r.holds(),
            window_t: r.window,
            delta: r.delta,
            windows_checked: r.windows.len(),
            failed_at: r.failed_at,
            fixed_root_set: r.fixed_root_set.as_ref().map(one_based),
            root_sets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceSummary {
    pub balanced: bool,
    pub unique: bool,
    pub part1: Vec<usize>,
    pub part2: Vec<usize>,
    /// `[from, to]` of the arc that closed an inconsistent cycle.
    pub conflict: Option<[usize; 2]>,
}

impl From<&BalanceVerdict> for BalanceSummary {
    fn from(v: &BalanceVerdict) -> Self {
        match v {
            BalanceVerdict::Balanced {
                bipartition,
                unique,
            } => Self {
                balanced: true,
                unique: *unique,
                part1: one_based(&bipartition.part1),
                part2: one_based(&bipartition.part2),
                conflict: None,
            },
            BalanceVerdict::Unbalanced { conflict, .. } => Self {
                balanced: false,
                unique: false,
                part1: vec![],
                part2: vec![],
                conflict: Some([conflict.from + 1, conflict.to + 1]),
            },
        }
    }
}

/// Graph-structural verdicts for a scenario. Agent indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuralReport {
    pub holds: bool,
    pub connectivity: ConnectivitySummary,
    pub declared_root_set: Option<Vec<usize>>,
    pub root_set: Option<Vec<usize>>,
    pub balance: Option<BalanceSummary>,
    pub gain_conditions: Result<(), String>,
    pub m0: f64,
    pub d0: Option<usize>,
    /// Reasons the structural hypotheses fail; empty when they hold.
    pub problems: Vec<String>,
    pub notes: Vec<String>,
}

/// Everything [`analyze`] learns about a scenario.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub structural: StructuralReport,
    pub connectivity: ConnectivityReport,
    pub root: Option<NodeSet>,
    pub constants: Option<TheoremConstants>,
}

/// Structural checks plus the constants (when they apply).
pub fn analyze(scenario: &Scenario, opts: &CertifyOptions) -> Result<Analysis, CertifyError> {
    scenario.validate()?;
    let schedule = &scenario.schedule;
    let n = scenario.n_agents();
    let connectivity = check_uniform_qs_connectivity(
        schedule,
        scenario.delta,
        scenario.window,
        &opts.connectivity,
    )?;
    let mut problems = Vec::new();
    let mut notes = Vec::new();
    if let Some(t) = connectivity.failed_at {
        problems.push(format!("union graph of the window starting at t = {t} has no root node"));
    } else if connectivity.fixed_root_set.is_none() {
        problems.push("the root set differs between windows".into());
    }

    let root = match (&scenario.root_set, &connectivity.fixed_root_set) {
        (Some(declared), Some(found)) if declared != found => {
            problems.push(format!(
                "declared root set {:?} differs from detected {:?}",
                one_based(declared),
                one_based(found)
            ));
            None
        }
        (_, found) => found.clone(),
    };

    let balance = match &root {
        Some(r) => Some(check_persistent_balance(schedule, r)?),
        None => None,
    };
    if let Some(BalanceVerdict::Unbalanced { conflict, .. }) = &balance {
        problems.push(format!(
            "root set is structurally unbalanced (conflict at arc {} -> {})",
            conflict.from + 1,
            conflict.to + 1
        ));
    }

    let gain_conditions = match root.as_ref().or(scenario.root_set.as_ref()) {
        Some(r) => scenario.gains.check_conditions(r).map_err(|e| e.to_string()),
        None => Err("no root set to check the gains against".to_string()),
    };
    if let Err(e) = &gain_conditions {
        problems.push(e.clone());
    }

    let mut d0 = None;
    if let Some(r) = &root {
        let t0 = schedule.t_start();
        let union = union_graph(schedule, scenario.delta, t0, t0 + schedule.period())?;
        match longest_path_from_roots(&union.arcs, r, n, opts.path_node_limit) {
            Ok(d) => d0 = Some(d),
            Err(e) => problems.push(format!("longest path from the root set: {e}")),
        }
    }

    let constants = match (&root, d0) {
        (Some(r), Some(d)) => match compute_constants(scenario, r, d, opts.chi) {
            Ok(c) => {
                let bad = c.range_violations();
                if !bad.is_empty() {
                    problems.push(format!("constants out of range: {}", bad.join(", ")));
                }
                Some(c)
            }
            Err(CertifyError::NotApplicable) => {
                notes.push("root set is every agent: no receivers, constants not applicable".into());
                None
            }
            Err(e) => {
                problems.push(format!("constants: {e}"));
                None
            }
        },
        _ => None,
    };

    let structural = StructuralReport {
        holds: problems.is_empty(),
        connectivity: (&connectivity).into(),
        declared_root_set: scenario.root_set.as_ref().map(one_based),
        root_set: root.as_ref().map(one_based),
        balance: balance.as_ref().map(Into::into),
        gain_conditions,
        m0: schedule.max_abs_weight(),
        d0,
        problems,
        notes,
    };
    Ok(Analysis {
        structural,
        connectivity,
        root,
        constants,
    })
}

/// Overall outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    StructuralFail,
    InequalityViolation,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub structural: StructuralReport,
    pub constants: Option<TheoremConstants>,
    pub tolerances: Tolerances,
    pub inequalities: Vec<InequalityReport>,
    /// Contraction checks with `χ = 1`; reported, not part of the verdict.
    pub sensitivity: Vec<InequalityReport>,
    /// Inequalities checked exactly as stated although they are known not
    /// to hold in general (`dini_h` when `h > c`); reported, not part of the
    /// verdict, which uses the corrected form instead.
    pub as_stated: Vec<InequalityReport>,
    pub final_error: Option<f64>,
    pub final_threshold: f64,
    pub diverged_at: Option<f64>,
    pub notes: Vec<String>,
    pub verdict: Verdict,
}

/// Trajectories produced while certifying.
#[derive(Debug, Clone, Default)]
pub struct CertifyRuns {
    pub open: Option<Trajectory>,
    pub closed: Option<Trajectory>,
}

/// Runs the structural checks, integrates both loops and checks every
/// inequality.
pub fn certify(scenario: &Scenario, opts: &CertifyOptions) -> Result<CertificationReport, CertifyError> {
    certify_with_runs(scenario, opts).map(|(r, _)| r)
}

/// [`certify`], also returning the trajectories it integrated.
pub fn certify_with_runs(
    scenario: &Scenario,
    opts: &CertifyOptions,
) -> Result<(CertificationReport, CertifyRuns), CertifyError> {
    let analysis = analyze(scenario, opts)?;
    let mut notes = Vec::new();
    let mut runs = CertifyRuns::default();
    let mut diverged_at = None;

    if let Some(root) = &analysis.root {
        for mode in [Mode::Open, Mode::Closed] {
            match integrate_with_root(scenario, mode, root) {
                Ok(t) => match mode {
                    Mode::Open => runs.open = Some(t),
                    Mode::Closed => runs.closed = Some(t),
                },
                Err(DynamicsError::Diverged {
                    last_valid_time, ..
                }) => {
                    notes.push(format!("{mode}-loop integration diverged after t = {last_valid_time}"));
                    diverged_at.get_or_insert(last_valid_time);
                }
                Err(e) => return Err(e.into()),
            }
        }
    } else {
        notes.push("no usable root set: dynamics not simulated".into());
    }

    let tol = &opts.tolerances;
    let mut inequalities = Vec::new();
    let mut sensitivity = Vec::new();
    let mut as_stated = Vec::new();
    let checkable = analysis.structural.holds && diverged_at.is_none();
    match (&analysis.constants, &runs.open, &runs.closed) {
        (Some(c), Some(open), Some(closed)) if checkable => {
            as_stated.push(check_dini_h(open, c, tol)?);
            inequalities.push(check_dini_h_clipped(open, c, tol)?);
            inequalities.push(check_dini_c(open, c, tol));
            inequalities.push(check_window_bounds(open, c, tol)?);
            inequalities.push(check_dini_c(closed, c, tol));
            inequalities.push(check_window_bounds(closed, c, tol)?);
            inequalities.push(check_contraction(closed, c, tol)?);
            inequalities.push(check_contraction_ratio(closed, c, tol)?);

            let root = analysis.root.as_ref().expect("constants imply a root set");
            let unit = compute_constants(scenario, root, c.d0, Some(1.0))?;
            sensitivity.push(check_contraction(closed, &unit, tol)?);
        }
        _ => notes.push("inequality checks skipped".into()),
    }

    let final_error = runs.closed.as_ref().and_then(Trajectory::final_error);
    let verdict = if !analysis.structural.holds {
        Verdict::StructuralFail
    } else if diverged_at.is_some() {
        Verdict::Diverged
    } else if inequalities.is_empty()
        || inequalities.iter().any(|r| !r.passed())
        || !final_error.is_some_and(|e| e <= opts.final_threshold)
    {
        Verdict::InequalityViolation
    } else {
        Verdict::Pass
    };

    let report = CertificationReport {
        structural: analysis.structural,
        constants: analysis.constants,
        tolerances: *tol,
        inequalities,
        sensitivity,
        as_stated,
        final_error,
        final_threshold: opts.final_threshold,
        diverged_at,
        notes,
        verdict,
    };
    Ok((report, runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::GainSchedule;
    use crate::graph::{GraphSnapshot, SwitchingSchedule};

    fn chain_scenario() -> Scenario {
        // 1 <-> 2 (antagonistic) -> 3
        let g = GraphSnapshot::from_arcs(3, [(0, 1, -1.0), (1, 0, -1.0), (1, 2, 0.5)]).unwrap();
        Scenario {
            schedule: SwitchingSchedule::constant(g),
            delta: 0.1,
            window: 2.0,
            x0: vec![3.0, 1.0, -2.0],
            x_target: vec![1.0, 2.0, -4.0],
            gains: GainSchedule::on_set(3, &NodeSet::from([0, 1]), 0.8, 0.8).unwrap(),
            root_set: None,
            horizon: 24.0,
            dt: 1e-3,
        }
    }

    #[test]
    fn constants_follow_their_formulas() {
        let sc = chain_scenario();
        let root = NodeSet::from([0, 1]);
        let c = compute_constants(&sc, &root, 2, None).unwrap();
        let (m0, t, delta) = (1.0_f64, 2.0_f64, 0.1_f64);
        // N - Ns - 1 = 0
        let zeta = (1.0 - (-delta * t).exp()) * (-m0 * 0.0 * t).exp();
        assert!((c.zeta - zeta).abs() < 1e-15);
        assert_eq!(c.k0, 4.0);
        assert!((c.xi0 - (-2.0 * m0 * 4.0_f64).exp()).abs() < 1e-15);
        assert!((c.beta_tilde - (-0.8 * 4.0_f64).exp()).abs() < 1e-15);
        let alpha2 = c.xi0.powi(2) * zeta;
        assert!((c.alpha2 - alpha2).abs() < 1e-15);
        assert!((c.alpha1 - (1.0 - alpha2 * zeta)).abs() < 1e-15);
        assert!(c.range_violations().is_empty());
        assert_eq!(c.m_s, 2.0);
    }

    #[test]
    fn zeta_tends_to_its_prefactor() {
        let mut sc = chain_scenario();
        sc.delta = 1e3;
        let c = compute_constants(&sc, &NodeSet::from([0, 1]), 2, None).unwrap();
        assert_eq!(c.zeta, 1.0);
    }

    #[test]
    fn degenerate_constants() {
        let sc = chain_scenario();
        assert!(matches!(
            compute_constants(&sc, &NodeSet::from([0, 1, 2]), 2, None),
            Err(CertifyError::NotApplicable)
        ));
        assert!(matches!(
            compute_constants(&sc, &NodeSet::from([0, 1]), 0, None),
            Err(CertifyError::Inconsistent)
        ));
    }

    #[test]
    fn chain_scenario_certifies() {
        let report = certify(&chain_scenario(), &CertifyOptions::default()).unwrap();
        assert_eq!(report.structural.root_set, Some(vec![1, 2]));
        assert_eq!(report.structural.d0, Some(2));
        for r in &report.inequalities {
            assert!(r.passed(), "{r:?}");
        }
        assert_eq!(report.verdict, Verdict::Pass, "{report:#?}");
    }

    #[test]
    fn dini_h_rejects_closed_loop() {
        let sc = chain_scenario();
        let root = sc.resolve_root_set().unwrap();
        let c = compute_constants(&sc, &root, 2, None).unwrap();
        let closed = integrate_with_root(&sc, Mode::Closed, &root).unwrap();
        assert!(matches!(
            check_dini_h(&closed, &c, &Tolerances::default()),
            Err(CertifyError::Misuse(_))
        ));
    }

    #[test]
    fn zero_state_satisfies_everything_with_equality() {
        let mut sc = chain_scenario();
        sc.x0 = vec![0.0; 3];
        sc.x_target = vec![0.0; 3];
        let root = sc.resolve_root_set().unwrap();
        let c = compute_constants(&sc, &root, 2, None).unwrap();
        let tol = Tolerances::default();
        for mode in [Mode::Open, Mode::Closed] {
            let tr = integrate_with_root(&sc, mode, &root).unwrap();
            let r = check_window_bounds(&tr, &c, &tol).unwrap();
            assert_eq!(r.violations, 0);
            assert_eq!(r.worst_margin, 0.0);
            assert!(check_dini_c(&tr, &c, &tol).passed());
        }
        let closed = integrate_with_root(&sc, Mode::Closed, &root).unwrap();
        let r = check_contraction(&closed, &c, &tol).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn short_horizon_is_rejected() {
        let mut sc = chain_scenario();
        sc.horizon = 6.0;
        let root = sc.resolve_root_set().unwrap();
        let c = compute_constants(&sc, &root, 2, None).unwrap();
        let tr = integrate_with_root(&sc, Mode::Closed, &root).unwrap();
        assert!(matches!(
            check_window_bounds(&tr, &c, &Tolerances::default()),
            Err(CertifyError::HorizonTooShort { .. })
        ));
        assert!(check_contraction(&tr, &c, &Tolerances::default()).is_err());
    }

    #[test]
    fn violation_is_counted() {
        // a trajectory whose c grows breaks the open-loop monotonicity check
        let sc = chain_scenario();
        let root = sc.resolve_root_set().unwrap();
        let c = compute_constants(&sc, &root, 2, None).unwrap();
        let mut tr = integrate_with_root(&sc, Mode::Open, &root).unwrap();
        tr.monitors[10].c += 1.0;
        let r = check_dini_c(&tr, &c, &Tolerances::default());
        assert_eq!(r.violations, 1);
        assert!(r.worst_margin < -0.9);
        assert_eq!(r.first_violation_time, Some(tr.times[10]));
    }

    #[test]
    fn zero_gain_on_root_fails_structurally() {
        let mut sc = chain_scenario();
        sc.gains = GainSchedule::new(vec![0.0, 0.8, 0.0], 0.8).unwrap();
        let report = certify(&sc, &CertifyOptions::default()).unwrap();
        assert_eq!(report.verdict, Verdict::StructuralFail);
        assert!(report.structural.gain_conditions.is_err());
        assert!(report.inequalities.is_empty());
    }
}
