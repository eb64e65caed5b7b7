//! Switched Laplacian opinion dynamics, open loop and under the target
//! tracking controller `u = L(t) x_d - K(t) (x - x_d)`.
//!
//! Integration runs in deviation coordinates `z = x - x_ref`, with
//! `x_ref = x_d` in closed loop and `x_ref = 0` in open loop. Substituting the
//! controller gives `dz/dt = -L z - K z` exactly, so the error keeps its full
//! relative precision while it decays far below the scale of `x_d`.

use serde::Serialize;

use crate::error::DynamicsError;
use crate::graph::{
    check_uniform_qs_connectivity, sgn, ConnectivityOptions, GraphSnapshot, NodeSet,
    SwitchingSchedule,
};

/// Open loop (`u ≡ 0`) or closed loop (tracking controller).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Open,
    Closed,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Open => "open",
            Mode::Closed => "closed",
        })
    }
}

/// Controller gains `k_i`, constant in time, and the lower bound `κ̲`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    gains: Vec<f64>,
    kappa_lower: f64,
}

impl GainSchedule {
    pub fn new(gains: Vec<f64>, kappa_lower: f64) -> Result<Self, DynamicsError> {
        if !(kappa_lower.is_finite() && kappa_lower > 0.0) {
            return Err(DynamicsError::Gain(format!(
                "P2: kappa_lower must be strictly positive, got {kappa_lower}"
            )));
        }
        if let Some((i, k)) = gains
            .iter()
            .enumerate()
            .find(|(_, k)| !(k.is_finite() && **k >= 0.0))
        {
            return Err(DynamicsError::Gain(format!(
                "gain k_{} = {k} must be finite and nonnegative",
                i + 1
            )));
        }
        Ok(Self { gains, kappa_lower })
    }

    /// `value` on every node of `set`, zero elsewhere.
    pub fn on_set(n: usize, set: &NodeSet, value: f64, kappa_lower: f64) -> Result<Self, DynamicsError> {
        let gains = (0..n)
            .map(|i| if set.contains(&i) { value } else { 0.0 })
            .collect();
        Self::new(gains, kappa_lower)
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn kappa_lower(&self) -> f64 {
        self.kappa_lower
    }

    /// Checks `k_i >= κ̲` on the root set and `k_j = 0` off it.
    pub fn check_conditions(&self, root: &NodeSet) -> Result<(), DynamicsError> {
        for (i, &k) in self.gains.iter().enumerate() {
            if root.contains(&i) && k < self.kappa_lower {
                return Err(DynamicsError::Gain(format!(
                    "P2: k_{} = {k} is below kappa_lower = {} for a root agent",
                    i + 1,
                    self.kappa_lower
                )));
            }
            if !root.contains(&i) && k != 0.0 {
                return Err(DynamicsError::Gain(format!(
                    "P2: k_{} = {k} must be zero outside the root set",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub schedule: SwitchingSchedule,
    pub delta: f64,
    pub window: f64,
    pub x0: Vec<f64>,
    pub x_target: Vec<f64>,
    pub gains: GainSchedule,
    /// Declared root set; detected from the schedule when absent.
    pub root_set: Option<NodeSet>,
    pub horizon: f64,
    pub dt: f64,
}

fn positive(name: &str, v: f64) -> Result<(), DynamicsError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(DynamicsError::InvalidScenario(format!(
            "{name} must be finite and strictly positive, got {v}"
        )))
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), DynamicsError> {
    if expected == got {
        Ok(())
    } else {
        Err(DynamicsError::Dimension {
            what,
            expected,
            got,
        })
    }
}

impl Scenario {
    pub fn n_agents(&self) -> usize {
        self.schedule.n_agents()
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let n = self.n_agents();
        positive("delta", self.delta)?;
        positive("window_T", self.window)?;
        positive("horizon", self.horizon)?;
        positive("dt", self.dt)?;
        let max_dt = self.schedule.min_dwell() / 2.0;
        if self.dt > max_dt {
            return Err(DynamicsError::InvalidScenario(format!(
                "dt = {} exceeds half the shortest dwell time ({max_dt})",
                self.dt
            )));
        }
        check_len("x0", n, self.x0.len())?;
        check_len("x_target", n, self.x_target.len())?;
        check_len("gains", n, self.gains.gains().len())?;
        if self.x0.iter().chain(&self.x_target).any(|v| !v.is_finite()) {
            return Err(DynamicsError::InvalidScenario(
                "x0 and x_target entries must be finite".into(),
            ));
        }
        if let Some(root) = &self.root_set {
            if root.is_empty() {
                return Err(DynamicsError::InvalidScenario("root_set is empty".into()));
            }
            if let Some(&bad) = root.iter().find(|&&v| v >= n) {
                return Err(DynamicsError::InvalidScenario(format!(
                    "root_set contains agent {} but there are {n} agents",
                    bad + 1
                )));
            }
        }
        Ok(())
    }

    /// The root set used by the controller and the monitors: detected from
    /// the connectivity check, and cross-checked against the declared one.
    pub fn resolve_root_set(&self) -> Result<NodeSet, DynamicsError> {
        let report = check_uniform_qs_connectivity(
            &self.schedule,
            self.delta,
            self.window,
            &ConnectivityOptions::default(),
        )?;
        let detected = report.fixed_root_set;
        match (&self.root_set, detected) {
            (Some(declared), Some(found)) if *declared == found => Ok(found),
            (None, Some(found)) => Ok(found),
            (Some(declared), detected) => Err(DynamicsError::RootSetMismatch {
                declared: declared.iter().copied().collect(),
                detected: detected.map(|d| d.into_iter().collect()),
            }),
            (None, None) => Err(DynamicsError::NoRootSet(match report.failed_at {
                Some(t) => format!("window starting at t = {t} has no root node"),
                None => "the root set changes between windows".into(),
            })),
        }
    }
}

/// `dx_i/dt = Σ_j |a_ij| (sgn(a_ij) x_j - x_i) + u_i`.
pub fn state_derivative(
    snapshot: &GraphSnapshot,
    x: &[f64],
    u: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    let n = snapshot.n_agents();
    check_len("x", n, x.len())?;
    check_len("u", n, u.len())?;
    let mut out = vec![0.0; n];
    laplacian_flow(snapshot, x, &mut out);
    for (o, ui) in out.iter_mut().zip(u) {
        *o += ui;
    }
    Ok(out)
}

/// Writes `-L x` in summation form into `out`.
#[inline]
fn laplacian_flow(g: &GraphSnapshot, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let xi = x[i];
        *o = g
            .row(i)
            .iter()
            .zip(x)
            .filter(|(a, _)| **a != 0.0)
            .map(|(&a, &xj)| a.abs() * (sgn(a) * xj - xi))
            .sum();
    }
}

/// `L x_d - K (x - x_d)` with the Laplacian active at `t`.
pub fn control_input(
    schedule: &SwitchingSchedule,
    gains: &GainSchedule,
    x: &[f64],
    x_d: &[f64],
    t: f64,
) -> Result<Vec<f64>, DynamicsError> {
    let n = schedule.n_agents();
    check_len("x", n, x.len())?;
    check_len("x_d", n, x_d.len())?;
    check_len("gains", n, gains.gains().len())?;
    let g = crate::graph::adjacency_at(schedule, t)?;
    let deviation: Vec<f64> = x.iter().zip(x_d).map(|(a, b)| a - b).collect();
    Ok(closed_loop_control(g, gains.gains(), x_d, &deviation))
}

fn closed_loop_control(g: &GraphSnapshot, gains: &[f64], x_d: &[f64], e: &[f64]) -> Vec<f64> {
    let mut flow = vec![0.0; x_d.len()];
    laplacian_flow(g, x_d, &mut flow);
    // flow = -L x_d
    flow.iter()
        .zip(gains.iter().zip(e))
        .map(|(f, (k, ei))| -f - k * ei)
        .collect()
}

/// Max-modulus monitors over the receivers `R = V \ S` (`h`) and the root
/// set `S` (`c`), for the state and for the error `e = x - x_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monitors {
    pub h: Option<f64>,
    pub c: f64,
    pub h_e: Option<f64>,
    pub c_e: f64,
}

fn max_abs_over(v: &[f64], pick: impl Fn(usize) -> bool) -> Option<f64> {
    v.iter()
        .enumerate()
        .filter(|(i, _)| pick(*i))
        .map(|(_, x)| x.abs())
        .reduce(f64::max)
}

fn monitors_from(x: &[f64], e: &[f64], s: &NodeSet) -> Monitors {
    Monitors {
        h: max_abs_over(x, |i| !s.contains(&i)),
        c: max_abs_over(x, |i| s.contains(&i)).unwrap_or(0.0),
        h_e: max_abs_over(e, |i| !s.contains(&i)),
        c_e: max_abs_over(e, |i| s.contains(&i)).unwrap_or(0.0),
    }
}

/// Monitors `h`, `c`, `h_e`, `c_e` for one state. `h` and `h_e` are `None`
/// when every agent is in `s`.
pub fn monitors(x: &[f64], x_d: &[f64], s: &NodeSet) -> Monitors {
    let e: Vec<f64> = x.iter().zip(x_d).map(|(a, b)| a - b).collect();
    monitors_from(x, &e, s)
}

/// Both sides of the absolute-value dynamics for one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsResidual {
    /// `sgn(x_i) * dx_i/dt`
    pub lhs: f64,
    /// `Σ_j |a_ij| (θ_ij |x_j| - |x_i|)`
    pub rhs: f64,
    pub residual: f64,
    /// `x_i == 0`: the chain rule does not apply, so the row is not judged.
    pub excluded: bool,
}

/// Evaluates `d|x_i|/dt = Σ_j |a_ij| (θ_ij |x_j| - |x_i|)` with
/// `θ_ij = sgn(x_i) sgn(a_ij) sgn(x_j)` against `sgn(x_i) dx_i/dt` for the
/// open-loop vector field.
pub fn abs_dynamics_residual(
    snapshot: &GraphSnapshot,
    x: &[f64],
) -> Result<Vec<AbsResidual>, DynamicsError> {
    let n = snapshot.n_agents();
    check_len("x", n, x.len())?;
    let mut xdot = vec![0.0; n];
    laplacian_flow(snapshot, x, &mut xdot);
    Ok((0..n)
        .map(|i| {
            let si = sgn(x[i]);
            let rhs: f64 = snapshot
                .row(i)
                .iter()
                .zip(x)
                .filter(|(a, _)| **a != 0.0)
                .map(|(&a, &xj)| a.abs() * (si * sgn(a) * sgn(xj) * xj.abs() - x[i].abs()))
                .sum();
            let lhs = si * xdot[i];
            AbsResidual {
                lhs,
                rhs,
                residual: lhs - rhs,
                excluded: x[i] == 0.0,
            }
        })
        .collect())
}

/// Dense trajectory on a switch-aligned grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub mode: Mode,
    pub root_set: NodeSet,
    pub x_target: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub monitors: Vec<Monitors>,
    /// Grid point is a switch instant of the schedule.
    pub at_switch: Vec<bool>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `‖x(t_end) - x_d‖∞`.
    pub fn final_error(&self) -> Option<f64> {
        self.monitors
            .last()
            .map(|m| m.c_e.max(m.h_e.unwrap_or(0.0)))
    }

    /// Index of the first grid point at or after `t` (within half a step).
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let i = self.times.partition_point(|&s| s < t);
        let best = [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&k| k < self.times.len())
            .min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs()))?;
        let tol = 1e-9 * t.abs().max(1.0);
        let step = self
            .times
            .get(best + 1)
            .or(best.checked_sub(1).and_then(|k| self.times.get(k)))
            .map(|&s| (s - self.times[best]).abs())
            .unwrap_or(0.0);
        ((self.times[best] - t).abs() <= tol.max(step / 2.0)).then_some(best)
    }
}

/// Switch-aligned grid: uniform `dt` steps from `t0` plus every switch
/// instant; uniform points closer than `dt·1e-6` to a switch are dropped.
fn build_grid(schedule: &SwitchingSchedule, t0: f64, t_end: f64, dt: f64) -> Result<(Vec<f64>, Vec<bool>), DynamicsError> {
    let switches = schedule.switch_instants(t0, t_end)?;
    let eps = dt * 1e-6;
    let mut breaks = vec![t0];
    breaks.extend(switches.iter().copied().filter(|&s| s > t0 + eps && s < t_end - eps));
    breaks.push(t_end);

    let mut times = vec![t0];
    let mut flags = vec![switches.first().is_some_and(|&s| (s - t0).abs() <= eps)];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut k = ((a - t0) / dt).floor() as i64 + 1;
        loop {
            let t = t0 + k as f64 * dt;
            if t >= b - eps {
                break;
            }
            if t > a + eps {
                times.push(t);
                flags.push(false);
            }
            k += 1;
        }
        times.push(b);
        flags.push(switches.iter().any(|&s| (s - b).abs() <= eps));
    }
    Ok((times, flags))
}

/// One classical fourth-order Runge–Kutta step of `dz/dt = -L z - K z`.
struct Stepper {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stepper {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn rhs(g: &GraphSnapshot, feedback: Option<&[f64]>, z: &[f64], out: &mut [f64]) {
        laplacian_flow(g, z, out);
        if let Some(k) = feedback {
            for ((o, ki), zi) in out.iter_mut().zip(k).zip(z) {
                *o -= ki * zi;
            }
        }
    }

    fn step(&mut self, g: &GraphSnapshot, feedback: Option<&[f64]>, z: &mut [f64], h: f64) {
        Self::rhs(g, feedback, z, &mut self.k1);
        for i in 0..z.len() {
            self.tmp[i] = z[i] + 0.5 * h * self.k1[i];
        }
        Self::rhs(g, feedback, &self.tmp, &mut self.k2);
        for i in 0..z.len() {
            self.tmp[i] = z[i] + 0.5 * h * self.k2[i];
        }
        Self::rhs(g, feedback, &self.tmp, &mut self.k3);
        for i in 0..z.len() {
            self.tmp[i] = z[i] + h * self.k3[i];
        }
        Self::rhs(g, feedback, &self.tmp, &mut self.k4);
        for i in 0..z.len() {
            z[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Integrates the scenario, resolving the root set first.
pub fn integrate(scenario: &Scenario, mode: Mode) -> Result<Trajectory, DynamicsError> {
    let root = scenario.resolve_root_set()?;
    integrate_with_root(scenario, mode, &root)
}

/// Integrates the scenario with an already resolved root set.
pub fn integrate_with_root(
    scenario: &Scenario,
    mode: Mode,
    root: &NodeSet,
) -> Result<Trajectory, DynamicsError> {
    scenario.validate()?;
    let schedule = &scenario.schedule;
    let n = scenario.n_agents();
    let x_d = &scenario.x_target;
    let t0 = schedule.t_start();
    let t_end = t0 + scenario.horizon;

    let (times, at_switch) = build_grid(schedule, t0, t_end, scenario.dt)?;
    let feedback = match mode {
        Mode::Open => None,
        Mode::Closed => Some(scenario.gains.gains()),
    };
    let reference: Vec<f64> = match mode {
        Mode::Open => vec![0.0; n],
        Mode::Closed => x_d.clone(),
    };

    let mut z: Vec<f64> = scenario.x0.iter().zip(&reference).map(|(x, r)| x - r).collect();
    let mut deviations = Vec::with_capacity(times.len());
    deviations.push(z.clone());

    let mut stepper = Stepper::new(n);
    let segments = schedule.segments(t0, t_end)?;
    let mut seg = 0;
    let mut diverged_at = None;
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        while segments[seg].end <= a {
            seg += 1;
        }
        let g = &schedule.snapshots()[segments[seg].snapshot];
        stepper.step(g, feedback, &mut z, b - a);
        if z.iter().any(|v| !v.is_finite()) {
            diverged_at = Some(a);
            break;
        }
        deviations.push(z.clone());
    }

    let m = deviations.len();
    let mut traj = Trajectory {
        mode,
        root_set: root.clone(),
        x_target: x_d.clone(),
        times: times[..m].to_vec(),
        states: Vec::with_capacity(m),
        controls: Vec::with_capacity(m),
        monitors: Vec::with_capacity(m),
        at_switch: at_switch[..m].to_vec(),
    };
    let mut seg = 0;
    for (k, dev) in deviations.iter().enumerate() {
        let t = times[k];
        // right-continuous: a switch instant takes the incoming snapshot
        while seg + 1 < segments.len() && segments[seg].end <= t {
            seg += 1;
        }
        let g = &schedule.snapshots()[segments[seg].snapshot];
        let x: Vec<f64> = dev.iter().zip(&reference).map(|(d, r)| d + r).collect();
        let (u, mon) = match mode {
            Mode::Open => {
                let e: Vec<f64> = x.iter().zip(x_d).map(|(a, b)| a - b).collect();
                (vec![0.0; n], monitors_from(&x, &e, root))
            }
            Mode::Closed => (
                closed_loop_control(g, scenario.gains.gains(), x_d, dev),
                monitors_from(&x, dev, root),
            ),
        };
        traj.states.push(x);
        traj.controls.push(u);
        traj.monitors.push(mon);
    }

    match diverged_at {
        Some(last_valid_time) => Err(DynamicsError::Diverged {
            last_valid_time,
            partial: Box::new(traj),
        }),
        None => Ok(traj),
    }
}
