//! Explicit Runge-Kutta propagation of the chain with invariant monitoring.
//!
//! Two methods: classical RK4 with a fixed step and Dormand-Prince 5(4)
//! with error control. Samples on the uniform output grid come from dense
//! output (cubic Hermite for RK4, the 4th-order DOPRI5 interpolant
//! otherwise), so the output cadence is independent of the step size.

use serde::{Deserialize, Serialize};

use crate::chain::{casimir_tower, cluster, ChainState, ClusterVars, Deltas};
use crate::error::{Error, Result};
use crate::systems::{conserved_deltas, field_flat, hamiltonian, SystemKind, SystemTag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed { dt: f64 },
    Rk45Adaptive { rtol: f64, atol: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk45Adaptive { rtol: 1e-10, atol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t0: f64,
    pub t1: f64,
    pub sample_every: f64,
    /// Cluster sizes recorded at every sample.
    #[serde(default)]
    pub track_clusters: Vec<usize>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::default(),
            t0: 0.0,
            t1: 10.0,
            sample_every: 0.1,
            track_clusters: Vec::new(),
            max_steps: 50_000_000,
        }
    }
}

fn config_err(field: &'static str, message: String) -> Error {
    Error::Config { field, message }
}

impl IntegratorConfig {
    pub fn adaptive(t0: f64, t1: f64, sample_every: f64) -> Self {
        Self { t0, t1, sample_every, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::Rk4Fixed { dt } => {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(config_err("dt", format!("must be positive, got {dt}")));
                }
            }
            Method::Rk45Adaptive { rtol, atol } => {
                for (field, v) in [("rtol", rtol), ("atol", atol)] {
                    if !(v > 0.0 && v <= 1e-2) {
                        return Err(config_err(field, format!("must lie in (0, 1e-2], got {v}")));
                    }
                }
            }
        }
        if !(self.t0.is_finite() && self.t1.is_finite() && self.t1 > self.t0) {
            return Err(config_err(
                "t_span",
                format!("need finite t1 > t0, got ({}, {})", self.t0, self.t1),
            ));
        }
        if !(self.sample_every > 0.0 && self.sample_every.is_finite()) {
            return Err(config_err(
                "sample_every",
                format!("must be positive, got {}", self.sample_every),
            ));
        }
        if self.max_steps == 0 {
            return Err(config_err("max_steps", "must be at least 1".into()));
        }
        Ok(())
    }

    /// Output grid `t0, t0 + Δ, …`, closed by `t1`.
    pub fn sample_times(&self) -> Vec<f64> {
        let span = self.t1 - self.t0;
        let n = (span / self.sample_every + 1e-9).floor() as usize;
        let mut ts: Vec<f64> = (0..=n).map(|k| self.t0 + k as f64 * self.sample_every).collect();
        let last = *ts.last().expect("grid has t0");
        if self.t1 - last > 1e-9 * self.sample_every {
            ts.push(self.t1);
        } else if let Some(l) = ts.last_mut() {
            *l = self.t1;
        }
        ts
    }
}

/// Conserved quantities at one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSample {
    /// `C^(1..N)` followed by `C^(N-1..1)` of the complements.
    pub tower: Vec<f64>,
    /// Constants of the motion of the system, see [`conserved_deltas`].
    pub deltas: Deltas,
    pub energy: f64,
}

impl InvariantSample {
    pub fn of(k: &SystemKind, c: &ChainState) -> Result<Self> {
        Ok(Self {
            tower: casimir_tower(c).to_vec(),
            deltas: conserved_deltas(k, c),
            energy: hamiltonian(k, c)?,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub system: SystemKind,
    pub times: Vec<f64>,
    pub states: Vec<ChainState>,
    pub tracked: Vec<usize>,
    /// Per sample, one entry per tracked cluster size.
    pub cluster_track: Option<Vec<Vec<ClusterVars>>>,
    pub invariant_track: Vec<InvariantSample>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &ChainState {
        self.states.last().expect("a trajectory has at least one sample")
    }

    /// Time series of cluster `m`, from the track if present, otherwise
    /// computed from the stored states.
    pub fn cluster_series(&self, m: usize) -> Result<Vec<ClusterVars>> {
        if let (Some(j), Some(track)) = (
            self.tracked.iter().position(|&x| x == m),
            self.cluster_track.as_ref(),
        ) {
            return Ok(track.iter().map(|row| row[j]).collect());
        }
        self.states.iter().map(|c| cluster(c, m)).collect()
    }
}

/// Workspace for explicit stepping of `y' = f(t, y)`.
pub trait Rhs {
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]);
}

impl<F: FnMut(f64, &[f64], &mut [f64])> Rhs for F {
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) {
        self(t, y, out)
    }
}

/// One classical RK4 step of size `h`, writing `y(t + h)` into `out`.
pub fn rk4_step<F: Rhs>(f: &mut F, t: f64, y: &[f64], h: f64, out: &mut [f64]) {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f.eval(t, y, &mut k1);
    rk4_stages(f, t, y, h, &k1, [&mut k2, &mut k3, &mut k4], &mut tmp);
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

fn rk4_stages<F: Rhs>(
    f: &mut F,
    t: f64,
    y: &[f64],
    h: f64,
    k1: &[f64],
    [k2, k3, k4]: [&mut Vec<f64>; 3],
    tmp: &mut [f64],
) {
    for i in 0..y.len() {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f.eval(t + 0.5 * h, tmp, k2);
    for i in 0..y.len() {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f.eval(t + 0.5 * h, tmp, k3);
    for i in 0..y.len() {
        tmp[i] = y[i] + h * k3[i];
    }
    f.eval(t + h, tmp, k4);
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Interpolant over one accepted step `[t, t + h]`.
enum Dense<'a> {
    Hermite { y0: &'a [f64], y1: &'a [f64], f0: &'a [f64], f1: &'a [f64] },
    Dopri { rc: &'a [Vec<f64>; 5] },
}

impl Dense<'_> {
    fn eval(&self, theta: f64, h: f64, out: &mut [f64]) {
        match self {
            Dense::Hermite { y0, y1, f0, f1 } => {
                let t2 = theta * theta;
                let t3 = t2 * theta;
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + theta;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                for i in 0..out.len() {
                    out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
                }
            }
            Dense::Dopri { rc } => {
                let th1 = 1.0 - theta;
                for i in 0..out.len() {
                    out[i] = rc[0][i]
                        + theta
                            * (rc[1][i] + th1 * (rc[2][i] + theta * (rc[3][i] + th1 * rc[4][i])));
                }
            }
        }
    }
}

/// Integrates `y' = f(t, y)` from `cfg.t0` to `cfg.t1`, handing each grid
/// sample to `sample`.
pub fn solve<F, S>(f: &mut F, y0: &[f64], cfg: &IntegratorConfig, mut sample: S) -> Result<StepStats>
where
    F: Rhs,
    S: FnMut(f64, &[f64]) -> Result<()>,
{
    cfg.validate()?;
    let grid = cfg.sample_times();
    let n = y0.len();
    let mut stats = StepStats::default();
    let mut buf = vec![0.0; n];

    let mut y = y0.to_vec();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { t: cfg.t0 });
    }
    sample(grid[0], &y)?;
    let mut next = 1usize;
    let mut emit = |t_a: f64, h: f64, dense: &Dense, next: &mut usize, buf: &mut [f64]| -> Result<()> {
        let t_b = t_a + h;
        while *next < grid.len() && grid[*next] <= t_b + 1e-12 * h.abs().max(1e-300) {
            let ts = grid[*next];
            let theta = if h > 0.0 { ((ts - t_a) / h).clamp(0.0, 1.0) } else { 1.0 };
            dense.eval(theta, h, buf);
            sample(ts, buf)?;
            *next += 1;
        }
        Ok(())
    };

    let mut t = cfg.t0;
    let mut k1 = vec![0.0; n];
    f.eval(t, &y, &mut k1);
    stats.evaluations += 1;

    match cfg.method {
        Method::Rk4Fixed { dt } => {
            let (mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            let mut tmp = vec![0.0; n];
            let mut y1 = vec![0.0; n];
            let mut f1 = vec![0.0; n];
            while t < cfg.t1 {
                if stats.accepted >= cfg.max_steps {
                    return Err(Error::StepUnderflow { t, h: dt });
                }
                let remaining = cfg.t1 - t;
                let h = if remaining < dt * (1.0 + 1e-9) { remaining } else { dt };
                rk4_stages(f, t, &y, h, &k1, [&mut k2, &mut k3, &mut k4], &mut tmp);
                for i in 0..n {
                    y1[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                if y1.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence { t: t + h });
                }
                f.eval(t + h, &y1, &mut f1);
                stats.evaluations += 4;
                stats.accepted += 1;
                let dense = Dense::Hermite { y0: &y, y1: &y1, f0: &k1, f1: &f1 };
                emit(t, h, &dense, &mut next, &mut buf)?;
                t = if h == remaining { cfg.t1 } else { t + h };
                std::mem::swap(&mut y, &mut y1);
                std::mem::swap(&mut k1, &mut f1);
            }
        }
        Method::Rk45Adaptive { rtol, atol } => {
            let mut k: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
            let mut k7 = vec![0.0; n];
            let mut tmp = vec![0.0; n];
            let mut y1 = vec![0.0; n];
            let mut rc: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
            let norm = |v: &[f64], y: &[f64]| -> f64 {
                let s: f64 = v
                    .iter()
                    .zip(y)
                    .map(|(a, b)| {
                        let w = a / (atol + rtol * b.abs());
                        w * w
                    })
                    .sum();
                (s / n.max(1) as f64).sqrt()
            };
            // initial step guess
            let d0 = norm(&y, &y);
            let d1 = norm(&k1, &y);
            let span = cfg.t1 - cfg.t0;
            let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h = h.min(span).min(cfg.sample_every).max(1e-12 * span);
            let mut nonfinite_trial = false;
            let mut prev_err = 1e-4f64;
            while t < cfg.t1 {
                if stats.accepted + stats.rejected >= cfg.max_steps {
                    return Err(Error::StepUnderflow { t, h });
                }
                let remaining = cfg.t1 - t;
                let last = h >= remaining * (1.0 - 1e-12);
                if last {
                    h = remaining;
                }
                if h <= 1e-14 * t.abs().max(1.0) {
                    return Err(if nonfinite_trial {
                        Error::Divergence { t }
                    } else {
                        Error::StepUnderflow { t, h }
                    });
                }
                let [k2, k3, k4, k5, k6] = &mut k;
                for i in 0..n {
                    tmp[i] = y[i] + h * A21 * k1[i];
                }
                f.eval(t + C2 * h, &tmp, k2);
                for i in 0..n {
                    tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
                }
                f.eval(t + C3 * h, &tmp, k3);
                for i in 0..n {
                    tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
                }
                f.eval(t + C4 * h, &tmp, k4);
                for i in 0..n {
                    tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
                }
                f.eval(t + C5 * h, &tmp, k5);
                for i in 0..n {
                    tmp[i] = y[i]
                        + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
                }
                f.eval(t + h, &tmp, k6);
                for i in 0..n {
                    y1[i] = y[i]
                        + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
                }
                f.eval(t + h, &y1, &mut k7);
                stats.evaluations += 6;
                for i in 0..n {
                    tmp[i] = h
                        * (E1 * k1[i]
                            + E3 * k3[i]
                            + E4 * k4[i]
                            + E5 * k5[i]
                            + E6 * k6[i]
                            + E7 * k7[i]);
                }
                let err = {
                    let s: f64 = (0..n)
                        .map(|i| {
                            let sc = atol + rtol * y[i].abs().max(y1[i].abs());
                            let w = tmp[i] / sc;
                            w * w
                        })
                        .sum();
                    (s / n.max(1) as f64).sqrt()
                };
                if !err.is_finite() || y1.iter().any(|v| !v.is_finite()) {
                    nonfinite_trial = true;
                    stats.rejected += 1;
                    h *= 0.2;
                    continue;
                }
                if err <= 1.0 {
                    // dense output coefficients
                    for i in 0..n {
                        let ydiff = y1[i] - y[i];
                        let bspl = h * k1[i] - ydiff;
                        rc[0][i] = y[i];
                        rc[1][i] = ydiff;
                        rc[2][i] = bspl;
                        rc[3][i] = ydiff - h * k7[i] - bspl;
                        rc[4][i] = h
                            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                                + D7 * k7[i]);
                    }
                    stats.accepted += 1;
                    nonfinite_trial = false;
                    let dense = Dense::Dopri { rc: &rc };
                    emit(t, h, &dense, &mut next, &mut buf)?;
                    t = if last { cfg.t1 } else { t + h };
                    std::mem::swap(&mut y, &mut y1);
                    std::mem::swap(&mut k1, &mut k7);
                    // PI controller
                    let e = err.max(1e-10);
                    let fac = 0.9 * e.powf(-0.7 / 5.0) * prev_err.powf(0.4 / 5.0);
                    prev_err = e;
                    h *= fac.clamp(0.2, 10.0);
                } else {
                    stats.rejected += 1;
                    h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                }
            }
        }
    }
    // grid points lost to rounding at the very end
    while next < grid.len() {
        sample(grid[next], &y)?;
        next += 1;
    }
    Ok(stats)
}

/// Integrates the chain under `k` and records samples on the output grid.
pub fn integrate(k: &SystemKind, c0: &ChainState, cfg: &IntegratorConfig) -> Result<Trajectory> {
    k.validate()?;
    cfg.validate()?;
    if *c0.params() != k.params {
        return Err(config_err(
            "params",
            format!("chain built with {:?} but system uses {:?}", c0.params(), k.params),
        ));
    }
    let n = c0.len();
    if let Some(&m) = cfg.track_clusters.iter().find(|&&m| m == 0 || m > n) {
        return Err(config_err(
            "track_clusters",
            format!("cluster size {m} out of range 1..={n}"),
        ));
    }
    let p = k.params;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut clusters = Vec::new();
    let mut invariants = Vec::new();
    let mut rhs = |_t: f64, y: &[f64], out: &mut [f64]| field_flat(k, y, out);
    let stats = solve(&mut rhs, &c0.to_flat(), cfg, |t, y| {
        let c = ChainState::from_flat(y, p).map_err(|_| Error::Divergence { t })?;
        if !cfg.track_clusters.is_empty() {
            clusters.push(
                cfg.track_clusters
                    .iter()
                    .map(|&m| cluster(&c, m))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        invariants.push(InvariantSample::of(k, &c)?);
        times.push(t);
        states.push(c);
        Ok(())
    })?;
    Ok(Trajectory {
        system: *k,
        times,
        states,
        tracked: cfg.track_clusters.clone(),
        cluster_track: (!cfg.track_clusters.is_empty()).then_some(clusters),
        invariant_track: invariants,
        stats,
    })
}

/// First recurrence time of cluster `m` to its initial point.
///
/// Uses the squared distance `D²(t) = |v(t) - v(t0)|²`: after the orbit has
/// left a small neighbourhood, the first local minimum of `D²` that falls
/// back below it is refined by a parabola through the three neighbouring
/// samples.
pub fn measure_period(tr: &Trajectory, m: usize) -> Result<f64> {
    let series = tr.cluster_series(m)?;
    if series.len() < 3 {
        return Err(Error::Aperiodic("fewer than three samples".into()));
    }
    let v0 = series[0].to_vector();
    let d2: Vec<f64> = series.iter().map(|v| (v.to_vector() - v0).norm_squared()).collect();
    let peak = d2.iter().copied().fold(0.0f64, f64::max);
    let scale = v0.norm_squared().max(1.0);
    if !(peak > 1e-24 * scale) {
        return Err(Error::Aperiodic(format!("cluster {m} does not move")));
    }
    let thr = 1e-3 * peak;
    let start = d2
        .iter()
        .position(|&x| x > thr)
        .ok_or_else(|| Error::Aperiodic("orbit never leaves its start".into()))?;
    for j in start.max(1)..d2.len() - 1 {
        let (a, b, c) = (d2[j - 1], d2[j], d2[j + 1]);
        if b < thr && b <= a && b < c {
            let h = tr.times[j + 1] - tr.times[j];
            let den = a - 2.0 * b + c;
            let off = if den > 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            return Ok(tr.times[j] + off * h - tr.times[0]);
        }
    }
    Err(Error::Aperiodic(format!(
        "cluster {m} shows no recurrence within [{}, {}]",
        tr.times[0],
        tr.times[tr.len() - 1]
    )))
}

/// Largest relative drift `|I(t) - I(t0)| / max(1, |I(t0)|)` per invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantDrift {
    pub tower: Vec<f64>,
    pub d3: f64,
    pub dplus: f64,
    pub dminus: f64,
    pub energy: f64,
    /// False for qRS, where `S3^(N)` drifts linearly.
    pub d3_conserved: bool,
}

impl InvariantDrift {
    /// Worst drift among the quantities that the system conserves.
    pub fn max_conserved(&self) -> f64 {
        let mut worst = self.tower.iter().copied().fold(0.0f64, f64::max);
        worst = worst.max(self.dplus).max(self.dminus).max(self.energy);
        if self.d3_conserved {
            worst = worst.max(self.d3);
        }
        worst
    }
}

pub fn invariant_drift(tr: &Trajectory) -> InvariantDrift {
    let rel = |now: f64, first: f64| (now - first).abs() / first.abs().max(1.0);
    let d3_conserved = tr.system.tag == SystemTag::GaudinKappa;
    let Some(first) = tr.invariant_track.first() else {
        return InvariantDrift {
            tower: Vec::new(),
            d3: 0.0,
            dplus: 0.0,
            dminus: 0.0,
            energy: 0.0,
            d3_conserved,
        };
    };
    let mut out = InvariantDrift {
        tower: vec![0.0; first.tower.len()],
        d3: 0.0,
        dplus: 0.0,
        dminus: 0.0,
        energy: 0.0,
        d3_conserved,
    };
    for s in &tr.invariant_track {
        for (w, (a, b)) in out.tower.iter_mut().zip(s.tower.iter().zip(&first.tower)) {
            *w = w.max(rel(*a, *b));
        }
        out.d3 = out.d3.max(rel(s.deltas.d3, first.deltas.d3));
        out.dplus = out.dplus.max(rel(s.deltas.dp, first.deltas.dp));
        out.dminus = out.dminus.max(rel(s.deltas.dm, first.deltas.dm));
        out.energy = out.energy.max(rel(s.energy, first.energy));
    }
    out
}
