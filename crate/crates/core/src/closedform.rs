//! Explicit cluster solutions.
//!
//! Each solver is fitted once from cluster data at a reference time `t0`
//! (a `*Flow` value) and then evaluated at arbitrary `t`. The free
//! `*_solution` functions take `t0 = 0`.
//!
//! * [`CgFlow`]: undeformed Gaudin, `S(t) = exp((t - t0) M) S(t0)`.
//! * [`QcgFlow`]: deformed Gaudin (κ > 0) through the variables
//!   `S̃± = S± δ∓`, `S̃3 = e^{-2z S3}`, in which the pair
//!   `W± = Z+ ± Z-` obeys a Riccati equation. Its solution is a real Möbius
//!   map in `cosh/sinh` (Ω > 0) or `cos/sin` (Ω < 0, periodic, period
//!   `2π/√(-Ω)`).
//! * [`QpgFlow`]: κ = 0 kinks, `S̃± = (b/2a)(1 + tanh(±(b/2)τ - φ±))`.
//! * [`QrsFlow`]: qRS kinks for `Y± = S± e^{z S3^(N)/2}`.
//!
//! In the kink solutions `S3^(m)` comes from the conserved cluster Casimir
//! `C^(m) = S+ S- e^{z S3}`, with a log-cosh quadrature when `S+ S- = 0`.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{DeformParams, Z_EPS};
use crate::chain::{ClusterVars, Deltas};
use crate::error::{Error, Result};
use crate::systems::linear_matrix_cg;

/// Constants of the deformed Gaudin reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QCGConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub km: f64,
    pub omega: f64,
}

/// `√Ω / 2` split by the sign of `Ω/4 = κ C + z² C²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "branch", content = "value", rename_all = "snake_case")]
pub enum Frequency {
    /// Exponential rate; orbits are unbounded or asymptotic.
    Hyperbolic(f64),
    /// Angular frequency; orbits are periodic with period `π / value`.
    Periodic(f64),
    Boundary,
}

impl Frequency {
    pub fn value(&self) -> f64 {
        match *self {
            Frequency::Hyperbolic(v) | Frequency::Periodic(v) => v,
            Frequency::Boundary => 0.0,
        }
    }

    /// Period of the cluster orbit, if periodic.
    pub fn period(&self) -> Option<f64> {
        match *self {
            Frequency::Periodic(w) if w > 0.0 => Some(std::f64::consts::PI / w),
            _ => None,
        }
    }
}

pub fn deformed_frequency(p: &DeformParams, cn: f64) -> Frequency {
    let q = p.kappa * cn + p.z * p.z * cn * cn;
    let scale = (p.kappa * cn).abs() + (p.z * cn).powi(2);
    if q.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) || q == 0.0 {
        Frequency::Boundary
    } else if q > 0.0 {
        Frequency::Hyperbolic(q.sqrt())
    } else {
        Frequency::Periodic((-q).sqrt())
    }
}

/// Integration constants of a kink solution.
///
/// `beta` is `S3^(m)(t0)` for q-Poincaré Gaudin and `S3^(N)(t0)` for qRS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinkParams {
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub t_plus: f64,
    pub t_minus: f64,
    pub beta: f64,
}

fn require_deformed(p: &DeformParams, what: &str) -> Result<()> {
    if p.z.abs() < Z_EPS {
        return Err(Error::UnsupportedLimit(format!(
            "{what} divides by z; use the linear undeformed solution at z = 0"
        )));
    }
    Ok(())
}

fn require_ladders(d: &Deltas) -> Result<()> {
    if d.dp == 0.0 || d.dm == 0.0 {
        return Err(Error::Domain(format!(
            "delta+ = {} and delta- = {} must both be nonzero",
            d.dp, d.dm
        )));
    }
    Ok(())
}

fn require_kappa_zero(p: &DeformParams) -> Result<()> {
    if p.kappa != 0.0 {
        return Err(Error::Config {
            field: "kappa",
            message: format!("kink solutions need kappa = 0, got {}", p.kappa),
        });
    }
    Ok(())
}

/// `ln cosh x` without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let y = x.abs();
    y + (-2.0 * y).exp().ln_1p() - std::f64::consts::LN_2
}

/// `(1 + tanh x) / 2` without cancellation.
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * x).exp())
}

fn fit_artanh(arg: f64, what: &str) -> Result<f64> {
    if !(arg.abs() < 1.0) {
        return Err(Error::BranchFit(format!(
            "{what}: tanh argument {arg} is outside (-1, 1); the initial data is not on this kink"
        )));
    }
    Ok(arg.atanh())
}

/// `S3` from a conserved `S+ S- e^{z S3}` and the current ladders.
fn s3_from_casimir(z: f64, s3_0: f64, pm0: f64, pm: f64) -> Option<f64> {
    let r = pm0 / pm;
    (pm0 != 0.0 && r > 0.0 && r.is_finite()).then(|| s3_0 + r.ln() / z)
}

// ---------------------------------------------------------------- CG

/// Linear flow of the undeformed Gaudin clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct CgFlow {
    m: Matrix3<f64>,
    omega2: f64,
    init: ClusterVars,
    t0: f64,
}

impl CgFlow {
    pub fn new(d: &Deltas, init: ClusterVars, t0: f64) -> Self {
        let omega2 = d.d3 * d.d3 + 4.0 * d.dp * d.dm;
        Self { m: linear_matrix_cg(d), omega2, init, t0 }
    }

    /// `exp(τ M)` via `M³ = ω² M`.
    pub fn propagator(&self, tau: f64) -> Matrix3<f64> {
        let w2 = self.omega2;
        let (s, c) = if w2 > 0.0 {
            let w = w2.sqrt();
            let h = (0.5 * w * tau).sinh() / w;
            ((w * tau).sinh() / w, 2.0 * h * h)
        } else if w2 < 0.0 {
            let w = (-w2).sqrt();
            let h = (0.5 * w * tau).sin() / w;
            ((w * tau).sin() / w, 2.0 * h * h)
        } else {
            (tau, 0.5 * tau * tau)
        };
        Matrix3::identity() + self.m * s + self.m * self.m * c
    }

    pub fn at(&self, t: f64) -> ClusterVars {
        let v = self.propagator(t - self.t0) * self.init.to_vector();
        ClusterVars::new(self.init.m, v[0], v[1], v[2])
    }

    /// Period `π / √(-C)` when `C^(N) < 0`.
    pub fn period(&self) -> Option<f64> {
        (self.omega2 < 0.0).then(|| 2.0 * std::f64::consts::PI / (-self.omega2).sqrt())
    }
}

pub fn cg_solution(d: &Deltas, init: &ClusterVars, t: f64) -> ClusterVars {
    CgFlow::new(d, *init, 0.0).at(t)
}

// ---------------------------------------------------------------- qCG

pub fn qcg_constants(p: &DeformParams, d: &Deltas, cm: f64, cnm: f64) -> Result<QCGConstants> {
    require_deformed(p, "the deformed Gaudin reduction")?;
    let z = p.z;
    let e = (z * d.d3).exp();
    let ladder = d.dp * d.dm * e;
    let a = 2.0 * z * e;
    let b = 2.0 * z * ladder - p.kappa * (z * d.d3).sinh() / z;
    let c = p.kappa * ladder / (2.0 * z);
    let ie = (-z * d.d3).exp();
    let q = cm - ie * cnm + p.kappa * (-(-z * d.d3).exp_m1()) / (2.0 * z * z);
    if q == 0.0 || !q.is_finite() {
        return Err(Error::Degenerate(format!(
            "k_m is undefined: C^(m) - e^(-z d3) C^(N-m) + (1 - e^(-z d3))/(2z^2) = {q}"
        )));
    }
    Ok(QCGConstants { a, b, c, km: 1.0 / (q * q), omega: b * b + 4.0 * a * c })
}

/// Deformed Gaudin cluster flow fitted at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QcgFlow {
    pub constants: QCGConstants,
    m: usize,
    z: f64,
    d: Deltas,
    sqrt_mu: Complex64,
    w_plus: Complex64,
    w_minus: Complex64,
    t0: f64,
}

impl QcgFlow {
    pub fn fit(
        p: &DeformParams,
        d: &Deltas,
        init: &ClusterVars,
        cm: f64,
        cnm: f64,
        t0: f64,
    ) -> Result<Self> {
        let k = qcg_constants(p, d, cm, cnm)?;
        require_ladders(d)?;
        if k.omega == 0.0 {
            return Err(Error::Degenerate("Omega = b^2 + 4ac vanishes".into()));
        }
        let mu = 1.0 + 4.0 * k.c * k.km / k.a;
        if mu == 0.0 {
            return Err(Error::Degenerate("1 + 4 c k_m / a vanishes".into()));
        }
        let sqrt_mu = Complex64::new(mu, 0.0).sqrt();
        let (tp, tm) = (init.splus * d.dm, init.sminus * d.dp);
        let yp = tp + tm - k.b / k.a;
        let ym = tp - tm;
        let zp = sqrt_mu * (k.a / k.omega * yp);
        let zm = Complex64::new(k.a / k.omega * ym, 0.0);
        Ok(Self {
            constants: k,
            m: init.m,
            z: p.z,
            d: *d,
            sqrt_mu,
            w_plus: zp + zm,
            w_minus: zp - zm,
            t0,
        })
    }

    /// Solution of `W' = -(Ω/2)(W² - 1/Ω)` after time `tau`.
    fn mobius(&self, w0: Complex64, tau: f64) -> Option<Complex64> {
        let om = self.constants.omega;
        let th = 0.5 * tau;
        let (c, s) = if om > 0.0 {
            let r = om.sqrt();
            ((r * th).cosh(), (r * th).sinh() / r)
        } else {
            let r = (-om).sqrt();
            ((r * th).cos(), (r * th).sin() / r)
        };
        let num = w0 * c + s;
        let den = w0 * (om * s) + c;
        if den.norm() <= 1e-13 * (num.norm() * om.abs().sqrt()).max(f64::MIN_POSITIVE) {
            return None;
        }
        let w = num / den;
        (w.re.is_finite() && w.im.is_finite()).then_some(w)
    }

    /// `(Y+, Y-)` at time `t`.
    fn y_pair(&self, t: f64) -> Result<(f64, f64)> {
        let tau = t - self.t0;
        let k = &self.constants;
        let wp = self.mobius(self.w_plus, tau).ok_or(Error::Singular { t })?;
        let wm = self.mobius(self.w_minus, -tau).ok_or(Error::Singular { t })?;
        let zp = 0.5 * (wp + wm);
        let zm = 0.5 * (wp - wm);
        Ok(((zp * k.omega / (self.sqrt_mu * k.a)).re, zm.re * k.omega / k.a))
    }

    pub fn at(&self, t: f64) -> Result<ClusterVars> {
        let k = &self.constants;
        let (yp, ym) = self.y_pair(t)?;
        let shift = k.b / k.a;
        let tp = 0.5 * (yp + shift + ym);
        let tm = 0.5 * (yp + shift - ym);
        let t3 = k.km * yp * yp;
        if !(t3 > 0.0) || !t3.is_finite() {
            return Err(Error::Singular { t });
        }
        Ok(ClusterVars::new(self.m, -t3.ln() / (2.0 * self.z), tp / self.d.dm, tm / self.d.dp))
    }

    /// True if `Y+` keeps its sign on `[t0, t1]` (checked at `samples`
    /// points), i.e. `S3^(m)` has no pole there.
    pub fn stays_regular(&self, t1: f64, samples: usize) -> bool {
        let Ok((y0, _)) = self.y_pair(self.t0) else {
            return false;
        };
        (0..=samples.max(1)).all(|i| {
            let t = self.t0 + (t1 - self.t0) * i as f64 / samples.max(1) as f64;
            matches!(self.y_pair(t), Ok((y, _)) if y * y0 > 0.0)
        })
    }

    /// Period `2π/√(-Ω)` on the periodic branch.
    pub fn period(&self) -> Option<f64> {
        (self.constants.omega < 0.0)
            .then(|| 2.0 * std::f64::consts::PI / (-self.constants.omega).sqrt())
    }
}

pub fn qcg_solution(
    p: &DeformParams,
    d: &Deltas,
    init: &ClusterVars,
    cm: f64,
    cnm: f64,
    t: f64,
) -> Result<ClusterVars> {
    QcgFlow::fit(p, d, init, cm, cnm, 0.0)?.at(t)
}

// ---------------------------------------------------------------- qPG

/// q-Poincaré Gaudin kink flow fitted at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpgFlow {
    pub kink: KinkParams,
    z: f64,
    a: f64,
    b: f64,
    d: Deltas,
    m: usize,
    t0: f64,
    pm0: f64,
}

impl QpgFlow {
    pub fn fit(p: &DeformParams, d: &Deltas, init: &ClusterVars, t0: f64) -> Result<Self> {
        require_kappa_zero(p)?;
        require_deformed(p, "the q-Poincare kink")?;
        require_ladders(d)?;
        let z = p.z;
        let e = (z * d.d3).exp();
        let a = 2.0 * z * e;
        let b = 2.0 * z * d.dp * d.dm * e;
        if b == 0.0 {
            return Err(Error::Degenerate("b = 2z C^(N) vanishes".into()));
        }
        let (tp, tm) = (init.splus * d.dm, init.sminus * d.dp);
        let phi_plus = -fit_artanh(2.0 * a * tp / b - 1.0, "S~+ kink")?;
        let phi_minus = -fit_artanh(2.0 * a * tm / b - 1.0, "S~- kink")?;
        let kink = KinkParams {
            phi_plus,
            phi_minus,
            t_plus: t0 + 2.0 * phi_plus / b,
            t_minus: t0 - 2.0 * phi_minus / b,
            beta: init.s3,
        };
        Ok(Self { kink, z, a, b, d: *d, m: init.m, t0, pm0: init.splus * init.sminus })
    }

    fn phases(&self, t: f64) -> (f64, f64) {
        let tau = t - self.t0;
        let h = 0.5 * self.b * tau;
        (h - self.kink.phi_plus, -h - self.kink.phi_minus)
    }

    /// `S̃±(t)`.
    pub fn tilde(&self, t: f64) -> (f64, f64) {
        let (up, um) = self.phases(t);
        let top = self.b / self.a;
        (top * logistic(up), top * logistic(um))
    }

    pub fn at(&self, t: f64) -> ClusterVars {
        let (tp, tm) = self.tilde(t);
        let (sp, sm) = (tp / self.d.dm, tm / self.d.dp);
        let s3 = s3_from_casimir(self.z, self.kink.beta, self.pm0, sp * sm)
            .unwrap_or_else(|| self.s3_logcosh(t));
        ClusterVars::new(self.m, s3, sp, sm)
    }

    /// `S3(t) = S3(t0) + z⁻¹ [ln(cosh u+ cosh u-)]_{t0}^{t}`.
    pub fn s3_logcosh(&self, t: f64) -> f64 {
        let f = |t: f64| {
            let (up, um) = self.phases(t);
            ln_cosh(up) + ln_cosh(um)
        };
        self.kink.beta + (f(t) - f(self.t0)) / self.z
    }

    /// The log-cosh expression in its commonly printed form,
    /// `-z⁻¹ ln[(cosh(bτ + φ+ - φ-) + cosh(φ+ + φ-))/2 - cosh φ+ cosh φ-]`.
    /// It is singular at `τ = 0` and does not solve the flow; kept for
    /// comparison only.
    pub fn s3_logcosh_uncorrected(&self, t: f64) -> f64 {
        let (fp, fm) = (self.kink.phi_plus, self.kink.phi_minus);
        let tau = t - self.t0;
        let arg = 0.5 * ((self.b * tau + fp - fm).cosh() + (fp + fm).cosh()) - fp.cosh() * fm.cosh();
        -arg.ln() / self.z
    }
}

pub fn qpg_solution(p: &DeformParams, d: &Deltas, init: &ClusterVars, t: f64) -> Result<ClusterVars> {
    Ok(QpgFlow::fit(p, d, init, 0.0)?.at(t))
}

// ---------------------------------------------------------------- qRS

/// qRS kink flow fitted at `t0`. `d.dp`, `d.dm` are the conserved X-basis
/// ladders.
#[derive(Debug, Clone, PartialEq)]
pub struct QrsFlow {
    pub kink: KinkParams,
    z: f64,
    d: Deltas,
    m: usize,
    t0: f64,
    s3_0: f64,
    pm0: f64,
}

impl QrsFlow {
    pub fn fit(p: &DeformParams, d: &Deltas, init: &ClusterVars, s3n0: f64, t0: f64) -> Result<Self> {
        require_kappa_zero(p)?;
        require_deformed(p, "the qRS kink")?;
        require_ladders(d)?;
        let z = p.z;
        let e = (0.5 * z * s3n0).exp();
        let (yp, ym) = (init.splus * e, init.sminus * e);
        let phi_plus = fit_artanh(2.0 * yp / d.dp - 1.0, "Y+ kink")?;
        let phi_minus = fit_artanh(2.0 * ym / d.dm - 1.0, "Y- kink")?;
        let kink = KinkParams {
            phi_plus,
            phi_minus,
            t_plus: t0 - phi_plus / (z * d.dp),
            t_minus: t0 + phi_minus / (z * d.dm),
            beta: s3n0,
        };
        Ok(Self {
            kink,
            z,
            d: *d,
            m: init.m,
            t0,
            s3_0: init.s3,
            pm0: init.splus * init.sminus,
        })
    }

    pub fn s3n_at(&self, t: f64) -> f64 {
        2.0 * (self.d.dp - self.d.dm) * (t - self.t0) + self.kink.beta
    }

    fn phases(&self, t: f64) -> (f64, f64) {
        (
            self.z * self.d.dp * (t - self.kink.t_plus),
            self.z * self.d.dm * (t - self.kink.t_minus),
        )
    }

    /// `Y±(t)`.
    pub fn y(&self, t: f64) -> (f64, f64) {
        let (wp, wm) = self.phases(t);
        (self.d.dp * logistic(wp), self.d.dm * logistic(-wm))
    }

    pub fn at(&self, t: f64) -> ClusterVars {
        let (yp, ym) = self.y(t);
        let e = (-0.5 * self.z * self.s3n_at(t)).exp();
        let (sp, sm) = (yp * e, ym * e);
        let s3 = s3_from_casimir(self.z, self.s3_0, self.pm0, sp * sm)
            .unwrap_or_else(|| self.s3_logcosh(t));
        ClusterVars::new(self.m, s3, sp, sm)
    }

    pub fn s3_logcosh(&self, t: f64) -> f64 {
        let f = |t: f64| {
            let (wp, wm) = self.phases(t);
            ln_cosh(wp) + ln_cosh(wm)
        };
        self.s3_0 + (self.d.dp - self.d.dm) * (t - self.t0) + (f(t) - f(self.t0)) / self.z
    }
}

pub fn qrs_solution(
    p: &DeformParams,
    d: &Deltas,
    init: &ClusterVars,
    s3n0: f64,
    t: f64,
) -> Result<ClusterVars> {
    Ok(QrsFlow::fit(p, d, init, s3n0, 0.0)?.at(t))
}
