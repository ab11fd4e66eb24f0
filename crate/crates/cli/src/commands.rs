//! Experiment drivers behind the subcommands.
//!
//! Each driver returns an [`Outcome`]: the report plus the files to write.
//! Writing happens afterwards, on the calling thread only.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qgaudin_core::algebra::casimir;
use qgaudin_core::chain::{cluster, complementary_cluster, deltas};
use qgaudin_core::closedform::{deformed_frequency, CgFlow, QcgFlow, QpgFlow, QrsFlow};
use qgaudin_core::grouprep::{commutator, group_product, lie_generators, matrix_of, poisson_lie_check, product, GroupElement};
use qgaudin_core::integrate::{integrate, invariant_drift, measure_period};
use qgaudin_core::sampling::{random_chain, SiteRanges};
use qgaudin_core::systems::{conserved_deltas, vector_field};
use qgaudin_core::{ChainState, ClusterVars, DeformParams, Error, SystemKind, SystemTag};

use crate::config::{Axis, Format, RunConfig, System};
use crate::error::{CliError, CliResult};
use crate::output::{cluster_svg, trajectory_csv, TrajectoryFile};
use crate::report::{drift_rows, Check, ErrorRow, PeriodRow, Report, ScanPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    fn new(report: Report) -> Self {
        Self { report, artifacts: Vec::new() }
    }

    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.artifacts.push(Artifact { name: name.into(), contents });
    }

    /// Writes every artifact plus `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            std::fs::write(dir.join(&a.name), &a.contents)?;
        }
        std::fs::write(dir.join("report.json"), self.report.to_json())?;
        Ok(())
    }

    /// `Err(Verification)` when any check failed.
    pub fn status(&self) -> CliResult<()> {
        let failed = self.report.failures();
        if failed.is_empty() {
            Ok(())
        } else {
            let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
            Err(CliError::Verification(names.join(", ")))
        }
    }
}

/// Closed-form track of cluster `m` from the chain `c0` at `t0`.
///
/// The full cluster `m = N` is handled directly: constant for the Gaudin
/// family, linear `S3` for qRS.
pub fn closed_form_track(
    k: &SystemKind,
    c0: &ChainState,
    m: usize,
    t0: f64,
    times: &[f64],
) -> Result<(&'static str, Vec<ClusterVars>), Error> {
    let p = k.params;
    let n = c0.len();
    let v0 = cluster(c0, m)?;
    if k.tag == SystemTag::Qrs {
        let d = conserved_deltas(k, c0);
        if m == n {
            let track = times
                .iter()
                .map(|&t| {
                    let s3 = d.d3 + 2.0 * (d.dp - d.dm) * (t - t0);
                    let w = (-0.5 * p.z * s3).exp();
                    ClusterVars::new(n, s3, d.dp * w, d.dm * w)
                })
                .collect();
            return Ok(("qrs-linear", track));
        }
        let f = QrsFlow::fit(&p, &d, &v0, d.d3, t0)?;
        return Ok(("qrs", times.iter().map(|&t| f.at(t)).collect()));
    }
    let d = deltas(c0);
    if m == n {
        return Ok(("conserved", vec![v0; times.len()]));
    }
    if p.is_undeformed() {
        if p.kappa != 1.0 {
            return Err(Error::UnsupportedLimit(format!(
                "no closed form at z = 0 with kappa = {}",
                p.kappa
            )));
        }
        let f = CgFlow::new(&d, v0, t0);
        return Ok(("cg", times.iter().map(|&t| f.at(t)).collect()));
    }
    if p.kappa == 0.0 {
        let f = QpgFlow::fit(&p, &d, &v0, t0)?;
        return Ok(("qpg", times.iter().map(|&t| f.at(t)).collect()));
    }
    let cm = casimir(&p, &v0.as_site());
    let cnm = casimir(&p, &complementary_cluster(c0, m)?.as_site());
    let f = QcgFlow::fit(&p, &d, &v0, cm, cnm, t0)?;
    let track = times.iter().map(|&t| f.at(t)).collect::<Result<Vec<_>, _>>()?;
    Ok(("qcg", track))
}

fn max_dev(a: &[ClusterVars], b: &[ClusterVars]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
}

pub fn simulate(cfg: &RunConfig) -> CliResult<Outcome> {
    let k = cfg.system_kind();
    let c0 = cfg.initial_chain()?;
    let tr = integrate(&k, &c0, &cfg.integrator_config())?;
    let drift = invariant_drift(&tr);
    let mut report = Report::new("simulate", Some(cfg.clone()));
    report.drift = drift_rows(&drift);
    report.push(Check::at_most("invariant drift", drift.max_conserved(), cfg.checks.drift_tol, k.label()));
    let mut out = Outcome::new(report);
    if cfg.wants(Format::Csv) {
        out.add("trajectory.csv", trajectory_csv(&tr)?);
    }
    if cfg.wants(Format::Json) {
        out.add("trajectory.json", TrajectoryFile::new(cfg, &tr)?.to_json());
    }
    if cfg.wants(Format::Svg) {
        for &m in &tr.tracked {
            let title = format!("{} cluster m = {m}", k.label());
            out.add(format!("cluster_{m}.svg"), cluster_svg(&title, &tr.times, &tr.cluster_series(m)?));
        }
    }
    Ok(out)
}

pub fn compare(cfg: &RunConfig) -> CliResult<Outcome> {
    let k = cfg.system_kind();
    let c0 = cfg.initial_chain()?;
    let tr = integrate(&k, &c0, &cfg.integrator_config())?;
    let mut report = Report::new("compare", Some(cfg.clone()));
    let drift = invariant_drift(&tr);
    report.drift = drift_rows(&drift);
    report.push(Check::at_most("invariant drift", drift.max_conserved(), cfg.checks.drift_tol, k.label()));
    for &m in &cfg.clusters {
        let numeric = tr.cluster_series(m)?;
        let row = match closed_form_track(&k, &c0, m, cfg.integrator.t0, &tr.times) {
            Ok((form, exact)) => {
                let dev = max_dev(&exact, &numeric);
                ErrorRow { m, form: form.into(), max_abs_dev: Some(dev), passed: dev <= cfg.checks.compare_tol, error: None }
            }
            Err(e) => ErrorRow { m, form: "none".into(), max_abs_dev: None, passed: false, error: Some(e.to_string()) },
        };
        let check = match (row.max_abs_dev, &row.error) {
            (Some(dev), _) => Check::at_most(format!("closed form m={m}"), dev, cfg.checks.compare_tol, row.form.clone()),
            (None, err) => Check::flag(format!("closed form m={m}"), false, err.clone().unwrap_or_default()),
        };
        report.errors.push(row);
        report.push(check);
    }
    Ok(Outcome::new(report))
}

/// Integrates one scan point and fills in what the axis asks for.
fn scan_point(base: &RunConfig, axis: Axis, value: f64) -> ScanPoint {
    let mut point = ScanPoint {
        value,
        max_drift: None,
        deviation: None,
        field_residual: None,
        periods: Vec::new(),
        passed: false,
        error: None,
    };
    if let Err(e) = scan_point_inner(base, axis, value, &mut point) {
        point.error = Some(e.to_string());
        point.passed = false;
    }
    point
}

fn scan_point_inner(base: &RunConfig, axis: Axis, value: f64, point: &mut ScanPoint) -> CliResult<()> {
    let mut cfg = base.clone();
    match axis {
        Axis::Z => cfg.z = value,
        Axis::Kappa => cfg.kappa = value,
        Axis::Energy => cfg.init.energy = Some(value),
    }
    cfg.validate()?;
    let k = cfg.system_kind();
    let p = k.params;
    let c0 = cfg.initial_chain()?;
    let tr = integrate(&k, &c0, &cfg.integrator_config())?;
    let drift = invariant_drift(&tr).max_conserved();
    point.max_drift = Some(drift);
    let mut ok = drift <= cfg.checks.drift_tol;
    match axis {
        Axis::Z => {
            // same sites, undeformed flow
            let flat = c0.with_params(DeformParams::sl2());
            let d0 = deltas(&flat);
            let mut dev = 0.0f64;
            for &m in &cfg.clusters {
                let f = CgFlow::new(&d0, cluster(&flat, m)?, cfg.integrator.t0);
                let exact: Vec<ClusterVars> = tr.times.iter().map(|&t| f.at(t)).collect();
                dev = dev.max(max_dev(&exact, &tr.cluster_series(m)?));
            }
            point.deviation = Some(dev);
        }
        Axis::Kappa => {
            let mut dev = 0.0f64;
            for &m in &cfg.clusters {
                let (_, exact) = closed_form_track(&k, &c0, m, cfg.integrator.t0, &tr.times)?;
                dev = dev.max(max_dev(&exact, &tr.cluster_series(m)?));
            }
            point.deviation = Some(dev);
            ok &= dev <= cfg.checks.compare_tol;
            let named = if value == 1.0 {
                Some(DeformParams::slq2(p.z))
            } else if value == 0.0 {
                Some(DeformParams::q_poincare(p.z))
            } else {
                None
            };
            if let Some(q) = named {
                let f = vector_field(&k, &c0)?;
                let g = vector_field(&SystemKind::gaudin(q), &c0.with_params(q))?;
                let r = f.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                point.field_residual = Some(r);
                ok &= r <= 1e-12;
            }
        }
        Axis::Energy => {
            let cn = casimir(&p, &deltas(&c0).as_site());
            let predicted = deformed_frequency(&p, cn).period();
            for &m in cfg.clusters.iter().filter(|&&m| m < cfg.n_sites) {
                let row = match (measure_period(&tr, m), predicted) {
                    (Ok(t), Some(pr)) => {
                        let rel = (t - pr).abs() / pr;
                        ok &= rel <= cfg.checks.period_rtol;
                        PeriodRow { m, measured: Some(t), predicted: Some(pr), rel_err: Some(rel), error: None }
                    }
                    (measured, _) => {
                        ok = false;
                        PeriodRow {
                            m,
                            measured: measured.as_ref().ok().copied(),
                            predicted,
                            rel_err: None,
                            error: Some(match measured {
                                Err(e) => e.to_string(),
                                Ok(_) => format!("C = {cn} is outside the periodic window"),
                            }),
                        }
                    }
                };
                point.periods.push(row);
            }
        }
    }
    point.passed = ok;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

fn scan_csv(points: &[ScanPoint]) -> String {
    let mut s = String::from("value,max_drift,deviation,field_residual,max_period_rel_err,passed,error\n");
    for p in points {
        let worst = p.periods.iter().filter_map(|r| r.rel_err).reduce(f64::max);
        let err = p.error.as_deref().unwrap_or("").replace('"', "'");
        let _ = writeln!(
            s,
            "{:.16e},{},{},{},{},{},\"{err}\"",
            p.value,
            opt(p.max_drift),
            opt(p.deviation),
            opt(p.field_residual),
            opt(worst),
            p.passed
        );
    }
    s
}

pub fn scan(cfg: &RunConfig, axis: Axis, values: &[f64]) -> CliResult<Outcome> {
    if values.is_empty() {
        return Err(CliError::config("scan.values", "no scan values given"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::config("scan.values", format!("non-finite value {v}")));
    }
    match axis {
        Axis::Z if !(cfg.system == System::Qcg || (cfg.system == System::Kappa && cfg.kappa == 1.0)) => {
            return Err(CliError::config("scan.axis", "a z scan compares against CG and needs system qcg"));
        }
        Axis::Kappa if cfg.system != System::Kappa => {
            return Err(CliError::config("scan.axis", "a kappa scan needs system = \"kappa\""));
        }
        _ => {}
    }
    let points: Vec<ScanPoint> = values.par_iter().map(|&v| scan_point(cfg, axis, v)).collect();
    let mut report = Report::new("scan", Some(cfg.clone()));
    for p in &points {
        let name = format!("point {:e}", p.value);
        match &p.error {
            Some(e) => report.push(Check::flag(name, false, e.clone())),
            None => report.push(Check::flag(name, p.passed, "")),
        }
    }
    match axis {
        Axis::Z => {
            let mut by_z: Vec<(f64, f64)> =
                points.iter().filter_map(|p| Some((p.value.abs(), p.deviation?))).collect();
            by_z.sort_by(|a, b| b.0.total_cmp(&a.0));
            if by_z.len() >= 2 {
                let monotone = by_z.windows(2).all(|w| w[1].1 < w[0].1);
                let ratios: Vec<f64> = by_z.iter().map(|(z, d)| d / z).collect();
                let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
                report.push(Check::flag("deviation from CG decreases with z", monotone, ""));
                report.push(Check::at_most(
                    "deviation / z spread",
                    hi / lo,
                    2.0,
                    format!("deviation / z in [{lo:.4e}, {hi:.4e}]"),
                ));
            }
        }
        Axis::Energy => {
            // one energy surface, one period: compare the clusters of each point
            for p in &points {
                let ts: Vec<f64> = p.periods.iter().filter_map(|r| r.measured).collect();
                if ts.len() >= 2 {
                    let (lo, hi) = ts.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &t| (l.min(t), h.max(t)));
                    report.push(Check::at_most(
                        format!("period spread at C = {:e}", p.value),
                        (hi - lo) / lo,
                        cfg.checks.period_rtol,
                        format!("{} clusters", ts.len()),
                    ));
                }
            }
        }
        Axis::Kappa => {}
    }
    report.scan = points;
    let mut out = Outcome::new(report);
    out.add("scan.csv", scan_csv(&out.report.scan));
    Ok(out)
}

fn rel_diff(a: &GroupElement, b: &GroupElement) -> f64 {
    [(a.a, b.a), (a.b, b.b), (a.c, b.c)]
        .iter()
        .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Group-law and Poisson-Lie checks at deformation `z`; the third bracket
/// family uses `kappa`.
pub fn group_check(z: f64, kappa: f64, seed: u64) -> CliResult<Outcome> {
    let p2 = DeformParams::new(z, kappa).map_err(|e| CliError::config("kappa", e.to_string()))?;
    let mut report = Report::new("group-check", None);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let elem = |rng: &mut ChaCha8Rng| {
        GroupElement::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), z)
    };

    let mut assoc = 0.0f64;
    let mut hom = 0.0f64;
    for _ in 0..100 {
        let (a, b, c) = (elem(&mut rng), elem(&mut rng), elem(&mut rng));
        let left = group_product(&group_product(&a, &b)?, &c)?;
        let right = group_product(&a, &group_product(&b, &c)?)?;
        assoc = assoc.max(rel_diff(&left, &right));
        let ab = matrix_of(&group_product(&a, &b)?);
        hom = hom.max((ab - matrix_of(&a) * matrix_of(&b)).amax());
    }
    report.push(Check::at_most("associativity", assoc, 1e-12, "100 random triples"));
    report.push(Check::at_most("matrix homomorphism", hom, 1e-12, "100 random pairs"));

    let mut coprod = 0.0f64;
    for (i, n) in [1usize, 2, 3, 8, 16, 32, 64].into_iter().enumerate() {
        let c = random_chain(n, p2, &SiteRanges::default(), seed.wrapping_add(i as u64))?;
        let gs: Vec<GroupElement> = c.sites().iter().map(|s| GroupElement::from_site(s, z)).collect();
        let g = product(z, &gs)?;
        let v = cluster(&c, n)?;
        coprod = coprod.max((g.a - v.s3).abs()).max((g.b - v.splus).abs()).max((g.c - v.sminus).abs());
    }
    report.push(Check::at_most("coproduct = group product", coprod, 1e-13, "N up to 64"));

    let [d, x1, x2] = lie_generators(z);
    let comm = (commutator(&d, &x1) + z * x1).amax().max((commutator(&d, &x2) + z * x2).amax()).max(commutator(&x1, &x2).amax());
    report.push(Check::at_most("generator commutators", comm, 1e-15, "[D,P] = -zP, [P1,P2] = 0"));

    for (name, p) in [
        ("Poisson-Lie sl_q(2)", DeformParams::slq2(z)),
        ("Poisson-Lie q-Poincare", DeformParams::q_poincare(z)),
        ("Poisson-Lie kappa family", p2),
    ] {
        let r = poisson_lie_check(&p, 100, seed)?;
        report.push(Check::at_most(name, r, 1e-12, format!("z = {z}, kappa = {}", p.kappa)));
    }
    Ok(Outcome::new(report))
}

struct BenchRow {
    samples: usize,
    t_int: f64,
    t_cf: f64,
    drift: f64,
    dev: f64,
}

fn bench_one(cfg: &RunConfig, n: usize) -> CliResult<BenchRow> {
    let mut c = cfg.clone();
    c.n_sites = n;
    c.init.sites = None;
    c.clusters = cfg.clusters.iter().copied().filter(|&m| m < n).collect();
    if c.clusters.is_empty() {
        c.clusters = vec![1];
    }
    c.validate()?;
    let k = c.system_kind();
    let c0 = c.initial_chain()?;
    let start = Instant::now();
    let tr = integrate(&k, &c0, &c.integrator_config())?;
    let t_int = start.elapsed().as_secs_f64().max(1e-9);
    let drift = invariant_drift(&tr).max_conserved();

    let start = Instant::now();
    let mut tracks = Vec::with_capacity(c.clusters.len());
    for &m in &c.clusters {
        tracks.push(closed_form_track(&k, &c0, m, c.integrator.t0, &tr.times)?.1);
    }
    let t_cf = start.elapsed().as_secs_f64().max(1e-9);
    let mut dev = 0.0f64;
    for (&m, exact) in c.clusters.iter().zip(&tracks) {
        dev = dev.max(max_dev(exact, &tr.cluster_series(m)?));
    }
    Ok(BenchRow { samples: tr.len(), t_int, t_cf, drift, dev })
}

/// Wall-clock comparison of integration against closed-form evaluation.
///
/// Runs one size at a time so the timings do not compete for cores.
pub fn bench(cfg: &RunConfig, n_values: &[usize]) -> CliResult<Outcome> {
    if cfg.system == System::Qrs {
        return Err(CliError::config("system", "bench supports the Gaudin family only"));
    }
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(CliError::config("bench.n_values", "need sizes >= 1"));
    }
    let mut report = Report::new("bench", Some(cfg.clone()));
    let mut csv = String::from("n,samples,integrate_seconds,closed_form_seconds,max_drift,max_cluster_dev,error\n");
    for &n in n_values {
        match bench_one(cfg, n) {
            Ok(row) => {
                report.push(Check::at_most(format!("N={n} cluster tracks agree"), row.dev, cfg.checks.compare_tol, ""));
                let _ = writeln!(
                    csv,
                    "{n},{},{:.6e},{:.6e},{:.6e},{:.6e},\"\"",
                    row.samples, row.t_int, row.t_cf, row.drift, row.dev
                );
            }
            Err(e) => {
                report.push(Check::flag(format!("N={n}"), false, e.to_string()));
                let _ = writeln!(csv, "{n},,,,,,\"{}\"", e.to_string().replace('"', "'"));
            }
        }
    }
    let mut out = Outcome::new(report);
    out.add("bench.csv", csv);
    Ok(out)
}
