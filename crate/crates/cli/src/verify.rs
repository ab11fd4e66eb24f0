//! The acceptance suite, one function per criterion.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qgaudin_core::algebra::casimir;
use qgaudin_core::chain::{cluster, cluster_jacobian, complementary_cluster, deltas, ClusterVars, Deltas};
use qgaudin_core::closedform::{deformed_frequency, QcgFlow, QpgFlow, QrsFlow};
use qgaudin_core::grouprep::{poisson_lie_check, product, GroupElement};
use qgaudin_core::integrate::{integrate, invariant_drift, measure_period, IntegratorConfig, Method, Trajectory};
use qgaudin_core::sampling::{random_chain, regular_chains_on_surface, SiteRanges};
use qgaudin_core::systems::{cluster_rhs_gaudin, conserved_deltas, grad_hamiltonian, hamiltonian, linear_matrix_cg};
use qgaudin_core::{ChainState, DeformParams, SystemKind};

use crate::report::Check;

type Outcome = Result<Check, String>;

fn run(name: &str, f: impl FnOnce(&str) -> Outcome) -> Check {
    f(name).unwrap_or_else(|e| Check::flag(name, false, e))
}

fn e2s(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn traj(k: &SystemKind, c: &ChainState, t1: f64, every: f64, track: Vec<usize>) -> Result<Trajectory, String> {
    let cfg = IntegratorConfig { track_clusters: track, ..IntegratorConfig::adaptive(0.0, t1, every) };
    integrate(k, c, &cfg).map_err(e2s)
}

fn worst(a: &[ClusterVars], b: &[ClusterVars]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
}

/// 1. Invariant drift on the Gaudin family, with a time budget.
pub fn conservation() -> Check {
    run("1 conservation", |name| {
        let start = Instant::now();
        let mut drift = 0.0f64;
        for kappa in [0.0, 1.0] {
            let p = DeformParams::new(0.2, kappa).map_err(e2s)?;
            let k = SystemKind::gaudin(p);
            for seed in 0..10 {
                let c = random_chain(5, p, &SiteRanges::default(), seed).map_err(e2s)?;
                let tr = traj(&k, &c, 20.0, 0.1, Vec::new())?;
                drift = drift.max(invariant_drift(&tr).max_conserved());
            }
        }
        let secs = start.elapsed().as_secs_f64();
        let mut c = Check::at_most(name, drift, 1e-7, format!("20 runs in {secs:.2} s (budget 5 s)"));
        c.passed &= secs <= 5.0;
        Ok(c)
    })
}

/// 2. qCG closed form against integration.
pub fn qcg_closed_form() -> Check {
    run("2 qCG closed form", |name| {
        let p = DeformParams::slq2(0.2);
        let k = SystemKind::gaudin(p);
        let mut dev = 0.0f64;
        for seed in 0..10 {
            let c = random_chain(5, p, &SiteRanges::default(), seed).map_err(e2s)?;
            let tr = traj(&k, &c, 20.0, 0.1, vec![1, 2, 3])?;
            let d = deltas(&c);
            for m in 1..=3 {
                let v0 = cluster(&c, m).map_err(e2s)?;
                let cm = casimir(&p, &v0.as_site());
                let cnm = casimir(&p, &complementary_cluster(&c, m).map_err(e2s)?.as_site());
                let f = QcgFlow::fit(&p, &d, &v0, cm, cnm, 0.0).map_err(e2s)?;
                let exact = tr.times.iter().map(|&t| f.at(t)).collect::<Result<Vec<_>, _>>().map_err(e2s)?;
                dev = dev.max(worst(&exact, &tr.cluster_series(m).map_err(e2s)?));
            }
        }
        Ok(Check::at_most(name, dev, 1e-6, "z = 0.2, 10 seeds, m = 1..3"))
    })
}

/// 3. Common period on an energy surface inside the periodic window.
pub fn equal_periods() -> Check {
    run("3 equal periods", |name| {
        let z = 0.5;
        let p = DeformParams::slq2(z);
        let k = SystemKind::gaudin(p);
        let target = -1.0;
        let predicted = deformed_frequency(&p, target)
            .period()
            .ok_or("C = -1 should be periodic at z = 0.5")?;
        let chains = regular_chains_on_surface(5, p, &SiteRanges::default(), target, 5, 100).map_err(e2s)?;
        let mut rel = 0.0f64;
        for (_, c) in &chains {
            let tr = traj(&k, c, 2.5 * predicted, 0.01, vec![1, 2])?;
            for m in [1, 2] {
                let t = measure_period(&tr, m).map_err(e2s)?;
                rel = rel.max((t - predicted).abs() / predicted);
            }
        }
        let seeds: Vec<String> = chains.iter().map(|(s, _)| s.to_string()).collect();
        Ok(Check::at_most(
            name,
            rel,
            1e-4,
            format!("predicted {predicted:.6}, seeds {}", seeds.join(" ")),
        ))
    })
}

/// 4. Spectrum of the undeformed cluster matrix and the CG period.
pub fn cg_eigenstructure() -> Check {
    run("4 CG eigenstructure", |name| {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut err = 0.0f64;
        for _ in 0..100 {
            let d = Deltas::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let cn = 0.25 * d.d3 * d.d3 + d.dp * d.dm;
            let w = Complex::new(cn, 0.0).sqrt() * 2.0;
            let mut got: Vec<Complex<f64>> = linear_matrix_cg(&d).complex_eigenvalues().iter().copied().collect();
            for want in [Complex::new(0.0, 0.0), w, -w] {
                let (j, dist) = got
                    .iter()
                    .enumerate()
                    .map(|(j, g)| (j, (g - want).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("three eigenvalues");
                err = err.max(dist);
                got.remove(j);
            }
        }
        let p = DeformParams::sl2();
        let k = SystemKind::gaudin(p);
        let c = (0..100)
            .map(|s| random_chain(5, p, &SiteRanges::default(), s))
            .find_map(|c| c.ok().filter(|c| casimir(&p, &deltas(c).as_site()) < -0.05))
            .ok_or("no CG chain with C < 0")?;
        let cn = casimir(&p, &deltas(&c).as_site());
        let predicted = PI / (-cn).sqrt();
        let tr = traj(&k, &c, 2.5 * predicted, 0.01, vec![2])?;
        let measured = measure_period(&tr, 2).map_err(e2s)?;
        let rel = (measured - predicted).abs() / predicted;
        let mut check = Check::at_most(
            name,
            err,
            1e-10,
            format!("eigenvalue error over 100 deltas; period rel. error {rel:.2e} (limit 1e-4)"),
        );
        check.passed &= rel <= 1e-4;
        Ok(check)
    })
}

/// Cluster equations of the q-Poincaré Gaudin system, written out.
fn pgq_rhs(z: f64, v: &ClusterVars, d: &Deltas) -> [f64; 3] {
    let e = (z * d.d3).exp();
    [
        2.0 * (v.splus * d.dm - v.sminus * d.dp) * e,
        2.0 * z * d.dm * e * v.splus * (d.dp - v.splus),
        -2.0 * z * d.dp * e * v.sminus * (d.dm - v.sminus),
    ]
}

/// 5. Contraction of the kappa family to the q-Poincaré equations.
pub fn kappa_contraction() -> Check {
    run("5 kappa contraction", |name| {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = |rng: &mut ChaCha8Rng| rng.random_range(-1.0..1.0);
        let mut residual = 0.0f64;
        let mut jump = 0.0f64;
        const STEPS: usize = 1000;
        for i in 0..1000 {
            let z = u(&mut rng);
            let v = ClusterVars::new(1, u(&mut rng), u(&mut rng), u(&mut rng));
            let d = Deltas::new(u(&mut rng), u(&mut rng), u(&mut rng));
            let got = cluster_rhs_gaudin(&DeformParams::q_poincare(z), &v, &d);
            let want = pgq_rhs(z, &v, &d);
            for j in 0..3 {
                residual = residual.max((got[j] - want[j]).abs());
            }
            if i % 20 == 0 {
                // walk kappa from 1 down to 0; steps must stay proportional
                // to the overall change, with no jumps in between
                let at = |kappa: f64| cluster_rhs_gaudin(&DeformParams { z, kappa }, &v, &d);
                let span = (at(1.0) - at(0.0)).norm();
                let h = 1.0 / STEPS as f64;
                let mut prev = at(1.0);
                for s in 1..=STEPS {
                    let next = at(1.0 - s as f64 * h);
                    jump = jump.max((next - prev).norm() / h - span);
                    prev = next;
                }
            }
        }
        let mut check = Check::at_most(
            name,
            residual,
            1e-12,
            format!("1000 points; largest excess step in the kappa walk {jump:.1e}"),
        );
        check.passed &= jump <= 1e-6;
        Ok(check)
    })
}

/// Least-squares line through `(x, y)`; returns slope and the largest
/// residual.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let res = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).abs())
        .fold(0.0, f64::max);
    (slope, res)
}

/// 6. qRS: conserved ladders, linear `S3^(N)`, closed form.
pub fn qrs_structure() -> Check {
    run("6 qRS structure", |name| {
        let k = SystemKind::qrs(0.3);
        let (mut ladder, mut resid, mut slope_err, mut dev) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for seed in 0..3 {
            let c = random_chain(5, k.params, &SiteRanges::default(), seed).map_err(e2s)?;
            // S3^(N) grows to ~100 here, so the line residual needs a
            // tighter tolerance than the default to resolve 1e-8
            let cfg = IntegratorConfig {
                method: Method::Rk45Adaptive { rtol: 1e-12, atol: 1e-14 },
                track_clusters: vec![1, 2, 3, 4, 5],
                ..IntegratorConfig::adaptive(0.0, 10.0, 0.05)
            };
            let tr = integrate(&k, &c, &cfg).map_err(e2s)?;
            let drift = invariant_drift(&tr);
            ladder = ladder.max(drift.dplus).max(drift.dminus);
            let d = conserved_deltas(&k, &c);
            let s3n: Vec<f64> = tr.cluster_series(5).map_err(e2s)?.iter().map(|v| v.s3).collect();
            let (slope, r) = line_fit(&tr.times, &s3n);
            let want = 2.0 * (d.dp - d.dm);
            resid = resid.max(r);
            slope_err = slope_err.max((slope - want).abs() / want.abs().max(1.0));
            for m in 1..5 {
                let v0 = cluster(&c, m).map_err(e2s)?;
                let f = QrsFlow::fit(&k.params, &d, &v0, d.d3, 0.0).map_err(e2s)?;
                let exact: Vec<ClusterVars> = tr.times.iter().map(|&t| f.at(t)).collect();
                dev = dev.max(worst(&exact, &tr.cluster_series(m).map_err(e2s)?));
            }
        }
        let passed = ladder <= 1e-8 && resid <= 1e-8 && slope_err <= 1e-8 && dev <= 1e-6;
        Ok(Check {
            name: name.into(),
            passed,
            value: Some(dev),
            threshold: Some(1e-6),
            detail: format!(
                "ladder drift {ladder:.1e} (1e-8), S3N line residual {resid:.1e} (1e-8), slope error {slope_err:.1e} (1e-8)"
            ),
        })
    })
}

/// 7. q-Poincaré kinks and the `S3` log-cosh formula.
pub fn qpg_kinks() -> Check {
    run("7 qPG kinks", |name| {
        let p = DeformParams::q_poincare(0.3);
        let k = SystemKind::gaudin(p);
        let (mut tilde, mut logcosh, mut printed) = (0.0f64, 0.0f64, 0.0f64);
        for seed in 0..3 {
            let c = random_chain(5, p, &SiteRanges::default(), seed).map_err(e2s)?;
            let tr = traj(&k, &c, 20.0, 0.1, vec![1, 2, 3, 4])?;
            let d = deltas(&c);
            for m in 1..5 {
                let v0 = cluster(&c, m).map_err(e2s)?;
                let f = QpgFlow::fit(&p, &d, &v0, 0.0).map_err(e2s)?;
                for (t, v) in tr.times.iter().zip(tr.cluster_series(m).map_err(e2s)?) {
                    let (tp, tm) = f.tilde(*t);
                    tilde = tilde.max((tp - v.splus * d.dm).abs()).max((tm - v.sminus * d.dp).abs());
                    logcosh = logcosh.max((f.s3_logcosh(*t) - v.s3).abs());
                    let e = (f.s3_logcosh_uncorrected(*t) - v.s3).abs();
                    printed = printed.max(if e.is_nan() { f64::INFINITY } else { e });
                }
            }
        }
        let verdict = if printed <= 1e-6 { "validated" } else { "flagged as erroneous" };
        let mut check = Check::at_most(
            name,
            tilde,
            1e-6,
            format!(
                "log-cosh S3 error {logcosh:.1e} (1e-6); printed log-cosh form error {printed:.1e}, {verdict}"
            ),
        );
        check.passed &= logcosh <= 1e-6;
        Ok(check)
    })
}

/// 8. Coproduct as group multiplication; Poisson-Lie compatibility.
pub fn group_structure() -> Check {
    run("8 group structure", |name| {
        let mut err = 0.0f64;
        for (i, n) in [1usize, 2, 4, 8, 16, 32, 64].into_iter().enumerate() {
            for z in [-0.7, 0.2, 0.5] {
                let p = DeformParams::slq2(z);
                let c = random_chain(n, p, &SiteRanges::default(), 80 + i as u64).map_err(e2s)?;
                let gs: Vec<GroupElement> = c.sites().iter().map(|s| GroupElement::from_site(s, z)).collect();
                let g = product(z, &gs).map_err(e2s)?;
                let v = cluster(&c, n).map_err(e2s)?;
                err = err.max((g.a - v.s3).abs()).max((g.b - v.splus).abs()).max((g.c - v.sminus).abs());
            }
        }
        let mut pl = 0.0f64;
        for p in [DeformParams::slq2(0.3), DeformParams::q_poincare(0.3), DeformParams { z: 0.3, kappa: 0.5 }] {
            pl = pl.max(poisson_lie_check(&p, 100, 8).map_err(e2s)?);
        }
        let mut check = Check::at_most(name, err, 1e-13, format!("N up to 64; Poisson-Lie residual {pl:.1e} (1e-12)"));
        check.passed &= pl <= 1e-12;
        Ok(check)
    })
}

fn systems_under_test() -> Vec<SystemKind> {
    vec![
        SystemKind::gaudin(DeformParams::sl2()),
        SystemKind::gaudin(DeformParams::slq2(0.2)),
        SystemKind::gaudin(DeformParams::q_poincare(0.3)),
        SystemKind::gaudin(DeformParams { z: 0.25, kappa: 0.5 }),
        SystemKind::qrs(0.3),
    ]
}

/// 9. Gradients and cluster Jacobians against central differences.
pub fn derivative_checks() -> Check {
    run("9 derivatives", |name| {
        const H: f64 = 1e-6;
        let mut rel = 0.0f64;
        let scaled = |err: f64, size: f64| err / size.max(1.0);
        for k in systems_under_test() {
            for seed in 0..100 {
                let c = random_chain(4, k.params, &SiteRanges::default(), 900 + seed).map_err(e2s)?;
                let x = c.to_flat();
                let at = |i: usize, dx: f64| {
                    let mut y = x.clone();
                    y[i] += dx;
                    ChainState::from_flat(&y, k.params).expect("finite")
                };
                let g = grad_hamiltonian(&k, &c).map_err(e2s)?;
                let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                for i in 0..x.len() {
                    let fd = (hamiltonian(&k, &at(i, H)).map_err(e2s)? - hamiltonian(&k, &at(i, -H)).map_err(e2s)?)
                        / (2.0 * H);
                    rel = rel.max(scaled((fd - g[i]).abs(), gmax));
                }
                for m in 1..=c.len() {
                    let jac = cluster_jacobian(&c, m).map_err(e2s)?;
                    let mut e = vec![0.0; x.len()];
                    for i in 0..x.len() {
                        e[i] = 1.0;
                        let col = jac.apply(&e);
                        e[i] = 0.0;
                        let hi = cluster(&at(i, H), m).map_err(e2s)?.to_vector();
                        let lo = cluster(&at(i, -H), m).map_err(e2s)?.to_vector();
                        let fd = (hi - lo) / (2.0 * H);
                        rel = rel.max(scaled((fd - col).amax(), col.amax()));
                    }
                }
            }
        }
        Ok(Check::at_most(name, rel, 1e-6, "5 systems x 100 chains, N = 4"))
    })
}

/// 10. Fourth-order convergence of fixed-step RK4 on qCG.
pub fn rk4_order() -> Check {
    run("10 RK4 order", |name| {
        let p = DeformParams::slq2(0.3);
        let k = SystemKind::gaudin(p);
        let c = random_chain(4, p, &SiteRanges::default(), 9).map_err(e2s)?;
        let end = |method: Method| -> Result<Vec<f64>, String> {
            let cfg = IntegratorConfig { method, ..IntegratorConfig::adaptive(0.0, 2.0, 2.0) };
            Ok(integrate(&k, &c, &cfg).map_err(e2s)?.final_state().to_flat())
        };
        let reference = end(Method::Rk45Adaptive { rtol: 1e-13, atol: 1e-14 })?;
        let err = |dt: f64| -> Result<f64, String> {
            Ok(end(Method::Rk4Fixed { dt })?
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max))
        };
        let (e1, e2) = (err(0.04)?, err(0.02)?);
        let ratio = e1 / e2;
        Ok(Check {
            name: name.into(),
            passed: (14.0..=18.0).contains(&ratio),
            value: Some(ratio),
            threshold: None,
            detail: format!("error ratio under step halving, want [14, 18] ({e1:.2e} / {e2:.2e})"),
        })
    })
}

/// Criteria 1 to 10 in order; `progress` sees each result as it lands.
pub fn run_all(mut progress: impl FnMut(&Check)) -> Vec<Check> {
    let suite: [fn() -> Check; 10] = [
        conservation,
        qcg_closed_form,
        equal_periods,
        cg_eigenstructure,
        kappa_contraction,
        qrs_structure,
        qpg_kinks,
        group_structure,
        derivative_checks,
        rk4_order,
    ];
    suite
        .iter()
        .map(|f| {
            let c = f();
            progress(&c);
            c
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (s, r) = line_fit(&x, &y);
        assert_eq!(s, 2.0);
        assert!(r < 1e-15);
    }

    #[test]
    fn pgq_matches_at_known_point() {
        let v = ClusterVars::new(1, 0.1, 0.2, -0.3);
        let d = Deltas::new(0.0, 1.0, -1.0);
        let [a, b, c] = pgq_rhs(0.5, &v, &d);
        assert!((a - 2.0 * (-0.2 + 0.3)).abs() < 1e-15);
        assert!((b - 2.0 * 0.5 * -1.0 * 0.2 * 0.8).abs() < 1e-15);
        assert!((c + 2.0 * 0.5 * 1.0 * -0.3 * (-1.0 + 0.3)).abs() < 1e-15);
    }
}
