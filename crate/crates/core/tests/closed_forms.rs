use qgaudin_core::algebra::casimir;
use qgaudin_core::chain::{cluster, complementary_cluster, deltas, ChainState, ClusterVars};
use qgaudin_core::closedform::{
    cg_solution, deformed_frequency, qcg_solution, CgFlow, QcgFlow, QpgFlow, QrsFlow,
};
use qgaudin_core::integrate::{integrate, measure_period, IntegratorConfig};
use qgaudin_core::sampling::{random_chain, scale_to_energy, SiteRanges};
use qgaudin_core::systems::{conserved_deltas, SystemKind};
use qgaudin_core::DeformParams;

fn run(k: &SystemKind, c: &ChainState, t1: f64, dt: f64, track: Vec<usize>) -> qgaudin_core::Trajectory {
    let cfg = IntegratorConfig { track_clusters: track, ..IntegratorConfig::adaptive(0.0, t1, dt) };
    integrate(k, c, &cfg).unwrap()
}

fn casimirs(c: &ChainState, m: usize) -> (ClusterVars, f64, f64) {
    let p = c.params();
    let v = cluster(c, m).unwrap();
    let cm = casimir(p, &v.as_site());
    let cnm = if m < c.len() {
        casimir(p, &complementary_cluster(c, m).unwrap().as_site())
    } else {
        0.0
    };
    (v, cm, cnm)
}

#[test]
fn qcg_matches_integration() {
    let p = DeformParams::slq2(0.2);
    let k = SystemKind::gaudin(p);
    for seed in 0..3 {
        let c = random_chain(5, p, &SiteRanges::default(), seed).unwrap();
        let tr = run(&k, &c, 10.0, 0.05, vec![1, 2, 3, 4]);
        let d = deltas(&c);
        for m in 1..=4 {
            let (v0, cm, cnm) = casimirs(&c, m);
            let series = tr.cluster_series(m).unwrap();
            let worst = tr
                .times
                .iter()
                .zip(&series)
                .map(|(&t, v)| qcg_solution(&p, &d, &v0, cm, cnm, t).unwrap().max_abs_diff(v))
                .fold(0.0f64, f64::max);
            assert!(worst <= 1e-6, "seed {seed} m {m}: {worst:e}");
        }
    }
}

#[test]
fn qcg_km_matches_fitted_value() {
    let p = DeformParams::slq2(0.2);
    let k = SystemKind::gaudin(p);
    let c = random_chain(5, p, &SiteRanges::default(), 11).unwrap();
    let tr = run(&k, &c, 5.0, 0.5, vec![2]);
    let d = deltas(&c);
    let (v0, cm, cnm) = casimirs(&c, 2);
    let flow = QcgFlow::fit(&p, &d, &v0, cm, cnm, 0.0).unwrap();
    let kc = flow.constants;
    for v in tr.cluster_series(2).unwrap() {
        let y = v.splus * d.dm + v.sminus * d.dp - kc.b / kc.a;
        let fitted = (-2.0 * p.z * v.s3).exp() / (y * y);
        assert!((fitted - kc.km).abs() <= 1e-6 * kc.km, "{fitted} vs {}", kc.km);
    }
}

#[test]
fn qcg_flow_property_and_period() {
    let p = DeformParams::slq2(0.5);
    let base = random_chain(5, p, &SiteRanges::default(), 3).unwrap();
    let c = scale_to_energy(&base, -1.0).unwrap();
    let d = deltas(&c);
    let (v0, cm, cnm) = casimirs(&c, 2);
    let flow = QcgFlow::fit(&p, &d, &v0, cm, cnm, 0.0).unwrap();
    let period = flow.period().expect("periodic energy surface");
    let w = deformed_frequency(&p, casimir(&p, &d.as_site()));
    assert!((period - w.period().unwrap()).abs() < 1e-12 * period);
    for t in [0.4, 1.7, 3.3] {
        let a = flow.at(t).unwrap();
        let b = flow.at(t + period).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-8);
        let mid = flow.at(t).unwrap();
        let refit = QcgFlow::fit(&p, &d, &mid, cm, cnm, t).unwrap();
        let later = t + 1.25;
        assert!(refit.at(later).unwrap().max_abs_diff(&flow.at(later).unwrap()) <= 1e-9);
    }
}

#[test]
fn qcg_tends_to_cg() {
    let z = 1e-6;
    let p = DeformParams::slq2(z);
    let c = random_chain(4, p, &SiteRanges::default(), 5).unwrap();
    let d = deltas(&c);
    for m in 1..4 {
        let (v0, cm, cnm) = casimirs(&c, m);
        for i in 0..=50 {
            let t = 0.1 * i as f64;
            let q = qcg_solution(&p, &d, &v0, cm, cnm, t).unwrap();
            let g = cg_solution(&d, &v0, t);
            assert!(q.max_abs_diff(&g) <= 1e-4, "m {m} t {t}: {}", q.max_abs_diff(&g));
        }
    }
}

#[test]
fn cg_matches_integration_and_period() {
    let p = DeformParams::sl2();
    let k = SystemKind::gaudin(p);
    let c = random_chain(5, p, &SiteRanges::default(), 8).unwrap();
    let tr = run(&k, &c, 5.0, 0.05, vec![1, 2, 3, 4, 5]);
    let d = deltas(&c);
    for m in 1..=5 {
        let v0 = cluster(&c, m).unwrap();
        for (t, v) in tr.times.iter().zip(tr.cluster_series(m).unwrap()) {
            assert!(cg_solution(&d, &v0, *t).max_abs_diff(&v) <= 1e-8);
        }
    }
    let cn = casimir(&p, &d.as_site());
    assert!(cn < 0.0, "default sampling gives a periodic CG orbit, C = {cn}");
    let flow = CgFlow::new(&d, cluster(&c, 2).unwrap(), 0.0);
    let expect = std::f64::consts::PI / (-cn).sqrt();
    assert!((flow.period().unwrap() - expect).abs() < 1e-12 * expect);
    let long = run(&k, &c, 2.5 * expect, 0.01, vec![2]);
    let measured = measure_period(&long, 2).unwrap();
    assert!((measured - expect).abs() <= 1e-4 * expect, "{measured} vs {expect}");
}

#[test]
fn qpg_matches_integration() {
    let p = DeformParams::q_poincare(0.3);
    let k = SystemKind::gaudin(p);
    for seed in 0..3 {
        let c = random_chain(5, p, &SiteRanges::default(), seed).unwrap();
        let tr = run(&k, &c, 20.0, 0.1, vec![1, 2, 3, 4]);
        let d = deltas(&c);
        for m in 1..5 {
            let v0 = cluster(&c, m).unwrap();
            let flow = QpgFlow::fit(&p, &d, &v0, 0.0).unwrap();
            let mut worst = 0.0f64;
            let mut worst_logcosh = 0.0f64;
            for (t, v) in tr.times.iter().zip(tr.cluster_series(m).unwrap()) {
                worst = worst.max(flow.at(*t).max_abs_diff(&v));
                worst_logcosh = worst_logcosh.max((flow.s3_logcosh(*t) - v.s3).abs());
            }
            assert!(worst <= 1e-6, "seed {seed} m {m}: {worst:e}");
            assert!(worst_logcosh <= 1e-6, "seed {seed} m {m}: {worst_logcosh:e}");
        }
    }
}

#[test]
fn qrs_matches_integration() {
    let k = SystemKind::qrs(0.3);
    for seed in 0..3 {
        let c = random_chain(5, k.params, &SiteRanges::default(), seed).unwrap();
        let tr = run(&k, &c, 10.0, 0.05, vec![1, 2, 3, 4, 5]);
        let d = conserved_deltas(&k, &c);
        for m in 1..5 {
            let v0 = cluster(&c, m).unwrap();
            let flow = QrsFlow::fit(&k.params, &d, &v0, d.d3, 0.0).unwrap();
            let mut worst = 0.0f64;
            for (t, v) in tr.times.iter().zip(tr.cluster_series(m).unwrap()) {
                worst = worst.max(flow.at(*t).max_abs_diff(&v));
            }
            assert!(worst <= 1e-6, "seed {seed} m {m}: {worst:e}");
        }
        for (t, v) in tr.times.iter().zip(tr.cluster_series(5).unwrap()) {
            let s3n = 2.0 * (d.dp - d.dm) * t + d.d3;
            assert!((v.s3 - s3n).abs() <= 1e-8 * s3n.abs().max(1.0), "t {t}: {:e} of {s3n}", v.s3 - s3n);
        }
    }
}

#[test]
fn qcg_holds_for_intermediate_kappa() {
    let p = DeformParams::new(0.25, 0.5).unwrap();
    let k = SystemKind::gaudin(p);
    let c = random_chain(4, p, &SiteRanges::default(), 21).unwrap();
    let tr = run(&k, &c, 8.0, 0.1, vec![1, 2, 3]);
    let d = deltas(&c);
    for m in 1..4 {
        let (v0, cm, cnm) = casimirs(&c, m);
        let flow = QcgFlow::fit(&p, &d, &v0, cm, cnm, 0.0).unwrap();
        for (t, v) in tr.times.iter().zip(tr.cluster_series(m).unwrap()) {
            assert!(flow.at(*t).unwrap().max_abs_diff(&v) <= 1e-6, "m {m} t {t}");
        }
    }
}
