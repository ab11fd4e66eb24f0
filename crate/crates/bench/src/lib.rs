//! Fixtures shared by the criterion benches.

use qgaudin_core::algebra::casimir;
use qgaudin_core::chain::{cluster, complementary_cluster, deltas};
use qgaudin_core::closedform::QcgFlow;
use qgaudin_core::integrate::IntegratorConfig;
use qgaudin_core::sampling::{regular_chains_on_surface, SiteRanges};
use qgaudin_core::{ChainState, DeformParams, SystemKind};

pub const Z: f64 = 0.2;

/// A pole-free qCG chain of `n` sites on the surface `C = -1`.
pub fn qcg_chain(n: usize) -> (SystemKind, ChainState) {
    let p = DeformParams::slq2(Z);
    let (_, c) = regular_chains_on_surface(n, p, &SiteRanges::default(), -1.0, 1, 7)
        .expect("a regular chain exists")
        .remove(0);
    (SystemKind::gaudin(p), c)
}

pub fn short_run(t1: f64) -> IntegratorConfig {
    IntegratorConfig::adaptive(0.0, t1, 0.01)
}

/// Closed-form flow of cluster `m` of `c`.
pub fn qcg_flow(c: &ChainState, m: usize) -> QcgFlow {
    let p = *c.params();
    let v = cluster(c, m).expect("m in range");
    let cm = casimir(&p, &v.as_site());
    let cnm = casimir(&p, &complementary_cluster(c, m).expect("m < N").as_site());
    QcgFlow::fit(&p, &deltas(c), &v, cm, cnm, 0.0).expect("regular chain")
}

/// Uniform sample times on `[0, t1]`.
pub fn grid(t1: f64, samples: usize) -> Vec<f64> {
    (0..samples).map(|i| t1 * i as f64 / (samples - 1) as f64).collect()
}
