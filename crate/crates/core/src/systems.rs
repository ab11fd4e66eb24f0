//! Hamiltonians on the chain and their flows.
//!
//! Two families are supported:
//!
//! * [`SystemTag::GaudinKappa`]: `H = I(S3^(N), S+^(N), S-^(N))`, the coproduct
//!   of the Casimir. `(z, κ) = (0, 1)` is the classical Gaudin magnet, `κ = 1`
//!   its `sl_q(2)` deformation and `κ = 0` the q-Poincaré Gaudin system.
//! * [`SystemTag::Qrs`]: `H = X+^(N) + X-^(N) = (S+^(N) + S-^(N)) e^{z S3^(N)/2}`
//!   on the q-Poincaré bracket.
//!
//! The flow is always `ẋ_i = J(x_i) ∇_i H` site by site. The cluster
//! equations are kept separately as cross-checks.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::algebra::{casimir, casimir_gradient, deformed_linear, sinh_ratio, DeformParams};
use crate::chain::{cluster, cluster_jacobian, deltas, ChainState, ClusterVars, Deltas};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemTag {
    GaudinKappa,
    Qrs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemKind {
    pub tag: SystemTag,
    pub params: DeformParams,
}

impl SystemKind {
    pub fn new(tag: SystemTag, params: DeformParams) -> Result<Self> {
        let k = Self { tag, params };
        k.validate()?;
        Ok(k)
    }

    pub fn gaudin(params: DeformParams) -> Self {
        Self { tag: SystemTag::GaudinKappa, params }
    }

    pub fn qrs(z: f64) -> Self {
        Self { tag: SystemTag::Qrs, params: DeformParams::q_poincare(z) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tag == SystemTag::Qrs && self.params.kappa != 0.0 {
            return Err(Error::Config {
                field: "kappa",
                message: format!(
                    "the qRS system lives on the q-Poincare bracket and needs kappa = 0, got {}",
                    self.params.kappa
                ),
            });
        }
        Ok(())
    }

    /// Human-readable system name.
    pub fn label(&self) -> &'static str {
        let p = self.params;
        match self.tag {
            SystemTag::Qrs => "qRS",
            SystemTag::GaudinKappa if p.kappa == 0.0 => "qPG",
            SystemTag::GaudinKappa if p.is_undeformed() && p.kappa == 1.0 => "CG",
            SystemTag::GaudinKappa if p.kappa == 1.0 => "qCG",
            SystemTag::GaudinKappa => "gaudin-kappa",
        }
    }

    fn check(&self, c: &ChainState) -> Result<()> {
        self.validate()?;
        if *c.params() != self.params {
            return Err(Error::Config {
                field: "params",
                message: format!(
                    "chain built with {:?} but system uses {:?}",
                    c.params(),
                    self.params
                ),
            });
        }
        Ok(())
    }
}

/// Energy and its gradient as functions of the N-site cluster variables.
fn energy_in_cluster(k: &SystemKind, v: [f64; 3]) -> (f64, Vector3<f64>) {
    let p = k.params;
    let [s3, sp, sm] = v;
    match k.tag {
        SystemTag::GaudinKappa => {
            let s = crate::algebra::SiteState::new(s3, sp, sm);
            (casimir(&p, &s), casimir_gradient(&p, &s))
        }
        SystemTag::Qrs => {
            let e = (0.5 * p.z * s3).exp();
            ((sp + sm) * e, Vector3::new(0.5 * p.z * (sp + sm) * e, e, e))
        }
    }
}

pub fn hamiltonian(k: &SystemKind, c: &ChainState) -> Result<f64> {
    k.check(c)?;
    let v = cluster(c, c.len())?;
    Ok(energy_in_cluster(k, v.to_array()).0)
}

pub fn grad_hamiltonian(k: &SystemKind, c: &ChainState) -> Result<Vec<f64>> {
    k.check(c)?;
    let v = cluster(c, c.len())?;
    let (_, g) = energy_in_cluster(k, v.to_array());
    Ok(cluster_jacobian(c, c.len())?.pull_back(&g))
}

pub fn vector_field(k: &SystemKind, c: &ChainState) -> Result<Vec<f64>> {
    k.check(c)?;
    let flat = c.to_flat();
    let mut out = vec![0.0; flat.len()];
    field_flat(k, &flat, &mut out);
    Ok(out)
}

/// Allocation-free vector field on a flat `[s3, s+, s-]*` state.
///
/// Two O(N) sweeps: prefix weights forward, gradient tails backward. The
/// caller is responsible for `k` being valid and the lengths matching.
pub fn field_flat(k: &SystemKind, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), out.len());
    let z = k.params.z;
    let kappa = k.params.kappa;
    // forward: e^{-z P_i} stored in out[3i] temporarily
    let (mut p, mut pc) = (0.0f64, 0.0f64);
    let (mut sp, mut sm) = (0.0, 0.0);
    for (xi, oi) in x.chunks_exact(3).zip(out.chunks_exact_mut(3)) {
        let w = (-z * (p + pc)).exp();
        oi[0] = w;
        sp += w * xi[1];
        sm += w * xi[2];
        // Neumaier step for the prefix
        let t = p + xi[0];
        if p.abs() >= xi[0].abs() {
            pc += (p - t) + xi[0];
        } else {
            pc += (xi[0] - t) + p;
        }
        p = t;
    }
    let (_, g) = energy_in_cluster(k, [p + pc, sp, sm]);
    let (g3, gp, gm) = (g[0], g[1], g[2]);
    let (mut tail_p, mut tail_m) = (0.0, 0.0);
    for (xi, oi) in x.chunks_exact(3).zip(out.chunks_exact_mut(3)).rev() {
        let w = oi[0];
        let d3 = g3 - z * (tail_p * gp + tail_m * gm);
        let dp = w * gp;
        let dm = w * gm;
        tail_p += w * xi[1];
        tail_m += w * xi[2];
        let (s3, s_p, s_m) = (xi[0], xi[1], xi[2]);
        let j23 = kappa * deformed_linear(z, s3) + 2.0 * z * s_p * s_m;
        oi[0] = 2.0 * s_p * dp - 2.0 * s_m * dm;
        oi[1] = -2.0 * s_p * d3 + j23 * dm;
        oi[2] = 2.0 * s_m * d3 - j23 * dp;
    }
}

/// Time derivative of `cluster(c, m)` induced by the full vector field.
pub fn induced_cluster_rate(k: &SystemKind, c: &ChainState, m: usize) -> Result<Vector3<f64>> {
    let f = vector_field(k, c)?;
    Ok(cluster_jacobian(c, m)?.apply(&f))
}

/// The Deltas that are constants of the motion for `k`.
///
/// For the Gaudin family these are the S-basis coproducts. For qRS the
/// conserved pair is the X-basis `X±^(N) = S±^(N) e^{z S3^(N)/2}`, while
/// `d3 = S3^(N)` drifts linearly.
pub fn conserved_deltas(k: &SystemKind, c: &ChainState) -> Deltas {
    let d = deltas(c);
    match k.tag {
        SystemTag::GaudinKappa => d,
        SystemTag::Qrs => {
            let e = (0.5 * k.params.z * d.d3).exp();
            Deltas::new(d.d3, d.dp * e, d.dm * e)
        }
    }
}

/// Cluster equations of the Gaudin κ-family.
///
/// With `e = e^{z δ3}`:
///
/// ```text
/// Ṡ3 = 2 (S+ δ- - S- δ+) e
/// Ṡ± = ±2z δ∓ e S± (δ± - S±) ∓ κ sinh(z δ3)/z S± ± κ δ± e (1 - e^{-2z S3})/(2z)
/// ```
pub fn cluster_rhs_gaudin(p: &DeformParams, v: &ClusterVars, d: &Deltas) -> Vector3<f64> {
    let z = p.z;
    let e = (z * d.d3).exp();
    let sh = p.kappa * sinh_ratio(z, d.d3);
    let lin = p.kappa * e * deformed_linear(z, v.s3);
    Vector3::new(
        2.0 * (v.splus * d.dm - v.sminus * d.dp) * e,
        2.0 * z * d.dm * e * v.splus * (d.dp - v.splus) - sh * v.splus + d.dp * lin,
        -2.0 * z * d.dp * e * v.sminus * (d.dm - v.sminus) + sh * v.sminus - d.dm * lin,
    )
}

/// Cluster equations of the qRS system; `d.dp`, `d.dm` are the X-basis
/// constants returned by [`conserved_deltas`].
pub fn cluster_rhs_qrs(
    p: &DeformParams,
    v: &ClusterVars,
    s3n: f64,
    d: &Deltas,
) -> Result<Vector3<f64>> {
    SystemKind::new(SystemTag::Qrs, *p)?;
    let z = p.z;
    let e = (0.5 * z * s3n).exp();
    let sum = d.dp + d.dm;
    Ok(Vector3::new(
        2.0 * (v.splus - v.sminus) * e,
        z * v.splus * (sum - 2.0 * v.splus * e),
        -z * v.sminus * (sum - 2.0 * v.sminus * e),
    ))
}

/// Constant matrix of the undeformed Gaudin cluster flow, `Ṡ = M S`.
pub fn linear_matrix_cg(d: &Deltas) -> Matrix3<f64> {
    Matrix3::new(
        0.0, 2.0 * d.dm, -2.0 * d.dp, //
        d.dp, -d.d3, 0.0, //
        -d.dm, 0.0, d.d3,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::SiteState;
    use crate::chain::casimir_tower;
    use proptest::prelude::*;

    fn chain(p: DeformParams, sites: &[[f64; 3]]) -> ChainState {
        ChainState::new(sites.iter().copied().map(SiteState::from).collect(), p).unwrap()
    }

    fn arb_sites(max_n: usize) -> impl Strategy<Value = Vec<SiteState>> {
        proptest::collection::vec(
            (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b, c)| SiteState::new(a, b, c)),
            1..max_n,
        )
    }

    fn arb_kind() -> impl Strategy<Value = SystemKind> {
        (-0.8..0.8f64, 0.0..1.5f64, any::<bool>()).prop_map(|(z, kappa, qrs)| {
            if qrs {
                SystemKind::qrs(z)
            } else {
                SystemKind::gaudin(DeformParams::new(z, kappa).unwrap())
            }
        })
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn hamiltonian_examples() {
        let cg = SystemKind::gaudin(DeformParams::sl2());
        let c = chain(DeformParams::sl2(), &[[2.0, 0.0, 0.0], [0.0, 1.0, 1.0]]);
        assert_eq!(hamiltonian(&cg, &c).unwrap(), 2.0);

        let q = SystemKind::qrs(0.0);
        let c = chain(q.params, &[[0.0, 1.0, 2.0], [0.0, 3.0, 4.0]]);
        assert_eq!(hamiltonian(&q, &c).unwrap(), 10.0);

        let q = SystemKind::qrs(0.7);
        let c = chain(q.params, &[[0.4, 0.0, 0.0], [-1.0, 0.0, 0.0]]);
        assert_eq!(hamiltonian(&q, &c).unwrap(), 0.0);
    }

    #[test]
    fn qrs_needs_kappa_zero() {
        let p = DeformParams::slq2(0.3);
        let err = SystemKind::new(SystemTag::Qrs, p).unwrap_err();
        assert!(matches!(err, Error::Config { field: "kappa", .. }));
        let bad = SystemKind { tag: SystemTag::Qrs, params: p };
        let c = chain(p, &[[0.0, 1.0, 1.0]]);
        assert!(hamiltonian(&bad, &c).is_err());
        assert!(grad_hamiltonian(&bad, &c).is_err());
        assert!(vector_field(&bad, &c).is_err());
        let v = ClusterVars::new(1, 0.0, 1.0, 1.0);
        assert!(cluster_rhs_qrs(&p, &v, 0.0, &Deltas::new(0.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn mismatched_chain_params_rejected() {
        let k = SystemKind::gaudin(DeformParams::slq2(0.2));
        let c = chain(DeformParams::slq2(0.3), &[[0.0, 1.0, 1.0]]);
        assert!(matches!(hamiltonian(&k, &c), Err(Error::Config { field: "params", .. })));
    }

    #[test]
    fn labels() {
        assert_eq!(SystemKind::gaudin(DeformParams::sl2()).label(), "CG");
        assert_eq!(SystemKind::gaudin(DeformParams::slq2(0.1)).label(), "qCG");
        assert_eq!(SystemKind::gaudin(DeformParams::q_poincare(0.1)).label(), "qPG");
        assert_eq!(SystemKind::qrs(0.1).label(), "qRS");
    }

    #[test]
    fn gradients_at_zero_ladder() {
        let z = 0.4;
        let c = chain(DeformParams::q_poincare(z), &[[0.3, 0.0, 0.0], [-0.5, 0.0, 0.0]]);
        let g = grad_hamiltonian(&SystemKind::gaudin(*c.params()), &c).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));

        let g = grad_hamiltonian(&SystemKind::qrs(z), &c).unwrap();
        let e = (0.5 * z * -0.2f64).exp();
        assert!((g[1] - e).abs() < 1e-15 && (g[2] - e).abs() < 1e-15);
        assert!((g[4] - e * (-z * 0.3f64).exp()).abs() < 1e-15);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn cg_single_site_gradient() {
        let c = chain(DeformParams::sl2(), &[[0.6, -1.2, 0.7]]);
        let g = grad_hamiltonian(&SystemKind::gaudin(DeformParams::sl2()), &c).unwrap();
        assert_eq!(g, vec![0.3, 0.7, -1.2]);
    }

    #[test]
    fn gaudin_equilibrium_without_ladders() {
        for p in [DeformParams::sl2(), DeformParams::slq2(0.5), DeformParams::q_poincare(0.5)] {
            let c = chain(p, &[[0.3, 0.0, 0.0], [-0.5, 0.0, 0.0], [1.1, 0.0, 0.0]]);
            let f = vector_field(&SystemKind::gaudin(p), &c).unwrap();
            assert!(f.iter().all(|&x| x == 0.0), "{f:?}");
        }
    }

    #[test]
    fn cg_cluster_rate_is_linear_flow() {
        let p = DeformParams::sl2();
        let c = chain(p, &[[0.3, -0.7, 1.1], [-0.9, 0.4, 0.2], [0.5, 1.3, -0.6]]);
        let k = SystemKind::gaudin(p);
        let m_mat = linear_matrix_cg(&deltas(&c));
        for m in 1..=3 {
            let v = cluster(&c, m).unwrap();
            let rate = induced_cluster_rate(&k, &c, m).unwrap();
            let lin = m_mat * v.to_vector();
            assert!((rate - lin).amax() < 1e-13, "m={m}");
            // the bilinear form used for CG
            let d = deltas(&c);
            assert!((rate[0] - 2.0 * (v.splus * d.dm - v.sminus * d.dp)).abs() < 1e-13);
        }
    }

    #[test]
    fn undeformed_limit_of_cluster_rhs() {
        let d = Deltas::new(0.4, -0.8, 1.3);
        let v = ClusterVars::new(2, 0.7, 0.2, -0.5);
        let near = cluster_rhs_gaudin(&DeformParams::slq2(1e-10), &v, &d);
        let lin = linear_matrix_cg(&d) * v.to_vector();
        assert!((near - lin).amax() <= 1e-8);
        let exact = cluster_rhs_gaudin(&DeformParams::sl2(), &v, &d);
        assert!((exact - lin).amax() <= 1e-15);
    }

    #[test]
    fn kappa_zero_drops_two_terms() {
        let z = 0.35;
        let d = Deltas::new(0.4, -0.8, 1.3);
        let v = ClusterVars::new(2, 0.7, 0.2, -0.5);
        let r = cluster_rhs_gaudin(&DeformParams::q_poincare(z), &v, &d);
        let e = (z * d.d3).exp();
        let expect = Vector3::new(
            2.0 * (v.splus * d.dm - v.sminus * d.dp) * e,
            2.0 * z * d.dm * e * v.splus * (d.dp - v.splus),
            -2.0 * z * d.dp * e * v.sminus * (d.dm - v.sminus),
        );
        assert!((r - expect).amax() < 1e-15);
    }

    #[test]
    fn qrs_rhs_undeformed() {
        let p = DeformParams::q_poincare(0.0);
        let v = ClusterVars::new(1, 0.3, 1.5, -0.5);
        let r = cluster_rhs_qrs(&p, &v, 2.0, &Deltas::new(2.0, 1.0, 1.0)).unwrap();
        assert_eq!(r, Vector3::new(4.0, 0.0, 0.0));
        let zero = ClusterVars::new(1, 0.3, 0.0, 0.0);
        let p = DeformParams::q_poincare(0.6);
        assert_eq!(
            cluster_rhs_qrs(&p, &zero, 2.0, &Deltas::new(2.0, 1.0, 1.0)).unwrap(),
            Vector3::zeros()
        );
    }

    #[test]
    fn cg_matrix_spectrum() {
        assert_eq!(linear_matrix_cg(&Deltas::new(0.0, 0.0, 0.0)), Matrix3::zeros());
        let d = Deltas::new(0.0, 1.0, -1.0);
        let ev = linear_matrix_cg(&d).complex_eigenvalues();
        let mut im: Vec<f64> = ev.iter().map(|e| e.im).collect();
        im.sort_by(f64::total_cmp);
        assert!((im[0] + 2.0).abs() < 1e-12 && im[1].abs() < 1e-12 && (im[2] - 2.0).abs() < 1e-12);
        assert!(ev.iter().all(|e| e.re.abs() < 1e-12));

        let d = Deltas::new(0.8, 0.5, 1.2);
        let cn = 0.25 * d.d3 * d.d3 + d.dp * d.dm;
        let mut re: Vec<f64> = linear_matrix_cg(&d).complex_eigenvalues().iter().map(|e| e.re).collect();
        re.sort_by(f64::total_cmp);
        let w = 2.0 * cn.sqrt();
        assert!((re[0] + w).abs() < 1e-12 && re[1].abs() < 1e-12 && (re[2] - w).abs() < 1e-12);
    }

    #[test]
    fn field_matches_site_form() {
        let p = DeformParams::new(0.37, 0.6).unwrap();
        let c = chain(p, &[[0.3, -0.7, 1.1], [-0.9, 0.4, 0.2], [0.5, 1.3, -0.6]]);
        let k = SystemKind::gaudin(p);
        let g = grad_hamiltonian(&k, &c).unwrap();
        let f = vector_field(&k, &c).unwrap();
        for (i, s) in c.sites().iter().enumerate() {
            let j = crate::algebra::structure_matrix(&p, s);
            let gi = Vector3::new(g[3 * i], g[3 * i + 1], g[3 * i + 2]);
            let fi = j * gi;
            for r in 0..3 {
                assert!((fi[r] - f[3 * i + r]).abs() < 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(k in arb_kind(), sites in arb_sites(7)) {
            let c = ChainState::new(sites, k.params).unwrap();
            let g = grad_hamiltonian(&k, &c).unwrap();
            let base = c.to_flat();
            let h = 1e-6;
            for i in 0..base.len() {
                let mut a = base.clone();
                let mut b = base.clone();
                a[i] += h;
                b[i] -= h;
                let ha = hamiltonian(&k, &ChainState::from_flat(&a, k.params).unwrap()).unwrap();
                let hb = hamiltonian(&k, &ChainState::from_flat(&b, k.params).unwrap()).unwrap();
                let fd = (ha - hb) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "i={} fd={} g={}", i, fd, g[i]);
            }
        }

        #[test]
        fn energy_is_conserved(k in arb_kind(), sites in arb_sites(9)) {
            let c = ChainState::new(sites, k.params).unwrap();
            let g = grad_hamiltonian(&k, &c).unwrap();
            let f = vector_field(&k, &c).unwrap();
            prop_assert!(dot(&g, &f).abs() <= 1e-12);
        }

        #[test]
        fn casimir_tower_is_conserved(
            z in -0.8..0.8f64, kappa in 0.0..1.5f64, sites in arb_sites(8)
        ) {
            let p = DeformParams::new(z, kappa).unwrap();
            let c = ChainState::new(sites, p).unwrap();
            let k = SystemKind::gaudin(p);
            let f = vector_field(&k, &c).unwrap();
            let n = c.len();
            for m in 1..=n {
                let v = cluster(&c, m).unwrap();
                let rate = cluster_jacobian(&c, m).unwrap().apply(&f);
                let dc = casimir_gradient(&p, &v.as_site()).dot(&rate);
                prop_assert!(dc.abs() <= 1e-11, "left m={} rate={}", m, dc);
            }
            for m in 1..n {
                // the complement is the leading cluster of the tail sub-chain
                let tail = ChainState::new(c.sites()[m..].to_vec(), p).unwrap();
                let v = cluster(&tail, n - m).unwrap();
                let rate = cluster_jacobian(&tail, n - m).unwrap().apply(&f[3 * m..]);
                let dc = casimir_gradient(&p, &v.as_site()).dot(&rate);
                prop_assert!(dc.abs() <= 1e-11, "right m={} rate={}", m, dc);
            }
            prop_assert_eq!(casimir_tower(&c).to_vec().len(), 2 * n - 1);
        }

        #[test]
        fn gaudin_cluster_rhs_matches_chain(
            z in -0.8..0.8f64, kappa in 0.0..1.5f64, sites in arb_sites(8)
        ) {
            let p = DeformParams::new(z, kappa).unwrap();
            let c = ChainState::new(sites, p).unwrap();
            let k = SystemKind::gaudin(p);
            let d = deltas(&c);
            for m in 1..=c.len() {
                let v = cluster(&c, m).unwrap();
                let rate = induced_cluster_rate(&k, &c, m).unwrap();
                let rhs = cluster_rhs_gaudin(&p, &v, &d);
                prop_assert!((rate - rhs).amax() <= 1e-11, "m={} diff={}", m, (rate - rhs).amax());
            }
        }

        #[test]
        fn qrs_cluster_rhs_matches_chain(z in -0.8..0.8f64, sites in arb_sites(8)) {
            let k = SystemKind::qrs(z);
            let c = ChainState::new(sites, k.params).unwrap();
            let d = conserved_deltas(&k, &c);
            let f = vector_field(&k, &c).unwrap();
            for m in 1..=c.len() {
                let v = cluster(&c, m).unwrap();
                let rate = cluster_jacobian(&c, m).unwrap().apply(&f);
                let rhs = cluster_rhs_qrs(&k.params, &v, d.d3, &d).unwrap();
                prop_assert!((rate - rhs).amax() <= 1e-11, "m={} diff={}", m, (rate - rhs).amax());
            }
            // conserved X-basis pair and linear drift of S3^(N)
            let n = c.len();
            let j = cluster_jacobian(&c, n).unwrap().apply(&f);
            let e = (0.5 * z * d.d3).exp();
            let v = cluster(&c, n).unwrap();
            let dxp = e * (j[1] + 0.5 * z * v.splus * j[0]);
            let dxm = e * (j[2] + 0.5 * z * v.sminus * j[0]);
            prop_assert!(dxp.abs() <= 1e-11 && dxm.abs() <= 1e-11);
            prop_assert!((j[0] - 2.0 * (d.dp - d.dm)).abs() <= 1e-11);
        }
    }
}
