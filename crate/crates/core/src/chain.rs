//! N-fold tensor-product states and cluster variables.
//!
//! The m-site cluster variables are the iterated deformed coproduct
//! evaluated on the first `m` sites,
//!
//! ```text
//! S3^(m) = Σ_{i≤m} s3_i
//! S±^(m) = Σ_{i≤m} e^{-z P_i} s±_i,     P_i = Σ_{j<i} s3_j
//! ```
//!
//! and the complementary variables apply the same fold to sites `m+1..N`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::algebra::{casimir, DeformParams, SiteState};
use crate::error::{Error, Result};

/// Chains longer than this use compensated prefix sums.
pub const COMPENSATED_THRESHOLD: usize = 1000;

/// Phase point of N copies of the algebra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    sites: Vec<SiteState>,
    params: DeformParams,
}

impl ChainState {
    pub fn new(sites: Vec<SiteState>, params: DeformParams) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Domain("a chain needs at least one site".into()));
        }
        if let Some(i) = sites.iter().position(|s| !s.is_finite()) {
            return Err(Error::Domain(format!("site {} is not finite", i + 1)));
        }
        Ok(Self { sites, params })
    }

    /// Builds a chain from a flat `[s3_1, s+_1, s-_1, s3_2, ...]` slice.
    pub fn from_flat(flat: &[f64], params: DeformParams) -> Result<Self> {
        if flat.len() % 3 != 0 {
            return Err(Error::Domain(format!(
                "flat state length {} is not a multiple of 3",
                flat.len()
            )));
        }
        let sites = flat
            .chunks_exact(3)
            .map(|c| SiteState::new(c[0], c[1], c[2]))
            .collect();
        Self::new(sites, params)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.sites.iter().flat_map(|s| s.to_array()).collect()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[SiteState] {
        &self.sites
    }

    pub fn params(&self) -> &DeformParams {
        &self.params
    }

    pub fn with_params(&self, params: DeformParams) -> Self {
        Self { sites: self.sites.clone(), params }
    }
}

/// Collective variables of an m-site block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterVars {
    pub m: usize,
    pub s3: f64,
    pub splus: f64,
    pub sminus: f64,
}

impl ClusterVars {
    pub fn new(m: usize, s3: f64, splus: f64, sminus: f64) -> Self {
        Self { m, s3, splus, sminus }
    }

    pub fn as_site(&self) -> SiteState {
        SiteState::new(self.s3, self.splus, self.sminus)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.s3, self.splus, self.sminus)
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.s3, self.splus, self.sminus]
    }

    /// Largest componentwise absolute difference.
    pub fn max_abs_diff(&self, other: &ClusterVars) -> f64 {
        (self.to_vector() - other.to_vector()).amax()
    }
}

/// The N-site coproducts of the generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub d3: f64,
    pub dp: f64,
    pub dm: f64,
}

impl Deltas {
    pub fn new(d3: f64, dp: f64, dm: f64) -> Self {
        Self { d3, dp, dm }
    }

    pub fn as_site(&self) -> SiteState {
        SiteState::new(self.d3, self.dp, self.dm)
    }
}

impl From<ClusterVars> for Deltas {
    fn from(c: ClusterVars) -> Self {
        Self::new(c.s3, c.splus, c.sminus)
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Deformed coproduct of a run of sites, `[S3, S+, S-]`.
pub(crate) fn fold_sites(z: f64, sites: &[SiteState]) -> [f64; 3] {
    if sites.len() > COMPENSATED_THRESHOLD {
        let mut p = CompensatedSum::default();
        let mut sp = CompensatedSum::default();
        let mut sm = CompensatedSum::default();
        for s in sites {
            let w = (-z * p.value()).exp();
            sp.add(w * s.splus);
            sm.add(w * s.sminus);
            p.add(s.s3);
        }
        [p.value(), sp.value(), sm.value()]
    } else {
        let (mut p, mut sp, mut sm) = (0.0, 0.0, 0.0);
        for s in sites {
            let w = (-z * p).exp();
            sp += w * s.splus;
            sm += w * s.sminus;
            p += s.s3;
        }
        [p, sp, sm]
    }
}

fn check_m(n: usize, m: usize, hi: usize) -> Result<()> {
    if m == 0 || m > hi {
        return Err(Error::Domain(format!(
            "cluster size m = {m} out of range 1..={hi} for a chain of N = {n} sites"
        )));
    }
    Ok(())
}

/// Cluster variables of the first `m` sites.
pub fn cluster(c: &ChainState, m: usize) -> Result<ClusterVars> {
    check_m(c.len(), m, c.len())?;
    let [s3, sp, sm] = fold_sites(c.params.z, &c.sites[..m]);
    Ok(ClusterVars::new(m, s3, sp, sm))
}

/// Cluster variables of sites `m+1..N`, labelled `N - m`.
pub fn complementary_cluster(c: &ChainState, m: usize) -> Result<ClusterVars> {
    let n = c.len();
    if n < 2 {
        return Err(Error::Domain(
            "complementary clusters need a chain of at least 2 sites".into(),
        ));
    }
    check_m(n, m, n - 1)?;
    let [s3, sp, sm] = fold_sites(c.params.z, &c.sites[m..]);
    Ok(ClusterVars::new(n - m, s3, sp, sm))
}

pub fn deltas(c: &ChainState) -> Deltas {
    let [s3, sp, sm] = fold_sites(c.params.z, &c.sites);
    Deltas::new(s3, sp, sm)
}

/// Two-block coproduct: `S3 = L3 + R3`, `S± = e^{-z L3} R± + L±`.
pub fn compose(z: f64, left: &ClusterVars, right: &ClusterVars) -> ClusterVars {
    let w = (-z * left.s3).exp();
    ClusterVars::new(
        left.m + right.m,
        left.s3 + right.s3,
        w * right.splus + left.splus,
        w * right.sminus + left.sminus,
    )
}

/// `∂(S3^(m), S+^(m), S-^(m)) / ∂(site k)` for every site of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterJacobian {
    pub m: usize,
    blocks: Vec<Matrix3<f64>>,
}

impl ClusterJacobian {
    /// 3×3 block for site `k` (0-based).
    pub fn block(&self, k: usize) -> &Matrix3<f64> {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[Matrix3<f64>] {
        &self.blocks
    }

    /// Jacobian applied to a flat 3N tangent vector.
    pub fn apply(&self, v: &[f64]) -> Vector3<f64> {
        self.blocks
            .iter()
            .zip(v.chunks_exact(3))
            .map(|(b, c)| b * Vector3::new(c[0], c[1], c[2]))
            .sum()
    }

    /// Pulls a cluster-space covector back to a flat 3N gradient.
    pub fn pull_back(&self, g: &Vector3<f64>) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| {
                let r = b.transpose() * g;
                [r[0], r[1], r[2]]
            })
            .collect()
    }
}

pub fn cluster_jacobian(c: &ChainState, m: usize) -> Result<ClusterJacobian> {
    check_m(c.len(), m, c.len())?;
    let z = c.params.z;
    let mut weights = Vec::with_capacity(m);
    let mut p = 0.0;
    for s in &c.sites[..m] {
        weights.push((-z * p).exp());
        p += s.s3;
    }
    let mut blocks = vec![Matrix3::zeros(); c.len()];
    // suffix sums over i > k of e^{-z P_i} s±_i
    let (mut tail_p, mut tail_m) = (0.0, 0.0);
    for k in (0..m).rev() {
        let w = weights[k];
        blocks[k] = Matrix3::new(
            1.0, 0.0, 0.0, //
            -z * tail_p, w, 0.0, //
            -z * tail_m, 0.0, w,
        );
        tail_p += w * c.sites[k].splus;
        tail_m += w * c.sites[k].sminus;
    }
    Ok(ClusterJacobian { m, blocks })
}

/// Left Casimirs `C^(m)` (m = 1..N) and complementary `C^(N-m)` (m = 1..N-1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasimirTower {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl CasimirTower {
    /// The `2N - 1` values, left block first.
    pub fn to_vec(&self) -> Vec<f64> {
        self.left.iter().chain(&self.right).copied().collect()
    }
}

pub fn casimir_tower(c: &ChainState) -> CasimirTower {
    let p = c.params;
    let n = c.len();
    let z = p.z;
    // one compensated forward sweep for the left blocks
    let mut left = Vec::with_capacity(n);
    let (mut s3, mut sp, mut sm) = (
        CompensatedSum::default(),
        CompensatedSum::default(),
        CompensatedSum::default(),
    );
    for s in &c.sites {
        let w = (-z * s3.value()).exp();
        sp.add(w * s.splus);
        sm.add(w * s.sminus);
        s3.add(s.s3);
        left.push(casimir(&p, &SiteState::new(s3.value(), sp.value(), sm.value())));
    }
    // right blocks grow leftwards: R_{m} = site_{m+1} · R_{m+1}
    let mut right = vec![0.0; n.saturating_sub(1)];
    let mut acc = ClusterVars::new(0, 0.0, 0.0, 0.0);
    for m in (1..n).rev() {
        let s = c.sites[m];
        acc = compose(z, &ClusterVars::new(1, s.s3, s.splus, s.sminus), &acc);
        right[m - 1] = casimir(&p, &acc.as_site());
    }
    CasimirTower { left, right }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain(z: f64, sites: &[[f64; 3]]) -> ChainState {
        ChainState::new(
            sites.iter().copied().map(SiteState::from).collect(),
            DeformParams::slq2(z),
        )
        .unwrap()
    }

    fn arb_chain(max_n: usize) -> impl Strategy<Value = ChainState> {
        (
            -1.0..1.0f64,
            proptest::collection::vec((-1.5..1.5f64, -1.5..1.5f64, -1.5..1.5f64), 2..max_n),
        )
            .prop_map(|(z, v)| {
                let sites = v.into_iter().map(|(a, b, c)| SiteState::new(a, b, c)).collect();
                ChainState::new(sites, DeformParams::slq2(z)).unwrap()
            })
    }

    #[test]
    fn first_cluster_is_first_site() {
        let c = chain(0.7, &[[0.3, -1.0, 2.0], [1.0, 1.0, 1.0]]);
        let v = cluster(&c, 1).unwrap();
        assert_eq!(v.as_site(), c.sites()[0]);
    }

    #[test]
    fn undeformed_cluster_is_a_sum() {
        let c = chain(0.0, &[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]);
        let v = cluster(&c, 3).unwrap();
        assert_eq!(v.to_array(), [12.0, 15.0, 18.0]);
        let r = complementary_cluster(&c, 1).unwrap();
        assert_eq!((r.m, r.to_array()), (2, [11.0, 13.0, 15.0]));
    }

    #[test]
    fn two_site_deformed_cluster() {
        // s+ = 2 + 3 e^{-0.1}
        let c = chain(0.1, &[[1.0, 2.0, 0.0], [0.0, 3.0, 0.0]]);
        let v = cluster(&c, 2).unwrap();
        assert_eq!(v.s3, 1.0);
        assert!((v.splus - (2.0 + 3.0 * (-0.1f64).exp())).abs() < 1e-15);
        assert_eq!(v.sminus, 0.0);
        assert_eq!(Deltas::from(v), deltas(&c));
    }

    #[test]
    fn complementary_of_two_sites_is_second_site() {
        let c = chain(0.4, &[[0.3, -1.0, 2.0], [1.0, 0.5, 0.25]]);
        let r = complementary_cluster(&c, 1).unwrap();
        assert_eq!(r.as_site(), c.sites()[1]);
    }

    #[test]
    fn out_of_range_m_is_rejected() {
        let c = chain(0.1, &[[1.0, 2.0, 0.0], [0.0, 3.0, 0.0]]);
        assert!(matches!(cluster(&c, 0), Err(Error::Domain(_))));
        assert!(matches!(cluster(&c, 3), Err(Error::Domain(_))));
        assert!(matches!(complementary_cluster(&c, 2), Err(Error::Domain(_))));
        assert!(cluster_jacobian(&c, 3).is_err());
        let msg = cluster(&c, 5).unwrap_err().to_string();
        assert!(msg.contains("1..=2"), "{msg}");
    }

    #[test]
    fn tower_examples() {
        let single = chain(0.3, &[[0.5, 1.0, -2.0]]);
        let t = casimir_tower(&single);
        assert_eq!(t.to_vec().len(), 1);
        assert_eq!(t.left[0], casimir(single.params(), &single.sites()[0]));

        let c = chain(0.0, &[[2.0, 0.0, 0.0], [0.0, 1.0, 1.0]]);
        assert_eq!(casimir_tower(&c).to_vec(), vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn jacobian_simple_cases() {
        let c = chain(0.0, &[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let j = cluster_jacobian(&c, 2).unwrap();
        for k in 0..2 {
            assert_eq!(*j.block(k), Matrix3::identity());
        }
        let c = chain(0.6, &[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let j = cluster_jacobian(&c, 1).unwrap();
        assert_eq!(*j.block(0), Matrix3::identity());
        assert_eq!(*j.block(1), Matrix3::zeros());
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let c = chain(
            0.45,
            &[[0.3, -0.7, 1.1], [-0.9, 0.4, 0.2], [0.5, 1.3, -0.6], [0.1, -0.2, 0.8]],
        );
        let h = 1e-6;
        for m in 1..=4 {
            let j = cluster_jacobian(&c, m).unwrap();
            let base = c.to_flat();
            for col in 0..base.len() {
                let mut a = base.clone();
                let mut b = base.clone();
                a[col] += h;
                b[col] -= h;
                let fa = cluster(&ChainState::from_flat(&a, *c.params()).unwrap(), m).unwrap();
                let fb = cluster(&ChainState::from_flat(&b, *c.params()).unwrap(), m).unwrap();
                let fd = (fa.to_vector() - fb.to_vector()) / (2.0 * h);
                let exact = j.block(col / 3).column(col % 3).into_owned();
                for r in 0..3 {
                    let scale = exact[r].abs().max(1.0);
                    assert!((fd[r] - exact[r]).abs() <= 1e-6 * scale, "m={m} col={col} row={r}");
                }
            }
        }
    }

    #[test]
    fn compensated_branch_agrees_with_plain_sum() {
        let n = COMPENSATED_THRESHOLD + 500;
        let sites: Vec<SiteState> = (0..n)
            .map(|i| {
                let x = i as f64;
                SiteState::new((0.37 * x).sin() * 1e-3, (0.11 * x).cos(), (0.05 * x).sin())
            })
            .collect();
        let z = 0.2f64;
        let plain = {
            let (mut p, mut sp, mut sm) = (0.0, 0.0, 0.0);
            for s in &sites {
                let w = (-z * p).exp();
                sp += w * s.splus;
                sm += w * s.sminus;
                p += s.s3;
            }
            [p, sp, sm]
        };
        let comp = fold_sites(z, &sites);
        for k in 0..3 {
            assert!((plain[k] - comp[k]).abs() <= 1e-10 * plain[k].abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn tower_matches_direct_clusters(c in arb_chain(9)) {
            let t = casimir_tower(&c);
            let p = *c.params();
            for m in 1..=c.len() {
                let v = casimir(&p, &cluster(&c, m).unwrap().as_site());
                prop_assert!((t.left[m - 1] - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
            for m in 1..c.len() {
                let v = casimir(&p, &complementary_cluster(&c, m).unwrap().as_site());
                prop_assert!((t.right[m - 1] - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }

        #[test]
        fn composition_is_split_independent(c in arb_chain(9)) {
            let z = c.params().z;
            let whole = cluster(&c, c.len()).unwrap();
            for m in 1..c.len() {
                let l = cluster(&c, m).unwrap();
                let r = complementary_cluster(&c, m).unwrap();
                let comp = compose(z, &l, &r);
                prop_assert_eq!(comp.m, c.len());
                prop_assert!(comp.max_abs_diff(&whole) <= 1e-13 * (1.0 + whole.to_vector().amax()));
            }
        }

        #[test]
        fn cluster_ignores_later_sites(c in arb_chain(8), bump in -5.0..5.0f64) {
            for m in 1..c.len() {
                let mut flat = c.to_flat();
                for x in flat.iter_mut().skip(3 * m) {
                    *x += bump;
                }
                let moved = ChainState::from_flat(&flat, *c.params()).unwrap();
                prop_assert_eq!(cluster(&c, m).unwrap(), cluster(&moved, m).unwrap());
            }
        }
    }
}
