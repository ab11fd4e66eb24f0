//! Matrix realization of the solvable group `G_z`.
//!
//! ```text
//!        ⎡ e^{-zA}    0      C ⎤
//! g_z =  ⎢    0    e^{-zA}   B ⎥
//!        ⎣    0       0      1 ⎦
//! ```
//!
//! With `(A, B, C) ↔ (S3, S+, S-)` the matrix product is the deformed
//! coproduct, so multiplying site matrices left to right gives the cluster
//! variables.

use nalgebra::{Matrix3, Matrix3x6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{structure_matrix, DeformParams, SiteState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub z: f64,
}

impl GroupElement {
    pub const fn new(a: f64, b: f64, c: f64, z: f64) -> Self {
        Self { a, b, c, z }
    }

    pub const fn identity(z: f64) -> Self {
        Self::new(0.0, 0.0, 0.0, z)
    }

    /// Element carrying one site's coordinates.
    pub fn from_site(s: &SiteState, z: f64) -> Self {
        Self::new(s.s3, s.splus, s.sminus, z)
    }

    pub fn to_site(&self) -> SiteState {
        SiteState::new(self.a, self.b, self.c)
    }
}

pub fn matrix_of(g: &GroupElement) -> Matrix3<f64> {
    let e = (-g.z * g.a).exp();
    Matrix3::new(
        e, 0.0, g.c, //
        0.0, e, g.b, //
        0.0, 0.0, 1.0,
    )
}

pub fn group_product(g1: &GroupElement, g2: &GroupElement) -> Result<GroupElement> {
    if g1.z != g2.z {
        return Err(Error::Domain(format!(
            "group elements belong to different groups (z = {} and z = {})",
            g1.z, g2.z
        )));
    }
    let e = (-g1.z * g1.a).exp();
    Ok(GroupElement::new(g1.a + g2.a, e * g2.b + g1.b, e * g2.c + g1.c, g1.z))
}

/// Ordered product `g_1 g_2 ⋯ g_n`; the identity for an empty slice.
pub fn product(z: f64, gs: &[GroupElement]) -> Result<GroupElement> {
    gs.iter()
        .try_fold(GroupElement::identity(z), |acc, g| group_product(&acc, g))
}

/// Lie algebra generators `(D, P1, P2)`.
pub fn lie_generators(z: f64) -> [Matrix3<f64>; 3] {
    let d = Matrix3::from_diagonal(&nalgebra::Vector3::new(-z, -z, 0.0));
    let mut p1 = Matrix3::zeros();
    p1[(1, 2)] = 1.0;
    let mut p2 = Matrix3::zeros();
    p2[(0, 2)] = 1.0;
    [d, p1, p2]
}

pub fn commutator(x: &Matrix3<f64>, y: &Matrix3<f64>) -> Matrix3<f64> {
    x * y - y * x
}

/// `∂(A, B, C)(g1 g2) / ∂(A1, B1, C1, A2, B2, C2)`.
fn product_jacobian(g1: &GroupElement, g2: &GroupElement) -> Matrix3x6<f64> {
    let z = g1.z;
    let e = (-z * g1.a).exp();
    #[rustfmt::skip]
    let k = Matrix3x6::new(
        1.0,             0.0, 0.0, 1.0, 0.0, 0.0,
        -z * e * g2.b,   1.0, 0.0, 0.0, e,   0.0,
        -z * e * g2.c,   0.0, 1.0, 0.0, 0.0, e,
    );
    k
}

/// Largest residual of `{Δf, Δg} = Δ{f, g}` over sampled pairs and all
/// generator pairs, for the bracket with parameters `p`.
pub fn poisson_lie_check(p: &DeformParams, sample_count: usize, seed: u64) -> Result<f64> {
    if sample_count == 0 {
        return Err(Error::Domain("sample_count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..sample_count {
        let mut draw = || {
            GroupElement::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                p.z,
            )
        };
        let (g1, g2) = (draw(), draw());
        let g12 = group_product(&g1, &g2)?;
        let k = product_jacobian(&g1, &g2);
        let k1 = k.fixed_columns::<3>(0);
        let k2 = k.fixed_columns::<3>(3);
        let lhs = k1 * structure_matrix(p, &g1.to_site()) * k1.transpose()
            + k2 * structure_matrix(p, &g2.to_site()) * k2.transpose();
        let rhs = structure_matrix(p, &g12.to_site());
        worst = worst.max((lhs - rhs).amax());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{cluster, ChainState};
    use proptest::prelude::*;

    fn arb_elem(z: f64) -> impl Strategy<Value = GroupElement> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(move |(a, b, c)| GroupElement::new(a, b, c, z))
    }

    #[test]
    fn matrix_examples() {
        assert_eq!(matrix_of(&GroupElement::identity(0.7)), Matrix3::identity());
        let m = matrix_of(&GroupElement::new(3.0, 2.0, -1.0, 0.0));
        assert_eq!(m, Matrix3::new(1.0, 0.0, -1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 1.0));
        let g = GroupElement::new(0.4, 1.0, 2.0, 0.9);
        assert!((matrix_of(&g).determinant() - (-2.0f64 * 0.9 * 0.4).exp()).abs() < 1e-15);
    }

    #[test]
    fn product_examples() {
        let g = GroupElement::new(0.4, 1.0, 2.0, 1.0);
        assert_eq!(group_product(&g, &GroupElement::identity(1.0)).unwrap(), g);
        let g1 = GroupElement::new(0.0, 1.0, 2.0, 1.0);
        let g2 = GroupElement::new(0.5, 3.0, -4.0, 1.0);
        let g = group_product(&g1, &g2).unwrap();
        assert_eq!((g.a, g.b, g.c), (0.5, 4.0, -2.0));
        assert!(group_product(&g1, &GroupElement::identity(0.5)).is_err());
    }

    #[test]
    fn generator_relations() {
        let z = 0.37;
        let [d, p1, p2] = lie_generators(z);
        assert_eq!(commutator(&p1, &p2), Matrix3::zeros());
        assert_eq!(commutator(&d, &p1), -z * p1);
        assert_eq!(commutator(&d, &p2), -z * p2);
    }

    #[test]
    fn dilation_subgroup_is_exponential() {
        let z = 0.8;
        let [d, _, _] = lie_generators(z);
        for a in [-1.5, 0.3, 2.0] {
            let e = (d * a).exp();
            assert!((e - matrix_of(&GroupElement::new(a, 0.0, 0.0, z))).amax() < 1e-14);
        }
    }

    #[test]
    fn poisson_lie_examples() {
        assert!(poisson_lie_check(&DeformParams::sl2(), 50, 1).unwrap() <= 1e-14);
        assert!(poisson_lie_check(&DeformParams::q_poincare(0.63), 50, 2).unwrap() <= 1e-12);
        assert!(poisson_lie_check(&DeformParams::slq2(-0.41), 50, 3).unwrap() <= 1e-12);
        assert!(poisson_lie_check(&DeformParams::sl2(), 0, 1).is_err());
    }

    #[test]
    fn poisson_lie_many_seeds() {
        for seed in 0..100 {
            for p in [
                DeformParams::sl2(),
                DeformParams::slq2(0.5),
                DeformParams::q_poincare(0.5),
            ] {
                assert!(poisson_lie_check(&p, 5, seed).unwrap() <= 1e-12, "{p:?} seed {seed}");
            }
        }
    }

    proptest! {
        #[test]
        fn associative(z in -1.0..1.0f64, a in arb_elem(0.0), b in arb_elem(0.0), c in arb_elem(0.0)) {
            let set = |e: GroupElement| GroupElement { z, ..e };
            let (a, b, c) = (set(a), set(b), set(c));
            let l = group_product(&a, &group_product(&b, &c).unwrap()).unwrap();
            let r = group_product(&group_product(&a, &b).unwrap(), &c).unwrap();
            prop_assert!((l.a - r.a).abs() <= 1e-14);
            prop_assert!((l.b - r.b).abs() <= 1e-14 * (1.0 + l.b.abs()));
            prop_assert!((l.c - r.c).abs() <= 1e-14 * (1.0 + l.c.abs()));
        }

        #[test]
        fn product_matches_matrix_product(z in -1.0..1.0f64, a in arb_elem(0.0), b in arb_elem(0.0)) {
            let a = GroupElement { z, ..a };
            let b = GroupElement { z, ..b };
            let m = matrix_of(&a) * matrix_of(&b);
            prop_assert!((m - matrix_of(&group_product(&a, &b).unwrap())).amax() <= 1e-14);
        }

        #[test]
        fn product_is_cluster(z in -1.0..1.0f64,
                              sites in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..10)) {
            let sites: Vec<SiteState> = sites.into_iter().map(|(a, b, c)| SiteState::new(a, b, c)).collect();
            let chain = ChainState::new(sites.clone(), DeformParams::slq2(z)).unwrap();
            for n in 1..=sites.len() {
                let gs: Vec<GroupElement> = sites[..n].iter().map(|s| GroupElement::from_site(s, z)).collect();
                let g = product(z, &gs).unwrap();
                let v = cluster(&chain, n).unwrap();
                prop_assert!((g.a - v.s3).abs() <= 1e-13);
                prop_assert!((g.b - v.splus).abs() <= 1e-13);
                prop_assert!((g.c - v.sminus).abs() <= 1e-13);
            }
        }
    }
}
