//! Reproducible random initial chains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{casimir, DeformParams, SiteState};
use crate::chain::{cluster, complementary_cluster, deltas, ChainState};
use crate::closedform::QcgFlow;
use crate::error::{Error, Result};

/// Uniform sampling box for each site coordinate.
///
/// The default keeps `s+ > 0 > s-`, which gives bounded orbits for the
/// deformed Gaudin systems at moderate `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteRanges {
    pub s3: (f64, f64),
    pub splus: (f64, f64),
    pub sminus: (f64, f64),
}

impl Default for SiteRanges {
    fn default() -> Self {
        Self { s3: (-1.0, 1.0), splus: (0.1, 1.0), sminus: (-1.0, -0.1) }
    }
}

impl SiteRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("s3", self.s3), ("splus", self.splus), ("sminus", self.sminus)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Domain(format!("bad sampling range for {name}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// `n` sites drawn uniformly from `ranges` with a ChaCha8 stream.
pub fn random_chain(n: usize, params: DeformParams, ranges: &SiteRanges, seed: u64) -> Result<ChainState> {
    ranges.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = (0..n)
        .map(|_| {
            let s3 = draw(&mut rng, ranges.s3);
            let sp = draw(&mut rng, ranges.splus);
            let sm = draw(&mut rng, ranges.sminus);
            SiteState::new(s3, sp, sm)
        })
        .collect();
    ChainState::new(sites, params)
}

/// Rescales every `s-` by a common factor so that the total Casimir
/// `C^(N)` equals `target`.
///
/// `C^(N) = κ K(δ3) + δ+ δ- e^{z δ3}` and only `δ-` scales, so the factor is
/// `(target - κ K(δ3)) / (δ+ δ- e^{z δ3})`.
pub fn scale_to_energy(c: &ChainState, target: f64) -> Result<ChainState> {
    let p = *c.params();
    let d = deltas(c);
    let ladder = d.dp * d.dm * (p.z * d.d3).exp();
    if ladder.abs() < 1e-14 {
        return Err(Error::Degenerate(
            "delta+ delta- vanishes; the energy cannot be reached by scaling s-".into(),
        ));
    }
    let base = casimir(&p, &SiteState::new(d.d3, 0.0, 0.0));
    let lambda = (target - base) / ladder;
    let sites = c
        .sites()
        .iter()
        .map(|s| SiteState::new(s.s3, s.splus, lambda * s.sminus))
        .collect();
    ChainState::new(sites, p)
}

/// Up to `count` chains on the surface `C^(N) = target` whose deformed
/// Gaudin cluster orbits are periodic and pole-free.
///
/// Seeds are tried in order from `first_seed`; each candidate is kept only if
/// every leading cluster `m < N` has a periodic closed-form orbit along
/// which `S3^(m)` stays finite. Returns `(seed, chain)` pairs.
pub fn regular_chains_on_surface(
    n: usize,
    params: DeformParams,
    ranges: &SiteRanges,
    target: f64,
    count: usize,
    first_seed: u64,
) -> Result<Vec<(u64, ChainState)>> {
    const MAX_TRIES: u64 = 1000;
    let mut out = Vec::with_capacity(count);
    for seed in first_seed..first_seed + MAX_TRIES {
        if out.len() == count {
            break;
        }
        let c = scale_to_energy(&random_chain(n, params, ranges, seed)?, target)?;
        if periodic_and_regular(&c) {
            out.push((seed, c));
        }
    }
    if out.len() < count {
        return Err(Error::Domain(format!(
            "found only {} regular chains on C = {target} in {MAX_TRIES} seeds",
            out.len()
        )));
    }
    Ok(out)
}

fn periodic_and_regular(c: &ChainState) -> bool {
    let p = *c.params();
    let d = deltas(c);
    (1..c.len()).all(|m| {
        let (Ok(v), Ok(r)) = (cluster(c, m), complementary_cluster(c, m)) else {
            return false;
        };
        let cm = casimir(&p, &v.as_site());
        let cnm = casimir(&p, &r.as_site());
        match QcgFlow::fit(&p, &d, &v, cm, cnm, 0.0) {
            Ok(f) => f.period().is_some_and(|t| f.stays_regular(t, 2000)),
            Err(_) => false,
        }
    })
}
