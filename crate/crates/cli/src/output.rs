//! Trajectory files: CSV table, JSON document and SVG charts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use qgaudin_core::integrate::{InvariantSample, StepStats};
use qgaudin_core::{ChainState, ClusterVars, SiteState, Trajectory};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// 17 significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header `t, s3m_{m}, sp_{m}, sm_{m} ..., C_{m} ..., delta3, deltap, deltam, H`
/// and one row per sample.
pub fn trajectory_csv(tr: &Trajectory) -> CliResult<String> {
    let ms = &tr.tracked;
    let mut out = String::from("t");
    for m in ms {
        let _ = write!(out, ",s3m_{m},sp_{m},sm_{m}");
    }
    for m in ms {
        let _ = write!(out, ",C_{m}");
    }
    out.push_str(",delta3,deltap,deltam,H\n");
    let series: Vec<Vec<ClusterVars>> = ms.iter().map(|&m| tr.cluster_series(m)).collect::<Result<_, _>>()?;
    for (i, t) in tr.times.iter().enumerate() {
        out.push_str(&num(*t));
        for s in &series {
            let v = s[i];
            for x in [v.s3, v.splus, v.sminus] {
                out.push(',');
                out.push_str(&num(x));
            }
        }
        let inv = &tr.invariant_track[i];
        for &m in ms {
            out.push(',');
            out.push_str(&num(inv.tower[m - 1]));
        }
        for x in [inv.deltas.d3, inv.deltas.dp, inv.deltas.dm, inv.energy] {
            out.push(',');
            out.push_str(&num(x));
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSeries {
    pub m: usize,
    /// `[s3, s+, s-]` per sample.
    pub values: Vec<[f64; 3]>,
}

/// JSON layout of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub config: RunConfig,
    pub times: Vec<f64>,
    /// Per sample, `[s3, s+, s-]` per site.
    pub sites: Vec<Vec<[f64; 3]>>,
    pub clusters: Vec<ClusterSeries>,
    pub invariants: Vec<InvariantSample>,
    pub stats: StepStats,
}

impl TrajectoryFile {
    pub fn new(config: &RunConfig, tr: &Trajectory) -> CliResult<Self> {
        let clusters = tr
            .tracked
            .iter()
            .map(|&m| {
                Ok(ClusterSeries { m, values: tr.cluster_series(m)?.iter().map(|v| v.to_array()).collect() })
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            times: tr.times.clone(),
            sites: tr.states.iter().map(|c| c.sites().iter().map(|s| s.to_array()).collect()).collect(),
            clusters,
            invariants: tr.invariant_track.clone(),
            stats: tr.stats,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("trajectory serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Io(format!("bad trajectory JSON: {e}")))
    }

    /// Rebuilds the in-memory trajectory.
    pub fn to_trajectory(&self) -> CliResult<Trajectory> {
        self.config.validate()?;
        let system = self.config.system_kind();
        let states = self
            .sites
            .iter()
            .map(|row| ChainState::new(row.iter().map(|&a| SiteState::from_array(a)).collect(), system.params))
            .collect::<Result<Vec<_>, _>>()?;
        let tracked: Vec<usize> = self.clusters.iter().map(|c| c.m).collect();
        let cluster_track = (!tracked.is_empty()).then(|| {
            (0..self.times.len())
                .map(|i| {
                    self.clusters
                        .iter()
                        .map(|c| {
                            let [s3, sp, sm] = c.values[i];
                            ClusterVars::new(c.m, s3, sp, sm)
                        })
                        .collect()
                })
                .collect()
        });
        Ok(Trajectory {
            system,
            times: self.times.clone(),
            states,
            tracked,
            cluster_track,
            invariant_track: self.invariants.clone(),
            stats: self.stats,
        })
    }
}

const W: f64 = 720.0;
const H: f64 = 420.0;
const PAD_L: f64 = 70.0;
const PAD_R: f64 = 110.0;
const PAD_Y: f64 = 40.0;

/// Line chart of the three cluster coordinates against time.
pub fn cluster_svg(title: &str, times: &[f64], series: &[ClusterVars]) -> String {
    let lines: [(&str, &str, Vec<f64>); 3] = [
        ("S3", "#1f77b4", series.iter().map(|v| v.s3).collect()),
        ("S+", "#d62728", series.iter().map(|v| v.splus).collect()),
        ("S-", "#2ca02c", series.iter().map(|v| v.sminus).collect()),
    ];
    let (t0, t1) = (times.first().copied().unwrap_or(0.0), times.last().copied().unwrap_or(1.0));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, _, ys) in &lines {
        for &y in ys.iter().filter(|y| y.is_finite()) {
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let tspan = if t1 > t0 { t1 - t0 } else { 1.0 };
    let px = |t: f64| PAD_L + (t - t0) / tspan * (W - PAD_L - PAD_R);
    let py = |y: f64| H - PAD_Y - (y - lo) / (hi - lo) * (H - 2.0 * PAD_Y);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r##"<rect x="{PAD_L}" y="{PAD_Y}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - PAD_L - PAD_R,
        H - 2.0 * PAD_Y
    );
    for (y, label) in [(lo, lo), (hi, hi), (0.5 * (lo + hi), 0.5 * (lo + hi))] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label:.4}</text>"#,
            PAD_L - 6.0,
            py(y) + 4.0
        );
    }
    for t in [t0, 0.5 * (t0 + t1), t1] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t:.3}</text>"#, px(t), H - PAD_Y + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t</text>"#, px(0.5 * (t0 + t1)), H - 6.0);
    for (k, (name, color, ys)) in lines.iter().enumerate() {
        let mut pts = String::new();
        for (t, y) in times.iter().zip(ys).filter(|(_, y)| y.is_finite()) {
            let _ = write!(pts, "{:.2},{:.2} ", px(*t), py(*y));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = PAD_Y + 20.0 * k as f64 + 10.0;
        let lx = W - PAD_R + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 24.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{name}</text>"#, lx + 30.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use qgaudin_core::integrate::integrate;

    fn small_run() -> (RunConfig, Trajectory) {
        let mut t = toml::Table::new();
        for s in ["system=qcg", "n_sites=3", "integrator.t1=0.5", "integrator.sample_every=0.25"] {
            crate::config::apply_set(&mut t, s).unwrap();
        }
        let cfg = RunConfig::from_table(t).unwrap();
        let tr = integrate(&cfg.system_kind(), &cfg.initial_chain().unwrap(), &cfg.integrator_config()).unwrap();
        (cfg, tr)
    }

    #[test]
    fn csv_layout() {
        let (_, tr) = small_run();
        let csv = trajectory_csv(&tr).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,s3m_1,sp_1,sm_1,s3m_2,sp_2,sm_2,s3m_3,sp_3,sm_3,C_1,C_2,C_3,delta3,deltap,deltam,H"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 3);
        for row in rows {
            let cells: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(cells.len(), 17);
        }
        let first = csv.lines().nth(2).unwrap().split(',').nth(1).unwrap();
        let back: f64 = first.parse().unwrap();
        assert_eq!(back, tr.cluster_series(1).unwrap()[1].s3);
    }

    #[test]
    fn json_round_trip() {
        let (cfg, tr) = small_run();
        let text = TrajectoryFile::new(&cfg, &tr).unwrap().to_json();
        let back = TrajectoryFile::from_json(&text).unwrap();
        assert_eq!(back.config, cfg);
        assert_eq!(back.to_trajectory().unwrap(), tr);
    }

    #[test]
    fn svg_is_well_formed() {
        let (_, tr) = small_run();
        let svg = cluster_svg("m = 2", &tr.times, &tr.cluster_series(2).unwrap());
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 3);
    }
}
