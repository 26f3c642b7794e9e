//! k-space sampling trajectories.
//!
//! Coordinates are in radians, `[-pi, pi]` on both axes, stored spoke-major.
//! Golden-angle radial spokes pass through the k-space centre; spoke `s` lies
//! at angle `(start_index + s) * 68.25 deg` measured from the `+k_x` axis.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rawio;

/// Small golden angle, in degrees.
pub const SMALL_GOLDEN_ANGLE_DEG: f64 = 68.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrajectoryKind {
    GoldenAngleRadial { start_index: usize },
    /// Full Cartesian grid: one "spoke" per k_y row.
    Cartesian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    points: Vec<[f64; 2]>,
    n_spokes: usize,
    points_per_spoke: usize,
    kind: TrajectoryKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrajectorySidecar {
    n_spokes: usize,
    points_per_spoke: usize,
    #[serde(flatten)]
    kind: TrajectoryKind,
}

impl Trajectory {
    /// Golden-angle radial trajectory: point `p` of spoke `s` has radius
    /// `p * 2pi/(N_p - 1) - pi`.
    pub fn golden_angle_radial(n_spokes: usize, points_per_spoke: usize, start_index: usize) -> Result<Self> {
        if n_spokes == 0 {
            return Err(Error::InvalidArgument("n_spokes must be at least 1".into()));
        }
        if points_per_spoke < 2 {
            return Err(Error::InvalidArgument(format!(
                "points_per_spoke must be at least 2, got {points_per_spoke}"
            )));
        }
        let mut points = Vec::with_capacity(n_spokes * points_per_spoke);
        for s in 0..n_spokes {
            let theta = spoke_angle(start_index + s);
            let (sin, cos) = theta.sin_cos();
            for p in 0..points_per_spoke {
                let r = spoke_radius(p, points_per_spoke);
                points.push([r * cos, r * sin]);
            }
        }
        Ok(Self {
            points,
            n_spokes,
            points_per_spoke,
            kind: TrajectoryKind::GoldenAngleRadial { start_index },
        })
    }

    /// All `side x side` integer frequencies `2 pi j / side`, `j` in `[-side/2, side/2)`,
    /// ordered with `k_y` rows outermost.
    pub fn cartesian(side: usize) -> Result<Self> {
        if side < 2 || !side.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("cartesian side must be even, got {side}")));
        }
        let half = (side / 2) as i64;
        let step = 2.0 * PI / side as f64;
        let mut points = Vec::with_capacity(side * side);
        for jy in -half..half {
            for jx in -half..half {
                points.push([jx as f64 * step, jy as f64 * step]);
            }
        }
        Ok(Self {
            points,
            n_spokes: side,
            points_per_spoke: side,
            kind: TrajectoryKind::Cartesian,
        })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_spokes(&self) -> usize {
        self.n_spokes
    }

    pub fn points_per_spoke(&self) -> usize {
        self.points_per_spoke
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    /// Signed radial coordinate of every sample (radial trajectories only).
    pub fn radial_coordinates(&self) -> Option<Vec<f64>> {
        match self.kind {
            TrajectoryKind::GoldenAngleRadial { .. } => Some(
                (0..self.len())
                    .map(|i| spoke_radius(i % self.points_per_spoke, self.points_per_spoke))
                    .collect(),
            ),
            TrajectoryKind::Cartesian => None,
        }
    }

    /// Writes `path` (raw float64 pairs) and `path.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let flat: Vec<f64> = self.points.iter().flat_map(|p| [p[0], p[1]]).collect();
        let meta = serde_json::to_value(TrajectorySidecar {
            n_spokes: self.n_spokes,
            points_per_spoke: self.points_per_spoke,
            kind: self.kind,
        })
        .map_err(|e| Error::json(path, e))?;
        rawio::write_f64(path, &flat, &[self.len(), 2], meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (flat, sidecar) = rawio::read_f64(path)?;
        let meta: TrajectorySidecar =
            serde_json::from_value(sidecar.meta.clone()).map_err(|e| Error::json(path, e))?;
        let traj = match meta.kind {
            TrajectoryKind::GoldenAngleRadial { start_index } => {
                Self::golden_angle_radial(meta.n_spokes, meta.points_per_spoke, start_index)?
            }
            TrajectoryKind::Cartesian => Self::cartesian(meta.points_per_spoke)?,
        };
        let stored: Vec<[f64; 2]> = flat.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
        if stored != traj.points {
            return Err(Error::format(path, "stored points disagree with sidecar parameters"));
        }
        Ok(traj)
    }
}

/// Signed radius of sample `p` on a spoke of `n_points` samples.
pub fn spoke_radius(p: usize, n_points: usize) -> f64 {
    // The last sample is pinned to +pi; p * dr - pi can land one ulp past it.
    if p + 1 == n_points {
        PI
    } else {
        p as f64 * (2.0 * PI / (n_points - 1) as f64) - PI
    }
}

/// Angle of spoke `index` in radians; not reduced modulo 2 pi.
pub fn spoke_angle(index: usize) -> f64 {
    (index as f64 * SMALL_GOLDEN_ANGLE_DEG).to_radians()
}

/// Radial acceleration factor `sqrt(N) / N_s`.
pub fn acceleration_factor(image_side: usize, n_spokes: usize) -> Result<f64> {
    if n_spokes == 0 {
        return Err(Error::InvalidArgument("n_spokes must be positive".into()));
    }
    if image_side == 0 {
        return Err(Error::InvalidArgument("image side must be positive".into()));
    }
    Ok(image_side as f64 / n_spokes as f64)
}

/// Spoke count closest to a target acceleration factor (at least 1).
pub fn spokes_for_af(image_side: usize, af: f64) -> usize {
    ((image_side as f64 / af).round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_spoke_three_points() {
        let t = Trajectory::golden_angle_radial(1, 3, 0).unwrap();
        let expected = [[-PI, 0.0], [0.0, 0.0], [PI, 0.0]];
        for (p, e) in t.points().iter().zip(expected.iter()) {
            assert!((p[0] - e[0]).abs() < 1e-15 && (p[1] - e[1]).abs() < 1e-15, "{p:?} vs {e:?}");
        }
    }

    #[test]
    fn second_spoke_uses_small_golden_angle() {
        let t = Trajectory::golden_angle_radial(2, 2, 0).unwrap();
        let q = t.points()[3];
        let angle = q[1].atan2(q[0]);
        assert!((angle - 1.191_187_214_486_13).abs() < 1e-12, "{angle}");
        assert!((68.25_f64.to_radians() - angle).abs() < 1e-12);
    }

    #[test]
    fn first_point_of_each_spoke_is_on_the_pi_circle() {
        let t = Trajectory::golden_angle_radial(17, 9, 3).unwrap();
        for s in 0..17 {
            let p = t.points()[s * 9];
            assert!((p[0].hypot(p[1]) - PI).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_spokes() {
        assert!(Trajectory::golden_angle_radial(4, 1, 0).is_err());
        assert!(Trajectory::golden_angle_radial(0, 4, 0).is_err());
        assert!(acceleration_factor(64, 0).is_err());
    }

    #[test]
    fn acceleration_factor_grid() {
        assert_eq!(acceleration_factor(192, 24).unwrap(), 8.0);
        assert_eq!(acceleration_factor(192, 12).unwrap(), 16.0);
        assert_eq!(acceleration_factor(64, 64).unwrap(), 1.0);
        let spokes = [12, 16, 24, 32, 48, 64];
        let afs = [16.0, 12.0, 8.0, 6.0, 4.0, 3.0];
        for (s, af) in spokes.iter().zip(afs) {
            assert_eq!(acceleration_factor(192, *s).unwrap(), af);
        }
    }

    #[test]
    fn cartesian_covers_integer_frequencies() {
        let t = Trajectory::cartesian(4).unwrap();
        assert_eq!(t.len(), 16);
        assert_eq!(t.points()[0], [-PI, -PI]);
        assert!(t.points().iter().all(|p| p[0] < PI && p[1] < PI));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("traj.f64");
        let t = Trajectory::golden_angle_radial(5, 8, 2).unwrap();
        t.save(&p).unwrap();
        assert_eq!(Trajectory::load(&p).unwrap(), t);
        let sidecar: serde_json::Value = rawio::read_json(&rawio::sidecar_path(&p)).unwrap();
        assert_eq!(sidecar["meta"]["n_spokes"], 5);
        assert_eq!(sidecar["meta"]["start_index"], 2);
    }

    proptest! {
        #[test]
        fn radial_invariants(ns in 1usize..40, np in 2usize..70, start in 0usize..500) {
            let t = Trajectory::golden_angle_radial(ns, np, start).unwrap();
            prop_assert_eq!(t.len(), ns * np);
            for p in t.points() {
                prop_assert!(p[0].abs() <= PI && p[1].abs() <= PI);
            }
            let r = t.radial_coordinates().unwrap();
            for s in 0..ns {
                for p in 1..np {
                    prop_assert!(r[s * np + p] > r[s * np + p - 1]);
                }
            }
            let again = Trajectory::golden_angle_radial(ns, np, start).unwrap();
            prop_assert_eq!(&t, &again);
        }

        #[test]
        fn angles_wrap_consistently(index in 0usize..2000) {
            let theta = spoke_angle(index);
            let wrapped = theta.rem_euclid(2.0 * PI);
            prop_assert!((theta.cos() - wrapped.cos()).abs() < 1e-12);
            prop_assert!((theta.sin() - wrapped.sin()).abs() < 1e-12);
        }
    }
}
