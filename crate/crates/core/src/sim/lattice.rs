use rand::Rng;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// A lattice displacement in node steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Offset {
    pub dx: i64,
    pub dy: i64,
    /// Squared length in node steps.
    pub sq: i64,
}

// Squared radii are compared in node steps; the slack absorbs rounding in (d_max * n)².
const RADIUS_SLACK: f64 = 1e-9;

/// `side × side` nodes on a torus with spacing `1/n`. Node `i` sits at row
/// `i / side`, column `i % side`.
#[derive(Debug, Clone)]
pub struct Lattice {
    side: usize,
    spacing: f64,
    /// Non-zero offsets sorted by length, out to the larger of `d_max` and one
    /// diagonal step. Transmission circles are prefixes of this list.
    disk: Vec<Offset>,
    /// Number of leading `disk` entries within `d_max`.
    reach: usize,
}

impl Lattice {
    /// Smallest side for which the `d_max` circle cannot wrap onto itself.
    pub fn min_side(params: &ModelParams) -> usize {
        (2.0 * params.d_max * params.n - RADIUS_SLACK).ceil() as usize + 1
    }

    pub fn build(side: usize, params: &ModelParams) -> Result<Self> {
        let min = Self::min_side(params);
        if side < min {
            return Err(Error::LatticeTooSmall { side, min });
        }
        let reach_sq = (params.d_max * params.n).powi(2) * (1.0 + RADIUS_SLACK);
        let disk_sq = reach_sq.max(2.0);
        let r = disk_sq.sqrt().floor() as i64;
        let mut disk = Vec::new();
        for dx in -r..=r {
            for dy in -r..=r {
                let sq = dx * dx + dy * dy;
                if sq > 0 && (sq as f64) <= disk_sq {
                    disk.push(Offset { dx, dy, sq });
                }
            }
        }
        disk.sort_by_key(|o| (o.sq, o.dx, o.dy));
        let reach = disk.partition_point(|o| (o.sq as f64) <= reach_sq);
        Ok(Lattice {
            side,
            spacing: 1.0 / params.n,
            disk,
            reach,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.side * self.side
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        (row % self.side) * self.side + col % self.side
    }

    pub fn coords(&self, node: usize) -> (usize, usize) {
        (node / self.side, node % self.side)
    }

    pub fn position(&self, node: usize) -> (f64, f64) {
        let (row, col) = self.coords(node);
        (row as f64 * self.spacing, col as f64 * self.spacing)
    }

    /// Node reached from `node` by `(dx, dy)` steps, wrapping around.
    pub fn shift(&self, node: usize, dx: i64, dy: i64) -> usize {
        let s = self.side as i64;
        let (row, col) = self.coords(node);
        let r = (row as i64 + dx).rem_euclid(s) as usize;
        let c = (col as i64 + dy).rem_euclid(s) as usize;
        r * self.side + c
    }

    fn wrap(&self, delta: i64) -> i64 {
        let s = self.side as i64;
        let d = delta.rem_euclid(s);
        if d > s / 2 {
            d - s
        } else {
            d
        }
    }

    /// Shortest displacement from `a` to `b` in node steps.
    pub fn torus_delta(&self, a: usize, b: usize) -> (i64, i64) {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        (
            self.wrap(rb as i64 - ra as i64),
            self.wrap(cb as i64 - ca as i64),
        )
    }

    pub fn steps_sq(&self, a: usize, b: usize) -> i64 {
        let (dx, dy) = self.torus_delta(a, b);
        dx * dx + dy * dy
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        (self.steps_sq(a, b) as f64).sqrt() * self.spacing
    }

    /// Length in model units of a displacement with squared step length `sq`.
    pub fn length_of(&self, sq: i64) -> f64 {
        (sq as f64).sqrt() * self.spacing
    }

    /// Offsets to every other node within `d_max`.
    pub fn reachable_offsets(&self) -> &[Offset] {
        &self.disk[..self.reach]
    }

    /// Discrete `N̄`: other nodes within `d_max` of any node.
    pub fn reach_count(&self) -> usize {
        self.reach
    }

    /// Offsets to every other node within squared step length `sq`.
    pub fn circle(&self, sq: i64) -> &[Offset] {
        let end = self.disk.partition_point(|o| o.sq <= sq);
        &self.disk[..end]
    }

    /// With probability `P(N̄_discrete)` draws a destination uniformly among the
    /// nodes within `d_max` of `node`.
    pub fn sample_demand<R: Rng>(
        &self,
        node: usize,
        params: &ModelParams,
        rng: &mut R,
    ) -> Option<usize> {
        if self.reach == 0 {
            return None;
        }
        let wants = params.raw_connect_probability(self.reach as f64);
        if rng.random::<f64>() >= wants {
            return None;
        }
        let off = self.disk[rng.random_range(0..self.reach)];
        Some(self.shift(node, off.dx, off.dy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn defaults() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn construction_and_metric() {
        let p = defaults();
        assert_eq!(Lattice::min_side(&p), 21);
        assert!(matches!(
            Lattice::build(10, &p),
            Err(Error::LatticeTooSmall { min: 21, .. })
        ));
        let small = ModelParams { d_max: 0.45, ..p };
        let lat = Lattice::build(10, &small).unwrap();
        assert_eq!(lat.node_count(), 100);
        assert!((lat.distance(0, 1) - 0.1).abs() < 1e-15);
        let corner = lat.index(0, 9);
        assert!((lat.distance(0, corner) - 0.1).abs() < 1e-15);
        let wrap_row = lat.index(9, 0);
        assert!((lat.distance(0, wrap_row) - 0.1).abs() < 1e-15);
        assert_eq!(lat.position(lat.index(3, 4)), (0.30000000000000004, 0.4));
    }

    #[test]
    fn reach_is_translation_invariant() {
        let p = defaults();
        let lat = Lattice::build(25, &p).unwrap();
        // Gauss circle count for radius 10, minus the centre.
        assert_eq!(lat.reach_count(), 316);
        for node in [0, 7, 312, 624] {
            let within = (0..lat.node_count())
                .filter(|&q| q != node && lat.distance(node, q) <= p.d_max + 1e-12)
                .count();
            assert_eq!(within, 316);
        }
    }

    #[test]
    fn circles_are_prefixes() {
        let lat = Lattice::build(40, &defaults()).unwrap();
        assert_eq!(lat.circle(1).len(), 4);
        assert_eq!(lat.circle(2).len(), 8);
        assert_eq!(lat.circle(4).len(), 12);
        assert_eq!(lat.circle(100).len(), lat.reach_count());
    }

    #[test]
    fn demand_extremes() {
        let lat = Lattice::build(40, &defaults()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rare = ModelParams {
            z: 0.999999,
            ..defaults()
        };
        let hits = (0..2000)
            .filter(|&i| lat.sample_demand(i % 1600, &rare, &mut rng).is_some())
            .count();
        assert!(hits < 10, "{hits}");
        let eager = ModelParams {
            z: 0.5,
            ..defaults()
        };
        for i in 0..1600 {
            let dest = lat.sample_demand(i, &eager, &mut rng).expect("demand");
            assert_ne!(dest, i);
            assert!(lat.distance(i, dest) <= 1.0 + 1e-12);
        }
    }
}
