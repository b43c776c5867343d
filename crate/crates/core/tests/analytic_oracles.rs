//! Closed forms and solvers checked against brute-force midpoint sums written
//! directly from the model formulas.

use relayecon::equilibrium::{
    club_optimal_density, congestion_scaling_exponent, free_entry_density, total_eu, DensityBracket,
};
use relayecon::quadrature::integrate;
use relayecon::regimes::{eu_no_peering, eu_peering_no_transfers, eu_peering_perfcomp};
use relayecon::{ModelParams, Regime};

const PI: f64 = std::f64::consts::PI;

struct Oracle {
    p: ModelParams,
}

impl Oracle {
    fn cost(&self, d: f64) -> f64 {
        self.p.cost.a * d.powf(self.p.cost.beta)
    }
    fn relays(&self, x: f64) -> f64 {
        (self.p.n * x - 2.0).max(0.0)
    }
    fn hop(&self, x: f64) -> f64 {
        if self.p.n * x - 2.0 <= 0.0 {
            x
        } else {
            x / (self.p.n * x - 1.0)
        }
    }
    fn crowd(&self, d: f64) -> f64 {
        (PI * d * d * self.p.n * self.p.n - 1.0).max(0.0)
    }
    fn reach(&self) -> f64 {
        1.0 - self.p.z.powf(self.crowd(self.p.d_max))
    }
    /// Midpoint rule for E[g] under f(x) = 2x / d_max².
    fn expect(&self, points: usize, g: impl Fn(f64) -> f64) -> f64 {
        let h = self.p.d_max / points as f64;
        let dm2 = self.p.d_max * self.p.d_max;
        (0..points)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                g(x) * 2.0 * x / dm2
            })
            .sum::<f64>()
            * h
    }
    fn no_peering(&self, points: usize) -> [f64; 3] {
        let r = self.reach();
        [
            r * self.expect(points, |x| self.p.v - self.cost(x)),
            0.0,
            -self.p.w * r * self.expect(points, |x| self.crowd(x)),
        ]
    }
    fn notrans(&self, points: usize) -> [f64; 3] {
        let r = self.reach();
        let w = self.p.w;
        [
            r * self.expect(points, |x| self.p.v - self.cost(self.hop(x))),
            -r * self.expect(points, |x| self.relays(x) * (w + self.cost(self.hop(x)))),
            -w * r * self.expect(points, |x| (self.relays(x) + 1.0) * self.crowd(self.hop(x))),
        ]
    }
    fn perfcomp(&self, points: usize) -> [f64; 3] {
        let r = self.reach();
        let w = self.p.w;
        [
            r * self.expect(points, |x| {
                self.p.v - (self.relays(x) + 1.0) * self.cost(self.hop(x))
            }),
            -w * r * self.expect(points, |x| self.relays(x)),
            -w * r
                * self.expect(points, |x| {
                    (self.relays(x) + 1.0) * (self.crowd(self.hop(x)) - 1.0).max(0.0)
                }),
        ]
    }
    fn total(&self, regime: Regime, points: usize) -> f64 {
        let parts = match regime {
            Regime::NoPeering => self.no_peering(points),
            Regime::PeeringNoTransfers => self.notrans(points),
            Regime::PeeringPerfectCompetition => self.perfcomp(points),
        };
        parts.iter().sum()
    }
}

const MILLION: usize = 1_000_000;

fn assert_parts(got: [f64; 3], want: [f64; 3], tol: f64) {
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= tol, "got {g}, oracle {w}");
    }
}

#[test]
fn quadrature_of_cost_against_midpoint() {
    let p = ModelParams::default();
    let o = Oracle { p };
    let got = integrate(|x| p.cost_of(x) * 2.0 * x, 0.0, 1.0, 1e-9).unwrap();
    let want = o.expect(MILLION, |x| o.cost(x));
    assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    assert!((got - 0.5).abs() < 1e-12);
}

#[test]
fn pdf_integrates_to_one() {
    let p = ModelParams::default();
    let got = integrate(|x| p.distance_pdf(x).unwrap(), 0.0, p.d_max, 1e-9).unwrap();
    assert!((got - 1.0).abs() < 1e-9);
}

#[test]
fn regime_utilities_against_midpoint() {
    for p in [
        ModelParams::default(),
        ModelParams {
            n: 37.0,
            w: 0.003,
            ..ModelParams::default()
        },
        ModelParams {
            n: 6.0,
            d_max: 1.3,
            v: 12.0,
            ..ModelParams::default()
        },
    ] {
        let o = Oracle { p };
        let np = eu_no_peering(&p).unwrap();
        assert_parts(
            [np.eu_originator, np.eu_intermediate, np.eu_outsider],
            o.no_peering(MILLION),
            1e-7,
        );
        let nt = eu_peering_no_transfers(&p).unwrap().utilities;
        assert_parts(
            [nt.eu_originator, nt.eu_intermediate, nt.eu_outsider],
            o.notrans(MILLION),
            1e-7,
        );
        let pc = eu_peering_perfcomp(&p).unwrap();
        assert_parts(
            [pc.eu_originator, pc.eu_intermediate, pc.eu_outsider],
            o.perfcomp(MILLION),
            1e-7,
        );
    }
}

#[test]
fn total_eu_at_defaults_against_midpoint() {
    let p = ModelParams::default();
    let o = Oracle { p };
    for regime in Regime::ALL {
        let got = total_eu(&p, 10.0, regime).unwrap();
        assert!((got - o.total(regime, MILLION)).abs() < 1e-7, "{regime}");
    }
}

#[test]
fn peering_at_cost_beats_no_peering_across_the_bracket() {
    let p = ModelParams::default();
    for n in DensityBracket::new(11.0, 2000.0).grid() {
        let pc = total_eu(&p, n, Regime::PeeringPerfectCompetition).unwrap();
        let np = total_eu(&p, n, Regime::NoPeering).unwrap();
        assert!(pc >= np, "n = {n}: {pc} < {np}");
    }
}

/// Largest positive-to-negative crossing located by a 10⁴-point scan of the
/// midpoint oracle.
fn scan_crossing(p: ModelParams, regime: Regime, lo: f64, hi: f64) -> (f64, f64, usize) {
    let steps = 10_000;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| lo * (hi / lo).powf(i as f64 / steps as f64))
        .collect();
    let values: Vec<f64> = grid
        .iter()
        .map(|&n| {
            Oracle {
                p: p.with_density(n),
            }
            .total(regime, 4000)
        })
        .collect();
    let crossings: Vec<usize> = (0..steps)
        .filter(|&i| values[i] > 0.0 && values[i + 1] <= 0.0)
        .collect();
    let last = *crossings.last().expect("a crossing");
    (grid[last], grid[last + 1], crossings.len())
}

#[test]
fn free_entry_roots_against_scan() {
    let p = ModelParams::default();
    let bracket = DensityBracket::new(11.0, 2000.0);
    let mut roots = Vec::new();
    for regime in [Regime::NoPeering, Regime::PeeringPerfectCompetition] {
        let result = free_entry_density(&p, regime, &bracket).unwrap();
        let (lo, hi, count) = scan_crossing(p, regime, 11.0, 2000.0);
        assert_eq!(count, 1);
        let slack = 1e-3 * hi;
        assert!(
            result.n_star >= lo - slack && result.n_star <= hi + slack,
            "{regime}: {} not in [{lo}, {hi}]",
            result.n_star
        );
        assert!(result.total_eu_at_n_star.abs() <= 1e-9);
        let fresh = total_eu(&p, result.n_star, regime).unwrap();
        assert!(fresh.abs() <= 1e-8);
        roots.push(result.n_star);
    }
    assert!(roots[0] < roots[1]);
    assert_eq!(
        free_entry_density(&p, Regime::NoPeering, &bracket).unwrap(),
        free_entry_density(&p, Regime::NoPeering, &bracket).unwrap()
    );
}

#[test]
fn club_optimum_against_scan() {
    let p = ModelParams::default();
    let bracket = DensityBracket::new(11.0, 2000.0);
    let club = club_optimal_density(&p, &bracket).unwrap();
    let steps = 3000;
    let (lo, hi) = (11.0, 40.0);
    let (best_n, best_v) = (0..=steps)
        .map(|i| {
            let n = lo + (hi - lo) * i as f64 / steps as f64;
            (
                n,
                Oracle {
                    p: p.with_density(n),
                }
                .total(Regime::PeeringPerfectCompetition, 20_000),
            )
        })
        .fold(
            (0.0, f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        );
    assert!(
        (club.n_star - best_n).abs() < 0.05,
        "{} vs {best_n}",
        club.n_star
    );
    assert!((club.total_eu_at_n_star - best_v).abs() < 1e-4);
    assert!(club.total_eu_at_n_star > 0.0);
    assert!(!club.diagnostics.multimodal);
    let perfcomp = free_entry_density(&p, Regime::PeeringPerfectCompetition, &bracket).unwrap();
    assert!(club.n_star < perfcomp.n_star);
    assert!(club.total_eu_at_n_star > perfcomp.total_eu_at_n_star);
    // Unimodal around the optimum on the scan grid.
    let grid = bracket.grid();
    let at = grid.iter().position(|&n| n > club.n_star).unwrap();
    let vals: Vec<f64> = grid
        .iter()
        .map(|&n| total_eu(&p, n, Regime::PeeringPerfectCompetition).unwrap())
        .collect();
    assert!(vals[..at].windows(2).all(|w| w[1] >= w[0]));
    assert!(vals[at..].windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn congestion_exponents() {
    let p = ModelParams::default();
    let ns = [50.0, 100.0, 200.0, 400.0];
    let np = congestion_scaling_exponent(&p, Regime::NoPeering, &ns).unwrap();
    let pc = congestion_scaling_exponent(&p, Regime::PeeringPerfectCompetition, &ns).unwrap();
    assert!((np - 2.0).abs() <= 0.15, "{np}");
    assert!((pc - 1.0).abs() <= 0.15, "{pc}");
    // Oracle: the no-peering integral is π n²/2 − 1 exactly once n is large, so the
    // fitted slope is just above 2.
    let log_pts: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n: &f64| (n.ln(), (PI * n * n / 2.0 - 1.0).ln()))
        .collect();
    let mx = log_pts.iter().map(|q| q.0).sum::<f64>() / 4.0;
    let my = log_pts.iter().map(|q| q.1).sum::<f64>() / 4.0;
    let slope = log_pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum::<f64>()
        / log_pts.iter().map(|q| (q.0 - mx).powi(2)).sum::<f64>();
    assert!((np - slope).abs() < 1e-6, "{np} vs {slope}");
}
