//! Density equilibria: free entry (total per-node EU driven to zero) and the
//! club optimum (per-node EU maximized under perfect-competition peering).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::regimes::{self, competitive_price, leapfrog_threshold, Regime, RegimeUtilities};

/// Quadrature tolerance inside the solvers, well under the root residual.
pub const SOLVER_QUAD_TOL: f64 = 1e-12;
pub const ROOT_RESIDUAL_TOL: f64 = 1e-9;
pub const DENSITY_TOL: f64 = 1e-6;
pub const DEFAULT_GRID_POINTS: usize = 200;
pub const AUTO_BRACKET_CAP: f64 = 1e5;
pub const DEFAULT_SCALING_DENSITIES: [f64; 4] = [50.0, 100.0, 200.0, 400.0];

/// Densities scanned by the solvers. The grid is geometric between the ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBracket {
    pub n_lo: f64,
    pub n_hi: f64,
    pub grid_points: usize,
}

impl DensityBracket {
    pub fn new(n_lo: f64, n_hi: f64) -> Self {
        DensityBracket {
            n_lo,
            n_hi,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }

    pub fn validate(&self, template: &ModelParams) -> Result<()> {
        let floor = 1.0 / template.d_max;
        if !(self.n_lo > floor && self.n_lo < self.n_hi && self.n_hi.is_finite()) {
            return Err(Error::Bracket(format!(
                "need 1/d_max = {floor} < n_lo < n_hi, got [{}, {}]",
                self.n_lo, self.n_hi
            )));
        }
        if self.grid_points < 3 {
            return Err(Error::Bracket(format!(
                "grid_points must be at least 3 (got {})",
                self.grid_points
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let steps = (self.grid_points - 1) as f64;
        let ratio = (self.n_hi / self.n_lo).ln();
        (0..self.grid_points)
            .map(|i| match i {
                0 => self.n_lo,
                i if i == self.grid_points - 1 => self.n_hi,
                i => self.n_lo * (ratio * i as f64 / steps).exp(),
            })
            .collect()
    }

    /// Starts at `2/d_max` and doubles the upper end until both the no-peering
    /// and perfect-competition totals are negative, or the cap is reached.
    pub fn auto(template: &ModelParams) -> Result<Self> {
        let n_lo = 2.0 / template.d_max;
        let mut n_hi = 2.0 * n_lo;
        loop {
            if n_hi >= AUTO_BRACKET_CAP {
                n_hi = AUTO_BRACKET_CAP.max(2.0 * n_lo);
                break;
            }
            let np = total_eu(template, n_hi, Regime::NoPeering)?;
            let pc = total_eu(template, n_hi, Regime::PeeringPerfectCompetition)?;
            if np < 0.0 && pc < 0.0 {
                break;
            }
            n_hi *= 2.0;
        }
        Ok(DensityBracket::new(n_lo, n_hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EquilibriumKind {
    FreeEntry,
    ClubOptimum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Refinement interval that contained the solution.
    pub bracket: [f64; 2],
    /// `|total EU|` at the root for free entry; final interval width for the club.
    pub residual: f64,
    pub bracket_scanned: DensityBracket,
    /// Positive-to-negative sign changes found on the scan grid.
    pub downcrossings: usize,
    /// Interior local maxima of the objective on the scan grid.
    pub local_maxima: usize,
    pub multimodal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub kind: EquilibriumKind,
    pub regime: Regime,
    pub n_star: f64,
    pub total_eu_at_n_star: f64,
    pub utilities: RegimeUtilities,
    pub diagnostics: Diagnostics,
}

fn utilities_at(template: &ModelParams, n: f64, regime: Regime) -> Result<RegimeUtilities> {
    let params = template.with_density(n).validate()?;
    regimes::utilities_tol(&params, regime, SOLVER_QUAD_TOL)
}

/// Total per-node expected utility with density `n` substituted into the template.
pub fn total_eu(template: &ModelParams, n: f64, regime: Regime) -> Result<f64> {
    Ok(utilities_at(template, n, regime)?.total)
}

fn scan(template: &ModelParams, grid: &[f64], regime: Regime) -> Result<Vec<f64>> {
    grid.par_iter()
        .map(|&n| total_eu(template, n, regime))
        .collect()
}

fn count_local_maxima(values: &[f64]) -> usize {
    values
        .windows(3)
        .filter(|w| w[1] > w[0] && w[1] >= w[2])
        .count()
}

/// Free-entry density: the largest density on the bracket where total EU
/// crosses from positive to non-positive, refined by bisection.
pub fn free_entry_density(
    template: &ModelParams,
    regime: Regime,
    bracket: &DensityBracket,
) -> Result<EquilibriumResult> {
    bracket.validate(template)?;
    let grid = bracket.grid();
    let values = scan(template, &grid, regime)?;
    let crossings: Vec<usize> = (0..grid.len() - 1)
        .filter(|&i| values[i] > 0.0 && values[i + 1] <= 0.0)
        .collect();
    let Some(&last) = crossings.last() else {
        return Err(Error::NoCrossing {
            lo: bracket.n_lo,
            hi: bracket.n_hi,
        });
    };

    let (mut lo, mut hi) = (grid[last], grid[last + 1]);
    let mut iterations = 0;
    let (mut n_star, mut value) = (hi, values[last + 1]);
    while value.abs() > ROOT_RESIDUAL_TOL {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if iterations > 200 || mid <= lo || mid >= hi {
            return Err(Error::RootNotConverged {
                residual: value.abs(),
                iterations,
            });
        }
        let f = total_eu(template, mid, regime)?;
        n_star = mid;
        value = f;
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let utilities = utilities_at(template, n_star, regime)?;
    Ok(EquilibriumResult {
        kind: EquilibriumKind::FreeEntry,
        regime,
        n_star,
        total_eu_at_n_star: utilities.total,
        utilities,
        diagnostics: Diagnostics {
            iterations,
            bracket: [lo, hi],
            residual: utilities.total.abs(),
            bracket_scanned: *bracket,
            downcrossings: crossings.len(),
            local_maxima: count_local_maxima(&values),
            multimodal: crossings.len() > 1,
        },
    })
}

/// Density maximizing per-node total EU under perfect-competition peering.
pub fn club_optimal_density(
    template: &ModelParams,
    bracket: &DensityBracket,
) -> Result<EquilibriumResult> {
    let regime = Regime::PeeringPerfectCompetition;
    bracket.validate(template)?;
    let grid = bracket.grid();
    let values = scan(template, &grid, regime)?;
    let best = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > values[best] { i } else { best });
    if best == 0 || best == grid.len() - 1 {
        return Err(Error::BoundaryOptimum {
            n: grid[best],
            value: values[best],
        });
    }

    let objective = |n: f64| total_eu(template, n, regime);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c)?, objective(d)?);
    let mut iterations = 0;
    while b - a > DENSITY_TOL {
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
        }
    }
    let (mut n_star, mut value) = if fc >= fd { (c, fc) } else { (d, fd) };
    if values[best] > value {
        n_star = grid[best];
        value = values[best];
    }
    if value < 0.0 {
        return Err(Error::NoClubSurplus { n: n_star, value });
    }
    let maxima = count_local_maxima(&values);
    let utilities = utilities_at(template, n_star, regime)?;
    Ok(EquilibriumResult {
        kind: EquilibriumKind::ClubOptimum,
        regime,
        n_star,
        total_eu_at_n_star: utilities.total,
        utilities,
        diagnostics: Diagnostics {
            iterations,
            bracket: [a, b],
            residual: b - a,
            bracket_scanned: *bracket,
            downcrossings: (0..grid.len() - 1)
                .filter(|&i| values[i] > 0.0 && values[i + 1] <= 0.0)
                .count(),
            local_maxima: maxima,
            multimodal: maxima > 1,
        },
    })
}

/// Least-squares slope of `log |eu_outsider|` against `log n`.
pub fn congestion_scaling_exponent(
    template: &ModelParams,
    regime: Regime,
    n_values: &[f64],
) -> Result<f64> {
    if n_values.len() < 4 {
        return Err(Error::Scaling(format!(
            "need at least 4 densities, got {}",
            n_values.len()
        )));
    }
    let mut points = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let params = template.with_density(n).validate()?;
        let reach = params.connect_probability(params.reachable_peers())?;
        if reach <= 0.99 {
            return Err(Error::Scaling(format!(
                "P(N) = {reach} at n = {n}; need P > 0.99 to isolate congestion"
            )));
        }
        let out = regimes::utilities_tol(&params, regime, SOLVER_QUAD_TOL)?.eu_outsider;
        if out == 0.0 {
            return Err(Error::Scaling(format!("eu_outsider is zero at n = {n}")));
        }
        points.push((n.ln(), out.abs().ln()));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// A solver outcome, or the model finding that prevented one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Finding<T> {
    Solved { value: T },
    NoCrossing { lo: f64, hi: f64 },
    BoundaryOptimum { n: f64, value: f64 },
    Undefined { reason: String },
}

impl<T> Finding<T> {
    fn from_result(result: Result<T>) -> Result<Self> {
        match result {
            Ok(value) => Ok(Finding::Solved { value }),
            Err(Error::NoCrossing { lo, hi }) => Ok(Finding::NoCrossing { lo, hi }),
            Err(Error::BoundaryOptimum { n, value }) => Ok(Finding::BoundaryOptimum { n, value }),
            Err(e @ (Error::Scaling(_) | Error::NoClubSurplus { .. })) => Ok(Finding::Undefined {
                reason: e.to_string(),
            }),
            Err(e) => Err(e),
        }
    }

    pub fn solved(&self) -> Option<&T> {
        match self {
            Finding::Solved { value } => Some(value),
            _ => None,
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, Finding::Solved { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeapfrogPoint {
    pub d: f64,
    pub intermediates: f64,
    pub competitive_price: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub template: ModelParams,
    pub bracket: DensityBracket,
    pub free_entry_no_peering: Finding<EquilibriumResult>,
    pub free_entry_perfcomp: Finding<EquilibriumResult>,
    pub club: Finding<EquilibriumResult>,
    pub scaling_densities: Vec<f64>,
    pub scaling_no_peering: Finding<f64>,
    pub scaling_perfcomp: Finding<f64>,
    /// Relay price against the leapfrog threshold at the club density.
    pub leapfrog_profile: Vec<LeapfrogPoint>,
}

impl RegimeReport {
    /// True when any entry carries a model finding instead of a number.
    pub fn has_findings(&self) -> bool {
        !(self.free_entry_no_peering.is_solved()
            && self.free_entry_perfcomp.is_solved()
            && self.club.is_solved()
            && self.scaling_no_peering.is_solved()
            && self.scaling_perfcomp.is_solved())
    }
}

const LEAPFROG_SAMPLES: usize = 10;

fn leapfrog_profile(params: &ModelParams) -> Result<Vec<LeapfrogPoint>> {
    // Sample from the first distance with a whole relay out to d_max.
    let start = 3.0 / params.n;
    if start > params.d_max {
        return Ok(Vec::new());
    }
    (0..LEAPFROG_SAMPLES)
        .map(|k| {
            let d = start + (params.d_max - start) * k as f64 / (LEAPFROG_SAMPLES - 1) as f64;
            Ok(LeapfrogPoint {
                d,
                intermediates: params.intermediate_count(d)?,
                competitive_price: competitive_price(params, d)?,
                threshold: leapfrog_threshold(params, d)?,
            })
        })
        .collect()
}

/// Free-entry densities for both priced regimes, the club optimum, congestion
/// exponents and the leapfrog profile, in one record.
pub fn compare_regimes(template: &ModelParams, bracket: &DensityBracket) -> Result<RegimeReport> {
    bracket.validate(template)?;
    let free_entry_no_peering =
        Finding::from_result(free_entry_density(template, Regime::NoPeering, bracket))?;
    let free_entry_perfcomp = Finding::from_result(free_entry_density(
        template,
        Regime::PeeringPerfectCompetition,
        bracket,
    ))?;
    let club = Finding::from_result(club_optimal_density(template, bracket))?;
    let densities = DEFAULT_SCALING_DENSITIES.to_vec();
    let scaling_no_peering = Finding::from_result(congestion_scaling_exponent(
        template,
        Regime::NoPeering,
        &densities,
    ))?;
    let scaling_perfcomp = Finding::from_result(congestion_scaling_exponent(
        template,
        Regime::PeeringPerfectCompetition,
        &densities,
    ))?;
    let leapfrog_profile = match club.solved() {
        Some(result) => leapfrog_profile(&result.utilities.params_snapshot)?,
        None => Vec::new(),
    };
    Ok(RegimeReport {
        template: *template,
        bracket: *bracket,
        free_entry_no_peering,
        free_entry_perfcomp,
        club,
        scaling_densities: densities,
        scaling_no_peering,
        scaling_perfcomp,
        leapfrog_profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn bracket_validation_and_grid() {
        let p = defaults();
        assert!(DensityBracket::new(0.5, 10.0).validate(&p).is_err());
        assert!(DensityBracket::new(20.0, 10.0).validate(&p).is_err());
        let b = DensityBracket::new(11.0, 2000.0);
        b.validate(&p).unwrap();
        let g = b.grid();
        assert_eq!(g.len(), 200);
        assert_eq!((g[0], g[199]), (11.0, 2000.0));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn zero_pollution_is_monotone_and_has_no_crossing() {
        let p = ModelParams {
            w: 0.0,
            ..defaults()
        };
        for regime in Regime::ALL {
            let mut prev = 0.0;
            for n in [3.0, 5.0, 10.0, 20.0, 40.0] {
                let t = total_eu(&p, n, regime).unwrap();
                assert!(t > 0.0 && t > prev, "{regime} n={n}");
                prev = t;
            }
        }
        let b = DensityBracket::new(11.0, 2000.0);
        assert!(matches!(
            free_entry_density(&p, Regime::NoPeering, &b),
            Err(Error::NoCrossing { .. })
        ));
        assert!(matches!(
            club_optimal_density(&p, &b),
            Err(Error::BoundaryOptimum { n, .. }) if n == 2000.0
        ));
        assert!(matches!(
            congestion_scaling_exponent(&p, Regime::NoPeering, &DEFAULT_SCALING_DENSITIES),
            Err(Error::Scaling(_))
        ));
    }

    #[test]
    fn scaling_rejects_bad_inputs() {
        let p = defaults();
        assert!(congestion_scaling_exponent(&p, Regime::NoPeering, &[50.0, 100.0, 200.0]).is_err());
        // At n = 3 a node reaches ~27 peers: P(N) is far from 1.
        assert!(
            congestion_scaling_exponent(&p, Regime::NoPeering, &[3.0, 100.0, 200.0, 400.0])
                .is_err()
        );
    }

    #[test]
    fn w_enters_linearly() {
        let p = defaults();
        for regime in Regime::ALL {
            let a = regimes::utilities(&p, regime).unwrap().eu_outsider;
            let b = regimes::utilities(&ModelParams { w: 0.02, ..p }, regime)
                .unwrap()
                .eu_outsider;
            assert!((b / a - 2.0).abs() < 1e-12, "{regime}");
        }
    }

    #[test]
    fn finding_serialization() {
        let f: Finding<f64> = Finding::NoCrossing { lo: 1.0, hi: 2.0 };
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"{"status":"NO_CROSSING","lo":1.0,"hi":2.0}"#);
        let back: Finding<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
    }
}
