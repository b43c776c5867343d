//! Model symbols and the elementary functions of density and distance shared
//! by every regime, plus the radio-physics helpers.
//!
//! Distances are in the same length unit as `d_max`; density `n` is nodes per
//! unit length, so a unit square holds `n²` nodes and neighbouring nodes sit
//! `1/n` apart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamError, Result};

/// Power-law connection cost `c(d) = a · d^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    pub a: f64,
    pub beta: f64,
}

impl CostFunction {
    pub fn new(a: f64, beta: f64) -> Self {
        CostFunction { a, beta }
    }

    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        self.a * d.powf(self.beta)
    }

    /// Checks `a > 0`, `beta > 1`, then confirms `c' > 0` and `c'' > 0` with
    /// finite differences at sample points of `(0, d_max]`.
    pub fn check_shape(&self, d_max: f64) -> Result<(), ParamError> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(ParamError::NonPositiveCostScale(self.a));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(ParamError::NonConvexCost(self.beta));
        }
        const SAMPLES: usize = 16;
        for k in 1..=SAMPLES {
            let x = d_max * k as f64 / SAMPLES as f64;
            let h = x * 1e-3;
            let (lo, mid, hi) = (self.eval(x - h), self.eval(x), self.eval(x + h));
            if !(hi > mid && mid > lo) {
                return Err(ParamError::CostShape {
                    property: "monotonicity",
                    at: x,
                });
            }
            if !(hi - 2.0 * mid + lo > 0.0) {
                return Err(ParamError::CostShape {
                    property: "convexity",
                    at: x,
                });
            }
        }
        Ok(())
    }
}

/// Every economic and geometric symbol of the relay model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Node density per unit length.
    pub n: f64,
    /// Maximum direct-connection radius.
    pub d_max: f64,
    /// Utility of reaching the most-desired peer.
    pub v: f64,
    /// Utility of reaching any other desired peer. Only enters validation.
    pub u: f64,
    /// Pollution cost per affected node per transmission.
    pub w: f64,
    /// Per-peer probability of not wanting a connection.
    pub z: f64,
    pub cost: CostFunction,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            n: 10.0,
            d_max: 1.0,
            v: 10.0,
            u: 2.0,
            w: 0.01,
            z: 0.99,
            cost: CostFunction::new(1.0, 2.0),
        }
    }
}

impl ModelParams {
    /// Returns the parameters unchanged if every invariant holds.
    pub fn validate(self) -> Result<Self, ParamError> {
        if !(self.n > 0.0 && self.n.is_finite()) {
            return Err(ParamError::NonPositiveDensity(self.n));
        }
        let spacing = 1.0 / self.n;
        if !(self.d_max > spacing && self.d_max.is_finite()) {
            return Err(ParamError::RadiusBelowSpacing {
                d_max: self.d_max,
                spacing,
            });
        }
        if !(self.z > 0.0 && self.z < 1.0) {
            return Err(ParamError::ZOutOfRange(self.z));
        }
        if !(self.w >= 0.0 && self.w.is_finite()) {
            return Err(ParamError::NegativePollution(self.w));
        }
        for (field, value) in [("v", self.v), ("u", self.u)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ParamError::NonPositiveValue { field, value });
            }
        }
        self.cost.check_shape(self.d_max)?;
        let cost_at_max = self.cost.eval(self.d_max);
        if !(self.v - self.u > cost_at_max) {
            return Err(ParamError::ValueGap {
                gap: self.v - self.u,
                cost_at_max,
            });
        }
        Ok(self)
    }

    /// Same parameters at a different density.
    pub fn with_density(self, n: f64) -> Self {
        ModelParams { n, ..self }
    }

    #[inline]
    pub fn cost_of(&self, d: f64) -> f64 {
        self.cost.eval(d)
    }

    fn check_distance(&self, d: f64) -> Result<()> {
        if !(0.0..=self.d_max).contains(&d) {
            return Err(Error::OutOfRange {
                what: "distance",
                value: d,
                lo: 0.0,
                hi: self.d_max,
            });
        }
        Ok(())
    }

    fn check_positive_distance(&self, d: f64) -> Result<()> {
        if !(d > 0.0 && d <= self.d_max) {
            return Err(Error::OutOfRange {
                what: "distance",
                value: d,
                lo: 0.0,
                hi: self.d_max,
            });
        }
        Ok(())
    }

    /// Number of relays on a full peering path of length `d`, `max(0, n·d − 2)`.
    pub fn intermediate_count(&self, d: f64) -> Result<f64> {
        self.check_distance(d)?;
        Ok(self.raw_intermediates(d))
    }

    /// Length of each hop of a full peering path, `d / (n·d − 1)`, or `d` itself
    /// when the path has no relays.
    pub fn hop_distance(&self, d: f64) -> Result<f64> {
        self.check_positive_distance(d)?;
        Ok(self.raw_hop(d))
    }

    /// Expected number of other nodes inside a circle of radius `d`,
    /// `max(0, π·d²·n² − 1)`.
    pub fn nodes_within(&self, d: f64) -> Result<f64> {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::OutOfRange {
                what: "distance",
                value: d,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(self.raw_nodes_within(d))
    }

    /// `N̄ = N(d_max)`, the peers inside the connection radius.
    pub fn reachable_peers(&self) -> f64 {
        self.raw_nodes_within(self.d_max)
    }

    /// `P(N) = 1 − z^N`.
    pub fn connect_probability(&self, peer_count: f64) -> Result<f64> {
        if !(peer_count >= 0.0) {
            return Err(Error::OutOfRange {
                what: "peer_count",
                value: peer_count,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(self.raw_connect_probability(peer_count))
    }

    /// Connection-distance CDF, `d² / d_max²`.
    pub fn distance_cdf(&self, d: f64) -> Result<f64> {
        self.check_distance(d)?;
        Ok(d * d / (self.d_max * self.d_max))
    }

    /// Connection-distance density, `2d / d_max²`.
    pub fn distance_pdf(&self, d: f64) -> Result<f64> {
        self.check_distance(d)?;
        Ok(self.raw_pdf(d))
    }

    #[inline]
    pub(crate) fn raw_intermediates(&self, d: f64) -> f64 {
        (self.n * d - 2.0).max(0.0)
    }

    #[inline]
    pub(crate) fn raw_hop(&self, d: f64) -> f64 {
        if self.raw_intermediates(d) == 0.0 {
            d
        } else {
            d / (self.n * d - 1.0)
        }
    }

    #[inline]
    pub(crate) fn raw_nodes_within(&self, d: f64) -> f64 {
        (std::f64::consts::PI * d * d * self.n * self.n - 1.0).max(0.0)
    }

    #[inline]
    pub(crate) fn raw_connect_probability(&self, peer_count: f64) -> f64 {
        -(peer_count * self.z.ln()).exp_m1()
    }

    #[inline]
    pub(crate) fn raw_pdf(&self, d: f64) -> f64 {
        2.0 * d / (self.d_max * self.d_max)
    }

    /// Distances in `(0, d_max)` where a clamp in `I`, `N` or `N − 1` switches
    /// on, so quadrature can split there.
    pub(crate) fn kinks(&self) -> Vec<f64> {
        let pi = std::f64::consts::PI;
        let mut points = vec![
            1.0 / (self.n * pi.sqrt()),
            (2.0 / pi).sqrt() / self.n,
            2.0 / self.n,
        ];
        points.retain(|&x| x > 0.0 && x < self.d_max);
        points.sort_by(f64::total_cmp);
        points
    }
}

/// Radio-physics symbols. `path_loss_exponent` is distinct from the density `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub snr: f64,
    pub alpha: f64,
    pub bandwidth_total: f64,
    pub user_bit_rate: f64,
    pub path_loss_constant: f64,
    pub carrier_frequency: f64,
    pub path_loss_exponent: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            snr: 1.0,
            alpha: 1.0,
            bandwidth_total: 1e6,
            user_bit_rate: 1e4,
            path_loss_constant: 1.0,
            carrier_frequency: 1.0,
            path_loss_exponent: 2.0,
        }
    }
}

/// Shannon limit in bits/s/Hz, `log₂(1 + snr)`.
pub fn shannon_capacity(snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(Error::OutOfRange {
            what: "snr",
            value: snr,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok((1.0 + snr).log2())
}

/// Maximum channels per cell, `1.42 · α · B_t / R_b`.
pub fn channels_per_cell(radio: &RadioParams) -> Result<f64> {
    if !(radio.user_bit_rate > 0.0) {
        return Err(Error::OutOfRange {
            what: "user_bit_rate",
            value: radio.user_bit_rate,
            lo: f64::MIN_POSITIVE,
            hi: f64::INFINITY,
        });
    }
    Ok(1.42 * radio.alpha * radio.bandwidth_total / radio.user_bit_rate)
}

/// Received-to-transmitted power ratio `K / (f² · d^exponent)`.
pub fn path_loss(radio: &RadioParams, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::OutOfRange {
            what: "distance",
            value: d,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if !(radio.carrier_frequency > 0.0) {
        return Err(Error::OutOfRange {
            what: "carrier_frequency",
            value: radio.carrier_frequency,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let f = radio.carrier_frequency;
    Ok(radio.path_loss_constant / (f * f * d.powf(radio.path_loss_exponent)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> ModelParams {
        ModelParams::default()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn validation_accepts_defaults() {
        assert_eq!(defaults().validate(), Ok(defaults()));
    }

    #[test]
    fn validation_rejects_value_gap() {
        let p = ModelParams {
            v: 2.5,
            u: 2.0,
            ..defaults()
        };
        assert!(matches!(p.validate(), Err(ParamError::ValueGap { .. })));
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.contains("v - u > c(d_max)"), "{msg}");
    }

    #[test]
    fn validation_rejects_linear_cost() {
        let p = ModelParams {
            cost: CostFunction::new(1.0, 1.0),
            ..defaults()
        };
        assert_eq!(p.validate(), Err(ParamError::NonConvexCost(1.0)));
    }

    #[test]
    fn validation_errors_are_distinct() {
        let cases = [
            ModelParams {
                n: 0.0,
                ..defaults()
            },
            ModelParams {
                d_max: 0.1,
                ..defaults()
            },
            ModelParams {
                z: 1.0,
                ..defaults()
            },
            ModelParams {
                w: -1.0,
                ..defaults()
            },
            ModelParams {
                v: -1.0,
                ..defaults()
            },
            ModelParams {
                u: 0.0,
                ..defaults()
            },
            ModelParams {
                cost: CostFunction::new(0.0, 2.0),
                ..defaults()
            },
        ];
        let msgs: Vec<String> = cases
            .iter()
            .map(|p| p.validate().unwrap_err().to_string())
            .collect();
        for (i, a) in msgs.iter().enumerate() {
            for b in &msgs[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert!(msgs[1].contains("d_max"));
        assert!(msgs[5].starts_with("u "));
    }

    #[test]
    fn intermediate_count_examples() {
        let p = defaults();
        assert_eq!(p.intermediate_count(0.5).unwrap(), 3.0);
        assert_eq!(p.intermediate_count(0.2).unwrap(), 0.0);
        assert_eq!(p.intermediate_count(0.05).unwrap(), 0.0);
        assert!(p.intermediate_count(1.5).is_err());
        assert!(p.intermediate_count(-0.1).is_err());
    }

    #[test]
    fn hop_distance_examples() {
        let p = defaults();
        // I(0.5) = 3, so four hops of 0.5 / 4.
        assert!(close(p.hop_distance(0.5).unwrap(), 0.125, 1e-15));
        assert_eq!(p.hop_distance(0.2).unwrap(), 0.2);
        assert!(close(p.hop_distance(1.0).unwrap(), 1.0 / 9.0, 1e-15));
        assert!(p.hop_distance(0.0).is_err());
    }

    #[test]
    fn nodes_within_examples() {
        let p = defaults();
        let pi = std::f64::consts::PI;
        assert!(close(p.nodes_within(0.5).unwrap(), 25.0 * pi - 1.0, 1e-12));
        assert!(close(p.nodes_within(0.5).unwrap(), 77.5398, 1e-4));
        assert!(p.nodes_within(1.0 / (10.0 * pi.sqrt())).unwrap() <= 1e-12);
        assert_eq!(p.nodes_within(0.05).unwrap(), 0.0);
        assert!(close(p.reachable_peers(), 313.159, 1e-3));
    }

    #[test]
    fn connect_probability_examples() {
        let p = defaults();
        assert_eq!(p.connect_probability(0.0).unwrap(), 0.0);
        // Direct evaluation oracle: 1 - 0.99^313.159265... via powf.
        let oracle = 1.0 - 0.99f64.powf(100.0 * std::f64::consts::PI - 1.0);
        let got = p.connect_probability(p.reachable_peers()).unwrap();
        assert!(close(got, oracle, 1e-14));
        assert!(close(got, 0.95703, 1e-5));
        let half = ModelParams { z: 0.5, ..p };
        assert!(close(half.connect_probability(1.0).unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn connect_probability_is_increasing_and_concave() {
        let p = defaults();
        let h = 0.5;
        for k in 1..400 {
            let x = k as f64;
            let (lo, mid, hi) = (
                p.raw_connect_probability(x - h),
                p.raw_connect_probability(x),
                p.raw_connect_probability(x + h),
            );
            assert!(hi > mid && mid > lo);
            assert!(hi - 2.0 * mid + lo < 0.0);
        }
    }

    #[test]
    fn pdf_and_cdf() {
        let p = defaults();
        assert_eq!(p.distance_cdf(1.0).unwrap(), 1.0);
        assert_eq!(p.distance_pdf(0.5).unwrap(), 1.0);
        assert!(p.distance_pdf(1.01).is_err());
        let h: f64 = 1e-6;
        for k in 1..100 {
            let d = k as f64 / 100.0;
            let fd = (p.distance_cdf(d + h.min(1.0 - d)).unwrap() - p.distance_cdf(d - h).unwrap())
                / (h.min(1.0 - d) + h);
            let pdf = p.distance_pdf(d).unwrap();
            assert!(((fd - pdf) / pdf).abs() < 1e-6, "d={d}");
        }
    }

    #[test]
    fn hop_geometry_invariants() {
        let p = ModelParams {
            n: 200.0,
            ..defaults()
        };
        for k in 1..=1000 {
            let d = k as f64 / 1000.0;
            let hop = p.hop_distance(d).unwrap();
            let relays = p.intermediate_count(d).unwrap();
            assert!(hop <= d);
            assert_eq!(hop == d, relays == 0.0);
            if relays > 0.0 {
                assert!(close((relays + 1.0) * hop, d, 1e-14 * d.max(1.0)));
            }
        }
        let near = p.hop_distance(p.d_max).unwrap();
        assert!((near - 1.0 / p.n).abs() <= 2.0 / (p.n * p.n * p.d_max));
    }

    #[test]
    fn monotone_in_distance_and_density() {
        let p = defaults();
        let q = p.with_density(20.0);
        let mut prev = 0.0;
        for k in 0..=100 {
            let d = k as f64 / 100.0;
            let i = p.raw_intermediates(d);
            assert!(i >= prev);
            assert!(q.raw_intermediates(d) >= i);
            prev = i;
        }
        // N is convex on the unclamped region.
        for k in 10..99 {
            let d = k as f64 / 100.0;
            let h = 0.005;
            let s =
                p.raw_nodes_within(d + h) - 2.0 * p.raw_nodes_within(d) + p.raw_nodes_within(d - h);
            assert!(s > 0.0);
        }
    }

    #[test]
    fn radio_examples() {
        assert_eq!(shannon_capacity(0.0).unwrap(), 0.0);
        assert_eq!(shannon_capacity(1.0).unwrap(), 1.0);
        assert_eq!(shannon_capacity(3.0).unwrap(), 2.0);
        assert!(shannon_capacity(-1.0).is_err());

        let mut r = RadioParams::default();
        assert_eq!(channels_per_cell(&r).unwrap(), 142.0);
        r.alpha = 0.5;
        assert_eq!(channels_per_cell(&r).unwrap(), 71.0);
        r.alpha = 1.0;
        r.bandwidth_total = r.user_bit_rate;
        assert_eq!(channels_per_cell(&r).unwrap(), 1.42);
        r.user_bit_rate = 0.0;
        assert!(channels_per_cell(&r).is_err());

        let mut r = RadioParams::default();
        assert_eq!(path_loss(&r, 2.0).unwrap(), 0.25);
        r.path_loss_exponent = 4.0;
        assert_eq!(path_loss(&r, 2.0).unwrap(), 0.0625);
        r.path_loss_exponent = 2.0;
        r.carrier_frequency = 2.0;
        assert_eq!(path_loss(&r, 1.0).unwrap(), 0.25);
        assert!(path_loss(&r, 0.0).is_err());
    }
}
