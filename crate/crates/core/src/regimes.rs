//! Closed-form expected utilities per role and regime, pricing rules and the
//! per-connection cost comparisons behind them.
//!
//! Every expectation is an integral over the connection-distance density
//! `f(x) = 2x / d_max²` on `[0, d_max]`, scaled by the probability `P(N̄)`
//! that a node wants to connect at all.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::quadrature::{integrate_split, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    NoPeering,
    PeeringNoTransfers,
    PeeringPerfectCompetition,
}

impl Regime {
    pub const ALL: [Regime; 3] = [
        Regime::NoPeering,
        Regime::PeeringNoTransfers,
        Regime::PeeringPerfectCompetition,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::NoPeering => "NO_PEERING",
            Regime::PeeringNoTransfers => "PEERING_NO_TRANSFERS",
            Regime::PeeringPerfectCompetition => "PEERING_PERFECT_COMPETITION",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "no_peering" | "nopeering" => Ok(Regime::NoPeering),
            "peering_no_transfers" | "notrans" => Ok(Regime::PeeringNoTransfers),
            "peering_perfect_competition" | "perfcomp" => Ok(Regime::PeeringPerfectCompetition),
            _ => Err(format!(
                "unknown regime `{s}` (expected NO_PEERING, PEERING_NO_TRANSFERS or PEERING_PERFECT_COMPETITION)"
            )),
        }
    }
}

/// Per-node expected utility by role for one regime at one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeUtilities {
    pub regime: Regime,
    pub eu_originator: f64,
    pub eu_intermediate: f64,
    pub eu_outsider: f64,
    pub total: f64,
    pub params_snapshot: ModelParams,
}

impl RegimeUtilities {
    fn new(regime: Regime, params: &ModelParams, orig: f64, int: f64, out: f64) -> Self {
        RegimeUtilities {
            regime,
            eu_originator: orig,
            eu_intermediate: int,
            eu_outsider: out,
            total: orig + int + out,
            params_snapshot: *params,
        }
    }

    pub fn csv_row(&self) -> UtilityRow {
        UtilityRow {
            regime: self.regime,
            n: self.params_snapshot.n,
            eu_orig: self.eu_originator,
            eu_int: self.eu_intermediate,
            eu_out: self.eu_outsider,
            total: self.total,
        }
    }
}

/// The CSV projection of [`RegimeUtilities`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityRow {
    pub regime: Regime,
    pub n: f64,
    pub eu_orig: f64,
    pub eu_int: f64,
    pub eu_out: f64,
    pub total: f64,
}

pub const UTILITY_CSV_HEADER: [&str; 6] = ["regime", "n", "eu_orig", "eu_int", "eu_out", "total"];

/// Utilities in the hypothetical all-peer world without transfers, plus whether
/// that world survives the intermediates' best response. It never does.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoTransferOutcome {
    pub utilities: RegimeUtilities,
    pub sustainable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConnectionKind {
    Direct,
    Peer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionChoice {
    pub kind: ConnectionKind,
    pub net_utility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RelayDecision {
    Accept,
    Refuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    Direct,
    FullPeering,
    SkipOne,
}

/// `E[g(x)] = ∫₀^d_max g(x) f(x) dx`, split at the clamp kinks.
fn expect<G: Fn(f64) -> f64>(params: &ModelParams, g: G, tol: f64) -> Result<f64> {
    integrate_split(
        |x| g(x) * params.raw_pdf(x),
        0.0,
        params.d_max,
        &params.kinks(),
        tol,
    )
}

fn reach_probability(params: &ModelParams) -> f64 {
    params.raw_connect_probability(params.reachable_peers())
}

pub fn eu_no_peering(params: &ModelParams) -> Result<RegimeUtilities> {
    eu_no_peering_tol(params, DEFAULT_TOL)
}

pub fn eu_no_peering_tol(params: &ModelParams, tol: f64) -> Result<RegimeUtilities> {
    let p = reach_probability(params);
    let v = params.v;
    let orig = p * expect(params, |x| v - params.cost_of(x), tol)?;
    let out = -params.w * p * expect(params, |x| params.raw_nodes_within(x), tol)?;
    Ok(RegimeUtilities::new(
        Regime::NoPeering,
        params,
        orig,
        0.0,
        out,
    ))
}

pub fn eu_peering_no_transfers(params: &ModelParams) -> Result<NoTransferOutcome> {
    eu_peering_no_transfers_tol(params, DEFAULT_TOL)
}

pub fn eu_peering_no_transfers_tol(params: &ModelParams, tol: f64) -> Result<NoTransferOutcome> {
    let p = reach_probability(params);
    let (v, w) = (params.v, params.w);
    let orig = p * expect(params, |x| v - params.cost_of(params.raw_hop(x)), tol)?;
    let int = -p
        * expect(
            params,
            |x| params.raw_intermediates(x) * (w + params.cost_of(params.raw_hop(x))),
            tol,
        )?;
    let out = -w
        * p
        * expect(
            params,
            |x| (params.raw_intermediates(x) + 1.0) * params.raw_nodes_within(params.raw_hop(x)),
            tol,
        )?;
    Ok(NoTransferOutcome {
        utilities: RegimeUtilities::new(Regime::PeeringNoTransfers, params, orig, int, out),
        sustainable: false,
    })
}

pub fn eu_peering_perfcomp(params: &ModelParams) -> Result<RegimeUtilities> {
    eu_peering_perfcomp_tol(params, DEFAULT_TOL)
}

pub fn eu_peering_perfcomp_tol(params: &ModelParams, tol: f64) -> Result<RegimeUtilities> {
    let p = reach_probability(params);
    let (v, w) = (params.v, params.w);
    let orig = p * expect(
        params,
        |x| v - (params.raw_intermediates(x) + 1.0) * params.cost_of(params.raw_hop(x)),
        tol,
    )?;
    let int = -w * p * expect(params, |x| params.raw_intermediates(x), tol)?;
    // The receiving peer of each hop is excluded; the count never goes below zero.
    let out = -w
        * p
        * expect(
            params,
            |x| {
                (params.raw_intermediates(x) + 1.0)
                    * (params.raw_nodes_within(params.raw_hop(x)) - 1.0).max(0.0)
            },
            tol,
        )?;
    Ok(RegimeUtilities::new(
        Regime::PeeringPerfectCompetition,
        params,
        orig,
        int,
        out,
    ))
}

/// Utilities for any regime. For the no-transfer regime this is the all-peer
/// counterfactual.
pub fn utilities(params: &ModelParams, regime: Regime) -> Result<RegimeUtilities> {
    utilities_tol(params, regime, DEFAULT_TOL)
}

pub fn utilities_tol(params: &ModelParams, regime: Regime, tol: f64) -> Result<RegimeUtilities> {
    match regime {
        Regime::NoPeering => eu_no_peering_tol(params, tol),
        Regime::PeeringNoTransfers => Ok(eu_peering_no_transfers_tol(params, tol)?.utilities),
        Regime::PeeringPerfectCompetition => eu_peering_perfcomp_tol(params, tol),
    }
}

fn check_connection(params: &ModelParams, d: f64) -> Result<()> {
    if !(d > 0.0 && d <= params.d_max) {
        return Err(Error::OutOfRange {
            what: "connection distance",
            value: d,
            lo: 0.0,
            hi: params.d_max,
        });
    }
    Ok(())
}

fn check_price(price: f64) -> Result<()> {
    if !(price >= 0.0) {
        return Err(Error::NegativePrice(price));
    }
    Ok(())
}

fn require_intermediates(params: &ModelParams, d: f64) -> Result<()> {
    check_connection(params, d)?;
    let count = params.raw_intermediates(d);
    if count < 1.0 {
        return Err(Error::NoIntermediates { d, count });
    }
    Ok(())
}

/// A relay accepts when the price covers the cost of its own hop. Ties accept.
pub fn intermediate_best_response(
    params: &ModelParams,
    d: f64,
    price: f64,
) -> Result<RelayDecision> {
    check_connection(params, d)?;
    check_price(price)?;
    let hop_cost = params.cost_of(params.raw_hop(d));
    Ok(if price >= hop_cost {
        RelayDecision::Accept
    } else {
        RelayDecision::Refuse
    })
}

/// Direct versus peering for an originator paying `price` to each relay.
/// Ties go direct.
pub fn originator_choice(params: &ModelParams, d: f64, price: f64) -> Result<ConnectionChoice> {
    check_connection(params, d)?;
    check_price(price)?;
    let direct = params.cost_of(d);
    let peer = params.cost_of(params.raw_hop(d)) + params.raw_intermediates(d) * price;
    Ok(if direct <= peer {
        ConnectionChoice {
            kind: ConnectionKind::Direct,
            net_utility: params.v - direct,
        }
    } else {
        ConnectionChoice {
            kind: ConnectionKind::Peer,
            net_utility: params.v - peer,
        }
    })
}

/// Total cost to society of one connection of length `d`: energy plus pollution.
pub fn social_cost(params: &ModelParams, d: f64, mode: CostMode) -> Result<f64> {
    check_connection(params, d)?;
    let w = params.w;
    let hop = params.raw_hop(d);
    let relays = params.raw_intermediates(d);
    Ok(match mode {
        CostMode::Direct => params.cost_of(d) + w * params.raw_nodes_within(d),
        CostMode::FullPeering => {
            (relays + 1.0) * params.cost_of(hop) + (relays + 1.0) * w * params.raw_nodes_within(hop)
        }
        CostMode::SkipOne => {
            require_intermediates(params, d)?;
            (relays - 1.0) * params.cost_of(hop)
                + params.cost_of(2.0 * hop)
                + (relays - 1.0) * w * params.raw_nodes_within(hop)
                + w * params.raw_nodes_within(2.0 * hop)
        }
    })
}

/// Social saving from one relay's willingness to forward, net of its own cost:
/// `−2c(D) + c(2D) − 2wN(D) + wN(2D)`.
pub fn value_added(params: &ModelParams, d: f64) -> Result<f64> {
    require_intermediates(params, d)?;
    let hop = params.raw_hop(d);
    let w = params.w;
    Ok(-2.0 * params.cost_of(hop) + params.cost_of(2.0 * hop)
        - 2.0 * w * params.raw_nodes_within(hop)
        + w * params.raw_nodes_within(2.0 * hop))
}

/// What the originator saves by peering rather than connecting directly.
pub fn originator_savings(params: &ModelParams, d: f64) -> Result<f64> {
    check_connection(params, d)?;
    Ok(params.cost_of(d) - params.cost_of(params.raw_hop(d)))
}

/// `(c(D(d)), c(d))`: the range of relay prices both sides accept.
pub fn price_bounds(params: &ModelParams, d: f64) -> Result<(f64, f64)> {
    check_connection(params, d)?;
    Ok((params.cost_of(params.raw_hop(d)), params.cost_of(d)))
}

/// Marginal-cost relay price.
pub fn competitive_price(params: &ModelParams, d: f64) -> Result<f64> {
    Ok(price_bounds(params, d)?.0)
}

/// Price above which coalitions gain by skipping a relay, `c(2D(d))`.
pub fn leapfrog_threshold(params: &ModelParams, d: f64) -> Result<f64> {
    require_intermediates(params, d)?;
    Ok(params.cost_of(2.0 * params.raw_hop(d)))
}

pub fn leapfrog_profitable(params: &ModelParams, d: f64, price: f64) -> Result<bool> {
    check_price(price)?;
    Ok(price > leapfrog_threshold(params, d)?)
}
