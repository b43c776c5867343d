use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::Lattice;
use super::route::route_greedy;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::regimes::{self, ConnectionChoice, ConnectionKind, Regime, RegimeUtilities};

/// Minimum trials for a comparison against the closed forms.
pub const MIN_COMPARISON_TRIALS: usize = 30;
pub const Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub side: usize,
    pub params: ModelParams,
    pub regime: Regime,
    pub trials: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.trials < 1 {
            return Err(Error::TooFewTrials {
                got: self.trials,
                min: 1,
            });
        }
        let min = Lattice::min_side(&self.params);
        if self.side < min {
            return Err(Error::LatticeTooSmall {
                side: self.side,
                min,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionEvent {
    pub trial: usize,
    pub origin: usize,
    pub destination: usize,
    /// Nodes that actually transmitted or received, in order.
    pub path: Vec<usize>,
    pub hop_lengths: Vec<f64>,
    pub choice: ConnectionChoice,
    pub transfers_paid: f64,
    /// A relay asked to forward declined.
    pub refused: bool,
    /// Energy plus pollution of the connection as made, and of the direct alternative.
    pub social_cost: f64,
    pub direct_social_cost: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimCounts {
    pub attempted: u64,
    pub direct: u64,
    pub peered: u64,
    pub refused: u64,
}

/// Per-node role means for one trial, plus the trial's raw tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialTotals {
    pub originator: f64,
    pub intermediate: f64,
    pub outsider: f64,
    pub total: f64,
    pub counts: SimCounts,
    pub pollution_events: u64,
    pub relay_exposures: u64,
    pub transfers_paid: f64,
    pub transfers_received: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleEstimate {
    pub mean: f64,
    /// Standard error across trials; absent with a single trial.
    pub std_error: Option<f64>,
}

impl RoleEstimate {
    fn from_samples(samples: impl Iterator<Item = f64> + Clone) -> Self {
        let k = samples.clone().count();
        let mean = samples.clone().sum::<f64>() / k as f64;
        let std_error = (k >= 2).then(|| {
            let var = samples.map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        });
        RoleEstimate { mean, std_error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub regime: Regime,
    pub side: usize,
    pub nodes: usize,
    pub trials: usize,
    pub seed: u64,
    /// Discrete `N̄`, the peers inside `d_max`.
    pub reach_count: usize,
    pub originator: RoleEstimate,
    pub intermediate: RoleEstimate,
    pub outsider: RoleEstimate,
    pub total: RoleEstimate,
    pub counts: SimCounts,
    pub pollution_events: u64,
    pub relay_exposures: u64,
    pub transfers_paid: f64,
    pub transfers_received: f64,
    pub per_trial: Vec<TrialTotals>,
}

struct TrialState<'a> {
    lattice: &'a Lattice,
    params: &'a ModelParams,
    regime: Regime,
    originator: Vec<f64>,
    intermediate: Vec<f64>,
    outsider: Vec<f64>,
    counts: SimCounts,
    pollution_events: u64,
    relay_exposures: u64,
    transfers_paid: f64,
    transfers_received: f64,
}

impl<'a> TrialState<'a> {
    fn new(lattice: &'a Lattice, params: &'a ModelParams, regime: Regime) -> Self {
        let n = lattice.node_count();
        TrialState {
            lattice,
            params,
            regime,
            originator: vec![0.0; n],
            intermediate: vec![0.0; n],
            outsider: vec![0.0; n],
            counts: SimCounts::default(),
            pollution_events: 0,
            relay_exposures: 0,
            transfers_paid: 0.0,
            transfers_received: 0.0,
        }
    }

    /// Receivers are exempt from their own hop's pollution only under the
    /// perfect-competition accounting.
    fn receiver_exempt(&self) -> bool {
        receiver_exempt(self.regime)
    }

    fn transmit(&mut self, from: usize, to: usize, sq: i64) {
        let exempt = self.receiver_exempt().then_some(to);
        let w = self.params.w;
        for off in self.lattice.circle(sq) {
            let q = self.lattice.shift(from, off.dx, off.dy);
            if Some(q) == exempt {
                continue;
            }
            self.outsider[q] -= w;
            self.pollution_events += 1;
        }
    }

    fn apply(&mut self, plan: &Plan) {
        let w = self.params.w;
        self.counts.attempted += 1;
        if plan.refused {
            self.counts.refused += 1;
        }
        match plan.kind {
            ConnectionKind::Direct => self.counts.direct += 1,
            ConnectionKind::Peer => self.counts.peered += 1,
        }
        self.originator[plan.path[0]] += plan.net_utility;
        for (k, hop) in plan.path.windows(2).enumerate() {
            if k > 0 {
                let price = plan.prices[k - 1];
                let hop_cost = self.params.cost_of(plan.hop_lengths[k]);
                self.intermediate[hop[0]] += (price - hop_cost) - w;
                self.relay_exposures += 1;
                self.transfers_received += price;
            }
            self.transmit(hop[0], hop[1], plan.hop_sq[k]);
        }
        self.transfers_paid += plan.transfers_paid;
    }

    fn totals(&self) -> TrialTotals {
        let n = self.lattice.node_count() as f64;
        let originator = self.originator.iter().sum::<f64>() / n;
        let intermediate = self.intermediate.iter().sum::<f64>() / n;
        let outsider = self.outsider.iter().sum::<f64>() / n;
        TrialTotals {
            originator,
            intermediate,
            outsider,
            total: originator + intermediate + outsider,
            counts: self.counts,
            pollution_events: self.pollution_events,
            relay_exposures: self.relay_exposures,
            transfers_paid: self.transfers_paid,
            transfers_received: self.transfers_received,
        }
    }
}

fn receiver_exempt(regime: Regime) -> bool {
    regime == Regime::PeeringPerfectCompetition
}

/// Nodes charged by a transmission with squared step length `sq`.
fn crowd(lattice: &Lattice, regime: Regime, sq: i64) -> usize {
    lattice.circle(sq).len() - usize::from(receiver_exempt(regime))
}

/// How one connection is carried out under the regime's rules.
#[derive(Debug, Clone)]
struct Plan {
    kind: ConnectionKind,
    /// Transmitting and receiving nodes in order.
    path: Vec<usize>,
    hop_sq: Vec<i64>,
    hop_lengths: Vec<f64>,
    /// Price paid to each relay, in path order.
    prices: Vec<f64>,
    transfers_paid: f64,
    net_utility: f64,
    refused: bool,
    social_cost: f64,
    direct_social_cost: f64,
}

impl Plan {
    fn relay_payoff(&self, params: &ModelParams) -> f64 {
        self.prices
            .iter()
            .zip(&self.hop_lengths[1..])
            .map(|(&p, &l)| (p - params.cost_of(l)) - params.w)
            .sum()
    }

    fn charges(&self, lattice: &Lattice, regime: Regime) -> usize {
        self.hop_sq
            .iter()
            .map(|&sq| crowd(lattice, regime, sq))
            .sum()
    }

    fn into_event(self, trial: usize) -> ConnectionEvent {
        ConnectionEvent {
            trial,
            origin: self.path[0],
            destination: *self.path.last().expect("two endpoints"),
            path: self.path,
            hop_lengths: self.hop_lengths,
            choice: ConnectionChoice {
                kind: self.kind,
                net_utility: self.net_utility,
            },
            transfers_paid: self.transfers_paid,
            refused: self.refused,
            social_cost: self.social_cost,
            direct_social_cost: self.direct_social_cost,
        }
    }
}

fn plan_connection(
    lattice: &Lattice,
    params: &ModelParams,
    regime: Regime,
    origin: usize,
    destination: usize,
) -> Result<Plan> {
    let w = params.w;
    let direct_sq = lattice.steps_sq(origin, destination);
    let direct_len = lattice.length_of(direct_sq);
    let direct_cost = params.cost_of(direct_len);
    let direct_social = direct_cost + w * crowd(lattice, regime, direct_sq) as f64;

    let route = route_greedy(lattice, origin, destination)?;
    let hop_sq: Vec<i64> = route
        .windows(2)
        .map(|h| lattice.steps_sq(h[0], h[1]))
        .collect();
    let hop_len: Vec<f64> = hop_sq.iter().map(|&sq| lattice.length_of(sq)).collect();
    let relays = route.len() - 2;

    let mut refused = false;
    let mut peer = false;
    if relays > 0 {
        match regime {
            Regime::NoPeering => {}
            // Without a transfer the relay's payoff is -w - c(hop) < -w.
            Regime::PeeringNoTransfers => refused = true,
            // Each relay is paid the marginal cost of its own hop and accepts;
            // the originator peers only if that beats the direct cost.
            Regime::PeeringPerfectCompetition => {
                let peer_cost: f64 = hop_len.iter().map(|&l| params.cost_of(l)).sum();
                peer = direct_cost > peer_cost;
            }
        }
    }

    if !peer {
        return Ok(Plan {
            kind: ConnectionKind::Direct,
            path: vec![origin, destination],
            hop_sq: vec![direct_sq],
            hop_lengths: vec![direct_len],
            prices: Vec::new(),
            transfers_paid: 0.0,
            net_utility: params.v - direct_cost,
            refused,
            social_cost: direct_social,
            direct_social_cost: direct_social,
        });
    }

    let prices: Vec<f64> = hop_len[1..].iter().map(|&l| params.cost_of(l)).collect();
    let paid: f64 = prices.iter().sum();
    let social: f64 = hop_len
        .iter()
        .zip(&hop_sq)
        .map(|(&l, &sq)| params.cost_of(l) + w * crowd(lattice, regime, sq) as f64)
        .sum();
    Ok(Plan {
        kind: ConnectionKind::Peer,
        path: route,
        hop_sq,
        net_utility: params.v - params.cost_of(hop_len[0]) - paid,
        hop_lengths: hop_len,
        prices,
        transfers_paid: paid,
        refused,
        social_cost: social,
        direct_social_cost: direct_social,
    })
}

/// Independent stream per (seed, trial, node), so trial scheduling cannot
/// reorder draws.
fn node_rng(seed: u64, trial: usize, node: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 32) | node as u64);
    rng
}

fn run_trial<'a>(
    config: &'a SimConfig,
    lattice: &'a Lattice,
    trial: usize,
    events: Option<&mut Vec<ConnectionEvent>>,
) -> Result<TrialState<'a>> {
    let mut state = TrialState::new(lattice, &config.params, config.regime);
    let mut events = events;
    for node in 0..lattice.node_count() {
        let mut rng = node_rng(config.seed, trial, node);
        if let Some(dest) = lattice.sample_demand(node, &config.params, &mut rng) {
            let plan = plan_connection(lattice, &config.params, config.regime, node, dest)?;
            state.apply(&plan);
            if let Some(log) = events.as_deref_mut() {
                log.push(plan.into_event(trial));
            }
        }
    }
    Ok(state)
}

fn summarize(config: &SimConfig, lattice: &Lattice, per_trial: Vec<TrialTotals>) -> SimOutcome {
    let role = |f: fn(&TrialTotals) -> f64| RoleEstimate::from_samples(per_trial.iter().map(f));
    let mut counts = SimCounts::default();
    let (mut pollution_events, mut relay_exposures) = (0, 0);
    let (mut paid, mut received) = (0.0, 0.0);
    for t in &per_trial {
        counts.attempted += t.counts.attempted;
        counts.direct += t.counts.direct;
        counts.peered += t.counts.peered;
        counts.refused += t.counts.refused;
        pollution_events += t.pollution_events;
        relay_exposures += t.relay_exposures;
        paid += t.transfers_paid;
        received += t.transfers_received;
    }
    SimOutcome {
        regime: config.regime,
        side: config.side,
        nodes: lattice.node_count(),
        trials: config.trials,
        seed: config.seed,
        reach_count: lattice.reach_count(),
        originator: role(|t| t.originator),
        intermediate: role(|t| t.intermediate),
        outsider: role(|t| t.outsider),
        total: role(|t| t.total),
        counts,
        pollution_events,
        relay_exposures,
        transfers_paid: paid,
        transfers_received: received,
        per_trial,
    }
}

/// Runs every trial of one instant and averages per-node utility by role.
pub fn run_instant(config: &SimConfig) -> Result<SimOutcome> {
    config.validate()?;
    let lattice = Lattice::build(config.side, &config.params)?;
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, &lattice, trial, None).map(|s| s.totals()))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(config, &lattice, per_trial))
}

/// [`run_instant`] that also returns every connection event, in trial then
/// origin order.
pub fn run_instant_traced(config: &SimConfig) -> Result<(SimOutcome, Vec<ConnectionEvent>)> {
    config.validate()?;
    let lattice = Lattice::build(config.side, &config.params)?;
    let runs = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut events = Vec::new();
            run_trial(config, &lattice, trial, Some(&mut events)).map(|s| (s.totals(), events))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all = Vec::new();
    let mut per_trial = Vec::with_capacity(runs.len());
    for (totals, events) in runs {
        per_trial.push(totals);
        all.extend(events);
    }
    Ok((summarize(config, &lattice, per_trial), all))
}

/// Mean outsider cost of each node across trials.
pub fn per_node_outsider_means(config: &SimConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let lattice = Lattice::build(config.side, &config.params)?;
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, &lattice, trial, None).map(|s| s.outsider))
        .collect::<Result<Vec<_>>>()?;
    let mut means = vec![0.0; lattice.node_count()];
    for trial in &per_trial {
        for (m, x) in means.iter_mut().zip(trial) {
            *m += x;
        }
    }
    let k = config.trials as f64;
    means.iter_mut().for_each(|m| *m /= k);
    Ok(means)
}

/// Exact per-node expected utilities of the lattice model, by enumerating
/// every reachable destination instead of sampling. Differs from the closed
/// forms only through discretization; differs from [`run_instant`] only
/// through Monte Carlo noise.
pub fn lattice_expectation(config: &SimConfig) -> Result<RegimeUtilities> {
    config.validate()?;
    let params = &config.params;
    let lattice = Lattice::build(config.side, params)?;
    let origin = 0;
    let (mut net, mut relay, mut charges) = (0.0, 0.0, 0usize);
    for off in lattice.reachable_offsets() {
        let dest = lattice.shift(origin, off.dx, off.dy);
        let plan = plan_connection(&lattice, params, config.regime, origin, dest)?;
        net += plan.net_utility;
        relay += plan.relay_payoff(params);
        charges += plan.charges(&lattice, config.regime);
    }
    let m = lattice.reach_count() as f64;
    let reach = params.raw_connect_probability(m);
    let orig = reach * net / m;
    let int = reach * relay / m;
    let out = -params.w * reach * charges as f64 / m;
    Ok(RegimeUtilities {
        regime: config.regime,
        eu_originator: orig,
        eu_intermediate: int,
        eu_outsider: out,
        total: orig + int + out,
        params_snapshot: *params,
    })
}

/// Writes one CSV row per event.
pub fn write_trace<W: std::io::Write>(events: &[ConnectionEvent], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "trial",
        "origin",
        "destination",
        "choice",
        "hops",
        "path",
        "hop_lengths",
        "transfers_paid",
        "refused",
    ])?;
    for e in events {
        let path = e
            .path
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let hops = e
            .hop_lengths
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let kind = match e.choice.kind {
            ConnectionKind::Direct => "DIRECT",
            ConnectionKind::Peer => "PEER",
        };
        wtr.write_record([
            e.trial.to_string(),
            e.origin.to_string(),
            e.destination.to_string(),
            kind.to_string(),
            e.hop_lengths.len().to_string(),
            path,
            hops,
            e.transfers_paid.to_string(),
            e.refused.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleComparison {
    pub role: String,
    pub simulated: f64,
    pub std_error: f64,
    pub analytic: f64,
    pub bias: f64,
    pub relative_bias: f64,
    /// `(simulated − analytic) / std_error`. Zero std error with zero bias gives 0.
    pub z: f64,
}

impl RoleComparison {
    fn new(role: &str, est: RoleEstimate, analytic: f64) -> Self {
        let se = est.std_error.unwrap_or(f64::NAN);
        let bias = est.mean - analytic;
        let z = if bias == 0.0 { 0.0 } else { bias / se };
        RoleComparison {
            role: role.to_string(),
            simulated: est.mean,
            std_error: se,
            analytic,
            bias,
            relative_bias: if analytic == 0.0 {
                bias.abs()
            } else {
                (bias / analytic).abs()
            },
            z,
        }
    }

    pub fn within(&self, limit: f64) -> bool {
        self.z.abs() <= limit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub regime: Regime,
    /// Closed form the simulator is held against. The no-transfer regime is
    /// compared with no peering, which is what refusal leaves in place.
    pub analytic: RegimeUtilities,
    /// Originator, intermediate and outsider, then total.
    pub roles: Vec<RoleComparison>,
    /// Roles with `|z| > 3`.
    pub flagged: Vec<String>,
    pub all_within: bool,
    /// Exact expectation of the lattice model, and the simulator held against it.
    /// Separates sampling noise from the discretization in `roles`.
    pub lattice_exact: RegimeUtilities,
    pub lattice_roles: Vec<RoleComparison>,
    pub outcome: SimOutcome,
}

impl Comparison {
    pub fn role(&self, name: &str) -> Option<&RoleComparison> {
        self.roles.iter().find(|r| r.role == name)
    }
}

/// Simulated per-role means against the closed forms at the same parameters.
pub fn estimate_vs_analytic(config: &SimConfig) -> Result<Comparison> {
    if config.trials < MIN_COMPARISON_TRIALS {
        return Err(Error::TooFewTrials {
            got: config.trials,
            min: MIN_COMPARISON_TRIALS,
        });
    }
    let outcome = run_instant(config)?;
    let analytic = match config.regime {
        Regime::NoPeering | Regime::PeeringNoTransfers => regimes::eu_no_peering(&config.params)?,
        Regime::PeeringPerfectCompetition => regimes::eu_peering_perfcomp(&config.params)?,
    };
    let lattice_exact = lattice_expectation(config)?;
    let roles = role_rows(&outcome, &analytic);
    let lattice_roles = role_rows(&outcome, &lattice_exact);
    let flagged: Vec<String> = roles[..3]
        .iter()
        .filter(|r| !r.within(Z_LIMIT))
        .map(|r| r.role.clone())
        .collect();
    Ok(Comparison {
        regime: config.regime,
        analytic,
        all_within: flagged.is_empty(),
        flagged,
        roles,
        lattice_exact,
        lattice_roles,
        outcome,
    })
}

fn role_rows(outcome: &SimOutcome, reference: &RegimeUtilities) -> Vec<RoleComparison> {
    vec![
        RoleComparison::new("originator", outcome.originator, reference.eu_originator),
        RoleComparison::new(
            "intermediate",
            outcome.intermediate,
            reference.eu_intermediate,
        ),
        RoleComparison::new("outsider", outcome.outsider, reference.eu_outsider),
        RoleComparison::new("total", outcome.total, reference.total),
    ]
}
