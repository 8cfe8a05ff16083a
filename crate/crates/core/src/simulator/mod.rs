//! Slot-by-slot execution of the protection protocol.
//!
//! Every connection endpoint generates one unit per slot, numbered by the
//! slot it was generated in, and sends it over its working path. Each
//! protection walk carries two signals: the `S` signal visits the group's
//! labels in order and the `T` signal visits them in reverse. Between two
//! consecutive labels a signal crosses one virtual link whose delay is the
//! sum of the link delays in between. A label processes round `r` once the
//! incoming signal and its own working-path unit for `r` are both present,
//! one round per slot and direction, always the oldest round first.
//!
//! A failed link still delivers a round-stamped unit, with payload zero.
//! Failure detection is not modelled: decoding is handed the round's
//! ground-truth failure pattern.

mod protocol;
mod scenario;

pub use protocol::{
    buffer_bounds, contribution, decode, encode_at_s, encode_at_t, round_number_bound, BoundError,
    BufferBounds, DecodeError, DecodeInput, Decoded, Equation, RoundBound,
};
pub use scenario::{parse_poly, CoeffChoice, LinkSchedule, RoundRange, Scenario, ScenarioError};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

use crate::analysis::{build_recovery_graph, AnalysisError};
use crate::coding::{CoefficientMatrix, FailurePattern};
use crate::galois::{Field, FieldSpec, Gf};
use crate::topology::{validate_provisioning, EdgeId, Enumeration, Graph, Provisioning, TopologyError, Violation};

pub const REPORT_SCHEMA: &str = "ncprotect-sim/1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Coefficient-scaled encoding with linear-system decoding.
    #[default]
    Scaled,
    /// Plain XOR encoding; each connection has at most one walk and decodes
    /// by adding its two signals.
    Xor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rounds: u64,
    pub seed: u64,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid provisioning: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Coefficients(#[from] AnalysisError),
    #[error("xor mode needs at most one protecting walk per connection; C{} has {}", .conn + 1, .walks)]
    XorNeedsSingleWalk { conn: usize, walks: usize },
    #[error("link delays must be at least one slot")]
    ZeroDelay,
    #[error("no progress by slot {0}")]
    Stalled(u64),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// How one endpoint fared in one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// Working path delivered and the protection copy agrees.
    CrossChecked,
    /// Working path delivered; too few equations for a protection copy.
    PrimaryOnly,
    /// Working path failed; the protection copy is correct.
    Recovered,
    /// Working path failed; too few equations.
    Insufficient,
    /// The protection copy disagrees with the unit actually sent.
    Mismatch,
    /// Enough equations, singular coefficients.
    Singular,
}

impl Outcome {
    pub fn is_loss(self) -> bool {
        matches!(self, Outcome::Insufficient | Outcome::Mismatch | Outcome::Singular)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointRound {
    pub outcome: Outcome,
    /// Slots from generation of the partner's unit to the protection decode.
    pub latency: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based connection number.
    pub conn: usize,
    pub round: u64,
    pub primary_failed: bool,
    pub source: EndpointRound,
    pub sink: EndpointRound,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkBuffers {
    /// 1-based walk number.
    pub walk: usize,
    pub label: String,
    pub fs_peak: usize,
    pub ft_peak: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointBuffers {
    pub node: u64,
    pub conn: usize,
    pub end: String,
    pub tx_peak: usize,
    pub rx_peak: usize,
    /// Absent for unprotected connections.
    pub bounds: Option<BufferBounds>,
    pub walks: Vec<WalkBuffers>,
}

impl EndpointBuffers {
    pub fn within_bounds(&self) -> bool {
        self.bounds.is_none_or(|b| {
            self.tx_peak as u64 <= b.tx
                && self.rx_peak as u64 <= b.rx
                && self
                    .walks
                    .iter()
                    .all(|w| w.fs_peak as u64 <= b.tx && w.ft_peak as u64 <= b.tx)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundUsage {
    pub bound: RoundBound,
    pub peak_in_flight: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub cross_checked: u64,
    pub primary_only: u64,
    pub recovered: u64,
    pub insufficient: u64,
    pub mismatch: u64,
    pub singular: u64,
}

impl Summary {
    fn add(&mut self, o: Outcome) {
        *match o {
            Outcome::CrossChecked => &mut self.cross_checked,
            Outcome::PrimaryOnly => &mut self.primary_only,
            Outcome::Recovered => &mut self.recovered,
            Outcome::Insufficient => &mut self.insufficient,
            Outcome::Mismatch => &mut self.mismatch,
            Outcome::Singular => &mut self.singular,
        } += 1;
    }

    pub fn losses(&self) -> u64 {
        self.insufficient + self.mismatch + self.singular
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema: String,
    pub mode: Mode,
    pub field: FieldSpec,
    pub rounds: u64,
    pub seed: u64,
    pub slots: u64,
    /// Longest protection signal route, in slots.
    pub protection_delay: u64,
    pub max_working_delay: u64,
    pub max_latency: u64,
    pub round_numbers: RoundUsage,
    pub summary: Summary,
    pub records: Vec<RoundRecord>,
    pub buffers: Vec<EndpointBuffers>,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn record(&self, conn: usize, round: u64) -> Option<&RoundRecord> {
        self.records.iter().find(|r| r.conn == conn + 1 && r.round == round)
    }
}

/// One in-flight unit: arrival slot, round, payload.
type Unit = (u64, u64, Gf);

struct Station {
    endpoint: usize,
    alpha: Gf,
    /// Pending contributions per direction, oldest round first.
    fs: VecDeque<(u64, Gf)>,
    ft: VecDeque<(u64, Gf)>,
    y_inbox: VecDeque<Unit>,
    z_inbox: VecDeque<Unit>,
    /// Signal values that arrived here, kept until the endpoint decodes.
    seen_y: BTreeMap<u64, Gf>,
    seen_z: BTreeMap<u64, Gf>,
    fs_peak: usize,
    ft_peak: usize,
}

struct GroupRun {
    walk: usize,
    enumeration: Enumeration,
    stations: Vec<Station>,
    /// Links between station `i` and `i + 1` on the `S` signal.
    s_hops: Vec<Vec<EdgeId>>,
    /// Links between station `i` and `i - 1` on the `T` signal, at `i`.
    t_hops: Vec<Vec<EdgeId>>,
}

struct Endpoint {
    conn: usize,
    sink: bool,
    tx: VecDeque<(u64, Gf)>,
    rx: VecDeque<(u64, Gf)>,
    inbox: VecDeque<Unit>,
    /// `(group, station)` for every walk protecting the connection.
    labels: Vec<(usize, usize)>,
    next_decode: u64,
    tx_peak: usize,
    rx_peak: usize,
}

fn track(peak: &mut usize, len: usize) {
    *peak = (*peak).max(len);
}

pub fn run(
    field: &Field,
    g: &Graph,
    p: &Provisioning,
    coeffs: &CoefficientMatrix,
    schedule: &LinkSchedule,
    config: &SimConfig,
) -> Result<SimReport, SimError> {
    let violations = validate_provisioning(g, p);
    if !violations.is_empty() {
        return Err(SimError::Invalid(violations));
    }
    let rg = build_recovery_graph(p, coeffs)?;
    let coeffs = &rg.coefficients;
    if schedule.default_delay == 0 || schedule.delays.values().any(|&d| d == 0) {
        return Err(SimError::ZeroDelay);
    }
    let n = p.demands.len();
    if config.mode == Mode::Xor {
        if let Some(conn) = (0..n).find(|&c| p.protecting(c).len() > 1) {
            return Err(SimError::XorNeedsSingleWalk {
                conn,
                walks: p.protecting(conn).len(),
            });
        }
    }

    let mut endpoints: Vec<Endpoint> = (0..2 * n)
        .map(|e| Endpoint {
            conn: e / 2,
            sink: e % 2 == 1,
            tx: VecDeque::new(),
            rx: VecDeque::new(),
            inbox: VecDeque::new(),
            labels: Vec::new(),
            next_decode: 0,
            tx_peak: 0,
            rx_peak: 0,
        })
        .collect();
    let mut groups = Vec::with_capacity(p.groups.len());
    for k in 0..p.groups.len() {
        let enumeration = p.enumerate(g, k)?;
        let order = &enumeration.order;
        let stations: Vec<Station> = order
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let endpoint = 2 * l.conn + usize::from(l.node == p.demands[l.conn].t);
                endpoints[endpoint].labels.push((k, i));
                Station {
                    endpoint,
                    alpha: coeffs.alpha(k, l.conn),
                    fs: VecDeque::new(),
                    ft: VecDeque::new(),
                    y_inbox: VecDeque::new(),
                    z_inbox: VecDeque::new(),
                    seen_y: BTreeMap::new(),
                    seen_z: BTreeMap::new(),
                    fs_peak: 0,
                    ft_peak: 0,
                }
            })
            .collect();
        let s_hops = order
            .windows(2)
            .map(|w| enumeration.walk.edges[w[0].forward_pos..w[1].forward_pos].to_vec())
            .collect();
        let t_hops = (0..order.len())
            .map(|i| match i.checked_sub(1) {
                Some(j) => enumeration.reverse.edges[order[i].reverse_pos..order[j].reverse_pos].to_vec(),
                None => Vec::new(),
            })
            .collect();
        groups.push(GroupRun {
            walk: k,
            enumeration,
            stations,
            s_hops,
            t_hops,
        });
    }

    let working_delay: Vec<u64> = p.working.iter().map(|r| schedule.edges_delay(&r.edges)).collect();
    let walk_delay: Vec<u64> = groups
        .iter()
        .map(|gr| {
            schedule
                .edges_delay(&gr.enumeration.walk.edges)
                .max(schedule.edges_delay(&gr.enumeration.reverse.edges))
        })
        .collect();
    let protection_delay = walk_delay.iter().copied().max().unwrap_or(0);
    let max_working_delay = working_delay.iter().copied().max().unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let order = field.order();
    let payload: Vec<Vec<Gf>> = (0..2 * n)
        .map(|_| (0..config.rounds).map(|_| Gf(rng.gen_range(0..order) as u16)).collect())
        .collect();
    let patterns: Vec<FailurePattern> = (0..config.rounds).map(|r| schedule.pattern(p, r)).collect();

    let add = |a: Gf, b: Gf| match config.mode {
        Mode::Scaled => field.add(a, b),
        Mode::Xor => Gf(a.0 ^ b.0),
    };
    let contribute = |alpha: Gf, local: Gf, received: Gf| match config.mode {
        Mode::Scaled => contribution(field, alpha, local, received),
        Mode::Xor => Gf(local.0 ^ received.0),
    };

    let mut results: Vec<Vec<Option<EndpointRound>>> = vec![vec![None; config.rounds as usize]; 2 * n];
    let mut summary = Summary::default();
    let mut peak_in_flight = 0;
    let mut max_latency = 0;
    let slot_limit = config.rounds + 4 * (protection_delay + max_working_delay) + 16;
    let mut t = 0;
    loop {
        // Working-path deliveries feed both protection buffers of every
        // label the receiving endpoint holds.
        for ep in endpoints.iter_mut() {
            while ep.inbox.front().is_some_and(|u| u.0 <= t) {
                let (_, r, v) = ep.inbox.pop_front().expect("checked");
                let local = ep.tx.iter().find(|x| x.0 == r).expect("sent before received").1;
                ep.rx.push_back((r, v));
                for &(k, i) in &ep.labels {
                    let st = &mut groups[k].stations[i];
                    let c = contribute(st.alpha, local, v);
                    st.fs.push_back((r, c));
                    st.ft.push_back((r, c));
                }
            }
        }
        if t < config.rounds {
            for e in 0..2 * n {
                let c = e / 2;
                let v = payload[e][t as usize];
                endpoints[e].tx.push_back((t, v));
                let sent = if patterns[t as usize].connections.contains(&c) { Gf::ZERO } else { v };
                endpoints[e ^ 1].inbox.push_back((t + working_delay[c], t, sent));
            }
        }

        for gr in groups.iter_mut() {
            let len = gr.stations.len();
            for i in 0..len {
                if let Some((r, y)) = step(&mut gr.stations[i], t, i == 0, Dir::S, &add) {
                    if i + 1 < len {
                        let hop = &gr.s_hops[i];
                        let y = if hop_failed(schedule, hop, gr.walk, r) { Gf::ZERO } else { y };
                        gr.stations[i + 1].y_inbox.push_back((t + schedule.edges_delay(hop), r, y));
                    }
                }
            }
            for i in (0..len).rev() {
                if let Some((r, z)) = step(&mut gr.stations[i], t, i + 1 == len, Dir::T, &add) {
                    if i > 0 {
                        let hop = &gr.t_hops[i];
                        let z = if hop_failed(schedule, hop, gr.walk, r) { Gf::ZERO } else { z };
                        gr.stations[i - 1].z_inbox.push_back((t + schedule.edges_delay(hop), r, z));
                    }
                }
            }
        }

        for e in 0..2 * n {
            loop {
                let r = endpoints[e].next_decode;
                if r >= config.rounds || endpoints[e].rx.front().is_none_or(|x| x.0 != r) {
                    break;
                }
                let ready = endpoints[e].labels.iter().all(|&(k, i)| {
                    let st = &groups[k].stations[i];
                    st.seen_y.contains_key(&r) && st.seen_z.contains_key(&r)
                });
                if !ready {
                    break;
                }
                let ep = &mut endpoints[e];
                let equations: Vec<Equation> = ep
                    .labels
                    .iter()
                    .map(|&(k, i)| {
                        let st = &mut groups[k].stations[i];
                        let y = st.seen_y.remove(&r).expect("ready");
                        let z = st.seen_z.remove(&r).expect("ready");
                        Equation { walk: k, value: add(y, z) }
                    })
                    .collect();
                let own = ep.tx.pop_front().expect("generated").1;
                let received = ep.rx.pop_front().expect("received").1;
                let pattern = &patterns[r as usize];
                let failed = pattern.connections.contains(&ep.conn);
                let input = DecodeInput {
                    conn: ep.conn,
                    own_data: own,
                    pattern,
                    equations: &equations,
                };
                let decoded = match config.mode {
                    Mode::Scaled => decode(field, coeffs, &input),
                    Mode::Xor => Ok(xor_decode(coeffs, &input)),
                };
                let truth = payload[e ^ 1][r as usize];
                let outcome = match (decoded, failed) {
                    (Ok(Decoded::Recovered(v)), _) if v != truth => Outcome::Mismatch,
                    (Ok(Decoded::Recovered(_)), true) => Outcome::Recovered,
                    (Ok(Decoded::Recovered(_)), false) if received == truth => Outcome::CrossChecked,
                    (Ok(Decoded::Recovered(_)), false) => Outcome::Mismatch,
                    (Ok(Decoded::Insufficient), true) => Outcome::Insufficient,
                    (Ok(Decoded::Insufficient), false) => Outcome::PrimaryOnly,
                    (Err(DecodeError::Singular { .. }), _) => Outcome::Singular,
                    (Err(err), _) => return Err(err.into()),
                };
                summary.add(outcome);
                let latency = t - r;
                max_latency = max_latency.max(latency);
                results[e][r as usize] = Some(EndpointRound { outcome, latency });
                ep.next_decode += 1;
            }
        }

        for ep in endpoints.iter_mut() {
            track(&mut ep.tx_peak, ep.tx.len());
            track(&mut ep.rx_peak, ep.rx.len());
        }
        for gr in groups.iter_mut() {
            for st in gr.stations.iter_mut() {
                track(&mut st.fs_peak, st.fs.len());
                track(&mut st.ft_peak, st.ft.len());
            }
        }
        let generated = (t + 1).min(config.rounds);
        let completed = endpoints.iter().map(|e| e.next_decode).min().unwrap_or(generated);
        peak_in_flight = peak_in_flight.max(generated - completed);
        if completed >= config.rounds {
            break;
        }
        if t >= slot_limit {
            return Err(SimError::Stalled(t));
        }
        t += 1;
    }

    let records = (0..n)
        .flat_map(|c| {
            let results = &results;
            let patterns = &patterns;
            (0..config.rounds).map(move |r| RoundRecord {
                conn: c + 1,
                round: r,
                primary_failed: patterns[r as usize].connections.contains(&c),
                source: results[2 * c][r as usize].expect("every round decoded"),
                sink: results[2 * c + 1][r as usize].expect("every round decoded"),
            })
        })
        .collect();

    let buffers = endpoints
        .iter()
        .enumerate()
        .map(|(e, ep)| {
            let d = p.demands[ep.conn];
            let node = if ep.sink { d.t } else { d.s };
            let walks: Vec<usize> = ep.labels.iter().map(|&(k, _)| k).collect();
            let bounds = (!walks.is_empty()).then(|| {
                let chi_p = walks.iter().map(|&k| walk_delay[k]).max().expect("nonempty");
                let mut members: Vec<usize> = walks.iter().flat_map(|&k| p.groups[k].members.iter().copied()).collect();
                members.push(ep.conn);
                let chi_w: Vec<f64> = members.iter().map(|&c| working_delay[c] as f64).collect();
                buffer_bounds(chi_p as f64, &chi_w, 1.0, 1.0).expect("positive delays")
            });
            EndpointBuffers {
                node: g.external(node),
                conn: ep.conn + 1,
                end: if ep.sink { "sink" } else { "source" }.into(),
                tx_peak: ep.tx_peak,
                rx_peak: ep.rx_peak,
                bounds,
                walks: ep
                    .labels
                    .iter()
                    .map(|&(k, i)| {
                        let st = &groups[k].stations[i];
                        debug_assert_eq!(st.endpoint, e);
                        WalkBuffers {
                            walk: k + 1,
                            label: groups[k].enumeration.name(i),
                            fs_peak: st.fs_peak,
                            ft_peak: st.ft_peak,
                        }
                    })
                    .collect(),
            }
        })
        .collect();

    let bound = if protection_delay > 0 {
        round_number_bound(protection_delay as f64, 1.0, 1.0).expect("positive delay")
    } else {
        RoundBound { a: 0, field_bits: 0 }
    };
    Ok(SimReport {
        schema: REPORT_SCHEMA.into(),
        mode: config.mode,
        field: field.spec(),
        rounds: config.rounds,
        seed: config.seed,
        slots: t + 1,
        protection_delay,
        max_working_delay,
        max_latency,
        round_numbers: RoundUsage { bound, peak_in_flight },
        summary,
        records,
        buffers,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    S,
    T,
}

/// Processes the oldest pending round at a station in one direction when
/// both its contribution and the incoming signal are present.
fn step(st: &mut Station, t: u64, first: bool, dir: Dir, add: &impl Fn(Gf, Gf) -> Gf) -> Option<(u64, Gf)> {
    let (pending, inbox, seen) = match dir {
        Dir::S => (&mut st.fs, &mut st.y_inbox, &mut st.seen_y),
        Dir::T => (&mut st.ft, &mut st.z_inbox, &mut st.seen_z),
    };
    let &(r, c) = pending.front()?;
    let incoming = if first {
        Gf::ZERO
    } else {
        let &(arrival, round, v) = inbox.front()?;
        if arrival > t {
            return None;
        }
        debug_assert_eq!(round, r, "signals arrive in round order");
        inbox.pop_front();
        v
    };
    pending.pop_front();
    seen.insert(r, incoming);
    Some((r, add(incoming, c)))
}

fn hop_failed(schedule: &LinkSchedule, hop: &[EdgeId], walk: usize, round: u64) -> bool {
    schedule.any_failed(hop, round) || schedule.walk_failures.iter().any(|(k, r)| *k == walk && r.contains(round))
}

/// Single-walk decoding: the two signals sum to the partner's contribution
/// when this connection is the only failure on an intact walk.
fn xor_decode(coeffs: &CoefficientMatrix, input: &DecodeInput<'_>) -> Decoded {
    let Some(eq) = input.equations.first() else {
        return Decoded::Insufficient;
    };
    let others_failed = coeffs
        .mask
        .conns_of(eq.walk)
        .into_iter()
        .any(|l| l != input.conn && input.pattern.connections.contains(&l));
    if input.pattern.walks.contains(&eq.walk) || others_failed {
        return Decoded::Insufficient;
    }
    let delivered = if input.pattern.connections.contains(&input.conn) {
        Gf::ZERO
    } else {
        input.own_data
    };
    Decoded::Recovered(Gf(eq.value.0 ^ delivered.0))
}
