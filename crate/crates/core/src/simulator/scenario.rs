//! Scenario files: working paths, protection walks, link delays, failure
//! directives and coefficient choice, laid on a topology loaded separately.
//!
//! ```text
//! conn <s> <t> path <v> ... <v>     # working path, numbered C1, C2, ...
//! walk <v> ... <v>                  # protection walk, numbered P1, P2, ...
//! walk-reverse <k> <v> ... <v>      # separate route for P<k>'s T signal
//! protect <k> <conn> ...            # P<k> protects these connections
//! delay <u> <v> <slots> | delay default <slots>
//! fail link <u> <v> from <round> [to <round>]
//! fail walk <k> from <round> [to <round>]
//! rounds <n>
//! seed <n>
//! field <bits> [<poly>]
//! max-failures <m>
//! coeffs ones|vandermonde|cauchy|random|complete|explicit
//! alpha <walk> <conn> <value>       # entries for `coeffs explicit`
//! ```
//!
//! Connection and walk numbers are 1-based; `to` rounds are inclusive.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::str::FromStr;

use crate::analysis::{sweep, RecoveryGraph, DEFAULT_PATTERN_CAP};
use crate::coding::{
    assign_all_ones, assign_cauchy, assign_random, assign_vandermonde, complete_matrix, CodingError,
    CoefficientMatrix, FailurePattern, ProtectionMask,
};
use crate::galois::{Field, FieldError, FieldMatrix, FieldSpec};
use crate::topology::{parse_node, parse_num, tokens, Demand, EdgeId, Graph, GroupSpec, NodeId, Provisioning, Route, TopologyError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error("coefficient sweep: {0}")]
    Analysis(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoeffChoice {
    Ones,
    Vandermonde,
    Cauchy,
    Random,
    #[default]
    Complete,
    Explicit,
}

impl FromStr for CoeffChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "ones" => CoeffChoice::Ones,
            "vandermonde" => CoeffChoice::Vandermonde,
            "cauchy" => CoeffChoice::Cauchy,
            "random" => CoeffChoice::Random,
            "complete" => CoeffChoice::Complete,
            "explicit" => CoeffChoice::Explicit,
            other => return Err(format!("unknown coefficient scheme '{other}'")),
        })
    }
}

/// Rounds `from..=to`, open-ended when `to` is absent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRange {
    pub from: u64,
    pub to: Option<u64>,
}

impl RoundRange {
    pub fn contains(&self, round: u64) -> bool {
        round >= self.from && self.to.is_none_or(|t| round <= t)
    }
}

/// Link delays in whole slots and the rounds during which links or walks
/// deliver zeros.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSchedule {
    pub default_delay: u64,
    pub delays: BTreeMap<EdgeId, u64>,
    pub link_failures: Vec<(EdgeId, RoundRange)>,
    pub walk_failures: Vec<(usize, RoundRange)>,
}

impl Default for LinkSchedule {
    fn default() -> Self {
        LinkSchedule {
            default_delay: 1,
            delays: BTreeMap::new(),
            link_failures: Vec::new(),
            walk_failures: Vec::new(),
        }
    }
}

impl LinkSchedule {
    pub fn delay(&self, e: EdgeId) -> u64 {
        self.delays.get(&e).copied().unwrap_or(self.default_delay)
    }

    pub fn edges_delay(&self, edges: &[EdgeId]) -> u64 {
        edges.iter().map(|&e| self.delay(e)).sum()
    }

    pub fn link_failed(&self, e: EdgeId, round: u64) -> bool {
        self.link_failures.iter().any(|(f, r)| *f == e && r.contains(round))
    }

    pub fn any_failed(&self, edges: &[EdgeId], round: u64) -> bool {
        edges.iter().any(|&e| self.link_failed(e, round))
    }

    /// Walks fail as a whole: a failed link anywhere on either signal route
    /// or an explicit walk directive.
    pub fn walk_failed(&self, p: &Provisioning, walk: usize, round: u64) -> bool {
        let spec = &p.groups[walk];
        self.walk_failures.iter().any(|(k, r)| *k == walk && r.contains(round))
            || self.any_failed(&spec.walk.edges, round)
            || spec.reverse.as_ref().is_some_and(|r| self.any_failed(&r.edges, round))
    }

    pub fn pattern(&self, p: &Provisioning, round: u64) -> FailurePattern {
        FailurePattern::new(
            (0..p.working.len()).filter(|&c| self.any_failed(&p.working[c].edges, round)),
            (0..p.groups.len()).filter(|&k| self.walk_failed(p, k, round)),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub provisioning: Provisioning,
    pub schedule: LinkSchedule,
    pub rounds: u64,
    pub seed: u64,
    pub field: FieldSpec,
    pub coeffs: CoeffChoice,
    pub max_failures: Option<usize>,
    /// `(walk, conn, value)` entries for explicit coefficients.
    pub alphas: Vec<(usize, usize, u32)>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            provisioning: Provisioning::default(),
            schedule: LinkSchedule::default(),
            rounds: 16,
            seed: 0,
            field: FieldSpec::GF256,
            coeffs: CoeffChoice::default(),
            max_failures: None,
            alphas: Vec::new(),
        }
    }
}

fn edges_between(g: &Graph, a: NodeId, b: NodeId) -> Vec<EdgeId> {
    let mut out = Vec::new();
    while let Some(e) = g.edge_between(a, b, &out) {
        out.push(e);
    }
    out
}

fn index(tok: &str, line: usize, what: &str, count: usize) -> Result<usize, ScenarioError> {
    let k: usize = parse_num(tok, line, what)?;
    if k == 0 || k > count {
        return Err(parse_err(line, format!("{what} {k} out of range 1..={count}")));
    }
    Ok(k - 1)
}

fn range(tok: &[&str], line: usize) -> Result<RoundRange, ScenarioError> {
    match tok {
        ["from", f] => Ok(RoundRange {
            from: parse_num(f, line, "round")?,
            to: None,
        }),
        ["from", f, "to", t] => {
            let r = RoundRange {
                from: parse_num(f, line, "round")?,
                to: Some(parse_num(t, line, "round")?),
            };
            if r.to < Some(r.from) {
                return Err(parse_err(line, "failure ends before it starts"));
            }
            Ok(r)
        }
        _ => Err(parse_err(line, "expected 'from <round> [to <round>]'")),
    }
}

fn route(g: &Graph, toks: &[&str], line: usize) -> Result<Route, ScenarioError> {
    let nodes = toks.iter().map(|t| parse_node(g, t, line)).collect::<Result<Vec<_>, _>>()?;
    if nodes.len() < 2 {
        return Err(parse_err(line, "a route needs at least two nodes"));
    }
    Route::from_nodes(g, &nodes).map_err(|e| parse_err(line, e.to_string()))
}

impl Scenario {
    pub fn parse(g: &Graph, text: &str) -> Result<Scenario, ScenarioError> {
        let mut sc = Scenario::default();
        let mut reverse: Vec<(usize, usize, Route)> = Vec::new();
        let mut protect: Vec<(usize, usize, Vec<usize>)> = Vec::new();
        let mut alphas: Vec<(usize, usize, usize, u32)> = Vec::new();
        let mut field_line = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let Some(tok) = tokens(raw) else { continue };
            match tok[0] {
                "conn" => {
                    if tok.len() < 5 || tok[3] != "path" {
                        return Err(parse_err(line, "expected 'conn <s> <t> path <nodes...>'"));
                    }
                    let s = parse_node(g, tok[1], line)?;
                    let t = parse_node(g, tok[2], line)?;
                    let r = route(g, &tok[4..], line)?;
                    if r.first() != s || r.last() != t {
                        return Err(parse_err(line, "working path must run from s to t"));
                    }
                    sc.provisioning.demands.push(Demand { s, t });
                    sc.provisioning.working.push(r);
                }
                "walk" => {
                    let r = route(g, &tok[1..], line)?;
                    sc.provisioning.groups.push(GroupSpec {
                        walk: r,
                        reverse: None,
                        members: Vec::new(),
                    });
                }
                "walk-reverse" => {
                    if tok.len() < 4 {
                        return Err(parse_err(line, "expected 'walk-reverse <k> <nodes...>'"));
                    }
                    let k: usize = parse_num(tok[1], line, "walk")?;
                    reverse.push((line, k, route(g, &tok[2..], line)?));
                }
                "protect" => {
                    if tok.len() < 3 {
                        return Err(parse_err(line, "expected 'protect <walk> <conn...>'"));
                    }
                    let k: usize = parse_num(tok[1], line, "walk")?;
                    let conns = tok[2..]
                        .iter()
                        .map(|t| parse_num(t, line, "connection"))
                        .collect::<Result<Vec<usize>, _>>()?;
                    protect.push((line, k, conns));
                }
                "delay" => match tok[1..] {
                    ["default", d] => sc.schedule.default_delay = parse_num(d, line, "delay")?,
                    [u, v, d] => {
                        let (a, b) = (parse_node(g, u, line)?, parse_node(g, v, line)?);
                        let d: u64 = parse_num(d, line, "delay")?;
                        let es = edges_between(g, a, b);
                        if es.is_empty() {
                            return Err(TopologyError::NotAdjacent { from: g.external(a), to: g.external(b) }.into());
                        }
                        for e in es {
                            sc.schedule.delays.insert(e, d);
                        }
                    }
                    _ => return Err(parse_err(line, "expected 'delay <u> <v> <slots>' or 'delay default <slots>'")),
                },
                "fail" => match tok.get(1) {
                    Some(&"link") if tok.len() >= 4 => {
                        let (a, b) = (parse_node(g, tok[2], line)?, parse_node(g, tok[3], line)?);
                        let r = range(&tok[4..], line)?;
                        let es = edges_between(g, a, b);
                        if es.is_empty() {
                            return Err(TopologyError::NotAdjacent { from: g.external(a), to: g.external(b) }.into());
                        }
                        sc.schedule.link_failures.extend(es.into_iter().map(|e| (e, r)));
                    }
                    Some(&"walk") if tok.len() >= 3 => {
                        let k = index(tok[2], line, "walk", sc.provisioning.groups.len())?;
                        sc.schedule.walk_failures.push((k, range(&tok[3..], line)?));
                    }
                    _ => return Err(parse_err(line, "expected 'fail link <u> <v> ...' or 'fail walk <k> ...'")),
                },
                "rounds" if tok.len() == 2 => sc.rounds = parse_num(tok[1], line, "round count")?,
                "seed" if tok.len() == 2 => sc.seed = parse_num(tok[1], line, "seed")?,
                "max-failures" if tok.len() == 2 => sc.max_failures = Some(parse_num(tok[1], line, "failure count")?),
                "coeffs" if tok.len() == 2 => sc.coeffs = tok[1].parse().map_err(|m: String| parse_err(line, m))?,
                "field" if tok.len() == 2 || tok.len() == 3 => {
                    let bits: u8 = parse_num(tok[1], line, "field width")?;
                    field_line = Some(line);
                    sc.field = match tok.get(2) {
                        None => FieldSpec::smallest(bits)?,
                        Some(p) => FieldSpec::new(bits, parse_poly(p).ok_or_else(|| parse_err(line, format!("bad polynomial '{p}'")))?)?,
                    };
                }
                "alpha" if tok.len() == 4 => {
                    let k: usize = parse_num(tok[1], line, "walk")?;
                    let c: usize = parse_num(tok[2], line, "connection")?;
                    let v = parse_poly(tok[3]).ok_or_else(|| parse_err(line, format!("bad coefficient '{}'", tok[3])))?;
                    alphas.push((line, k, c, v));
                }
                other => return Err(parse_err(line, format!("unrecognised directive '{other}'"))),
            }
        }
        let (walks, conns) = (sc.provisioning.groups.len(), sc.provisioning.demands.len());
        for (line, k, r) in reverse {
            let k = index(&k.to_string(), line, "walk", walks)?;
            sc.provisioning.groups[k].reverse = Some(r);
        }
        for (line, k, cs) in protect {
            let k = index(&k.to_string(), line, "walk", walks)?;
            for c in cs {
                let c = index(&c.to_string(), line, "connection", conns)?;
                if !sc.provisioning.groups[k].members.contains(&c) {
                    sc.provisioning.groups[k].members.push(c);
                }
            }
        }
        for (line, k, c, v) in alphas {
            let k = index(&k.to_string(), line, "walk", walks)?;
            let c = index(&c.to_string(), line, "connection", conns)?;
            if v >= sc.field.order() {
                return Err(parse_err(field_line.unwrap_or(line), format!("coefficient {v} outside {}", sc.field)));
            }
            sc.alphas.push((k, c, v));
        }
        if sc.schedule.default_delay == 0 || sc.schedule.delays.values().any(|&d| d == 0) {
            return Err(parse_err(0, "link delays must be at least one slot"));
        }
        Ok(sc)
    }

    pub fn mask(&self) -> ProtectionMask {
        ProtectionMask::from_provisioning(&self.provisioning)
    }

    /// Failures the coefficients must withstand: the configured value, else
    /// the largest number of walks protecting any connection.
    pub fn failure_budget(&self) -> usize {
        self.max_failures.unwrap_or_else(|| {
            (0..self.provisioning.demands.len())
                .map(|c| self.provisioning.protecting(c).len())
                .max()
                .unwrap_or(1)
                .max(1)
        })
    }

    pub fn coefficients(&self, field: &Field, choice: CoeffChoice, max_failures: usize) -> Result<CoefficientMatrix, ScenarioError> {
        let mask = self.mask();
        Ok(match choice {
            CoeffChoice::Ones => assign_all_ones(&mask, field),
            CoeffChoice::Vandermonde => assign_vandermonde(&mask, field)?,
            CoeffChoice::Cauchy => assign_cauchy(&mask, field)?,
            CoeffChoice::Random => assign_random(&mask, field, self.seed),
            CoeffChoice::Complete => {
                let rg = RecoveryGraph::from_coefficients(assign_all_ones(&mask, field));
                let swept = sweep(field, &rg, max_failures, DEFAULT_PATTERN_CAP).map_err(|e| ScenarioError::Analysis(e.to_string()))?;
                complete_matrix(&mask, &swept.required, field, self.seed, 64)?.coefficients
            }
            CoeffChoice::Explicit => {
                let mut matrix = FieldMatrix::zeros(field.spec(), mask.walks, mask.conns);
                for &(k, c, v) in &self.alphas {
                    matrix.set(k, c, field.elem(v)?);
                }
                let m = CoefficientMatrix { matrix, mask };
                m.validate(field)?;
                m
            }
        })
    }
}

/// Decimal, or hexadecimal with a `0x` prefix.
pub fn parse_poly(tok: &str) -> Option<u32> {
    match tok.strip_prefix("0x").or_else(|| tok.strip_prefix("0X")) {
        Some(h) => u32::from_str_radix(h, 16).ok(),
        None => tok.parse().ok(),
    }
}
