//! Linear Hawkes processes: branching sampler, parent attribution and
//! counterfactual sampling from observed sequences.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::cf_poisson::{counterfactual_branch, rejections_window};
use crate::error::{check_positive, invalid, Error, Result};
use crate::gumbel_scm::CfMode;
use crate::intensity::{BranchKernel, HawkesParams};
use crate::randomness::{stage, Label, Stream, StreamKey};
use crate::thinning::{lewis_sample_window_with, EventSequence};

pub const DEFAULT_EVENT_CAP: usize = 100_000;

/// Branch ids at or above this value belong to counterfactual-only events.
const NEW_BRANCH_BASE: u64 = 1 << 62;

/// Cause of an event: the background process or an earlier event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parent {
    Background,
    Event(usize),
}

/// Parent of every event of a sequence, by index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchAssignment {
    parents: Vec<Parent>,
}

impl BranchAssignment {
    pub fn new(parents: Vec<Parent>) -> Result<Self> {
        for (i, p) in parents.iter().enumerate() {
            if let Parent::Event(k) = *p {
                if k >= i {
                    return Err(invalid("parents", format!("event {i} has parent {k}")));
                }
            }
        }
        Ok(Self { parents })
    }

    pub fn parents(&self) -> &[Parent] {
        &self.parents
    }

    pub fn parent(&self, index: usize) -> Parent {
        self.parents[index]
    }

    /// Children of every event plus the background's, by index.
    pub fn children(&self) -> (Vec<usize>, Vec<Vec<usize>>) {
        let mut background = Vec::new();
        let mut children = vec![Vec::new(); self.parents.len()];
        for (i, p) in self.parents.iter().enumerate() {
            match *p {
                Parent::Background => background.push(i),
                Parent::Event(k) => children[k].push(i),
            }
        }
        (background, children)
    }
}

/// A sampled Hawkes realization.
#[derive(Clone, Debug, PartialEq)]
pub struct HawkesRealization {
    pub events: EventSequence,
    pub assignment: BranchAssignment,
    /// Set when the event cap stopped the sampler early.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Pending<T> {
    time: f64,
    seq: u64,
    item: T,
}

impl<T: PartialEq> Eq for Pending<T> {}

impl<T: PartialEq> Ord for Pending<T> {
    // min-heap on (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<T: PartialEq> PartialOrd for Pending<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn check_lambda_max(lambda_max: f64, params: &[&HawkesParams]) -> Result<()> {
    check_positive("lambda_max", lambda_max)?;
    for p in params {
        p.validate()?;
        let bound = p.branch_bound();
        if bound > lambda_max {
            return Err(Error::DominatingRateViolated {
                t: 0.0,
                intensity: bound,
                lambda_max,
            });
        }
    }
    Ok(())
}

/// Sorts generated events by time and remaps parent indices. Exact ties,
/// which have probability zero, are separated by one ulp.
fn sort_generated(times: Vec<f64>, parents: Vec<Parent>) -> (Vec<f64>, Vec<Parent>) {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
    let mut rank = vec![0; times.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let mut sorted_times: Vec<f64> = Vec::with_capacity(times.len());
    let mut sorted_parents = Vec::with_capacity(times.len());
    for &i in &order {
        let mut t = times[i];
        if let Some(&last) = sorted_times.last() {
            if t <= last {
                t = last.next_up();
            }
        }
        sorted_times.push(t);
        sorted_parents.push(match parents[i] {
            Parent::Background => Parent::Background,
            Parent::Event(k) => Parent::Event(rank[k]),
        });
    }
    (sorted_times, sorted_parents)
}

/// Samples a Hawkes process on `[0, horizon]` through its branching
/// structure, with the default event cap.
pub fn sample_hawkes(
    params: &HawkesParams,
    lambda_max: f64,
    horizon: f64,
    stream: &mut Stream,
) -> Result<HawkesRealization> {
    sample_hawkes_capped(params, lambda_max, horizon, DEFAULT_EVENT_CAP, stream)
}

pub fn sample_hawkes_capped(
    params: &HawkesParams,
    lambda_max: f64,
    horizon: f64,
    event_cap: usize,
    stream: &mut Stream,
) -> Result<HawkesRealization> {
    check_positive("horizon", horizon)?;
    check_lambda_max(lambda_max, &[params])?;
    let mut times = Vec::new();
    let mut parents = Vec::new();
    let mut truncated = false;
    let mut queue = BinaryHeap::new();

    let background = BranchKernel::background(params);
    lewis_sample_window_with(&background, lambda_max, 0.0, horizon, stream, |t, accept| {
        if accept {
            if times.len() >= event_cap {
                truncated = true;
                return false;
            }
            queue.push(Pending {
                time: t,
                seq: times.len() as u64,
                item: times.len(),
            });
            times.push(t);
            parents.push(Parent::Background);
        }
        true
    })?;

    while let Some(Pending { time, item, .. }) = queue.pop() {
        if truncated || params.alpha == 0.0 {
            break;
        }
        let kernel = BranchKernel::offspring(params, time);
        lewis_sample_window_with(&kernel, lambda_max, time, horizon, stream, |t, accept| {
            if accept {
                if times.len() >= event_cap {
                    truncated = true;
                    return false;
                }
                queue.push(Pending {
                    time: t,
                    seq: times.len() as u64,
                    item: times.len(),
                });
                times.push(t);
                parents.push(Parent::Event(item));
            }
            true
        })?;
    }

    let (times, parents) = sort_generated(times, parents);
    Ok(HawkesRealization {
        events: EventSequence::new(times, horizon)?,
        assignment: BranchAssignment::new(parents)?,
        truncated,
    })
}

/// Attribution weights of event `index`: background first, then each
/// earlier event. They sum to one.
pub fn attribution_weights(observed: &[f64], params: &HawkesParams, index: usize) -> Result<Vec<f64>> {
    let t = observed[index];
    let mut w = Vec::with_capacity(index + 1);
    w.push(params.mu);
    w.extend(observed[..index].iter().map(|&tk| params.alpha * params.kernel(t - tk)));
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroIntensityAtEvent { t });
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Samples the parent of every observed event in proportion to the branch
/// intensities at its time.
pub fn assign(observed: &EventSequence, params_m: &HawkesParams, stream: &mut Stream) -> Result<BranchAssignment> {
    params_m.validate()?;
    let times = observed.times();
    let mut parents = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        // unnormalized cumulative search, reading only as far as needed
        let excitation: Vec<f64> = times[..i]
            .iter()
            .map(|&tk| params_m.alpha * params_m.kernel(t - tk))
            .collect();
        let total = params_m.mu + excitation.iter().sum::<f64>();
        if !(total > 0.0) {
            return Err(Error::ZeroIntensityAtEvent { t });
        }
        let mut target = stream.uniform() * total;
        let mut parent = Parent::Background;
        if target >= params_m.mu {
            target -= params_m.mu;
            let mut chosen = None;
            for (k, &w) in excitation.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(k);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            // rounding can only push past the last positive weight
            parent = chosen.map_or(Parent::Background, Parent::Event);
        }
        parents.push(parent);
    }
    BranchAssignment::new(parents)
}

/// Where a counterfactual event comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// An observed event that also occurs in the counterfactual.
    Kept,
    /// A new event of the background process.
    BackgroundNew,
    /// A new offspring of a kept observed event.
    OffspringOfKept,
    /// A new offspring of a new event.
    OffspringOfNew,
}

impl Origin {
    pub fn as_str(&self) -> &'static str {
        match self {
            Origin::Kept => "kept",
            Origin::BackgroundNew => "background_new",
            Origin::OffspringOfKept => "offspring_of_kept",
            Origin::OffspringOfNew => "offspring_of_new",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "kept" => Origin::Kept,
            "background_new" => Origin::BackgroundNew,
            "offspring_of_kept" => Origin::OffspringOfKept,
            "offspring_of_new" => Origin::OffspringOfNew,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CfEvent {
    pub time: f64,
    pub origin: Origin,
}

/// A counterfactual Hawkes realization with event provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct HawkesCounterfactual {
    /// Sorted by time.
    pub events: Vec<CfEvent>,
    pub horizon: f64,
    pub truncated: bool,
}

impl HawkesCounterfactual {
    pub fn sequence(&self) -> EventSequence {
        EventSequence::from_sorted_unchecked(self.events.iter().map(|e| e.time).collect(), self.horizon)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HawkesCfOptions {
    #[serde(default)]
    pub mode: CfMode,
    #[serde(default = "default_cap")]
    pub event_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_EVENT_CAP
}

impl Default for HawkesCfOptions {
    fn default() -> Self {
        Self {
            mode: CfMode::Exact,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }
}

/// Smallest dominating rate covering every branch of both regimes.
pub fn default_lambda_max(params_m: &HawkesParams, params_cf: &HawkesParams) -> f64 {
    params_m.branch_bound().max(params_cf.branch_bound())
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Node {
    Observed(usize),
    New(u64),
}

/// Counterfactual Hawkes realization for `observed` under `params_cf`.
///
/// Parents are attributed under `params_m`; each branch of the factual
/// superposition then gets its own counterfactual Poisson pass, and events
/// that only exist in the counterfactual spawn fresh offspring. Branch
/// streams are keyed by event identity, so the result does not depend on
/// processing order.
pub fn counterfactual_hawkes(
    params_m: &HawkesParams,
    params_cf: &HawkesParams,
    observed: &EventSequence,
    lambda_max: f64,
    horizon: f64,
    options: HawkesCfOptions,
    stream: &mut Stream,
) -> Result<HawkesCounterfactual> {
    check_positive("horizon", horizon)?;
    check_lambda_max(lambda_max, &[params_m, params_cf])?;
    let times = observed.times();
    if times.last().is_some_and(|&t| t > horizon) {
        return Err(Error::InvalidSequence {
            index: times.len() - 1,
            horizon,
        });
    }
    let key = stream.split_key();
    let assignment = assign(observed, params_m, &mut key.stage(stage::ASSIGN).stream())?;
    let (background_children, children) = assignment.children();

    let mut events: Vec<CfEvent> = Vec::new();
    let mut queue: BinaryHeap<Pending<Node>> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut truncated = false;
    let cap = options.event_cap;

    let mut emit = |time: f64,
                    origin: Origin,
                    node: Node,
                    events: &mut Vec<CfEvent>,
                    queue: &mut BinaryHeap<Pending<Node>>|
     -> bool {
        if events.len() >= cap {
            return false;
        }
        events.push(CfEvent { time, origin });
        queue.push(Pending { time, seq, item: node });
        seq += 1;
        true
    };

    let branch = |children: &[usize],
                  m: BranchKernel,
                  cf: BranchKernel,
                  start: f64,
                  branch_key: StreamKey|
     -> Result<Vec<(f64, Node)>> {
        let child_times: Vec<f64> = children.iter().map(|&c| times[c]).collect();
        let mut s = branch_key.stream();
        let rejected = rejections_window(&m, lambda_max, start, horizon, &mut s)?;
        let out = counterfactual_branch(&m, &cf, &child_times, &rejected, lambda_max, options.mode, &mut s)?;
        let mut new_id = 0u64;
        Ok(out
            .into_iter()
            .map(|e| match e.observed {
                Some(k) => (e.time, Node::Observed(children[k])),
                None => {
                    new_id += 1;
                    (e.time, Node::New(new_id - 1))
                }
            })
            .collect())
    };

    // new events are identified by (branch id, rank within branch)
    let mut new_ids: Vec<(u64, u64)> = Vec::new();
    let register_new = |new_ids: &mut Vec<(u64, u64)>, branch_id: u64, rank: u64| -> u64 {
        new_ids.push((branch_id, rank));
        (new_ids.len() - 1) as u64
    };

    let bg = branch(
        &background_children,
        BranchKernel::background(params_m),
        BranchKernel::background(params_cf),
        0.0,
        key.child(Label::Branch, 0),
    )?;
    'outer: {
        for (t, node) in bg {
            let (origin, node) = match node {
                Node::Observed(i) => (Origin::Kept, Node::Observed(i)),
                Node::New(r) => (Origin::BackgroundNew, Node::New(register_new(&mut new_ids, 0, r))),
            };
            if !emit(t, origin, node, &mut events, &mut queue) {
                truncated = true;
                break 'outer;
            }
        }

        while let Some(Pending { time, item, .. }) = queue.pop() {
            match item {
                Node::Observed(j) => {
                    let branch_id = j as u64 + 1;
                    let out = branch(
                        &children[j],
                        BranchKernel::offspring(params_m, time),
                        BranchKernel::offspring(params_cf, time),
                        time,
                        key.child(Label::Branch, branch_id),
                    )?;
                    for (t, node) in out {
                        let (origin, node) = match node {
                            Node::Observed(i) => (Origin::Kept, Node::Observed(i)),
                            Node::New(r) => (
                                Origin::OffspringOfKept,
                                Node::New(register_new(&mut new_ids, branch_id, r)),
                            ),
                        };
                        if !emit(t, origin, node, &mut events, &mut queue) {
                            truncated = true;
                            break 'outer;
                        }
                    }
                }
                Node::New(id) => {
                    if params_cf.alpha == 0.0 {
                        continue;
                    }
                    let (parent_branch, rank) = new_ids[id as usize];
                    let mut s = key
                        .child(Label::Branch, NEW_BRANCH_BASE + parent_branch)
                        .child(Label::Replicate, rank)
                        .stream();
                    let kernel = BranchKernel::offspring(params_cf, time);
                    let mut born = Vec::new();
                    lewis_sample_window_with(&kernel, lambda_max, time, horizon, &mut s, |t, a| {
                        if a {
                            born.push(t);
                        }
                        true
                    })?;
                    let branch_id = NEW_BRANCH_BASE + id + 1;
                    for (r, t) in born.into_iter().enumerate() {
                        let node = Node::New(register_new(&mut new_ids, branch_id, r as u64));
                        if !emit(t, Origin::OffspringOfNew, node, &mut events, &mut queue) {
                            truncated = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
    }

    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    for i in 1..events.len() {
        if events[i].time <= events[i - 1].time {
            events[i].time = events[i - 1].time.next_up();
        }
    }
    Ok(HawkesCounterfactual {
        events,
        horizon,
        truncated,
    })
}
