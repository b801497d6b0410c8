//! Negotiated-congestion routing over the fabric's wires.
//!
//! A wire is one output port. Each wire can carry one net; a net is
//! available at a cell once any wire carrying it enters one of the cell's
//! inputs, and the cell may then forward it on any of its outputs. Every
//! pass rips up and re-routes each net with A*, pricing wires by their
//! present overuse and a history term that grows on wires that stay
//! contested, until no wire carries two nets.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{external_port, external_rows, wire_id, Design, NetSource, Placement, PnrError, Sink};
use crate::fabric::{FabricParams, PortRef, WiringTopology, PORTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteOptions {
    pub max_iterations: usize,
    pub mixed_cells: bool,
}

impl Default for RouteOptions {
    fn default() -> Self {
        Self {
            max_iterations: 40,
            mixed_cells: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutedNet {
    pub name: String,
    /// Wire ids (see [`RouteResult::wire_port`]) used by the net.
    pub wires: Vec<usize>,
    /// Port sequence from the source to each sink.
    pub paths: Vec<(Sink, Vec<PortRef>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteResult {
    /// Indexed like [`Design::nets`].
    pub nets: Vec<RoutedNet>,
    /// Net carried by each wire.
    pub wire_net: Vec<Option<usize>>,
    /// Negotiation passes until the routing was legal.
    pub iterations: usize,
    width: usize,
}

impl RouteResult {
    /// Output port a wire id refers to.
    pub fn wire_port(&self, wire: usize) -> PortRef {
        let cell = wire / PORTS;
        PortRef::output(cell / self.width, cell % self.width, wire % PORTS)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    f: f64,
    seq: u64,
    state: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, then FIFO on insertion order.
        other.f.total_cmp(&self.f).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One net's routing tree. States are `(column, row)` indexed
/// `column * W + row`; column `Y` holds the result pseudo-states.
struct Tree {
    /// Wire that brought the net into each state; `Some(None)` marks a
    /// source state.
    reached: Vec<Option<Option<usize>>>,
    wires: Vec<usize>,
}

struct Router<'a> {
    design: &'a Design,
    topology: &'a WiringTopology,
    params: FabricParams,
    opts: RouteOptions,
    logic: Vec<bool>,
    sink_state: Vec<Vec<usize>>,
    blocked: Vec<bool>,
    occupancy: Vec<u32>,
    history: Vec<f64>,
    pres_fac: f64,
    /// Scratch buffers reused across searches.
    cost: Vec<f64>,
    came_from: Vec<(usize, usize)>,
    stamp: Vec<u32>,
    epoch: u32,
    sources: Vec<(usize, usize)>,
}

const BASE_COST: f64 = 1.0;

impl<'a> Router<'a> {
    fn w(&self) -> usize {
        self.params.width
    }

    /// Next state reached by taking output `port` of `(c, r)`.
    fn next_state(&self, c: usize, r: usize, port: usize) -> Option<usize> {
        let (w, y) = (self.w(), self.params.depth);
        if c + 1 == y {
            (port == 0).then_some(y * w + r)
        } else {
            let d = self
                .topology
                .output_dest(c, r, port)
                .expect("not the last column");
            Some((c + 1) * w + d.row)
        }
    }

    /// Whether `state` can still reach `target` in column/row distance.
    fn can_reach(&self, state: usize, target: usize) -> bool {
        let (w, y) = (self.w(), self.params.depth);
        let (c, r) = (state / w, state % w);
        let (tc, tr) = (target / w, target % w);
        if tc == y {
            // Results leave through output 0 of row `tr` in the last column.
            c == y && r == tr || c < y && r.abs_diff(tr) <= y - 1 - c
        } else {
            c <= tc && r.abs_diff(tr) <= tc - c
        }
    }

    fn wire_cost(&self, wire: usize) -> f64 {
        (BASE_COST + self.history[wire]) * (1.0 + self.pres_fac * f64::from(self.occupancy[wire]))
    }

    fn may_forward(&self, net: usize, state: usize, tree: &Tree) -> bool {
        let (w, y) = (self.w(), self.params.depth);
        if state / w >= y {
            return false;
        }
        let is_source = matches!(tree.reached[state], Some(None));
        if is_source && matches!(self.design.nets()[net].source, NetSource::Cell(_)) {
            return true;
        }
        self.opts.mixed_cells || !self.logic[state]
    }

    /// A* from every state of `tree` to `target`; extends the tree.
    fn search(&mut self, net: usize, tree: &mut Tree, target: usize) -> bool {
        let (w, y) = (self.w(), self.params.depth);
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let tc = target / w;
        let h = |s: usize| (tc - (s / w).min(tc)) as f64 * BASE_COST;
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        for s in 0..tree.reached.len() {
            if tree.reached[s].is_some()
                && self.may_forward(net, s, tree)
                && self.can_reach(s, target)
            {
                self.stamp[s] = self.epoch;
                self.cost[s] = 0.0;
                self.came_from[s] = (usize::MAX, usize::MAX);
                heap.push(Entry {
                    f: h(s),
                    seq,
                    state: s,
                });
                seq += 1;
            }
        }
        while let Some(Entry { state, .. }) = heap.pop() {
            if state == target {
                let mut s = state;
                let mut added = Vec::new();
                while tree.reached[s].is_none() {
                    let (prev, wire) = self.came_from[s];
                    added.push((s, wire));
                    s = prev;
                }
                for (s, wire) in added.into_iter().rev() {
                    tree.reached[s] = Some(Some(wire));
                    tree.wires.push(wire);
                }
                return true;
            }
            let g = self.cost[state];
            let (c, r) = (state / w, state % w);
            if c >= y {
                continue;
            }
            if tree.reached[state].is_none() && !self.may_forward(net, state, tree) {
                continue;
            }
            for port in [1, 2, 0, 3] {
                let wire = wire_id(w, c, r, port);
                if self.blocked[wire] || tree.wires.contains(&wire) {
                    continue;
                }
                let Some(next) = self.next_state(c, r, port) else {
                    continue;
                };
                if tree.reached[next].is_some() || !self.can_reach(next, target) {
                    continue;
                }
                let ng = g + self.wire_cost(wire);
                if self.stamp[next] != self.epoch || ng < self.cost[next] {
                    self.stamp[next] = self.epoch;
                    self.cost[next] = ng;
                    self.came_from[next] = (state, wire);
                    heap.push(Entry {
                        f: ng + h(next),
                        seq,
                        state: next,
                    });
                    seq += 1;
                }
            }
        }
        false
    }

    fn route_net(&mut self, net: usize) -> Result<Tree, PnrError> {
        let (w, y) = (self.w(), self.params.depth);
        let mut tree = Tree {
            reached: vec![None; (y + 1) * w],
            wires: Vec::new(),
        };
        let n = &self.design.nets()[net];
        match n.source {
            NetSource::Cell(ci) => {
                let (c, r) = self.source_cell(ci);
                tree.reached[c * w + r] = Some(None);
            }
            NetSource::External(ext) => {
                for r in external_rows(ext, w) {
                    tree.reached[r] = Some(None);
                }
            }
        }
        let sinks = self.sink_state[net].clone();
        for target in sinks {
            if tree.reached[target].is_some() {
                continue;
            }
            if !self.search(net, &mut tree, target) {
                let n = &self.design.nets()[net];
                return Err(PnrError::Routing {
                    net: n.name.clone(),
                    message: format!("no path to ({}, {})", target / w, target % w),
                });
            }
        }
        Ok(tree)
    }

    fn source_cell(&self, ci: usize) -> (usize, usize) {
        self.sources[ci]
    }
}

/// Routes every net of a placed design.
pub fn route(
    design: &Design,
    placement: &Placement,
    topology: &WiringTopology,
    opts: &RouteOptions,
) -> Result<RouteResult, PnrError> {
    let params = *topology.params();
    let (w, y) = (params.width, params.depth);
    let nwires = params.cells() * PORTS;
    let mut logic = vec![false; (y + 1) * w];
    for &(c, r) in &placement.cells {
        logic[c * w + r] = true;
    }
    let mut blocked = vec![false; nwires];
    for &(o, _) in design.const_outputs() {
        blocked[wire_id(w, y - 1, o, 0)] = true;
    }
    let sink_state: Vec<Vec<usize>> = design
        .nets()
        .iter()
        .map(|n| {
            let mut states: Vec<usize> = n
                .sinks
                .iter()
                .map(|s| match s {
                    Sink::Cell(ci) => {
                        let (c, r) = placement.cells[*ci];
                        c * w + r
                    }
                    Sink::Output(o) => y * w + o,
                })
                .collect();
            states.sort_unstable();
            states
        })
        .collect();
    let states = (y + 1) * w;
    let mut router = Router {
        design,
        topology,
        params,
        opts: *opts,
        logic,
        sink_state,
        blocked,
        occupancy: vec![0; nwires],
        history: vec![0.0; nwires],
        pres_fac: 0.5,
        cost: vec![0.0; states],
        came_from: vec![(0, 0); states],
        stamp: vec![0; states],
        epoch: 0,
        sources: placement.cells.clone(),
    };

    let nets = design.nets().len();
    let mut trees: Vec<Option<Tree>> = (0..nets).map(|_| None).collect();
    for pass in 1..=opts.max_iterations.max(1) {
        for (net, slot) in trees.iter_mut().enumerate() {
            if let Some(old) = slot.take() {
                for &wire in &old.wires {
                    router.occupancy[wire] -= 1;
                }
            }
            let tree = router.route_net(net)?;
            for &wire in &tree.wires {
                router.occupancy[wire] += 1;
            }
            *slot = Some(tree);
        }
        let overused: Vec<usize> = (0..nwires).filter(|&i| router.occupancy[i] > 1).collect();
        if overused.is_empty() {
            let trees: Vec<Tree> = trees.into_iter().map(|t| t.expect("routed")).collect();
            return Ok(finish(design, placement, topology, trees, pass));
        }
        if pass == opts.max_iterations.max(1) {
            let worst = overused
                .iter()
                .max_by_key(|&&i| router.occupancy[i])
                .copied()
                .expect("non-empty");
            let net = trees
                .iter()
                .position(|t| t.as_ref().is_some_and(|t| t.wires.contains(&worst)))
                .expect("an overused wire is used");
            let cell = worst / PORTS;
            return Err(PnrError::Routing {
                net: design.nets()[net].name.clone(),
                message: format!(
                    "{} wires still shared after {pass} passes, e.g. {}",
                    overused.len(),
                    PortRef::output(cell / w, cell % w, worst % PORTS)
                ),
            });
        }
        for &i in &overused {
            router.history[i] += f64::from(router.occupancy[i] - 1);
        }
        router.pres_fac *= 1.6;
    }
    unreachable!("the last pass either succeeds or returns an error")
}

fn finish(
    design: &Design,
    placement: &Placement,
    topology: &WiringTopology,
    trees: Vec<Tree>,
    iterations: usize,
) -> RouteResult {
    let params = topology.params();
    let (w, y) = (params.width, params.depth);
    let mut wire_net = vec![None; params.cells() * PORTS];
    let mut nets = Vec::with_capacity(trees.len());
    for (ni, tree) in trees.into_iter().enumerate() {
        let net = &design.nets()[ni];
        for &wire in &tree.wires {
            wire_net[wire] = Some(ni);
        }
        let mut paths = Vec::new();
        for sink in &net.sinks {
            let target = match sink {
                Sink::Cell(ci) => {
                    let (c, r) = placement.cells[*ci];
                    c * w + r
                }
                Sink::Output(o) => y * w + o,
            };
            // Walk back to a source state collecting wires.
            let mut wires = Vec::new();
            let mut s = target;
            while let Some(Some(wire)) = tree.reached[s] {
                wires.push(wire);
                let cell = wire / PORTS;
                s = cell;
            }
            wires.reverse();
            let mut path = Vec::new();
            if let NetSource::External(ext) = net.source {
                path.push(PortRef::input(0, s % w, external_port(ext)));
            }
            for wire in wires {
                let cell = wire / PORTS;
                let (c, r, k) = (cell / w, cell % w, wire % PORTS);
                path.push(PortRef::output(c, r, k));
                if let Some(dest) = topology.output_dest(c, r, k) {
                    path.push(dest);
                }
            }
            paths.push((*sink, path));
        }
        nets.push(RoutedNet {
            name: net.name.clone(),
            wires: tree.wires,
            paths,
        });
    }
    RouteResult {
        nets,
        wire_net,
        iterations,
        width: w,
    }
}
