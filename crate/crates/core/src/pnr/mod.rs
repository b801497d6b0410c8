//! Placement and routing of packed netlists onto the fabric.
//!
//! The flow is simplify, pack, levelize, place, route, and finally a
//! [`FabricConfig`] in which every cell is programmed: logic cells compute
//! their nodes, cells on a route forward signals with projection tables,
//! and everything else outputs constant 0.

mod place;
mod route;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::fabric::{
    build_topology, projection_table, CellConfig, Direction, ExternalInput, FabricConfig,
    FabricError, FabricParams, PortRef, WiringTopology, PORTS,
};
use crate::netlist::{pack, Netlist, NetlistError, PackedNetlist, PortName, Signal};

pub use place::{levelize, place, Placement};
pub use route::{route, RouteOptions, RouteResult, RoutedNet};

#[derive(Debug, Error)]
pub enum PnrError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error("netlist port `{0}` does not map onto the fabric")]
    Interface(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("routing failed for net `{net}`: {message}")]
    Routing { net: String, message: String },
}

impl PnrError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Netlist(e) => e.kind(),
            Self::Fabric(_) => "parameter",
            Self::Interface(_) => "interface",
            Self::Capacity(_) => "capacity",
            Self::Routing { .. } => "routing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetSource {
    External(ExternalInput),
    /// Index into [`PackedNetlist::cells`].
    Cell(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sink {
    Cell(usize),
    /// Result bit `rd[row]`, taken from output 0 of `(Y-1, row)`.
    Output(usize),
}

#[derive(Debug, Clone)]
pub struct Net {
    pub name: String,
    pub signal: Signal,
    pub source: NetSource,
    pub sinks: Vec<Sink>,
}

/// A packed netlist with its signals resolved to fabric nets.
#[derive(Debug, Clone)]
pub struct Design {
    packed: PackedNetlist,
    nets: Vec<Net>,
    net_of: HashMap<Signal, usize>,
    const_outputs: Vec<(usize, bool)>,
}

impl Design {
    pub fn new(packed: PackedNetlist, params: &FabricParams) -> Result<Self, PnrError> {
        let netlist = packed.netlist();
        let w = params.width;
        let mut nets = Vec::new();
        let mut net_of = HashMap::new();
        for (i, name) in netlist.inputs().iter().enumerate() {
            let ext = match PortName::parse(name) {
                Some(PortName::Rs1(j)) if j < w => ExternalInput::Rs1(j),
                Some(PortName::Rs2(j)) if j < w => ExternalInput::Rs2(j),
                Some(PortName::Funct3(k)) if k < w => ExternalInput::Funct3(k),
                _ => return Err(PnrError::Interface(name.clone())),
            };
            net_of.insert(Signal::Input(i), nets.len());
            nets.push(Net {
                name: name.clone(),
                signal: Signal::Input(i),
                source: NetSource::External(ext),
                sinks: Vec::new(),
            });
        }
        for (n, node) in netlist.nodes().iter().enumerate() {
            net_of.insert(Signal::Node(n), nets.len());
            nets.push(Net {
                name: node.name.clone(),
                signal: Signal::Node(n),
                source: NetSource::Cell(packed.cell_of(n).0),
                sinks: Vec::new(),
            });
        }
        for (ci, cell) in packed.cells().iter().enumerate() {
            for s in &cell.inputs {
                let net = net_of[s];
                if !nets[net].sinks.contains(&Sink::Cell(ci)) {
                    nets[net].sinks.push(Sink::Cell(ci));
                }
            }
        }
        let mut const_outputs = Vec::new();
        for (name, s) in netlist.outputs() {
            let row = match PortName::parse(name) {
                Some(PortName::Rd(o)) if o < w => o,
                _ => return Err(PnrError::Interface(name.clone())),
            };
            match s {
                Signal::Const(v) => const_outputs.push((row, *v)),
                other => nets[net_of[other]].sinks.push(Sink::Output(row)),
            }
        }
        for net in &mut nets {
            net.sinks.sort_unstable();
        }
        Ok(Self {
            packed,
            nets,
            net_of,
            const_outputs,
        })
    }

    pub fn packed(&self) -> &PackedNetlist {
        &self.packed
    }

    pub fn netlist(&self) -> &Netlist {
        self.packed.netlist()
    }

    pub fn nets(&self) -> &[Net] {
        &self.nets
    }

    pub fn net_of(&self, s: Signal) -> Option<usize> {
        self.net_of.get(&s).copied()
    }

    /// Result rows driven by a constant.
    pub fn const_outputs(&self) -> &[(usize, bool)] {
        &self.const_outputs
    }

    /// Human-readable name of a cell (its first node).
    pub fn cell_name(&self, cell: usize) -> &str {
        let node = self.packed.cells()[cell].nodes[0];
        &self.netlist().node(node).name
    }
}

/// Index of the wire leaving output `port` of `(column, row)`.
#[inline]
pub(crate) fn wire_id(width: usize, column: usize, row: usize, port: usize) -> usize {
    (column * width + row) * PORTS + port
}

/// Input port of a column-0 cell that carries an external operand.
pub(crate) fn external_port(ext: ExternalInput) -> usize {
    match ext {
        ExternalInput::Rs1(_) => 0,
        ExternalInput::Rs2(_) => 1,
        ExternalInput::Funct3(_) => 2,
        ExternalInput::Zero => 3,
    }
}

/// Column-0 rows on which an external operand is available.
pub(crate) fn external_rows(ext: ExternalInput, width: usize) -> Vec<usize> {
    match ext {
        ExternalInput::Rs1(j) | ExternalInput::Rs2(j) => vec![j],
        ExternalInput::Funct3(k) => (k..width).step_by(3).collect(),
        ExternalInput::Zero => Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompileOptions {
    pub seed: u64,
    /// Let logic cells forward unrelated nets on their spare outputs.
    pub mixed_cells: bool,
    /// Negotiated-congestion passes per routing attempt.
    pub route_iterations: usize,
    /// Placement attempts; attempts after the first add seeded row jitter.
    pub attempts: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            mixed_cells: true,
            route_iterations: 40,
            attempts: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompileStats {
    pub name: String,
    pub width: usize,
    pub depth_columns: usize,
    pub cells_logic: usize,
    pub cells_routing: usize,
    pub cells_constant: usize,
    /// Logic depth of the simplified netlist.
    pub depth: usize,
    /// Rightmost column holding logic, plus one.
    pub logic_columns: usize,
    pub nodes: usize,
    pub nets: usize,
    pub wires: usize,
    /// Placement attempts used.
    pub iterations: usize,
    pub route_passes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub config: FabricConfig,
    pub stats: CompileStats,
    pub design: Design,
    pub placement: Placement,
    pub routes: RouteResult,
}

/// Full flow from a netlist to a programmed fabric configuration.
pub fn compile(
    netlist: &Netlist,
    params: FabricParams,
    options: &CompileOptions,
) -> Result<Compiled, PnrError> {
    params.validate()?;
    let topology = build_topology(params)?;
    let design = Design::new(pack(&netlist.simplify()), &params)?;
    let asap = levelize(&design, &params)?;
    let route_opts = RouteOptions {
        max_iterations: options.route_iterations,
        mixed_cells: options.mixed_cells,
    };
    let mut last_err = None;
    for attempt in 0..options.attempts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(
            options.seed ^ (attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let jitter = attempt as f64 * 0.75;
        let placement = match place(&design, &params, &asap, &mut rng, jitter) {
            Ok(p) => p,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        match route(&design, &placement, &topology, &route_opts) {
            Ok(routes) => {
                let config = build_config(&design, &placement, &routes, &topology)?;
                let stats = stats(
                    &design,
                    &placement,
                    &routes,
                    &config,
                    attempt + 1,
                    options.seed,
                );
                return Ok(Compiled {
                    config,
                    stats,
                    design,
                    placement,
                    routes,
                });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn stats(
    design: &Design,
    placement: &Placement,
    routes: &RouteResult,
    config: &FabricConfig,
    iterations: usize,
    seed: u64,
) -> CompileStats {
    let p = config.params();
    let w = p.width;
    let mut logic = vec![false; p.cells()];
    for &(c, r) in &placement.cells {
        logic[c * w + r] = true;
    }
    let mut routing = vec![false; p.cells()];
    for (id, net) in routes.wire_net.iter().enumerate() {
        let cell = id / PORTS;
        if net.is_some() && !logic[cell] {
            routing[cell] = true;
        }
    }
    let cells_logic = placement.cells.len();
    let cells_routing = routing.iter().filter(|b| **b).count();
    CompileStats {
        name: design.netlist().name().to_string(),
        width: w,
        depth_columns: p.depth,
        cells_logic,
        cells_routing,
        cells_constant: p.cells() - cells_logic - cells_routing,
        depth: design.netlist().depth(),
        logic_columns: placement
            .cells
            .iter()
            .map(|(c, _)| c + 1)
            .max()
            .unwrap_or(0),
        nodes: design.netlist().nodes().len(),
        nets: design.nets().len(),
        wires: routes.wire_net.iter().filter(|n| n.is_some()).count(),
        iterations,
        route_passes: routes.iterations,
        seed,
    }
}

/// Nets present on the four input ports of `(column, row)`.
fn input_nets(
    design: &Design,
    routes: &RouteResult,
    topology: &WiringTopology,
    column: usize,
    row: usize,
) -> [Option<usize>; PORTS] {
    let w = topology.params().width;
    let mut out = [None; PORTS];
    for (p, slot) in out.iter_mut().enumerate() {
        *slot = if column == 0 {
            let ext = topology.external_input(row, p);
            design
                .nets
                .iter()
                .position(|n| n.source == NetSource::External(ext))
        } else {
            let src = topology.input_source(column, row, p).expect("column > 0");
            routes.wire_net[wire_id(w, src.column, src.row, src.port)]
        };
    }
    out
}

/// Turns a placed and routed design into cell truth tables.
fn build_config(
    design: &Design,
    placement: &Placement,
    routes: &RouteResult,
    topology: &WiringTopology,
) -> Result<FabricConfig, PnrError> {
    let params = *topology.params();
    let (w, y) = (params.width, params.depth);
    let mut config = FabricConfig::zeroed(params);
    let netlist = design.netlist();
    let mut cell_at: HashMap<(usize, usize), usize> = HashMap::new();
    for (ci, &loc) in placement.cells.iter().enumerate() {
        cell_at.insert(loc, ci);
    }
    for c in 0..y {
        for r in 0..w {
            let inputs = input_nets(design, routes, topology, c, r);
            let mut tables = [0u16; PORTS];
            for (k, table) in tables.iter_mut().enumerate() {
                if c == y - 1 && k == 0 {
                    if let Some((_, v)) = design.const_outputs.iter().find(|(o, _)| *o == r) {
                        *table = if *v { 0xFFFF } else { 0 };
                        continue;
                    }
                }
                let Some(net) = routes.wire_net[wire_id(w, c, r, k)] else {
                    continue;
                };
                let own_node = match (design.nets[net].signal, cell_at.get(&(c, r))) {
                    (Signal::Node(n), Some(&ci)) if design.packed.cell_of(n).0 == ci => Some(n),
                    _ => None,
                };
                if let Some(n) = own_node {
                    let node = netlist.node(n);
                    let mut ports = Vec::with_capacity(node.inputs.len());
                    for s in &node.inputs {
                        let want = design.net_of(*s);
                        let p = inputs
                            .iter()
                            .position(|i| i.is_some() && *i == want)
                            .ok_or_else(|| PnrError::Routing {
                                net: netlist.signal_name(*s),
                                message: format!(
                                    "does not reach the cell of `{}` at ({c}, {r})",
                                    node.name
                                ),
                            })?;
                        ports.push(p);
                    }
                    *table = (0..16usize).fold(0u16, |t, e| {
                        let idx = ports
                            .iter()
                            .enumerate()
                            .fold(0usize, |acc, (i, &p)| acc | (((e >> p) & 1) << i));
                        t | (((node.table >> idx) & 1) << e)
                    });
                } else {
                    let p = inputs.iter().position(|i| *i == Some(net)).ok_or_else(|| {
                        PnrError::Routing {
                            net: design.nets[net].name.clone(),
                            message: format!("forwarded by ({c}, {r}) without reaching its inputs"),
                        }
                    })?;
                    *table = projection_table(p);
                }
            }
            *config.cell_mut(c, r) = CellConfig::from_tables(tables);
        }
    }
    Ok(config)
}

/// Problems found by [`validate_config`]; empty means legal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_legal(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks grid shape and programming, and with a route also that every
/// path follows the wiring, no output port carries two nets, and every
/// forwarding step is a projection of the port the net arrived on.
pub fn validate_config(
    config: &FabricConfig,
    params: &FabricParams,
    routes: Option<&RouteResult>,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let v = &mut report.violations;
    let cp = config.params();
    if cp.width != params.width || cp.depth != params.depth {
        v.push(format!(
            "grid is {}x{}, expected {}x{}",
            cp.width, cp.depth, params.width, params.depth
        ));
        return report;
    }
    for c in 0..params.depth {
        for r in 0..params.width {
            if config.cell(c, r).is_bypass() {
                v.push(format!("cell ({c}, {r}) is left in bypass mode"));
            }
        }
    }
    let (Some(routes), Ok(topology)) = (routes, build_topology(*params)) else {
        return report;
    };
    let mut driver: HashMap<PortRef, &str> = HashMap::new();
    for net in &routes.nets {
        for (_, path) in &net.paths {
            for pair in path.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                match (a.direction, b.direction) {
                    (Direction::Output, Direction::Input) => {
                        if topology.output_dest(a.column, a.row, a.port) != Some(b) {
                            v.push(format!("net `{}`: {b} is not driven by {a}", net.name));
                        }
                    }
                    (Direction::Input, Direction::Output) => {
                        if (a.column, a.row) != (b.column, b.row) {
                            v.push(format!(
                                "net `{}`: {a} and {b} are different cells",
                                net.name
                            ));
                        } else if config.cell(b.column, b.row).table(b.port)
                            != projection_table(a.port)
                        {
                            v.push(format!("net `{}`: {b} does not forward {a}", net.name));
                        }
                    }
                    _ => v.push(format!("net `{}`: {a} followed by {b}", net.name)),
                }
            }
            for port in path.iter().filter(|p| p.direction == Direction::Output) {
                match driver.get(port) {
                    Some(other) if *other != net.name => {
                        v.push(format!("{port} carries both `{other}` and `{}`", net.name));
                    }
                    _ => {
                        driver.insert(*port, &net.name);
                    }
                }
            }
        }
    }
    v.sort();
    v.dedup();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{corpus, node_table};
    use crate::sim::{FabricState, Operands};
    use rand::Rng;

    fn params() -> FabricParams {
        FabricParams::default()
    }

    fn check_equivalence(netlist: &Netlist, compiled: &Compiled, samples: usize) {
        let state = FabricState::with_config(&compiled.config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mask = (1u64 << compiled.config.params().width) - 1;
        for _ in 0..samples {
            let ops = Operands::new(
                rng.gen::<u64>() & mask,
                rng.gen::<u64>() & mask,
                rng.gen_range(0..8),
            );
            assert_eq!(
                state.eval_combinational(ops),
                netlist.eval_operands(ops.rs1, ops.rs2, ops.funct3).unwrap(),
                "{ops:?}"
            );
        }
    }

    #[test]
    fn small_corpus_compiles() {
        for name in ["xor", "identity", "zero", "popcount"] {
            let n = corpus(name, 32, 0).unwrap();
            let c = compile(&n, params(), &CompileOptions::default()).unwrap();
            let s = &c.stats;
            assert_eq!(
                s.cells_logic + s.cells_routing + s.cells_constant,
                1024,
                "{name}"
            );
            assert!(
                validate_config(&c.config, &params(), Some(&c.routes)).is_legal(),
                "{name}"
            );
            check_equivalence(&n, &c, 2000);
        }
    }

    #[test]
    fn permute_xor_compiles() {
        let n = corpus("permute_xor", 32, 7).unwrap();
        let c = compile(&n, params(), &CompileOptions::default()).unwrap();
        assert!(c.stats.iterations <= 20);
        assert!(validate_config(&c.config, &params(), Some(&c.routes)).is_legal());
        check_equivalence(&n, &c, 2000);
    }

    #[test]
    fn deep_chain_exceeds_capacity() {
        let p = FabricParams::new(4, 4, 4, 1).unwrap();
        let mut n = Netlist::new("chain");
        let a = n.input("rs1[0]");
        let b = n.input("rs2[0]");
        let mut s = a;
        for i in 0..5 {
            s = n
                .add_node(
                    format!("g{i}"),
                    vec![s, b],
                    node_table(2, |e| e == 1 || e == 2),
                )
                .unwrap();
        }
        n.add_output("rd[0]", s).unwrap();
        let err = compile(&n, p, &CompileOptions::default()).unwrap_err();
        assert_eq!(err.kind(), "capacity");
        assert!(err.to_string().contains("g4"), "{err}");
    }

    #[test]
    fn bad_port_names_are_rejected() {
        let n = corpus("xor", 40, 0).unwrap();
        assert_eq!(
            compile(&n, params(), &CompileOptions::default())
                .unwrap_err()
                .kind(),
            "interface"
        );
    }

    #[test]
    fn deterministic_for_a_seed() {
        let n = corpus("permute_xor", 16, 3).unwrap();
        let p = FabricParams::new(16, 16, 16, 1).unwrap();
        let opts = CompileOptions {
            seed: 5,
            ..Default::default()
        };
        let a = compile(&n, p, &opts).unwrap();
        let b = compile(&n, p, &opts).unwrap();
        assert_eq!(a.config, b.config);
        assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn validation_flags_bypass_and_corruption() {
        let n = corpus("xor", 8, 0).unwrap();
        let p = FabricParams::new(8, 8, 8, 1).unwrap();
        let c = compile(&n, p, &CompileOptions::default()).unwrap();
        assert!(validate_config(&c.config, &p, Some(&c.routes)).is_legal());

        let mut cfg = c.config.clone();
        *cfg.cell_mut(3, 3) = CellConfig::bypass();
        assert_eq!(validate_config(&cfg, &p, None).violations.len(), 1);

        let mut routes = c.routes.clone();
        let path = routes
            .nets
            .iter_mut()
            .flat_map(|n| n.paths.iter_mut())
            .find(|(_, path)| path.len() >= 3)
            .map(|(_, path)| path)
            .unwrap();
        let idx = path
            .iter()
            .position(|p| p.direction == Direction::Input && p.column > 0)
            .unwrap();
        path[idx].column += 1;
        let bad = path[idx].to_string();
        let report = validate_config(&c.config, &p, Some(&routes));
        assert!(!report.is_legal());
        assert!(
            report.violations.iter().any(|v| v.contains(&bad)),
            "{report:?}"
        );
    }
}
