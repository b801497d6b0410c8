//! LUT-level combinational netlists.
//!
//! A [`Netlist`] is a DAG of LUT nodes with at most four ordered inputs and
//! a 16-bit truth table. Entry `e` of a table is the output for
//! `in0 = e & 1, in1 = (e >> 1) & 1, ...`; inputs beyond a node's fanin
//! are don't-cares and the table is replicated across them.
//!
//! Instruction circuits use the port names `rs1[i]`, `rs2[i]`, `funct3[i]`
//! for inputs and `rd[i]` for outputs.

mod blif;
pub mod corpus;
mod pack;

use std::collections::HashMap;

use thiserror::Error;

pub use blif::{parse_blif, write_blif};
pub use corpus::{
    corpus, gen_funct3_mux, gen_permute_xor, gen_permute_xor_seeded, gen_popcount, popcount_bits,
    random_permutations, CORPUS_NAMES,
};
pub use pack::{pack, PackedCell, PackedNetlist};

pub const MAX_FANIN: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("node `{name}` has {fanin} inputs; at most 4 are supported")]
    UnsupportedWidth { name: String, fanin: usize },
    #[error("unsupported BLIF feature: {0}")]
    UnsupportedFeature(String),
    #[error("combinational cycle through `{0}`")]
    Cycle(String),
    #[error("unresolved signal: {0}")]
    Resolution(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
}

impl NetlistError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Parse { .. } => "parse",
            Self::UnsupportedWidth { .. } => "unsupported-width",
            Self::UnsupportedFeature(_) => "unsupported-feature",
            Self::Cycle(_) => "cycle",
            Self::Resolution(_) => "resolution",
            Self::Param(_) => "parameter",
            Self::Capacity(_) => "capacity",
        }
    }
}

/// Reference to a value inside a netlist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Signal {
    Input(usize),
    Node(usize),
    Const(bool),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub inputs: Vec<Signal>,
    pub table: u16,
}

impl Node {
    #[inline]
    fn eval(&self, value: impl Fn(Signal) -> bool) -> bool {
        let idx = self
            .inputs
            .iter()
            .enumerate()
            .fold(0u32, |acc, (k, &s)| acc | (u32::from(value(s)) << k));
        (self.table >> idx) & 1 == 1
    }
}

/// Builds a table for a `fanin`-input function, replicated over unused inputs.
pub fn node_table(fanin: usize, f: impl Fn(usize) -> bool) -> u16 {
    let mask = (1usize << fanin) - 1;
    (0..16).fold(0u16, |t, e| t | (u16::from(f(e & mask)) << e))
}

/// Which instruction port a canonical name refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortName {
    Rs1(usize),
    Rs2(usize),
    Funct3(usize),
    Rd(usize),
}

impl PortName {
    pub fn parse(name: &str) -> Option<Self> {
        let (base, rest) = name.split_once('[')?;
        let idx: usize = rest.strip_suffix(']')?.parse().ok()?;
        match base {
            "rs1" => Some(Self::Rs1(idx)),
            "rs2" => Some(Self::Rs2(idx)),
            "funct3" if idx < 3 => Some(Self::Funct3(idx)),
            "rd" => Some(Self::Rd(idx)),
            _ => None,
        }
    }
}

impl std::fmt::Display for PortName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Rs1(i) => write!(f, "rs1[{i}]"),
            Self::Rs2(i) => write!(f, "rs2[{i}]"),
            Self::Funct3(i) => write!(f, "funct3[{i}]"),
            Self::Rd(i) => write!(f, "rd[{i}]"),
        }
    }
}

/// Acyclic LUT network. Nodes are kept in topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    name: String,
    inputs: Vec<String>,
    outputs: Vec<(String, Signal)>,
    nodes: Vec<Node>,
    names: HashMap<String, Signal>,
}

impl Netlist {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            nodes: Vec::new(),
            names: HashMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[(String, Signal)] {
        &self.outputs
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn lookup(&self, name: &str) -> Option<Signal> {
        self.names.get(name).copied()
    }

    fn claim(&mut self, name: &str, sig: Signal) -> Result<(), NetlistError> {
        if self.names.contains_key(name) {
            return Err(NetlistError::Param(format!(
                "duplicate signal name `{name}`"
            )));
        }
        self.names.insert(name.to_string(), sig);
        Ok(())
    }

    pub fn add_input(&mut self, name: impl Into<String>) -> Result<Signal, NetlistError> {
        let name = name.into();
        let sig = Signal::Input(self.inputs.len());
        self.claim(&name, sig)?;
        self.inputs.push(name);
        Ok(sig)
    }

    /// Returns the input called `name`, adding it if missing.
    pub fn input(&mut self, name: &str) -> Signal {
        match self.names.get(name) {
            Some(&s) => s,
            None => self.add_input(name).expect("name is free"),
        }
    }

    pub fn add_node(
        &mut self,
        name: impl Into<String>,
        inputs: Vec<Signal>,
        table: u16,
    ) -> Result<Signal, NetlistError> {
        let name = name.into();
        if inputs.len() > MAX_FANIN {
            return Err(NetlistError::UnsupportedWidth {
                name,
                fanin: inputs.len(),
            });
        }
        for s in &inputs {
            self.check_signal(*s)?;
        }
        let sig = Signal::Node(self.nodes.len());
        self.claim(&name, sig)?;
        self.nodes.push(Node {
            name,
            inputs,
            table,
        });
        Ok(sig)
    }

    pub fn add_output(
        &mut self,
        name: impl Into<String>,
        signal: Signal,
    ) -> Result<(), NetlistError> {
        let name = name.into();
        self.check_signal(signal)?;
        if self.outputs.iter().any(|(n, _)| *n == name) {
            return Err(NetlistError::Param(format!("duplicate output `{name}`")));
        }
        self.outputs.push((name, signal));
        Ok(())
    }

    fn check_signal(&self, s: Signal) -> Result<(), NetlistError> {
        match s {
            Signal::Input(i) if i >= self.inputs.len() => {
                Err(NetlistError::Resolution(format!("input #{i}")))
            }
            Signal::Node(i) if i >= self.nodes.len() => {
                Err(NetlistError::Resolution(format!("node #{i}")))
            }
            _ => Ok(()),
        }
    }

    pub fn signal_name(&self, s: Signal) -> String {
        match s {
            Signal::Input(i) => self.inputs[i].clone(),
            Signal::Node(i) => self.nodes[i].name.clone(),
            Signal::Const(v) => format!("const{}", u8::from(v)),
        }
    }

    /// Logic level of every node: 0 when fed only by inputs or constants.
    pub fn levels(&self) -> Vec<usize> {
        let mut levels = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            levels[i] = node
                .inputs
                .iter()
                .filter_map(|s| match s {
                    Signal::Node(j) => Some(levels[*j] + 1),
                    _ => None,
                })
                .max()
                .unwrap_or(0);
        }
        levels
    }

    /// Longest chain of nodes between an input and an output.
    pub fn depth(&self) -> usize {
        self.levels().iter().map(|l| l + 1).max().unwrap_or(0)
    }

    /// Evaluates all outputs; `assignment` is indexed like [`Netlist::inputs`].
    pub fn eval(&self, assignment: &[bool]) -> Result<Vec<bool>, NetlistError> {
        if assignment.len() != self.inputs.len() {
            return Err(NetlistError::Resolution(format!(
                "expected {} input values, got {}",
                self.inputs.len(),
                assignment.len()
            )));
        }
        let mut values = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = node.eval(|s| value_of(s, assignment, &values));
            values.push(v);
        }
        Ok(self
            .outputs
            .iter()
            .map(|(_, s)| value_of(*s, assignment, &values))
            .collect())
    }

    /// Evaluates with named input values.
    pub fn eval_named(
        &self,
        assignment: &HashMap<String, bool>,
    ) -> Result<Vec<bool>, NetlistError> {
        let values =
            self.inputs
                .iter()
                .map(|n| {
                    assignment.get(n).copied().ok_or_else(|| {
                        NetlistError::Resolution(format!("no value for input `{n}`"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
        self.eval(&values)
    }

    /// Maps operand bits onto the canonical inputs.
    pub fn operand_assignment(
        &self,
        rs1: u64,
        rs2: u64,
        funct3: u8,
    ) -> Result<Vec<bool>, NetlistError> {
        self.inputs
            .iter()
            .map(|n| match PortName::parse(n) {
                Some(PortName::Rs1(i)) if i < 64 => Ok((rs1 >> i) & 1 == 1),
                Some(PortName::Rs2(i)) if i < 64 => Ok((rs2 >> i) & 1 == 1),
                Some(PortName::Funct3(i)) => Ok((funct3 >> i) & 1 == 1),
                _ => Err(NetlistError::Resolution(format!(
                    "`{n}` is not an instruction operand bit"
                ))),
            })
            .collect()
    }

    /// Packs the `rd[i]` outputs into an integer.
    pub fn result_word(&self, outputs: &[bool]) -> Result<u64, NetlistError> {
        let mut rd = 0u64;
        for ((name, _), &v) in self.outputs.iter().zip(outputs) {
            match PortName::parse(name) {
                Some(PortName::Rd(i)) if i < 64 => rd |= u64::from(v) << i,
                _ => {
                    return Err(NetlistError::Resolution(format!(
                        "`{name}` is not a result bit"
                    )))
                }
            }
        }
        Ok(rd)
    }

    /// Evaluates an instruction circuit on operand values.
    pub fn eval_operands(&self, rs1: u64, rs2: u64, funct3: u8) -> Result<u64, NetlistError> {
        let assignment = self.operand_assignment(rs1, rs2, funct3)?;
        let outputs = self.eval(&assignment)?;
        self.result_word(&outputs)
    }

    /// Folds constants and buffers, drops unused inputs of each node and
    /// removes nodes that do not reach an output.
    pub fn simplify(&self) -> Netlist {
        // Resolve every node to a constant, an alias of another signal, or a
        // reduced function over original signals.
        let mut alias: Vec<Signal> = Vec::with_capacity(self.nodes.len());
        let mut reduced: Vec<Option<(Vec<Signal>, u16)>> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let inputs: Vec<Signal> = node
                .inputs
                .iter()
                .map(|s| match s {
                    Signal::Node(j) => alias[*j],
                    other => *other,
                })
                .collect();
            let (support, table) = reduce_function(&inputs, node.table);
            match support.len() {
                0 => {
                    alias.push(Signal::Const(table & 1 == 1));
                    reduced.push(None);
                }
                1 if table == node_table(1, |e| e == 1) => {
                    alias.push(support[0]);
                    reduced.push(None);
                }
                _ => {
                    alias.push(Signal::Node(i));
                    reduced.push(Some((support, table)));
                }
            }
        }
        let resolve = |s: Signal| match s {
            Signal::Node(j) => alias[j],
            other => other,
        };
        let mut live = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = self
            .outputs
            .iter()
            .filter_map(|(_, s)| match resolve(*s) {
                Signal::Node(j) => Some(j),
                _ => None,
            })
            .collect();
        while let Some(j) = stack.pop() {
            if std::mem::replace(&mut live[j], true) {
                continue;
            }
            let (support, _) = reduced[j].as_ref().expect("live nodes are kept");
            stack.extend(support.iter().filter_map(|s| match s {
                Signal::Node(k) => Some(*k),
                _ => None,
            }));
        }

        let mut out = Netlist::new(self.name.clone());
        for name in &self.inputs {
            out.add_input(name.clone()).expect("input names are unique");
        }
        let mut renumber: Vec<Option<Signal>> = vec![None; self.nodes.len()];
        let remap = |s: Signal, renumber: &[Option<Signal>]| match s {
            Signal::Node(k) => renumber[k].expect("topological order"),
            other => other,
        };
        for (j, entry) in reduced.iter().enumerate() {
            if !live[j] {
                continue;
            }
            let (support, table) = entry.as_ref().expect("live nodes are kept");
            let inputs = support.iter().map(|s| remap(*s, &renumber)).collect();
            renumber[j] = Some(
                out.add_node(self.nodes[j].name.clone(), inputs, *table)
                    .expect("valid node"),
            );
        }
        for (name, s) in &self.outputs {
            let sig = remap(resolve(*s), &renumber);
            out.add_output(name.clone(), sig).expect("valid output");
        }
        out
    }
}

#[inline]
fn value_of(s: Signal, inputs: &[bool], nodes: &[bool]) -> bool {
    match s {
        Signal::Input(i) => inputs[i],
        Signal::Node(i) => nodes[i],
        Signal::Const(v) => v,
    }
}

/// Rewrites a node function over its true support: constants substituted,
/// repeated inputs merged, and inputs the function ignores removed.
pub(crate) fn reduce_function(inputs: &[Signal], table: u16) -> (Vec<Signal>, u16) {
    let mut support: Vec<Signal> = Vec::new();
    for s in inputs {
        if !matches!(s, Signal::Const(_)) && !support.contains(s) {
            support.push(*s);
        }
    }
    let eval = |support: &[Signal], e: usize| -> bool {
        let idx = inputs.iter().enumerate().fold(0usize, |acc, (k, s)| {
            let bit = match s {
                Signal::Const(v) => *v,
                other => {
                    let pos = support.iter().position(|x| x == other).expect("in support");
                    (e >> pos) & 1 == 1
                }
            };
            acc | (usize::from(bit) << k)
        });
        (table >> idx) & 1 == 1
    };
    let mut current = support.clone();
    let mut values: Vec<bool> = (0..1usize << current.len())
        .map(|e| eval(&support, e))
        .collect();
    let mut k = 0;
    while k < current.len() {
        let independent = (0..values.len()).all(|e| values[e] == values[e ^ (1 << k)]);
        if independent {
            current.remove(k);
            values = (0..1usize << current.len())
                .map(|e| {
                    let low = e & ((1 << k) - 1);
                    let high = (e >> k) << (k + 1);
                    values[low | high]
                })
                .collect();
        } else {
            k += 1;
        }
    }
    let table = node_table(current.len(), |e| values[e]);
    (current, table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn and_netlist() -> Netlist {
        let mut n = Netlist::new("and");
        let a = n.add_input("a").unwrap();
        let b = n.add_input("b").unwrap();
        let y = n
            .add_node("y", vec![a, b], node_table(2, |e| e == 3))
            .unwrap();
        n.add_output("y", y).unwrap();
        n
    }

    #[test]
    fn and_evaluates() {
        let n = and_netlist();
        assert_eq!(n.node(0).table, 0x8888);
        assert_eq!(n.eval(&[true, true]).unwrap(), vec![true]);
        assert_eq!(n.eval(&[true, false]).unwrap(), vec![false]);
        assert!(matches!(n.eval(&[true]), Err(NetlistError::Resolution(_))));
        let mut named = HashMap::new();
        named.insert("a".to_string(), true);
        assert!(n.eval_named(&named).is_err());
        named.insert("b".to_string(), true);
        assert_eq!(n.eval_named(&named).unwrap(), vec![true]);
    }

    #[test]
    fn fanin_limit_enforced() {
        let mut n = Netlist::new("wide");
        let ins: Vec<_> = (0..5)
            .map(|i| n.add_input(format!("i{i}")).unwrap())
            .collect();
        let err = n.add_node("y", ins, 0).unwrap_err();
        assert_eq!(err.kind(), "unsupported-width");
    }

    #[test]
    fn port_names() {
        assert_eq!(PortName::parse("rs1[31]"), Some(PortName::Rs1(31)));
        assert_eq!(PortName::parse("funct3[2]"), Some(PortName::Funct3(2)));
        assert_eq!(PortName::parse("funct3[3]"), None);
        assert_eq!(PortName::parse("rd[0]"), Some(PortName::Rd(0)));
        assert_eq!(PortName::parse("rd0"), None);
        assert_eq!(PortName::Rs2(4).to_string(), "rs2[4]");
    }

    #[test]
    fn reduce_folds_constants_and_duplicates() {
        let a = Signal::Input(0);
        let b = Signal::Input(1);
        // a AND 1 -> a
        let (s, t) = reduce_function(&[a, Signal::Const(true)], node_table(2, |e| e == 3));
        assert_eq!(s, vec![a]);
        assert_eq!(t, node_table(1, |e| e == 1));
        // a XOR a -> constant 0
        let (s, t) = reduce_function(&[a, a], node_table(2, |e| e == 1 || e == 2));
        assert!(s.is_empty());
        assert_eq!(t & 1, 0);
        // function ignoring its second input
        let (s, _) = reduce_function(&[a, b], node_table(2, |e| e & 1 == 0));
        assert_eq!(s, vec![a]);
    }

    #[test]
    fn simplify_preserves_function_and_prunes() {
        let mut n = Netlist::new("s");
        let a = n.input("rs1[0]");
        let b = n.input("rs2[0]");
        let one = n.add_node("one", vec![], 0xFFFF).unwrap();
        let and1 = n
            .add_node("and1", vec![a, one], node_table(2, |e| e == 3))
            .unwrap();
        let buf = n
            .add_node("buf", vec![and1], node_table(1, |e| e == 1))
            .unwrap();
        let x = n
            .add_node("x", vec![buf, b], node_table(2, |e| e == 1 || e == 2))
            .unwrap();
        let _dead = n.add_node("dead", vec![a, b], 0x1234).unwrap();
        n.add_output("rd[0]", x).unwrap();
        n.add_output("rd[1]", one).unwrap();
        let s = n.simplify();
        assert_eq!(s.nodes().len(), 1);
        assert_eq!(s.outputs()[1].1, Signal::Const(true));
        for rs1 in 0..2 {
            for rs2 in 0..2 {
                assert_eq!(
                    s.eval_operands(rs1, rs2, 0).unwrap(),
                    n.eval_operands(rs1, rs2, 0).unwrap()
                );
            }
        }
    }
}
