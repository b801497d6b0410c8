//! Groups LUT nodes into fabric cells (four outputs over one shared set of
//! up to four inputs).

use super::{Netlist, NetlistError, Signal, MAX_FANIN};

/// Nodes sharing one cell. `tables[i]` is node `nodes[i]` re-expressed over
/// `inputs` (entry bit `k` is `inputs[k]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedCell {
    pub nodes: Vec<usize>,
    pub inputs: Vec<Signal>,
    pub tables: Vec<u16>,
    pub level: usize,
}

#[derive(Debug, Clone)]
pub struct PackedNetlist {
    netlist: Netlist,
    cells: Vec<PackedCell>,
    /// `(cell, slot)` for every node.
    location: Vec<(usize, usize)>,
}

impl PackedNetlist {
    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    /// Cells ordered by level, so fanin cells always precede their readers.
    pub fn cells(&self) -> &[PackedCell] {
        &self.cells
    }

    pub fn cell_of(&self, node: usize) -> (usize, usize) {
        self.location[node]
    }

    /// Distinct cells feeding cell `idx`.
    pub fn fanin_cells(&self, idx: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.cells[idx]
            .inputs
            .iter()
            .filter_map(|s| match s {
                Signal::Node(n) => Some(self.location[*n].0),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Evaluates through the packed tables only; used to check packing.
    pub fn eval(&self, assignment: &[bool]) -> Result<Vec<bool>, NetlistError> {
        if assignment.len() != self.netlist.inputs().len() {
            return Err(NetlistError::Resolution(format!(
                "expected {} input values, got {}",
                self.netlist.inputs().len(),
                assignment.len()
            )));
        }
        let mut values = vec![false; self.netlist.nodes().len()];
        let value = |s: Signal, values: &[bool]| match s {
            Signal::Input(i) => assignment[i],
            Signal::Node(n) => values[n],
            Signal::Const(v) => v,
        };
        for cell in &self.cells {
            let idx = cell.inputs.iter().enumerate().fold(0usize, |acc, (k, s)| {
                acc | (usize::from(value(*s, &values)) << k)
            });
            for (slot, &n) in cell.nodes.iter().enumerate() {
                values[n] = (cell.tables[slot] >> idx) & 1 == 1;
            }
        }
        Ok(self
            .netlist
            .outputs()
            .iter()
            .map(|(_, s)| value(*s, &values))
            .collect())
    }
}

fn union(a: &[Signal], b: &[Signal]) -> Vec<Signal> {
    let mut out = a.to_vec();
    for s in b {
        if !out.contains(s) {
            out.push(*s);
        }
    }
    out
}

/// Packs nodes of equal logic level that share at least one input and fit
/// within four distinct inputs. Equal levels keep cells free of internal
/// dependencies, so the cell graph stays acyclic.
pub fn pack(netlist: &Netlist) -> PackedNetlist {
    let levels = netlist.levels();
    let mut cells: Vec<PackedCell> = Vec::new();
    for (n, node) in netlist.nodes().iter().enumerate() {
        let ins: Vec<Signal> = union(&[], &node.inputs)
            .into_iter()
            .filter(|s| !matches!(s, Signal::Const(_)))
            .collect();
        let best = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.level == levels[n] && c.nodes.len() < 4)
            .filter_map(|(i, c)| {
                let shared = ins.iter().filter(|s| c.inputs.contains(s)).count();
                let fits = union(&c.inputs, &ins).len() <= MAX_FANIN;
                (shared > 0 && fits).then_some((shared, std::cmp::Reverse(i)))
            })
            .max()
            .map(|(_, std::cmp::Reverse(i))| i);
        match best {
            Some(i) => {
                let cell = &mut cells[i];
                cell.inputs = union(&cell.inputs, &ins);
                cell.nodes.push(n);
            }
            None => cells.push(PackedCell {
                nodes: vec![n],
                inputs: ins,
                tables: Vec::new(),
                level: levels[n],
            }),
        }
    }
    cells.sort_by_key(|c| c.level);

    let mut location = vec![(0, 0); netlist.nodes().len()];
    for (ci, cell) in cells.iter_mut().enumerate() {
        let inputs = cell.inputs.clone();
        cell.tables = cell
            .nodes
            .iter()
            .map(|&n| {
                remap_table(
                    &netlist.nodes()[n].inputs,
                    netlist.nodes()[n].table,
                    &inputs,
                )
            })
            .collect();
        for (slot, &n) in cell.nodes.iter().enumerate() {
            location[n] = (ci, slot);
        }
    }
    PackedNetlist {
        netlist: netlist.clone(),
        cells,
        location,
    }
}

/// Re-expresses a table over `node_inputs` as a table over `cell_inputs`.
pub(crate) fn remap_table(node_inputs: &[Signal], table: u16, cell_inputs: &[Signal]) -> u16 {
    (0..16usize).fold(0u16, |t, e| {
        let idx = node_inputs.iter().enumerate().fold(0usize, |acc, (k, s)| {
            let bit = match s {
                Signal::Const(v) => *v,
                other => {
                    let pos = cell_inputs
                        .iter()
                        .position(|x| x == other)
                        .expect("input in cell");
                    (e >> pos) & 1 == 1
                }
            };
            acc | (usize::from(bit) << k)
        });
        t | (((table >> idx) & 1) << e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::node_table;

    fn xor2() -> u16 {
        node_table(2, |e| e == 1 || e == 2)
    }

    #[test]
    fn shared_inputs_pack_together() {
        let mut n = Netlist::new("p");
        let a = n.input("rs1[0]");
        let b = n.input("rs1[1]");
        let c = n.input("rs1[2]");
        let d = n.input("rs1[3]");
        let pairs = [(a, b), (b, c), (c, d), (a, d)];
        for (i, (x, y)) in pairs.iter().enumerate() {
            let s = n.add_node(format!("x{i}"), vec![*x, *y], xor2()).unwrap();
            n.add_output(format!("rd[{i}]"), s).unwrap();
        }
        let p = pack(&n);
        assert_eq!(p.cells().len(), 1);
        assert_eq!(p.cells()[0].inputs.len(), 4);
    }

    #[test]
    fn disjoint_inputs_stay_apart() {
        let mut n = Netlist::new("p");
        let ins: Vec<_> = (0..6).map(|i| n.input(&format!("rs1[{i}]"))).collect();
        let t = node_table(3, |e| e == 7);
        let x = n.add_node("x", ins[0..3].to_vec(), t).unwrap();
        let y = n.add_node("y", ins[3..6].to_vec(), t).unwrap();
        n.add_output("rd[0]", x).unwrap();
        n.add_output("rd[1]", y).unwrap();
        assert_eq!(pack(&n).cells().len(), 2);
    }

    #[test]
    fn different_levels_never_share_a_cell() {
        let mut n = Netlist::new("p");
        let a = n.input("rs1[0]");
        let b = n.input("rs1[1]");
        let x = n.add_node("x", vec![a, b], xor2()).unwrap();
        let y = n.add_node("y", vec![x, a], xor2()).unwrap();
        n.add_output("rd[0]", y).unwrap();
        let p = pack(&n);
        assert_eq!(p.cells().len(), 2);
        assert_eq!(p.fanin_cells(1), vec![0]);
    }

    #[test]
    fn packed_eval_matches_netlist() {
        let n = crate::netlist::gen_popcount(8).unwrap().simplify();
        let p = pack(&n);
        for v in 0..256u64 {
            let assignment = n.operand_assignment(v, 0, 0).unwrap();
            assert_eq!(p.eval(&assignment).unwrap(), n.eval(&assignment).unwrap());
        }
        for cell in p.cells() {
            assert!(cell.inputs.len() <= 4 && cell.nodes.len() <= 4);
        }
    }
}
