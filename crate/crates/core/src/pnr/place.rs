//! Column levelization and row placement.
//!
//! A signal moves at most one row per column, so a cell at `(c, r)` can
//! read a value produced at `(c', r')` only if `|r - r'| <= c - c'`, and its
//! outputs can reach result row `o` only if `|r - o| <= Y - 1 - c`. The
//! placer only considers locations satisfying both bounds.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{external_rows, Design, NetSource, PnrError, Sink};
use crate::fabric::FabricParams;
use crate::netlist::Signal;

/// Grid location of every packed cell, indexed like the packed cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub cells: Vec<(usize, usize)>,
}

impl Placement {
    /// Map from grid location to the cell placed there.
    pub fn grid(&self, params: &FabricParams) -> Vec<Option<usize>> {
        let mut grid = vec![None; params.cells()];
        for (ci, &(c, r)) in self.cells.iter().enumerate() {
            grid[c * params.width + r] = Some(ci);
        }
        grid
    }
}

/// Earliest column of every cell: one past its latest fanin cell, with
/// operands counting as column -1.
pub fn levelize(design: &Design, params: &FabricParams) -> Result<Vec<usize>, PnrError> {
    let packed = design.packed();
    let mut column = vec![0usize; packed.cells().len()];
    for ci in 0..packed.cells().len() {
        column[ci] = packed
            .fanin_cells(ci)
            .iter()
            .map(|f| column[*f] + 1)
            .max()
            .unwrap_or(0);
    }
    if let Some((ci, &c)) = column.iter().enumerate().max_by_key(|(_, c)| **c) {
        if c >= params.depth {
            return Err(PnrError::Capacity(format!(
                "net `{}` needs column {c} but the fabric has {} columns",
                design.cell_name(ci),
                params.depth
            )));
        }
    }
    Ok(column)
}

/// What a cell must stay within reach of.
enum Anchor {
    Cell(usize),
    /// Column-0 rows where an operand enters.
    Rows(Vec<usize>),
}

struct CellInfo {
    anchors: Vec<Anchor>,
    /// Result rows reachable through this cell's fan-out.
    cone: Vec<usize>,
    /// Latest column that leaves room for every consumer chain.
    alap: usize,
}

fn cell_info(design: &Design, params: &FabricParams) -> Vec<CellInfo> {
    let packed = design.packed();
    let n = packed.cells().len();
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut direct_outputs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for net in design.nets() {
        let NetSource::Cell(src) = net.source else {
            continue;
        };
        for sink in &net.sinks {
            match sink {
                Sink::Cell(d) => consumers[src].push(*d),
                Sink::Output(o) => direct_outputs[src].push(*o),
            }
        }
    }
    let mut cone: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut alap = vec![params.depth - 1; n];
    // Consumers always come later in level order.
    for ci in (0..n).rev() {
        let mut rows = direct_outputs[ci].clone();
        for &d in &consumers[ci] {
            rows.extend_from_slice(&cone[d]);
            alap[ci] = alap[ci].min(alap[d].saturating_sub(1));
        }
        rows.sort_unstable();
        rows.dedup();
        cone[ci] = rows;
    }
    packed
        .cells()
        .iter()
        .enumerate()
        .map(|(ci, cell)| {
            let mut anchors = Vec::new();
            for s in &cell.inputs {
                let net = &design.nets()[design.net_of(*s).expect("cell inputs are nets")];
                let anchor = match (net.source, s) {
                    (NetSource::Cell(src), _) => Anchor::Cell(src),
                    (NetSource::External(ext), _) => Anchor::Rows(external_rows(ext, params.width)),
                };
                debug_assert!(!matches!(s, Signal::Const(_)));
                anchors.push(anchor);
            }
            CellInfo {
                anchors,
                cone: std::mem::take(&mut cone[ci]),
                alap: alap[ci],
            }
        })
        .collect()
}

/// Reach slack beyond which locations are ranked by displacement only.
const SLACK_CAP: usize = 8;

/// Assigns every cell a free `(column, row)` in level order. Among the
/// reachable locations between its earliest and latest column, a cell takes
/// the one with the most reach slack (up to [`SLACK_CAP`], less a uniform
/// jitter of up to `jitter`), then the least row displacement to its
/// fanins, then the earliest column.
pub fn place(
    design: &Design,
    params: &FabricParams,
    asap: &[usize],
    rng: &mut ChaCha8Rng,
    jitter: f64,
) -> Result<Placement, PnrError> {
    let (w, y) = (params.width, params.depth);
    let info = cell_info(design, params);
    let mut used = vec![false; params.cells()];
    let mut at: Vec<(usize, usize)> = Vec::with_capacity(info.len());

    for (ci, cell) in info.iter().enumerate() {
        let earliest = cell
            .anchors
            .iter()
            .filter_map(|a| match a {
                Anchor::Cell(src) => Some(at[*src].0 + 1),
                Anchor::Rows(_) => None,
            })
            .max()
            .unwrap_or(0)
            .max(asap[ci]);
        // Score: capped slack minus jitter, then displacement, then column.
        let mut chosen: Option<(f64, usize, usize, usize)> = None;
        for c in earliest..=cell.alap.min(y - 1) {
            for r in 0..w {
                if used[c * w + r] {
                    continue;
                }
                let mut disp = 0;
                let mut slack = SLACK_CAP as isize;
                for a in &cell.anchors {
                    let (d, span) = match a {
                        Anchor::Cell(src) => {
                            let (sc, sr) = at[*src];
                            (r.abs_diff(sr), c - sc)
                        }
                        Anchor::Rows(rows) => match rows.iter().map(|j| r.abs_diff(*j)).min() {
                            Some(d) => (d, c),
                            None => (1, 0),
                        },
                    };
                    // A signal that stays on its row only needs straight wires.
                    if d > 0 {
                        slack = slack.min(span as isize - d as isize);
                    }
                    disp += d;
                }
                for &o in &cell.cone {
                    let d = r.abs_diff(o);
                    let span = y - 1 - c;
                    if d > 0 {
                        slack = slack.min(span as isize - d as isize);
                    }
                }
                if slack < 0 {
                    continue;
                }
                let mut score = slack as f64;
                if jitter > 0.0 {
                    score -= rng.gen::<f64>() * jitter;
                }
                let better =
                    chosen.is_none_or(|(bs, bd, _, _)| score > bs || score == bs && disp < bd);
                if better {
                    chosen = Some((score, disp, c, r));
                }
            }
            if chosen.is_some_and(|(s, ..)| s >= SLACK_CAP as f64) {
                break;
            }
        }
        let chosen = chosen.map(|(_, _, c, r)| (c, r));
        let Some((c, r)) = chosen else {
            return Err(PnrError::Capacity(format!(
                "no reachable free location for the cell of `{}`",
                design.cell_name(ci)
            )));
        };
        used[c * w + r] = true;
        at.push((c, r));
    }
    Ok(Placement { cells: at })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{corpus, node_table, pack, Netlist};
    use rand::SeedableRng;

    fn design(n: &Netlist, p: &FabricParams) -> Design {
        Design::new(pack(&n.simplify()), p).unwrap()
    }

    #[test]
    fn single_xor_goes_to_column_zero() {
        let p = FabricParams::default();
        let mut n = Netlist::new("x");
        let a = n.input("rs1[5]");
        let b = n.input("rs2[5]");
        let x = n
            .add_node("x", vec![a, b], node_table(2, |e| e == 1 || e == 2))
            .unwrap();
        n.add_output("rd[5]", x).unwrap();
        let d = design(&n, &p);
        let asap = levelize(&d, &p).unwrap();
        assert_eq!(asap, vec![0]);
        let pl = place(&d, &p, &asap, &mut ChaCha8Rng::seed_from_u64(0), 0.0).unwrap();
        assert_eq!(pl.cells, vec![(0, 5)]);
    }

    #[test]
    fn independent_cells_get_distinct_locations() {
        let p = FabricParams::default();
        let d = design(&corpus("xor", 32, 0).unwrap(), &p);
        let asap = levelize(&d, &p).unwrap();
        let pl = place(&d, &p, &asap, &mut ChaCha8Rng::seed_from_u64(0), 0.0).unwrap();
        let mut locs = pl.cells.clone();
        locs.sort_unstable();
        locs.dedup();
        assert_eq!(locs.len(), pl.cells.len());
    }

    #[test]
    fn permute_xor_nets_stay_within_reach() {
        let p = FabricParams::default();
        let d = design(&corpus("permute_xor", 32, 7).unwrap(), &p);
        let asap = levelize(&d, &p).unwrap();
        let pl = place(&d, &p, &asap, &mut ChaCha8Rng::seed_from_u64(0), 0.0).unwrap();
        for net in d.nets() {
            let sources: Vec<(isize, usize)> = match net.source {
                NetSource::Cell(ci) => vec![(pl.cells[ci].0 as isize, pl.cells[ci].1)],
                NetSource::External(e) => {
                    external_rows(e, 32).into_iter().map(|r| (0, r)).collect()
                }
            };
            for sink in &net.sinks {
                let (c, r) = match sink {
                    Sink::Cell(ci) => pl.cells[*ci],
                    Sink::Output(o) => (31, *o),
                };
                let ok = sources
                    .iter()
                    .any(|&(sc, sr)| r.abs_diff(sr) as isize <= c as isize - sc);
                assert!(ok, "net {} cannot reach ({c}, {r})", net.name);
            }
        }
    }

    #[test]
    fn popcount_levels_fit() {
        let p = FabricParams::default();
        let d = design(&corpus("popcount", 32, 0).unwrap(), &p);
        let asap = levelize(&d, &p).unwrap();
        assert!(asap.iter().all(|c| *c <= 31));
    }
}
