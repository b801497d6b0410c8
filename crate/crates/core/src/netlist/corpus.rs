//! Netlist generators for the benchmark instructions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{node_table, Netlist, NetlistError, Signal};

/// Names accepted by [`corpus`].
pub const CORPUS_NAMES: [&str; 5] = ["popcount", "permute_xor", "xor", "identity", "zero"];

const MAX_WIDTH: usize = 64;

fn check_width(width: usize) -> Result<(), NetlistError> {
    if width == 0 || width > MAX_WIDTH {
        return Err(NetlistError::Param(format!(
            "width {width} outside 1..={MAX_WIDTH}"
        )));
    }
    Ok(())
}

fn xor_table(fanin: usize) -> u16 {
    node_table(fanin, |e| e.count_ones() % 2 == 1)
}

/// Number of result bits needed to hold a count up to `width`.
pub fn popcount_bits(width: usize) -> usize {
    (usize::BITS - width.leading_zeros()) as usize
}

/// Population count of `rs1`, laid out as a bit-serial accumulator.
///
/// Step `c` adds two more operand bits (`rs1[W-2c]` and `rs1[W-1-2c]`) to a
/// running count with a full adder in bit 0 and half adders above it, then
/// further steps ripple the remaining carries. Every step only reads values
/// from the previous step, so the result maps onto a diagonal band of cells
/// that walks from the top rows toward row 0.
pub fn gen_popcount(width: usize) -> Result<Netlist, NetlistError> {
    check_width(width)?;
    let bits = popcount_bits(width);
    let mut n = Netlist::new("popcount");
    let rs1: Vec<Signal> = (0..width).map(|i| n.input(&format!("rs1[{i}]"))).collect();

    let zero = Signal::Const(false);
    let mut sum = vec![zero; bits];
    let mut carry = vec![zero; bits + 1];
    sum[0] = rs1[width - 1];
    let xor2 = xor_table(2);
    let and2 = node_table(2, |e| e == 3);
    let maj3 = node_table(3, |e| e.count_ones() >= 2);

    let mut step = 1usize;
    loop {
        let absorbing = 2 * step <= width;
        if !absorbing && carry.iter().all(|k| *k == zero) {
            break;
        }
        let mut next_sum = sum.clone();
        let mut next_carry = vec![zero; bits + 1];
        if absorbing {
            let x = rs1[width - 2 * step];
            let y = (2 * step < width).then(|| rs1[width - 1 - 2 * step]);
            let s = sum[0];
            let (ins, st, kt) = match y {
                Some(y) => (vec![s, x, y], xor_table(3), maj3),
                None => (vec![s, x], xor2, and2),
            };
            next_sum[0] = n.add_node(format!("s0_{step}"), ins.clone(), st)?;
            next_carry[1] = n.add_node(format!("k1_{step}"), ins, kt)?;
        }
        for b in 1..bits {
            let (s, k) = (sum[b], carry[b]);
            if k == zero {
                continue;
            }
            if s == zero {
                next_sum[b] = k;
                continue;
            }
            next_sum[b] = n.add_node(format!("s{b}_{step}"), vec![s, k], xor2)?;
            // A carry out of the top bit is always zero for counts <= width.
            if b + 1 < bits {
                next_carry[b + 1] = n.add_node(format!("k{}_{step}", b + 1), vec![s, k], and2)?;
            }
        }
        sum = next_sum;
        carry = next_carry;
        step += 1;
    }
    for (b, s) in sum.iter().enumerate() {
        n.add_output(format!("rd[{b}]"), *s)?;
    }
    Ok(n)
}

fn check_permutation(width: usize, p: &[usize], label: &str) -> Result<(), NetlistError> {
    let mut seen = vec![false; width];
    if p.len() != width {
        return Err(NetlistError::Param(format!(
            "{label} has {} entries, expected {width}",
            p.len()
        )));
    }
    for &i in p {
        if i >= width || std::mem::replace(&mut seen[i], true) {
            return Err(NetlistError::Param(format!("{label} is not a permutation")));
        }
    }
    Ok(())
}

/// `rd[i] = rs1[sigma1[i]] ^ rs2[sigma2[i]]`.
pub fn gen_permute_xor(
    width: usize,
    sigma1: &[usize],
    sigma2: &[usize],
) -> Result<Netlist, NetlistError> {
    check_width(width)?;
    check_permutation(width, sigma1, "sigma1")?;
    check_permutation(width, sigma2, "sigma2")?;
    let mut n = Netlist::new("permute_xor");
    let rs1: Vec<Signal> = (0..width).map(|i| n.input(&format!("rs1[{i}]"))).collect();
    let rs2: Vec<Signal> = (0..width).map(|i| n.input(&format!("rs2[{i}]"))).collect();
    for i in 0..width {
        let x = n.add_node(
            format!("x{i}"),
            vec![rs1[sigma1[i]], rs2[sigma2[i]]],
            xor_table(2),
        )?;
        n.add_output(format!("rd[{i}]"), x)?;
    }
    Ok(n)
}

/// Random permutations drawn from a ChaCha8 stream.
pub fn random_permutations(width: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s1: Vec<usize> = (0..width).collect();
    let mut s2 = s1.clone();
    s1.shuffle(&mut rng);
    s2.shuffle(&mut rng);
    (s1, s2)
}

pub fn gen_permute_xor_seeded(width: usize, seed: u64) -> Result<Netlist, NetlistError> {
    let (s1, s2) = random_permutations(width, seed);
    gen_permute_xor(width, &s1, &s2)
}

fn gen_bitwise(
    name: &str,
    width: usize,
    f: impl Fn(&mut Netlist, usize) -> Result<Signal, NetlistError>,
) -> Result<Netlist, NetlistError> {
    check_width(width)?;
    let mut n = Netlist::new(name);
    for i in 0..width {
        let s = f(&mut n, i)?;
        n.add_output(format!("rd[{i}]"), s)?;
    }
    Ok(n)
}

/// Selects one of up to eight subcircuits with `funct3`. Codes without a
/// subcircuit fall back to subcircuit 0.
pub fn gen_funct3_mux(name: &str, subs: &[Netlist]) -> Result<Netlist, NetlistError> {
    if subs.is_empty() || subs.len() > 8 {
        return Err(NetlistError::Capacity(format!(
            "funct3 selects among 1..=8 subcircuits, got {}",
            subs.len()
        )));
    }
    let mut n = Netlist::new(name);
    let mut out_names: Vec<String> = Vec::new();
    let mut sub_outputs: Vec<Vec<(String, Signal)>> = Vec::new();
    for (j, sub) in subs.iter().enumerate() {
        let mut map: Vec<Signal> = Vec::with_capacity(sub.nodes().len());
        let resolve = |s: Signal, n: &mut Netlist, map: &[Signal]| match s {
            Signal::Input(i) => n.input(&sub.inputs()[i]),
            Signal::Node(k) => map[k],
            c => c,
        };
        for node in sub.nodes() {
            let ins = node
                .inputs
                .iter()
                .map(|s| resolve(*s, &mut n, &map))
                .collect();
            map.push(n.add_node(format!("f{j}_{}", node.name), ins, node.table)?);
        }
        let mut outs = Vec::new();
        for (name, s) in sub.outputs() {
            if !out_names.contains(name) {
                out_names.push(name.clone());
            }
            outs.push((name.clone(), resolve(*s, &mut n, &map)));
        }
        sub_outputs.push(outs);
    }
    let sel: Vec<Signal> = (0..3).map(|k| n.input(&format!("funct3[{k}]"))).collect();
    let mux = node_table(3, |e| if e & 1 == 1 { e & 4 != 0 } else { e & 2 != 0 });
    for name in out_names {
        let pick = |j: usize| {
            sub_outputs[j]
                .iter()
                .find(|(o, _)| *o == name)
                .map_or(Signal::Const(false), |(_, s)| *s)
        };
        let mut layer: Vec<Signal> = (0..8)
            .map(|f| pick(if f < subs.len() { f } else { 0 }))
            .collect();
        for (k, &s) in sel.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.len() / 2);
            for (i, pair) in layer.chunks(2).enumerate() {
                next.push(if pair[0] == pair[1] {
                    pair[0]
                } else {
                    n.add_node(format!("mux{k}_{i}_{name}"), vec![s, pair[0], pair[1]], mux)?
                });
            }
            layer = next;
        }
        n.add_output(name, layer[0])?;
    }
    Ok(n)
}

/// Builds a named corpus circuit; `seed` only matters for `permute_xor`.
pub fn corpus(name: &str, width: usize, seed: u64) -> Result<Netlist, NetlistError> {
    match name {
        "popcount" => gen_popcount(width),
        "permute_xor" => gen_permute_xor_seeded(width, seed),
        "xor" => gen_bitwise("xor", width, |n, i| {
            let a = n.input(&format!("rs1[{i}]"));
            let b = n.input(&format!("rs2[{i}]"));
            n.add_node(format!("x{i}"), vec![a, b], xor_table(2))
        }),
        "identity" => gen_bitwise("identity", width, |n, i| Ok(n.input(&format!("rs1[{i}]")))),
        "zero" => gen_bitwise("zero", width, |_, _| Ok(Signal::Const(false))),
        other => Err(NetlistError::Param(format!(
            "unknown corpus circuit `{other}` (expected one of {})",
            CORPUS_NAMES.join(", ")
        ))),
    }
}
