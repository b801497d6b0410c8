//! BLIF subset: `.model`, `.inputs`, `.outputs`, `.names`, `.end`.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{node_table, Netlist, NetlistError, Signal, MAX_FANIN};

struct NamesBlock {
    line: usize,
    inputs: Vec<String>,
    output: String,
    rows: Vec<(String, bool)>,
}

/// Joins `\` continuations and strips comments, keeping source line numbers.
fn logical_lines(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut pending = String::new();
    let mut start = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if pending.is_empty() {
            start = i + 1;
        }
        if let Some(stripped) = line.trim_end().strip_suffix('\\') {
            pending.push_str(stripped);
            pending.push(' ');
            continue;
        }
        pending.push_str(line);
        if !pending.trim().is_empty() {
            out.push((start, pending.trim().to_string()));
        }
        pending.clear();
    }
    if !pending.trim().is_empty() {
        out.push((start, pending.trim().to_string()));
    }
    out
}

fn cover_table(block: &NamesBlock) -> Result<u16, NetlistError> {
    let fanin = block.inputs.len();
    let err = |message: String| NetlistError::Parse {
        line: block.line,
        message,
    };
    if block.rows.is_empty() {
        return Ok(0);
    }
    let polarity = block.rows[0].1;
    if block.rows.iter().any(|(_, v)| *v != polarity) {
        return Err(err(format!(
            "cover of `{}` mixes on-set and off-set rows",
            block.output
        )));
    }
    let mut covered = [false; 16];
    for (cube, _) in &block.rows {
        if cube.len() != fanin {
            return Err(err(format!(
                "cube `{cube}` has {} literals, expected {fanin}",
                cube.len()
            )));
        }
        for (e, hit) in covered.iter_mut().enumerate().take(1 << fanin) {
            let matches = cube.chars().enumerate().all(|(k, ch)| {
                let bit = (e >> k) & 1;
                match ch {
                    '0' => bit == 0,
                    '1' => bit == 1,
                    _ => true,
                }
            });
            *hit |= matches;
        }
    }
    Ok(node_table(fanin, |e| covered[e] == polarity))
}

/// Parses a single-model combinational BLIF description.
pub fn parse_blif(text: &str) -> Result<Netlist, NetlistError> {
    let mut model = None;
    let mut models = 0;
    let mut inputs: Vec<String> = Vec::new();
    let mut outputs: Vec<String> = Vec::new();
    let mut blocks: Vec<NamesBlock> = Vec::new();
    let mut ended = false;

    for (line, text) in logical_lines(text) {
        let mut tokens = text.split_whitespace();
        let head = tokens.next().expect("non-empty line");
        if head.starts_with('.') {
            match head {
                ".model" => {
                    models += 1;
                    if models > 1 {
                        return Err(NetlistError::UnsupportedFeature(
                            "multiple .model bodies".into(),
                        ));
                    }
                    model = tokens.next().map(str::to_string);
                }
                _ if ended => {
                    return Err(NetlistError::UnsupportedFeature(format!(
                        "`{head}` after .end"
                    )))
                }
                ".inputs" => inputs.extend(tokens.map(str::to_string)),
                ".outputs" => outputs.extend(tokens.map(str::to_string)),
                ".names" => {
                    let mut names: Vec<String> = tokens.map(str::to_string).collect();
                    let Some(output) = names.pop() else {
                        return Err(NetlistError::Parse {
                            line,
                            message: ".names without an output".into(),
                        });
                    };
                    if names.len() > MAX_FANIN {
                        return Err(NetlistError::UnsupportedWidth {
                            name: output,
                            fanin: names.len(),
                        });
                    }
                    blocks.push(NamesBlock {
                        line,
                        inputs: names,
                        output,
                        rows: Vec::new(),
                    });
                }
                ".end" => ended = true,
                ".latch" | ".mlatch" => {
                    return Err(NetlistError::UnsupportedFeature(
                        "latches (the fabric is purely combinational)".into(),
                    ))
                }
                other => {
                    return Err(NetlistError::UnsupportedFeature(format!(
                        "directive `{other}`"
                    )))
                }
            }
            continue;
        }
        let Some(block) = blocks.last_mut().filter(|_| !ended) else {
            return Err(NetlistError::Parse {
                line,
                message: format!("unexpected line `{text}`"),
            });
        };
        let parts: Vec<&str> = text.split_whitespace().collect();
        let (cube, value) = match (block.inputs.len(), parts.as_slice()) {
            (0, [v]) => ("", *v),
            (_, [c, v]) => (*c, *v),
            _ => {
                return Err(NetlistError::Parse {
                    line,
                    message: format!("malformed cover row `{text}`"),
                })
            }
        };
        if !cube.chars().all(|c| matches!(c, '0' | '1' | '-')) {
            return Err(NetlistError::Parse {
                line,
                message: format!("bad literal in `{cube}`"),
            });
        }
        let value = match value {
            "1" => true,
            "0" => false,
            _ => {
                return Err(NetlistError::Parse {
                    line,
                    message: format!("bad output value `{value}`"),
                })
            }
        };
        block.rows.push((cube.to_string(), value));
    }

    build(
        model.unwrap_or_else(|| "top".into()),
        inputs,
        outputs,
        blocks,
    )
}

fn build(
    name: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    blocks: Vec<NamesBlock>,
) -> Result<Netlist, NetlistError> {
    let mut netlist = Netlist::new(name);
    for i in &inputs {
        netlist
            .add_input(i.clone())
            .map_err(|_| NetlistError::Parse {
                line: 0,
                message: format!("input `{i}` declared twice"),
            })?;
    }
    let mut defs: HashMap<&str, usize> = HashMap::new();
    for (idx, b) in blocks.iter().enumerate() {
        if netlist.lookup(&b.output).is_some() || defs.insert(&b.output, idx).is_some() {
            return Err(NetlistError::Parse {
                line: b.line,
                message: format!("signal `{}` is driven more than once", b.output),
            });
        }
    }

    // Depth-first topological order over the .names blocks.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut marks = vec![Mark::New; blocks.len()];
    let mut order = Vec::with_capacity(blocks.len());
    for root in 0..blocks.len() {
        if marks[root] != Mark::New {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        marks[root] = Mark::Active;
        while let Some(&mut (b, ref mut next)) = stack.last_mut() {
            if let Some(input) = blocks[b].inputs.get(*next) {
                *next += 1;
                if netlist.lookup(input).is_some() {
                    continue;
                }
                let Some(&dep) = defs.get(input.as_str()) else {
                    return Err(NetlistError::Resolution(format!(
                        "`{input}` used by `{}` is never defined",
                        blocks[b].output
                    )));
                };
                match marks[dep] {
                    Mark::Done => {}
                    Mark::Active => return Err(NetlistError::Cycle(input.clone())),
                    Mark::New => {
                        marks[dep] = Mark::Active;
                        stack.push((dep, 0));
                    }
                }
            } else {
                marks[b] = Mark::Done;
                order.push(b);
                stack.pop();
            }
        }
    }

    for b in order {
        let block = &blocks[b];
        let table = cover_table(block)?;
        let ins = block
            .inputs
            .iter()
            .map(|n| netlist.lookup(n).expect("defined before use"))
            .collect();
        netlist.add_node(block.output.clone(), ins, table)?;
    }
    for o in outputs {
        let sig = netlist
            .lookup(&o)
            .ok_or_else(|| NetlistError::Resolution(format!("output `{o}` is never defined")))?;
        netlist.add_output(o, sig)?;
    }
    Ok(netlist)
}

/// Serializes a netlist; outputs that alias another signal get a buffer.
pub fn write_blif(netlist: &Netlist) -> String {
    let mut out = String::new();
    let _ = writeln!(out, ".model {}", netlist.name());
    let _ = writeln!(out, ".inputs {}", netlist.inputs().join(" "));
    let names: Vec<&str> = netlist.outputs().iter().map(|(n, _)| n.as_str()).collect();
    let _ = writeln!(out, ".outputs {}", names.join(" "));
    for node in netlist.nodes() {
        let ins: Vec<String> = node
            .inputs
            .iter()
            .map(|s| netlist.signal_name(*s))
            .collect();
        let fanin = ins.len();
        let _ = write!(out, ".names");
        for i in &ins {
            let _ = write!(out, " {i}");
        }
        let _ = writeln!(out, " {}", node.name);
        for e in 0..1usize << fanin {
            if (node.table >> e) & 1 == 1 {
                let cube: String = (0..fanin)
                    .map(|k| if (e >> k) & 1 == 1 { '1' } else { '0' })
                    .collect();
                if fanin == 0 {
                    let _ = writeln!(out, "1");
                } else {
                    let _ = writeln!(out, "{cube} 1");
                }
            }
        }
    }
    for (name, sig) in netlist.outputs() {
        match sig {
            Signal::Node(i) if netlist.node(*i).name == *name => {}
            Signal::Input(i) if netlist.inputs()[*i] == *name => {}
            Signal::Const(v) => {
                let _ = writeln!(out, ".names {name}");
                if *v {
                    let _ = writeln!(out, "1");
                }
            }
            other => {
                let _ = writeln!(out, ".names {} {name}\n1 1", netlist.signal_name(*other));
            }
        }
    }
    let _ = writeln!(out, ".end");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn and_gate() {
        let n =
            parse_blif(".model t\n.inputs a b\n.outputs y\n.names a b y\n11 1\n.end\n").unwrap();
        assert_eq!(n.nodes().len(), 1);
        assert_eq!(n.node(0).table, 0x8888);
        assert_eq!(n.eval(&[true, true]).unwrap(), vec![true]);
        assert_eq!(n.eval(&[false, true]).unwrap(), vec![false]);
    }

    #[test]
    fn five_inputs_rejected() {
        let text = ".model t\n.inputs a b c d e\n.outputs y\n.names a b c d e y\n11111 1\n.end\n";
        let err = parse_blif(text).unwrap_err();
        assert_eq!(err.kind(), "unsupported-width");
    }

    #[test]
    fn latch_and_second_model_rejected() {
        let latch = ".model t\n.inputs a\n.outputs q\n.latch a q 0\n.end\n";
        assert_eq!(parse_blif(latch).unwrap_err().kind(), "unsupported-feature");
        let two = ".model a\n.inputs x\n.outputs x\n.end\n.model b\n.end\n";
        assert_eq!(parse_blif(two).unwrap_err().kind(), "unsupported-feature");
        let sub = ".model a\n.inputs x\n.outputs y\n.subckt foo a=x b=y\n.end\n";
        assert_eq!(parse_blif(sub).unwrap_err().kind(), "unsupported-feature");
    }

    #[test]
    fn cycles_and_undefined_signals() {
        let cyc = ".model t\n.inputs a\n.outputs y\n.names a z y\n11 1\n.names y z\n1 1\n.end\n";
        assert!(matches!(parse_blif(cyc), Err(NetlistError::Cycle(_))));
        let undef = ".model t\n.inputs a\n.outputs y\n.names a q y\n11 1\n.end\n";
        assert!(matches!(
            parse_blif(undef),
            Err(NetlistError::Resolution(_))
        ));
        let undef_out = ".model t\n.inputs a\n.outputs nope\n.end\n";
        assert!(matches!(
            parse_blif(undef_out),
            Err(NetlistError::Resolution(_))
        ));
    }

    #[test]
    fn constants_offset_and_continuations() {
        let text = "# comment\n.model t\n.inputs a \\\n b\n.outputs one zero nand\n\
                    .names one\n1\n.names zero\n.names a b nand\n11 0\n.end\n";
        let n = parse_blif(text).unwrap();
        assert_eq!(n.inputs(), &["a".to_string(), "b".to_string()]);
        for e in 0..4 {
            let (a, b) = (e & 1 == 1, e & 2 == 2);
            assert_eq!(n.eval(&[a, b]).unwrap(), vec![true, false, !(a && b)]);
        }
    }

    #[test]
    fn dont_care_literals() {
        let text = ".model t\n.inputs a b c\n.outputs y\n.names a b c y\n1-- 1\n-11 1\n.end\n";
        let n = parse_blif(text).unwrap();
        for e in 0..8usize {
            let v: Vec<bool> = (0..3).map(|k| (e >> k) & 1 == 1).collect();
            assert_eq!(n.eval(&v).unwrap()[0], v[0] || (v[1] && v[2]));
        }
    }

    #[test]
    fn mixed_polarity_rejected() {
        let text = ".model t\n.inputs a\n.outputs y\n.names a y\n1 1\n0 0\n.end\n";
        assert_eq!(parse_blif(text).unwrap_err().kind(), "parse");
    }

    #[test]
    fn write_then_parse_keeps_function() {
        let text = ".model t\n.inputs a b c\n.outputs y a2 k\n.names a b c y\n1-0 1\n011 1\n\
                    .names a a2\n1 1\n.names k\n1\n.end\n";
        let n = parse_blif(text).unwrap();
        let again = parse_blif(&write_blif(&n)).unwrap();
        for e in 0..8usize {
            let v: Vec<bool> = (0..3).map(|k| (e >> k) & 1 == 1).collect();
            assert_eq!(n.eval(&v).unwrap(), again.eval(&v).unwrap());
        }
    }
}
