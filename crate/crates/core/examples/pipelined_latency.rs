//! Issues back-to-back operands into a pipelined popcount and prints when
//! each result leaves, for several register spacings.

use lutstruction::fabric::FabricParams;
use lutstruction::netlist::corpus;
use lutstruction::pnr::{compile, CompileOptions};
use lutstruction::sim::{FabricState, Operands};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let netlist = corpus("popcount", 32, 0)?;
    for s in [1, 2, 4, 7, 8, 16, 32] {
        let params = FabricParams::new(32, 32, s, 1)?;
        let compiled = compile(&netlist, params, &CompileOptions::default())?;
        let mut fabric = FabricState::with_config(&compiled.config)?;
        let inputs: Vec<Operands> = (0..4u64)
            .map(|i| Operands::new((1 << (8 * i)) - 1, 0, 0))
            .collect();
        let mut feed = inputs.iter().copied();
        let mut outs = Vec::new();
        for cycle in 1.. {
            if let Some(rd) = fabric.step_pipelined(feed.next()) {
                outs.push(format!("{rd}@{cycle}"));
            }
            if outs.len() == inputs.len() {
                break;
            }
        }
        println!(
            "S={s:2}: latency {:2}, results {}",
            params.pipeline_latency(),
            outs.join(" ")
        );
    }
    Ok(())
}
