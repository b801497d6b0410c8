//! Compiles the built-in population count, writes the .luts file and
//! checks a few operands against `count_ones`.

use lutstruction::bitgen;
use lutstruction::fabric::FabricParams;
use lutstruction::netlist::corpus;
use lutstruction::pnr::{compile, CompileOptions};
use lutstruction::sim::{FabricState, Operands};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = FabricParams::default();
    let netlist = corpus("popcount", params.width, 0)?;
    let compiled = compile(&netlist, params, &CompileOptions::default())?;
    println!("{}", serde_json::to_string_pretty(&compiled.stats)?);

    let bs = bitgen::encode(&compiled.config)?;
    let path = std::env::temp_dir().join("popcount.luts");
    bs.write_file(&path)?;
    println!("wrote {} ({} bytes)", path.display(), bs.to_bytes().len());

    let mut fabric = FabricState::new(params)?;
    fabric.load_bitstream(&bitgen::Bitstream::read_file(&path)?)?;
    for rs1 in [0u64, 0xFF, 0xDEAD_BEEF, 0xFFFF_FFFF] {
        let rd = fabric.eval_combinational(Operands::new(rs1, 0, 0));
        println!(
            "popcount({rs1:#010x}) = {rd} (expected {})",
            rs1.count_ones()
        );
    }
    Ok(())
}
