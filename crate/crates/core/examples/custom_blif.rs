//! Compiles a hand-written BLIF (a 4-bit adder on the low operand bits,
//! with funct3[0] selecting subtraction) and checks it exhaustively.

use lutstruction::fabric::FabricParams;
use lutstruction::netlist::{parse_blif, write_blif};
use lutstruction::pnr::{compile, validate_config, CompileOptions};
use lutstruction::sim::{FabricState, Operands};

const ADDSUB: &str = r"
# rd[3:0] = rs1 +/- rs2, low 4 bits
.model addsub4
.inputs rs1[0] rs1[1] rs1[2] rs1[3] rs2[0] rs2[1] rs2[2] rs2[3] funct3[0]
.outputs rd[0] rd[1] rd[2] rd[3]
.names rs2[0] funct3[0] b0
10 1
01 1
.names rs2[1] funct3[0] b1
10 1
01 1
.names rs2[2] funct3[0] b2
10 1
01 1
.names rs2[3] funct3[0] b3
10 1
01 1
.names rs1[0] b0 funct3[0] rd[0]
100 1
010 1
001 1
111 1
.names rs1[0] b0 funct3[0] c1
11- 1
1-1 1
-11 1
.names rs1[1] b1 c1 rd[1]
100 1
010 1
001 1
111 1
.names rs1[1] b1 c1 c2
11- 1
1-1 1
-11 1
.names rs1[2] b2 c2 rd[2]
100 1
010 1
001 1
111 1
.names rs1[2] b2 c2 c3
11- 1
1-1 1
-11 1
.names rs1[3] b3 c3 rd[3]
100 1
010 1
001 1
111 1
.end
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let netlist = parse_blif(ADDSUB)?;
    println!(
        "parsed `{}`: {} nodes, depth {}",
        netlist.name(),
        netlist.nodes().len(),
        netlist.depth()
    );
    let params = FabricParams::new(8, 8, 8, 1)?;
    let compiled = compile(&netlist, params, &CompileOptions::default())?;
    let report = validate_config(&compiled.config, &params, Some(&compiled.routes));
    println!("legal configuration: {}", report.is_legal());

    let fabric = FabricState::with_config(&compiled.config)?;
    let mut bad = 0;
    for a in 0..16u64 {
        for b in 0..16u64 {
            for f in 0..2u8 {
                let want = if f == 0 { a + b } else { a.wrapping_sub(b) } & 0xF;
                bad += usize::from(fabric.eval_combinational(Operands::new(a, b, f)) & 0xF != want);
            }
        }
    }
    println!("exhaustive check: {bad} mismatches out of 512");
    println!(
        "re-emitted BLIF is {} lines",
        write_blif(&netlist).lines().count()
    );
    Ok(())
}
