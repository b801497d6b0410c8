//! Prints the zigzag wiring of a small fabric and shows that bypass columns
//! undo each other in pairs.

use lutstruction::fabric::{build_topology, bypass_permutation, FabricParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = FabricParams::new(6, 4, 4, 1)?;
    let topo = build_topology(params)?;
    for c in 0..2 {
        println!("column {c}:");
        for r in 0..params.width {
            let dests: Vec<String> = (0..4)
                .map(|k| match topo.output_dest(c, r, k) {
                    Some(d) => d.to_string(),
                    None => "-".into(),
                })
                .collect();
            println!("  ({c}, {r}) -> {}", dests.join(" "));
        }
    }
    println!(
        "column-0 sources of row 2: {:?}",
        (0..4)
            .map(|k| topo.external_input(2, k))
            .collect::<Vec<_>>()
    );
    for span in 1..=4 {
        let identity = bypass_permutation(&topo, 0, span).is_identity();
        println!("bypass through {span} column(s) is identity: {identity}");
    }
    Ok(())
}
