//! Seeded bit permutations of both operands, XORed together. Shows how the
//! seed changes the circuit and that compiles are reproducible.

use lutstruction::bitgen;
use lutstruction::fabric::FabricParams;
use lutstruction::netlist::{corpus, random_permutations};
use lutstruction::pnr::{compile, CompileOptions};
use lutstruction::sim::{FabricState, Operands};
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = FabricParams::default();
    let seed = 7;
    let (s1, s2) = random_permutations(params.width, seed);
    println!("sigma1 = {s1:?}\nsigma2 = {s2:?}");

    let netlist = corpus("permute_xor", params.width, seed)?;
    let opts = CompileOptions {
        seed,
        ..CompileOptions::default()
    };
    let a = bitgen::encode(&compile(&netlist, params, &opts)?.config)?.to_bytes();
    let compiled = compile(&netlist, params, &opts)?;
    let b = bitgen::encode(&compiled.config)?.to_bytes();
    println!("two compiles identical: {}", a == b);
    println!(
        "placement attempts: {}, routing passes: {}",
        compiled.stats.iterations, compiled.stats.route_passes
    );

    let fabric = FabricState::with_config(&compiled.config)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mismatches = (0..10_000)
        .filter(|_| {
            let ops = Operands::new(rng.gen::<u32>().into(), rng.gen::<u32>().into(), 0);
            fabric.eval_combinational(ops) != netlist.eval_operands(ops.rs1, ops.rs2, 0).unwrap()
        })
        .count();
    println!("mismatches over 10000 operands: {mismatches}");
    Ok(())
}
