use lutstruction::bitgen::{self, random_config, Bitstream};
use lutstruction::fabric::{build_topology, bypass_permutation, FabricParams};
use lutstruction::netlist::{corpus, node_table, pack, parse_blif, write_blif, Netlist, Signal};
use lutstruction::pnr::{compile, CompileOptions};
use lutstruction::sim::{FabricState, Operands};
use lutstruction::sysmodel::{
    benchmark_manifest, execute_trace, CustomOpcode, InstructionWord, SystemConfig, Trace,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Legal small geometries: width, depth, a spacing and a parallelism.
fn small_params() -> impl Strategy<Value = FabricParams> {
    (2usize..=12, 1usize..=6, 0u32..=3, 1usize..=12).prop_filter_map(
        "illegal",
        |(w, half, logp, s)| {
            let depth = 2 * half;
            FabricParams::new(w, depth, s.min(depth), 1 << logp).ok()
        },
    )
}

fn mask(w: usize) -> u64 {
    (1u64 << w) - 1
}

/// A random acyclic netlist over `rs1[0..4]`, `rs2[0..4]` with fanin up to 4.
fn random_netlist() -> impl Strategy<Value = Netlist> {
    let node = (
        prop::collection::vec(any::<prop::sample::Index>(), 1..=4),
        any::<u16>(),
    );
    (
        prop::collection::vec(node, 1..24),
        prop::collection::vec(any::<prop::sample::Index>(), 1..=4),
    )
        .prop_map(|(nodes, outs)| {
            let mut n = Netlist::new("rand");
            let mut pool: Vec<Signal> = (0..4)
                .flat_map(|i| [format!("rs1[{i}]"), format!("rs2[{i}]")])
                .map(|name| n.input(&name))
                .collect();
            for (k, (picks, table)) in nodes.into_iter().enumerate() {
                let mut fanin: Vec<Signal> = picks.iter().map(|i| *i.get(&pool)).collect();
                fanin.sort_unstable();
                fanin.dedup();
                let t = table & node_table(fanin.len(), |_| true);
                let s = n.add_node(format!("n{k}"), fanin, t).expect("fanin <= 4");
                pool.push(s);
            }
            for (o, idx) in outs.iter().enumerate() {
                n.add_output(format!("rd[{o}]"), *idx.get(&pool))
                    .expect("fresh name");
            }
            n
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn encode_decode_identity(p in small_params(), seed: u64) {
        let config = random_config(p, &mut ChaCha8Rng::seed_from_u64(seed));
        let bs = bitgen::encode(&config).unwrap();
        prop_assert_eq!(&bitgen::decode(&bs).unwrap(), &config);
        let bytes = bs.to_bytes();
        prop_assert_eq!(bytes.len(), 16 + Bitstream::payload_len(&p));
        prop_assert_eq!(Bitstream::from_bytes(&bytes).unwrap(), bs);
    }

    #[test]
    fn load_matches_direct_configuration(p in small_params(), seed: u64, ops in prop::collection::vec((any::<u64>(), any::<u64>(), 0u8..8), 8)) {
        let config = random_config(p, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut loaded = FabricState::new(p).unwrap();
        let report = loaded.load_bitstream(&bitgen::encode(&config).unwrap()).unwrap();
        prop_assert_eq!(report.cycles, p.load_cycles());
        prop_assert_eq!(report.cycles * p.config_parallelism, 16 * p.depth);
        prop_assert_eq!(loaded.config(), &config);
        let direct = FabricState::with_config(&config).unwrap();
        for (a, b, f) in ops {
            let o = Operands::new(a & mask(p.width), b & mask(p.width), f);
            prop_assert_eq!(loaded.eval_combinational(o), direct.eval_combinational(o));
        }
    }

    #[test]
    fn pipelined_equals_combinational(p in small_params(), seed: u64, ops in prop::collection::vec((any::<u64>(), any::<u64>(), 0u8..8), 1..10)) {
        let config = random_config(p, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut state = FabricState::with_config(&config).unwrap();
        let inputs: Vec<Operands> = ops.iter().map(|&(a, b, f)| Operands::new(a & mask(p.width), b & mask(p.width), f)).collect();
        let expected: Vec<u64> = inputs.iter().map(|o| state.eval_combinational(*o)).collect();
        let start = state.cycle();
        prop_assert_eq!(state.run_pipelined(&inputs), expected);
        prop_assert_eq!(state.cycle() - start, (p.pipeline_latency() + inputs.len()) as u64);
    }

    #[test]
    fn bypass_pairs_compose_to_identity(p in small_params(), start in 0usize..12) {
        let topo = build_topology(p).unwrap();
        let start = start % (p.depth - 1);
        prop_assert!(bypass_permutation(&topo, start, start + 2).is_identity());
    }

    #[test]
    fn simplify_pack_and_blif_preserve_function(n in random_netlist(), a in 0u64..16, b in 0u64..16) {
        let want = n.eval_operands(a, b, 0).unwrap();
        let simple = n.simplify();
        prop_assert_eq!(simple.eval_operands(a, b, 0).unwrap(), want);
        let packed = pack(&simple);
        prop_assert!(packed.cells().iter().all(|c| c.inputs.len() <= 4 && c.nodes.len() <= 4));
        let assignment = simple.operand_assignment(a, b, 0).unwrap();
        prop_assert_eq!(simple.result_word(&packed.eval(&assignment).unwrap()).unwrap(), want);
        let reparsed = parse_blif(&write_blif(&n)).unwrap();
        prop_assert_eq!(reparsed.eval_operands(a, b, 0).unwrap(), want);
    }

    #[test]
    fn instruction_words_round_trip(op in 0usize..4, f7 in 0u8..128, f3 in 0u8..8, rs1 in 0u8..32, rs2 in 0u8..32, rd in 0u8..32) {
        let opcode = [CustomOpcode::Custom0, CustomOpcode::Custom1, CustomOpcode::Custom2, CustomOpcode::Custom3][op];
        let w = InstructionWord::new(opcode, f7, f3, rs1, rs2, rd).unwrap();
        prop_assert_eq!(InstructionWord::decode(w.encode()).unwrap(), w);
    }

    #[test]
    fn traces_conserve_cycles_and_slots_are_monotone(calls in prop::collection::vec(1u8..=2, 0..200), p_log in 0u32..5) {
        let base = SystemConfig::default().with_parallelism(1 << p_log).unwrap();
        let trace = Trace {
            calls: calls
                .iter()
                .map(|&f| InstructionWord::new(CustomOpcode::Custom0, f, 0, 1, 2, 3).unwrap())
                .collect(),
            overhead_cycles: base.call_overhead_cycles,
        };
        let mut last = u64::MAX;
        for slots in 1..=3 {
            let cfg = SystemConfig { slots, ..base };
            let s = execute_trace(&trace, &cfg, &benchmark_manifest(&cfg)).unwrap();
            prop_assert!(s.is_conserved());
            prop_assert_eq!(s.slot_hits + s.slot_misses, calls.len() as u64);
            prop_assert_eq!(s.bl1_hits + s.bl1_misses, s.slot_misses);
            prop_assert_eq!(s.reconfig_cycles, s.slot_misses * (512 >> p_log));
            prop_assert!(s.slot_misses <= last);
            last = s.slot_misses;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn compiled_permute_xor_matches_netlist(seed: u64, ops in prop::collection::vec((any::<u16>(), any::<u16>()), 16)) {
        let p = FabricParams::new(16, 16, 16, 1).unwrap();
        let n = corpus("permute_xor", 16, seed).unwrap();
        let compiled = compile(&n, p, &CompileOptions { seed, ..Default::default() }).unwrap();
        let state = FabricState::with_config(&compiled.config).unwrap();
        for (a, b) in ops {
            let o = Operands::new(a.into(), b.into(), 0);
            prop_assert_eq!(state.eval_combinational(o), n.eval_operands(o.rs1, o.rs2, 0).unwrap());
        }
    }
}
