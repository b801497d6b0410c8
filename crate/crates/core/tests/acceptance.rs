//! Acceptance checks, one PASS/FAIL line each. Exits nonzero on any failure.

use std::time::{Duration, Instant};

use lutstruction::bitgen::{self, random_config, Bitstream};
use lutstruction::cli;
use lutstruction::fabric::FabricParams;
use lutstruction::netlist::{corpus, popcount_bits};
use lutstruction::pnr::{compile, CompileOptions};
use lutstruction::sim::{FabricState, Operands};
use lutstruction::sysmodel::{
    bandwidth_report, benchmark_manifest, execute_trace, make_benchmark_trace, BenchmarkKind,
    SystemConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const PS: [usize; 5] = [1, 2, 4, 8, 16];

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn params(s: usize, p: usize) -> FabricParams {
    FabricParams::new(32, 32, s, p).expect("legal parameters")
}

fn random_ops(rng: &mut ChaCha8Rng) -> Operands {
    Operands::new(
        rng.gen::<u32>().into(),
        rng.gen::<u32>().into(),
        rng.gen_range(0..8),
    )
}

fn reconfiguration_cycles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut seen = Vec::new();
    for p in PS {
        let start = Instant::now();
        let bs =
            bitgen::encode(&random_config(params(32, p), &mut rng)).map_err(|e| e.to_string())?;
        if bs.payload().len() != 8192 {
            return Err(format!("P={p}: payload is {} bytes", bs.payload().len()));
        }
        let mut state = FabricState::new(params(32, p)).map_err(|e| e.to_string())?;
        let report = state.load_bitstream(&bs).map_err(|e| e.to_string())?;
        if report.cycles != 512 / p {
            return Err(format!(
                "P={p}: {} cycles, expected {}",
                report.cycles,
                512 / p
            ));
        }
        if start.elapsed() > Duration::from_secs(1) {
            return Err(format!("P={p}: load took {:?}", start.elapsed()));
        }
        seen.push(report.cycles.to_string());
    }
    Ok(format!("cycles {}", seen.join("/")))
}

fn load_equivalence() -> Check {
    let mismatches: usize = PS
        .par_iter()
        .map(|&p| {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + p as u64);
            let mut bad = 0;
            for _ in 0..100 {
                let config = random_config(params(32, p), &mut rng);
                let bs = bitgen::encode(&config).expect("random configs are fully programmed");
                let mut loaded = FabricState::new(params(32, p)).expect("params");
                loaded.load_bitstream(&bs).expect("load");
                let direct = FabricState::with_config(&config).expect("config");
                for _ in 0..100 {
                    let ops = random_ops(&mut rng);
                    bad += usize::from(
                        loaded.eval_combinational(ops) != direct.eval_combinational(ops),
                    );
                }
            }
            bad
        })
        .sum();
    if mismatches == 0 {
        Ok("0 mismatches over 5 x 100 configs x 100 inputs".into())
    } else {
        Err(format!("{mismatches} mismatches"))
    }
}

fn hit_latency() -> Check {
    let mut got = Vec::new();
    for (s, want) in [(1, 32), (2, 16), (4, 8), (7, 5), (8, 4), (16, 2), (32, 1)] {
        let p = params(s, 1);
        let mut state = FabricState::new(p).map_err(|e| e.to_string())?;
        let ops = Operands::new(0xA5A5, 0x5A5A, 3);
        let mut cycles = 0;
        let mut out = state.step_pipelined(Some(ops));
        while out.is_none() && cycles < 64 {
            cycles += 1;
            out = state.step_pipelined(None);
        }
        if cycles != want || p.pipeline_latency() != want {
            return Err(format!(
                "S={s}: measured {cycles}, model {}, expected {want}",
                p.pipeline_latency()
            ));
        }
        if out != Some(state.eval_combinational(ops)) {
            return Err(format!(
                "S={s}: pipelined result differs from combinational"
            ));
        }
        got.push(cycles.to_string());
    }
    Ok(format!("latencies {}", got.join("/")))
}

fn end_to_end() -> Check {
    let start = Instant::now();
    let mut notes = Vec::new();
    for name in ["popcount", "permute_xor"] {
        let netlist = corpus(name, 32, 7).map_err(|e| e.to_string())?;
        let compiled = compile(
            &netlist,
            FabricParams::default(),
            &CompileOptions {
                seed: 7,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let bs = bitgen::encode(&compiled.config).map_err(|e| e.to_string())?;
        let mut state = FabricState::new(FabricParams::default()).map_err(|e| e.to_string())?;
        state.load_bitstream(&bs).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(0xE2E);
        let inputs: Vec<Operands> = (0..100_000).map(|_| random_ops(&mut rng)).collect();
        let bad = inputs
            .par_iter()
            .filter(|ops| {
                let got = state.eval_combinational(**ops);
                let want = match name {
                    // Independent software oracle, not the netlist.
                    "popcount" => u64::from(ops.rs1.count_ones()) & ((1 << popcount_bits(32)) - 1),
                    _ => netlist
                        .eval_operands(ops.rs1, ops.rs2, ops.funct3)
                        .expect("oracle"),
                };
                got != want
            })
            .count();
        if bad > 0 {
            return Err(format!("{name}: {bad} mismatches"));
        }
        notes.push(format!("{name} 0/100000"));
    }
    if start.elapsed() > Duration::from_secs(120) {
        return Err(format!("took {:?}", start.elapsed()));
    }
    Ok(format!("{} in {:.1?}", notes.join(", "), start.elapsed()))
}

fn bandwidth() -> Check {
    let cfg = SystemConfig::default()
        .with_parallelism(16)
        .map_err(|e| e.to_string())?;
    let r = bandwidth_report(&cfg);
    let gbs = format!("{:.1}", r.bandwidth_gbs);
    let ratio = format!("{:.1}", r.speedup_vs_reference);
    if cfg.clock_mhz != 150.0 || gbs != "38.4" || ratio != "27.4" || r.icap_cycles != 2048 {
        return Err(format!(
            "{gbs} GB/s, {ratio}x, ICAP {} cycles",
            r.icap_cycles
        ));
    }
    Ok(format!(
        "{gbs} GB/s, {ratio}x vs 1.4 GB/s, ICAP {} cycles",
        r.icap_cycles
    ))
}

fn one_slot_stress() -> Check {
    for p in PS {
        for n in [1usize, 7, 100, 1000] {
            let mut one = SystemConfig::default()
                .with_parallelism(p)
                .map_err(|e| e.to_string())?;
            one.slots = 1;
            let trace = make_benchmark_trace(BenchmarkKind::Interleaved, n, &one);
            let s = execute_trace(&trace, &one, &benchmark_manifest(&one))
                .map_err(|e| e.to_string())?;
            if s.slot_misses != s.invocations || s.invocations != 2 * n as u64 {
                return Err(format!(
                    "P={p} N={n}: {} misses for {} calls",
                    s.slot_misses, s.invocations
                ));
            }
            if s.reconfig_cycles_per_miss() != Some(512 / p as u64) || !s.is_conserved() {
                return Err(format!(
                    "P={p} N={n}: stall {:?}",
                    s.reconfig_cycles_per_miss()
                ));
            }
            let mut two = one;
            two.slots = 2;
            let s2 = execute_trace(&trace, &two, &benchmark_manifest(&two))
                .map_err(|e| e.to_string())?;
            if s2.slot_misses != 2 {
                return Err(format!(
                    "P={p} N={n}: {} misses with 2 slots",
                    s2.slot_misses
                ));
            }
        }
    }
    Ok("1 slot: misses = calls, stall 512/P; 2 slots: 2 misses".into())
}

fn format_round_trip() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..1000 {
        let p = params(32, PS[i % PS.len()]);
        let config = random_config(p, &mut rng);
        let bs = bitgen::encode(&config).map_err(|e| e.to_string())?;
        if bitgen::decode(&bs).map_err(|e| e.to_string())? != config {
            return Err(format!("config {i}: decode(encode) differs"));
        }
        if i % 10 == 0 {
            let path = dir.path().join(format!("{i}.luts"));
            bs.write_file(&path).map_err(|e| e.to_string())?;
            let back = Bitstream::read_file(&path).map_err(|e| e.to_string())?;
            let on_disk = std::fs::read(&path).map_err(|e| e.to_string())?;
            if back != bs || on_disk != bs.to_bytes() || back.to_bytes() != on_disk {
                return Err(format!("config {i}: file round trip differs"));
            }
        }
    }
    Ok("1000 configs, 100 files".into())
}

fn determinism() -> Check {
    let mut files = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out = dir.path().to_str().ok_or("temp path")?.to_owned();
        for name in ["popcount", "permute_xor"] {
            cli::run_args([
                "lutstruction",
                "compile",
                "--corpus",
                name,
                "--seed",
                "7",
                "--output-dir",
                &out,
            ])
            .map_err(|e| e.to_json_line())?;
        }
        let read = |n: &str| std::fs::read(dir.path().join(n)).map_err(|e| e.to_string());
        files.push((read("popcount.luts")?, read("permute_xor.luts")?));
    }
    if files[0] != files[1] {
        return Err("compiles with seed 7 differ".into());
    }
    Ok(format!(
        "{} + {} bytes identical",
        files[0].0.len(),
        files[0].1.len()
    ))
}

fn main() {
    let checks: [Criterion; 8] = [
        ("reconfiguration-cycle law", reconfiguration_cycles),
        ("load equivalence", load_equivalence),
        ("hit-latency law", hit_latency),
        ("end-to-end correctness", end_to_end),
        ("bandwidth arithmetic", bandwidth),
        ("one-slot stress", one_slot_stress),
        ("bitstream round trip", format_round_trip),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        match result {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({elapsed:.2?})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail} ({elapsed:.2?})", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
