//! Command-line front end. Every command reads a [`ProjectConfig`] (from
//! `--config` or `LUTSTRUCTION_CONFIG`), applies flag overrides, validates,
//! and prints JSON on stdout. Failures become one JSON line on stderr.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::bitgen::{self, BitgenError, Bitstream, LibraryManifest};
use crate::fabric::{FabricError, FabricParams};
use crate::netlist::{self, parse_blif, write_blif, Netlist, NetlistError};
use crate::pnr::{self, CompileOptions, PnrError};
use crate::sim::{FabricState, Operands, SimError};
use crate::sysmodel::{self, BenchmarkKind, SysError, SystemConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Pnr(#[from] PnrError),
    #[error(transparent)]
    Bitgen(#[from] BitgenError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Sys(#[from] SysError),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Netlist(e) => e.kind(),
            Self::Pnr(e) => e.kind(),
            Self::Bitgen(e) => e.kind(),
            Self::Sim(e) => e.kind(),
            Self::Sys(e) => e.kind(),
            Self::Fabric(_) => "parameter",
            Self::Io { .. } => "io",
            Self::Json(_) => "config",
            Self::Usage(_) => "usage",
        }
    }

    /// The single-line JSON form printed on failure.
    pub fn to_json_line(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// Settings shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectConfig {
    /// Authoritative fabric geometry; copied into `system` on validation.
    pub fabric: FabricParams,
    pub system: SystemConfig,
    /// Library manifest used by `bench`; built-in benchmark entries if absent.
    pub manifest: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            fabric: FabricParams::default(),
            system: SystemConfig::default(),
            manifest: None,
            seed: 0,
            output_dir: PathBuf::from("."),
        }
    }
}

impl ProjectConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let mut cfg: Self = serde_json::from_str(text)?;
        cfg.finalize()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_json(&read_text(path)?)
    }

    /// Syncs the system model with the fabric and validates both.
    pub fn finalize(&mut self) -> Result<(), CliError> {
        self.fabric.validate()?;
        self.system.fabric = self.fabric;
        self.system.bl1.block_bits = self.fabric.bitstream_bits();
        self.system.validate()?;
        Ok(())
    }
}

/// Flags that override [`ProjectConfig`] keys.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Project config JSON.
    #[arg(long, global = true, env = "LUTSTRUCTION_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Fabric rows (operand width).
    #[arg(long, global = true)]
    pub width: Option<usize>,
    /// Fabric columns.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// Register spacing; `bench` accepts a comma-separated sweep.
    #[arg(long = "S", global = true, value_delimiter = ',')]
    pub reg_spacing: Vec<usize>,
    /// Configuration parallelism; `bench` accepts a comma-separated sweep.
    #[arg(long = "P", global = true, value_delimiter = ',')]
    pub parallelism: Vec<usize>,
    /// Fabric slots; `bench` accepts a comma-separated sweep.
    #[arg(long, global = true, value_delimiter = ',')]
    pub slots: Vec<usize>,
    /// Core clock in MHz.
    #[arg(long, global = true)]
    pub clock: Option<f64>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a BLIF file or built-in circuit into a .luts bitstream.
    Compile(CompileArgs),
    /// Describe the contents of a .luts file.
    Decode(DecodeArgs),
    /// Evaluate a .luts instruction on operands.
    Sim(SimArgs),
    /// Cycle-accurate bitstream load.
    LoadSim(LoadSimArgs),
    /// Trace-driven system benchmark and bandwidth report.
    Bench(BenchArgs),
    /// Build a bitstream library image and manifest.
    Library(LibraryArgs),
    /// Derived timing figures for the configured system.
    Report,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    /// BLIF netlist.
    pub blif: Option<PathBuf>,
    /// Built-in circuit instead of a file.
    #[arg(long, conflicts_with = "blif")]
    pub corpus: Option<String>,
    /// Output base name; defaults to the input name.
    #[arg(long)]
    pub name: Option<String>,
    /// Also write the (input) netlist as BLIF next to the bitstream.
    #[arg(long)]
    pub write_blif: bool,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    pub luts: PathBuf,
    /// List every programmed cell with its truth tables.
    #[arg(long)]
    pub cells: bool,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    pub luts: PathBuf,
    #[arg(long, value_parser = parse_u64)]
    pub rs1: Option<u64>,
    #[arg(long, value_parser = parse_u64)]
    pub rs2: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub funct3: u8,
    /// Evaluate N random operand triples.
    #[arg(long)]
    pub random: Option<usize>,
    /// Compare against this BLIF netlist.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    /// Compare against a built-in circuit.
    #[arg(long, conflicts_with = "oracle")]
    pub oracle_corpus: Option<String>,
}

#[derive(Debug, Args)]
pub struct LoadSimArgs {
    pub luts: PathBuf,
    /// Write one JSON line per load cycle here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// popcount, permute_xor or interleaved.
    pub scenario: Option<String>,
    /// Calls (or pairs, for interleaved).
    #[arg(long, default_value_t = 1000)]
    pub calls: usize,
    #[arg(long)]
    pub report_bandwidth: bool,
    /// Write the sweep as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LibraryArgs {
    /// `FUNCT7=PATH.luts`; the name is the file stem. Built-in circuits if omitted.
    #[arg(long = "entry")]
    pub entries: Vec<String>,
    #[arg(long, default_value = "library.bin")]
    pub image: String,
}

/// Parsed command line, including the global overrides.
#[derive(Debug, Parser)]
#[command(
    name = "lutstruction",
    version,
    about = "LUT4_4 instruction fabric toolchain and simulator"
)]
pub struct Invocation {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_u64(s: &str) -> Result<u64, String> {
    let t = s.replace('_', "");
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => match t.strip_prefix("0b") {
            Some(bin) => u64::from_str_radix(bin, 2),
            None => t.parse(),
        },
    };
    parsed.map_err(|e| format!("`{s}`: {e}"))
}

fn single(name: &str, values: &[usize]) -> Result<Option<usize>, CliError> {
    match values {
        [] => Ok(None),
        [v] => Ok(Some(*v)),
        _ => Err(CliError::Usage(format!(
            "--{name} takes one value outside `bench`"
        ))),
    }
}

impl Overrides {
    /// Loads the config file (if any) and applies the flags. Sweep lists
    /// keep only their first value here.
    pub fn resolve(&self) -> Result<ProjectConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = read_text(path)?;
                serde_json::from_str(&text)?
            }
            None => ProjectConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.width {
            cfg.fabric.width = w;
        }
        if let Some(d) = self.depth {
            cfg.fabric.depth = d;
        }
        if let Some(&s) = self.reg_spacing.first() {
            cfg.fabric.reg_spacing = s;
        }
        if let Some(&p) = self.parallelism.first() {
            cfg.fabric.config_parallelism = p;
        }
        if let Some(&n) = self.slots.first() {
            cfg.system.slots = n;
        }
        if let Some(c) = self.clock {
            cfg.system.clock_mhz = c;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(m) = &self.manifest {
            cfg.manifest = Some(m.clone());
        }
        cfg.finalize()?;
        Ok(cfg)
    }
}

/// Parses `args` and runs the command, returning what goes on stdout.
pub fn run_args<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let inv = Invocation::try_parse_from(args)
        .map_err(|e| CliError::Usage(e.to_string().trim().replace('\n', " ")))?;
    run(&inv)
}

pub fn run(inv: &Invocation) -> Result<String, CliError> {
    let o = &inv.overrides;
    if !matches!(inv.command, Command::Bench(_)) {
        single("S", &o.reg_spacing)?;
        single("P", &o.parallelism)?;
        single("slots", &o.slots)?;
    }
    let cfg = o.resolve()?;
    match &inv.command {
        Command::Compile(a) => cmd_compile(a, &cfg),
        Command::Decode(a) => cmd_decode(a),
        Command::Sim(a) => cmd_sim(a, &cfg),
        Command::LoadSim(a) => cmd_load_sim(a),
        Command::Bench(a) => cmd_bench(a, &cfg, o),
        Command::Library(a) => cmd_library(a, &cfg),
        Command::Report => cmd_report(&cfg),
    }
}

/// Binary entry point: prints the result or a JSON error line, returns the exit code.
pub fn main_with_args(args: Vec<std::ffi::OsString>) -> i32 {
    if let Err(e) = Invocation::try_parse_from(&args) {
        use clap::error::ErrorKind;
        if matches!(
            e.kind(),
            ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
        ) {
            print!("{e}");
            return 0;
        }
    }
    match run_args(args) {
        Ok(out) => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            // A closed pipe is not an error worth reporting.
            let _ = lock.write_all(out.as_bytes());
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            1
        }
    }
}

fn pretty(value: &impl Serialize) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn load_netlist(path: &Path) -> Result<Netlist, CliError> {
    Ok(parse_blif(&read_text(path)?)?)
}

fn cmd_compile(a: &CompileArgs, cfg: &ProjectConfig) -> Result<String, CliError> {
    let (netlist, default_name) = match (&a.blif, &a.corpus) {
        (Some(path), _) => {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            (load_netlist(path)?, stem.unwrap_or_else(|| "out".into()))
        }
        (None, Some(name)) => (
            netlist::corpus(name, cfg.fabric.width, cfg.seed)?,
            name.clone(),
        ),
        (None, None) => return Err(CliError::Usage("give a BLIF path or --corpus NAME".into())),
    };
    let name = a.name.clone().unwrap_or(default_name);
    let opts = CompileOptions {
        seed: cfg.seed,
        ..CompileOptions::default()
    };
    let compiled = pnr::compile(&netlist, cfg.fabric, &opts)?;
    let bs = bitgen::encode(&compiled.config)?;
    let luts = cfg.output_dir.join(format!("{name}.luts"));
    let stats_path = cfg.output_dir.join(format!("{name}.stats.json"));
    write_bytes(&luts, &bs.to_bytes())?;
    let stats = pretty(&compiled.stats)?;
    write_bytes(&stats_path, stats.as_bytes())?;
    let mut outputs = vec![luts.display().to_string(), stats_path.display().to_string()];
    if a.write_blif {
        let path = cfg.output_dir.join(format!("{name}.blif"));
        write_bytes(&path, write_blif(&netlist).as_bytes())?;
        outputs.push(path.display().to_string());
    }
    pretty(&json!({
        "outputs": outputs,
        "file_bytes": bitgen::HEADER_BYTES + Bitstream::payload_len(&cfg.fabric),
        "stats": compiled.stats,
    }))
}

fn read_luts(path: &Path) -> Result<Bitstream, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(Bitstream::from_bytes(&bytes)?)
}

fn cmd_decode(a: &DecodeArgs) -> Result<String, CliError> {
    let bs = read_luts(&a.luts)?;
    let config = bitgen::decode(&bs)?;
    let p = *config.params();
    let passthrough = config.cells().iter().filter(|c| c.is_bypass()).count();
    let mut out = json!({
        "file": a.luts.display().to_string(),
        "fabric": p,
        "payload_bytes": Bitstream::payload_len(&p),
        "load_cycles": p.load_cycles(),
        "pipeline_latency": p.pipeline_latency(),
        "cells": p.cells(),
        "bypass_cells": passthrough,
        "configured_cells": p.cells() - passthrough,
    });
    if a.cells {
        let mut list = Vec::new();
        for c in 0..p.depth {
            for r in 0..p.width {
                let cell = config.cell(c, r);
                if !cell.is_bypass() {
                    let tables: Vec<String> =
                        (0..4).map(|k| format!("{:04x}", cell.table(k))).collect();
                    list.push(json!({ "column": c, "row": r, "tables": tables }));
                }
            }
        }
        out["cell_tables"] = list.into();
    }
    pretty(&out)
}

fn mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1 << width) - 1
    }
}

/// Operands, fabric result, oracle result.
type Mismatch = (Operands, u64, u64);

fn cmd_sim(a: &SimArgs, cfg: &ProjectConfig) -> Result<String, CliError> {
    let bs = read_luts(&a.luts)?;
    let state = FabricState::with_config(&bitgen::decode(&bs)?)?;
    let width = bs.params().width;
    let oracle = match (&a.oracle, &a.oracle_corpus) {
        (Some(path), _) => Some(load_netlist(path)?),
        (None, Some(name)) => Some(netlist::corpus(name, width, cfg.seed)?),
        (None, None) => None,
    };
    if a.funct3 >= 8 {
        return Err(CliError::Usage("--funct3 must be below 8".into()));
    }
    if a.random.is_none() && (a.rs1.is_some() || a.rs2.is_some() || oracle.is_none()) {
        let ops = Operands::new(
            a.rs1.unwrap_or(0) & mask(width),
            a.rs2.unwrap_or(0) & mask(width),
            a.funct3,
        );
        let rd = state.eval_combinational(ops);
        let mut out = json!({
            "rs1": format!("{:#x}", ops.rs1),
            "rs2": format!("{:#x}", ops.rs2),
            "funct3": ops.funct3,
            "rd": rd,
            "rd_hex": format!("{rd:#x}"),
        });
        if let Some(n) = &oracle {
            let expected = n.eval_operands(ops.rs1, ops.rs2, ops.funct3)?;
            out["expected"] = expected.into();
            out["mismatches"] = u64::from(expected != rd).into();
        }
        return pretty(&out);
    }
    let n = a.random.unwrap_or(1000);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let inputs: Vec<Operands> = (0..n)
        .map(|_| {
            Operands::new(
                rng.gen::<u64>() & mask(width),
                rng.gen::<u64>() & mask(width),
                rng.gen_range(0..8),
            )
        })
        .collect();
    let results: Vec<u64> = inputs
        .par_iter()
        .map(|ops| state.eval_combinational(*ops))
        .collect();
    let Some(oracle) = oracle else {
        let mut out = String::new();
        for (ops, rd) in inputs.iter().zip(&results) {
            let _ = writeln!(
                out,
                "{}",
                json!({ "rs1": ops.rs1, "rs2": ops.rs2, "funct3": ops.funct3, "rd": rd })
            );
        }
        return Ok(out);
    };
    let checked: Result<Vec<Option<Mismatch>>, NetlistError> = inputs
        .par_iter()
        .zip(&results)
        .map(|(ops, rd)| {
            let want = oracle.eval_operands(ops.rs1, ops.rs2, ops.funct3)?;
            Ok((want != *rd).then_some((*ops, *rd, want)))
        })
        .collect();
    let bad: Vec<_> = checked?.into_iter().flatten().collect();
    let first = bad.first().map(|(ops, got, want)| {
        json!({ "rs1": ops.rs1, "rs2": ops.rs2, "funct3": ops.funct3, "rd": got, "expected": want })
    });
    pretty(&json!({
        "inputs": n,
        "mismatches": bad.len(),
        "first_mismatch": first,
        "seed": cfg.seed,
    }))
}

fn cmd_load_sim(a: &LoadSimArgs) -> Result<String, CliError> {
    let bs = read_luts(&a.luts)?;
    let expected = bitgen::decode(&bs)?;
    let mut state = FabricState::new(*bs.params())?;
    let mut writer = match &a.trace {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(io_err(dir))?;
            }
            Some(BufWriter::new(
                fs::File::create(path).map_err(io_err(path))?,
            ))
        }
        None => None,
    };
    let mut trace_err = None;
    let report = state.load_bitstream_traced(&bs, |cycle| {
        let Some(w) = writer.as_mut() else { return };
        let latched: Vec<_> = cycle
            .latched
            .iter()
            .map(|e| json!({ "segment": e.segment, "word": e.word, "column": e.column, "slot": e.slot }))
            .collect();
        let line = json!({ "cycle": cycle.cycle, "in_flight": cycle.in_flight, "latched": latched });
        if let Err(e) = writeln!(w, "{line}") {
            trace_err.get_or_insert(e);
        }
    })?;
    if let Some(mut w) = writer {
        let path = a.trace.as_deref().expect("writer implies a path");
        if let Some(e) = trace_err {
            return Err(io_err(path)(e));
        }
        w.flush().map_err(io_err(path))?;
    }
    let p = bs.params();
    pretty(&json!({
        "cycles": report.cycles,
        "expected_cycles": p.load_cycles(),
        "words": report.words,
        "word_bits": report.word_bits,
        "config_parallelism": p.config_parallelism,
        "trace_hash": format!("{:016x}", report.trace_hash),
        "matches_decoded": state.config() == &expected,
    }))
}

fn cmd_bench(a: &BenchArgs, cfg: &ProjectConfig, o: &Overrides) -> Result<String, CliError> {
    if a.scenario.is_none() && !a.report_bandwidth {
        return Err(CliError::Usage(
            "name a scenario or pass --report-bandwidth".into(),
        ));
    }
    let ps = if o.parallelism.is_empty() {
        vec![cfg.fabric.config_parallelism]
    } else {
        o.parallelism.clone()
    };
    let slots = if o.slots.is_empty() {
        vec![cfg.system.slots]
    } else {
        o.slots.clone()
    };
    let spacings = if o.reg_spacing.is_empty() {
        vec![cfg.fabric.reg_spacing]
    } else {
        o.reg_spacing.clone()
    };
    let mut out = serde_json::Map::new();
    if let Some(name) = &a.scenario {
        let kind: BenchmarkKind = name.parse()?;
        let manifest = match &cfg.manifest {
            Some(path) => Some(serde_json::from_str::<LibraryManifest>(&read_text(path)?)?),
            None => None,
        };
        let mut rows = Vec::new();
        for &s in &spacings {
            let mut base = cfg.system;
            base.fabric = FabricParams::new(
                cfg.fabric.width,
                cfg.fabric.depth,
                s,
                cfg.fabric.config_parallelism,
            )?;
            rows.extend(match &manifest {
                None => sysmodel::sweep(kind, a.calls, &base, &ps, &slots)?,
                Some(m) => sweep_with_manifest(kind, a.calls, &base, &ps, &slots, m)?,
            });
        }
        if let Some(path) = &a.csv {
            write_bytes(path, sweep_csv(&rows).as_bytes())?;
        }
        out.insert("runs".into(), serde_json::to_value(&rows)?);
    }
    if a.report_bandwidth {
        let reports = ps
            .iter()
            .map(|&p| Ok(sysmodel::bandwidth_report(&cfg.system.with_parallelism(p)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        out.insert("bandwidth".into(), serde_json::to_value(reports)?);
    }
    pretty(&out)
}

fn sweep_with_manifest(
    kind: BenchmarkKind,
    n: usize,
    base: &SystemConfig,
    ps: &[usize],
    slots: &[usize],
    manifest: &LibraryManifest,
) -> Result<Vec<sysmodel::SweepRow>, CliError> {
    let mut rows = Vec::new();
    for &p in ps {
        for &s in slots {
            let mut cfg = base.with_parallelism(p)?;
            cfg.slots = s;
            let trace = sysmodel::make_benchmark_trace(kind, n, &cfg);
            rows.push(sysmodel::SweepRow {
                scenario: kind,
                calls: n,
                config_parallelism: p,
                slots: s,
                reg_spacing: cfg.fabric.reg_spacing,
                stats: sysmodel::execute_trace(&trace, &cfg, manifest)?,
            });
        }
    }
    Ok(rows)
}

/// CSV table of a sweep, one row per parameter point.
pub fn sweep_csv(rows: &[sysmodel::SweepRow]) -> String {
    let mut out = String::from(
        "scenario,calls,P,S,slots,invocations,total_cycles,slot_hits,slot_misses,bl1_hits,bl1_misses,reconfig_cycles,reconfig_per_miss,achieved_gbs\n",
    );
    for r in rows {
        let s = &r.stats;
        let scenario = serde_json::to_value(r.scenario)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{scenario},{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            r.calls,
            r.config_parallelism,
            r.reg_spacing,
            r.slots,
            s.invocations,
            s.total_cycles,
            s.slot_hits,
            s.slot_misses,
            s.bl1_hits,
            s.bl1_misses,
            s.reconfig_cycles,
            s.reconfig_cycles_per_miss().unwrap_or(0),
            s.achieved_bandwidth_gbs,
        );
    }
    out
}

/// funct7 slots used when `library` builds from the built-in circuits.
const BUILTIN_LIBRARY: [(u8, &str); 2] = [
    (sysmodel::POPCOUNT_FUNCT7, "popcount"),
    (sysmodel::PERMUTE_XOR_FUNCT7, "permute_xor"),
];

fn cmd_library(a: &LibraryArgs, cfg: &ProjectConfig) -> Result<String, CliError> {
    let mut entries = Vec::new();
    if a.entries.is_empty() {
        let opts = CompileOptions {
            seed: cfg.seed,
            ..CompileOptions::default()
        };
        for (funct7, name) in BUILTIN_LIBRARY {
            let netlist = netlist::corpus(name, cfg.fabric.width, cfg.seed)?;
            let compiled = pnr::compile(&netlist, cfg.fabric, &opts)?;
            entries.push((funct7, name.to_string(), bitgen::encode(&compiled.config)?));
        }
    }
    for entry in &a.entries {
        let (f, path) = entry
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("entry `{entry}` is not FUNCT7=PATH")))?;
        let funct7: u8 = f
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("entry `{entry}`: bad funct7")))?;
        let path = Path::new(path);
        let bs = read_luts(path)?;
        if bs.params().width != cfg.fabric.width || bs.params().depth != cfg.fabric.depth {
            return Err(CliError::Usage(format!(
                "{} is {}x{}, the project fabric is {}x{}",
                path.display(),
                bs.params().width,
                bs.params().depth,
                cfg.fabric.width,
                cfg.fabric.depth
            )));
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        entries.push((funct7, name, bs));
    }
    let (image, manifest) = bitgen::build_library_image(cfg.system.memory.library_base, &entries)?;
    let image_path = cfg.output_dir.join(&a.image);
    let manifest_path = image_path.with_extension("manifest.json");
    write_bytes(&image_path, &image)?;
    write_bytes(&manifest_path, pretty(&manifest)?.as_bytes())?;
    pretty(&json!({
        "image": image_path.display().to_string(),
        "image_bytes": image.len(),
        "manifest": manifest_path.display().to_string(),
        "entries": manifest.entries,
    }))
}

fn cmd_report(cfg: &ProjectConfig) -> Result<String, CliError> {
    let sys = &cfg.system;
    let p = cfg.fabric;
    let per_p: Vec<_> = [1, 2, 4, 8, 16]
        .into_iter()
        .filter(|&q| p.depth.is_multiple_of(q))
        .map(|q| {
            let s = sys.with_parallelism(q)?;
            Ok(json!({ "P": q, "load_cycles": s.reconfig_stall_cycles(), "bandwidth_gbs": sysmodel::bandwidth_report(&s).bandwidth_gbs }))
        })
        .collect::<Result<_, CliError>>()?;
    pretty(&json!({
        "fabric": p,
        "bitstream_bits": p.bitstream_bits(),
        "file_bytes": bitgen::HEADER_BYTES + Bitstream::payload_len(&p),
        "pipeline_latency": p.pipeline_latency(),
        "reconfig_stall_cycles": sys.reconfig_stall_cycles(),
        "bl1_fill_cycles": sys.bl1_fill_cycles(),
        "bl1_capacity_bytes": sys.bl1.capacity_bytes(),
        "library_base": format!("{:#x}", sys.memory.library_base),
        "bandwidth": sysmodel::bandwidth_report(sys),
        "parallelism_table": per_p,
        "seed": cfg.seed,
    }))
}
