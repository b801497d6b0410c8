//! Trace-driven timing model of the custom-instruction path: fabric slots
//! (the instruction disambiguator), the bitstream cache BL1 and memory.
//!
//! The model counts cycles only; operand values never influence timing.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitgen::{slot_address, LibraryManifest, ManifestEntry, LIBRARY_SLOTS};
use crate::fabric::{FabricError, FabricParams};

#[derive(Debug, Error)]
pub enum SysError {
    #[error("invalid system configuration: {0}")]
    Config(String),
    #[error("trace error: {0}")]
    Trace(String),
    #[error("address {0:#x} does not fit the 30-bit softcore address space")]
    Range(u64),
    #[error("invalid instruction word: {0}")]
    Encoding(String),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SysError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) | Self::Json(_) => "config",
            Self::Trace(_) => "trace",
            Self::Range(_) => "range",
            Self::Encoding(_) => "encoding",
            Self::Fabric(_) => "parameter",
            Self::Io(_) => "io",
        }
    }
}

/// The four RISC-V opcodes reserved for custom extensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CustomOpcode {
    Custom0,
    Custom1,
    Custom2,
    Custom3,
}

impl CustomOpcode {
    pub const fn bits(self) -> u32 {
        match self {
            Self::Custom0 => 0x0B,
            Self::Custom1 => 0x2B,
            Self::Custom2 => 0x5B,
            Self::Custom3 => 0x7B,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            0x0B => Some(Self::Custom0),
            0x2B => Some(Self::Custom1),
            0x5B => Some(Self::Custom2),
            0x7B => Some(Self::Custom3),
            _ => None,
        }
    }
}

/// R-type custom instruction; `funct7` selects the bitstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstructionWord {
    pub opcode: CustomOpcode,
    pub funct7: u8,
    pub funct3: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub rd: u8,
}

impl InstructionWord {
    pub fn new(
        opcode: CustomOpcode,
        funct7: u8,
        funct3: u8,
        rs1: u8,
        rs2: u8,
        rd: u8,
    ) -> Result<Self, SysError> {
        let word = Self {
            opcode,
            funct7,
            funct3,
            rs1,
            rs2,
            rd,
        };
        word.validate()?;
        Ok(word)
    }

    fn validate(&self) -> Result<(), SysError> {
        if self.funct7 >= 128 || self.funct3 >= 8 {
            return Err(SysError::Encoding(format!(
                "funct7 {} / funct3 {} out of range",
                self.funct7, self.funct3
            )));
        }
        if self.rs1 >= 32 || self.rs2 >= 32 || self.rd >= 32 {
            return Err(SysError::Encoding("register index above x31".into()));
        }
        Ok(())
    }

    pub fn encode(&self) -> u32 {
        (u32::from(self.funct7) << 25)
            | (u32::from(self.rs2) << 20)
            | (u32::from(self.rs1) << 15)
            | (u32::from(self.funct3) << 12)
            | (u32::from(self.rd) << 7)
            | self.opcode.bits()
    }

    pub fn decode(word: u32) -> Result<Self, SysError> {
        let opcode = CustomOpcode::from_bits(word & 0x7F).ok_or_else(|| {
            SysError::Encoding(format!("opcode {:#04x} is not custom-0..3", word & 0x7F))
        })?;
        Ok(Self {
            opcode,
            funct7: (word >> 25) as u8,
            funct3: ((word >> 12) & 0x7) as u8,
            rs1: ((word >> 15) & 0x1F) as u8,
            rs2: ((word >> 20) & 0x1F) as u8,
            rd: ((word >> 7) & 0x1F) as u8,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheGeometry {
    pub sets: usize,
    pub ways: usize,
    pub block_bits: usize,
}

impl CacheGeometry {
    pub const fn new(sets: usize, ways: usize, block_bits: usize) -> Self {
        Self {
            sets,
            ways,
            block_bits,
        }
    }

    pub fn capacity_bytes(&self) -> usize {
        self.sets * self.ways * self.block_bits / 8
    }
}

/// Where the softcore's memory lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryMap {
    /// Mask ORed onto every softcore address on the way to memory.
    pub or_mask: u64,
    pub library_base: u64,
    pub program_start: u64,
    pub program_bytes: u64,
}

impl Default for MemoryMap {
    fn default() -> Self {
        Self {
            or_mask: 0x4000_0000,
            library_base: crate::bitgen::DEFAULT_LIBRARY_BASE,
            program_start: 0,
            program_bytes: 0x10_0000,
        }
    }
}

pub const ADDRESS_LIMIT: u64 = 1 << 30;

impl MemoryMap {
    /// Physical address seen by memory for a softcore address.
    pub fn resolve_address(&self, address: u64) -> Result<u64, SysError> {
        if address >= ADDRESS_LIMIT {
            return Err(SysError::Range(address));
        }
        Ok(address | self.or_mask)
    }

    pub fn library_bytes(&self, slot_bytes: usize) -> u64 {
        (LIBRARY_SLOTS * slot_bytes) as u64
    }

    fn validate(&self, slot_bytes: usize) -> Result<(), SysError> {
        let lib = (
            self.library_base,
            self.library_base + self.library_bytes(slot_bytes),
        );
        let prog = (self.program_start, self.program_start + self.program_bytes);
        if lib.0 < prog.1 && prog.0 < lib.1 {
            return Err(SysError::Config(format!(
                "library [{:#x}, {:#x}) overlaps the program [{:#x}, {:#x})",
                lib.0, lib.1, prog.0, prog.1
            )));
        }
        if lib.1 > ADDRESS_LIMIT {
            return Err(SysError::Config(
                "library ends above the 30-bit address space".into(),
            ));
        }
        Ok(())
    }
}

/// Timing parameters. Latencies are model parameters, not measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub slots: usize,
    pub bl1: CacheGeometry,
    pub il1: CacheGeometry,
    pub dl1: CacheGeometry,
    pub llc: CacheGeometry,
    pub inter_cache_width_bits: usize,
    /// Core to BL1 width; `None` means `max(256, 128 * P)`.
    pub core_bl1_width_bits: Option<usize>,
    pub bl1_hit_cycles: u64,
    pub llc_hit_cycles: u64,
    pub mem_first_beat_cycles: u64,
    pub mem_per_beat_cycles: u64,
    pub slot_switch_cycles: u64,
    /// Loop and operand handling between custom instructions.
    pub call_overhead_cycles: u64,
    pub fabric: FabricParams,
    pub clock_mhz: f64,
    pub reference_bandwidth_gbs: f64,
    pub icap_bits_per_cycle: usize,
    pub icap_clock_mhz: f64,
    pub memory: MemoryMap,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let fabric = FabricParams::default();
        Self {
            slots: 2,
            bl1: CacheGeometry::new(16, 1, fabric.bitstream_bits()),
            il1: CacheGeometry::new(64, 1, 256),
            dl1: CacheGeometry::new(16, 4, 256),
            llc: CacheGeometry::new(16, 4, 16384),
            inter_cache_width_bits: 256,
            core_bl1_width_bits: None,
            bl1_hit_cycles: 2,
            llc_hit_cycles: 8,
            mem_first_beat_cycles: 30,
            mem_per_beat_cycles: 1,
            slot_switch_cycles: 1,
            call_overhead_cycles: 4,
            fabric,
            clock_mhz: 150.0,
            reference_bandwidth_gbs: 1.4,
            icap_bits_per_cycle: 32,
            icap_clock_mhz: 100.0,
            memory: MemoryMap::default(),
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), SysError> {
        self.fabric.validate()?;
        if self.slots == 0 {
            return Err(SysError::Config(
                "at least one fabric slot is required".into(),
            ));
        }
        for (name, g) in [
            ("bl1", self.bl1),
            ("il1", self.il1),
            ("dl1", self.dl1),
            ("llc", self.llc),
        ] {
            if g.sets == 0 || g.ways == 0 || g.block_bits == 0 {
                return Err(SysError::Config(format!(
                    "{name} geometry has a zero dimension"
                )));
            }
        }
        if self.bl1.block_bits != self.fabric.bitstream_bits() {
            return Err(SysError::Config(format!(
                "BL1 blocks hold {} bits but a bitstream has {}",
                self.bl1.block_bits,
                self.fabric.bitstream_bits()
            )));
        }
        if self.inter_cache_width_bits == 0 || self.core_bl1_width_bits == Some(0) {
            return Err(SysError::Config("bus widths must be positive".into()));
        }
        if !(self.clock_mhz > 0.0 && self.icap_clock_mhz > 0.0) || self.icap_bits_per_cycle == 0 {
            return Err(SysError::Config(
                "clocks and ICAP width must be positive".into(),
            ));
        }
        self.memory.validate(self.fabric.bitstream_bits() / 8)
    }

    pub fn from_json(text: &str) -> Result<Self, SysError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SysError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Same system with a different configuration parallelism.
    pub fn with_parallelism(mut self, p: usize) -> Result<Self, SysError> {
        self.fabric = FabricParams::new(
            self.fabric.width,
            self.fabric.depth,
            self.fabric.reg_spacing,
            p,
        )?;
        Ok(self)
    }

    pub fn core_bl1_width(&self) -> usize {
        self.core_bl1_width_bits
            .unwrap_or_else(|| 256.max(128 * self.fabric.config_parallelism))
    }

    /// Bits the fabric accepts per load cycle, `4 * W * P`.
    pub fn fabric_load_width(&self) -> usize {
        4 * self.fabric.width * self.fabric.config_parallelism
    }

    /// Cycles to shift a bitstream from BL1 into a slot.
    pub fn reconfig_stall_cycles(&self) -> u64 {
        let width = self.fabric_load_width().min(self.core_bl1_width());
        self.fabric.bitstream_bits().div_ceil(width) as u64
    }

    /// Memory-to-BL1 fill of one bitstream block.
    pub fn bl1_fill_cycles(&self) -> u64 {
        let beats = self.bl1.block_bits.div_ceil(self.inter_cache_width_bits) as u64;
        self.mem_first_beat_cycles + beats * self.mem_per_beat_cycles
    }

    pub fn hit_latency(&self) -> u64 {
        self.fabric.pipeline_latency() as u64
    }

    fn slot_bytes(&self) -> usize {
        self.fabric.bitstream_bits() / 8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotOutcome {
    Hit(usize),
    /// Miss; the implementation goes into `victim`.
    Miss {
        victim: usize,
    },
}

/// Fully associative LRU table of fabric slots tagged by funct7.
#[derive(Debug, Clone)]
pub struct Disambiguator {
    tags: Vec<Option<u8>>,
    last_use: Vec<u64>,
    clock: u64,
}

impl Disambiguator {
    pub fn new(slots: usize) -> Self {
        Self {
            tags: vec![None; slots],
            last_use: vec![0; slots],
            clock: 0,
        }
    }

    /// Looks up `funct7`, installing it on a miss.
    pub fn lookup(&mut self, funct7: u8) -> SlotOutcome {
        self.clock += 1;
        if let Some(i) = self.tags.iter().position(|t| *t == Some(funct7)) {
            self.last_use[i] = self.clock;
            return SlotOutcome::Hit(i);
        }
        let victim = self
            .tags
            .iter()
            .position(Option::is_none)
            .unwrap_or_else(|| {
                (0..self.tags.len())
                    .min_by_key(|&i| self.last_use[i])
                    .expect("at least one slot")
            });
        self.tags[victim] = Some(funct7);
        self.last_use[victim] = self.clock;
        SlotOutcome::Miss { victim }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bl1Access {
    pub hit: bool,
    pub cycles: u64,
    /// Library address the block was filled from, on a miss.
    pub fill_address: Option<u64>,
}

/// Read-only set-associative bitstream cache with LRU ways.
#[derive(Debug, Clone)]
pub struct Bl1Cache {
    geometry: CacheGeometry,
    tags: Vec<Option<u8>>,
    last_use: Vec<u64>,
    clock: u64,
}

impl Bl1Cache {
    pub fn new(geometry: CacheGeometry) -> Self {
        let n = geometry.sets * geometry.ways;
        Self {
            geometry,
            tags: vec![None; n],
            last_use: vec![0; n],
            clock: 0,
        }
    }

    pub fn access(&mut self, funct7: u8, cfg: &SystemConfig) -> Bl1Access {
        self.clock += 1;
        let set = usize::from(funct7) % self.geometry.sets;
        let ways = set * self.geometry.ways..(set + 1) * self.geometry.ways;
        if let Some(i) = ways.clone().find(|&i| self.tags[i] == Some(funct7)) {
            self.last_use[i] = self.clock;
            return Bl1Access {
                hit: true,
                cycles: cfg.bl1_hit_cycles,
                fill_address: None,
            };
        }
        let victim = ways
            .clone()
            .find(|&i| self.tags[i].is_none())
            .unwrap_or_else(|| ways.min_by_key(|&i| self.last_use[i]).expect("ways > 0"));
        self.tags[victim] = Some(funct7);
        self.last_use[victim] = self.clock;
        Bl1Access {
            hit: false,
            cycles: cfg.bl1_fill_cycles(),
            fill_address: Some(slot_address(
                cfg.memory.library_base,
                funct7,
                cfg.slot_bytes(),
            )),
        }
    }
}

/// Ordered custom-instruction invocations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub calls: Vec<InstructionWord>,
    /// Cycles of surrounding code charged to every call.
    pub overhead_cycles: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Popcount,
    PermuteXor,
    Interleaved,
}

impl std::str::FromStr for BenchmarkKind {
    type Err = SysError;

    fn from_str(s: &str) -> Result<Self, SysError> {
        match s {
            "popcount" => Ok(Self::Popcount),
            "permute_xor" | "permute-xor" => Ok(Self::PermuteXor),
            "interleaved" => Ok(Self::Interleaved),
            other => Err(SysError::Trace(format!("unknown scenario `{other}`"))),
        }
    }
}

pub const POPCOUNT_FUNCT7: u8 = 1;
pub const PERMUTE_XOR_FUNCT7: u8 = 2;

/// Library entries assumed by the benchmark traces.
pub fn benchmark_manifest(cfg: &SystemConfig) -> LibraryManifest {
    let slot_bytes = cfg.slot_bytes();
    let base = cfg.memory.library_base;
    let entry = |funct7: u8, name: &str| ManifestEntry {
        funct7,
        name: name.into(),
        address: slot_address(base, funct7, slot_bytes),
    };
    LibraryManifest {
        base,
        slot_bytes,
        entries: vec![
            entry(POPCOUNT_FUNCT7, "popcount"),
            entry(PERMUTE_XOR_FUNCT7, "permute_xor"),
        ],
    }
}

/// `n` calls of one instruction, or `n` alternating pairs for `Interleaved`.
pub fn make_benchmark_trace(kind: BenchmarkKind, n: usize, cfg: &SystemConfig) -> Trace {
    let call = |funct7: u8, k: usize| InstructionWord {
        opcode: CustomOpcode::Custom0,
        funct7,
        funct3: 0,
        rs1: 10 + (k % 2) as u8,
        rs2: 12,
        rd: 5,
    };
    let calls = match kind {
        BenchmarkKind::Popcount => (0..n).map(|k| call(POPCOUNT_FUNCT7, k)).collect(),
        BenchmarkKind::PermuteXor => (0..n).map(|k| call(PERMUTE_XOR_FUNCT7, k)).collect(),
        BenchmarkKind::Interleaved => (0..n)
            .flat_map(|k| [call(POPCOUNT_FUNCT7, k), call(PERMUTE_XOR_FUNCT7, k)])
            .collect(),
    };
    Trace {
        calls,
        overhead_cycles: cfg.call_overhead_cycles,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RunStats {
    pub invocations: u64,
    pub total_cycles: u64,
    pub slot_hits: u64,
    pub slot_misses: u64,
    pub bl1_hits: u64,
    pub bl1_misses: u64,
    /// BL1 lookups and fills on slot misses.
    pub bl1_cycles: u64,
    /// Cycles spent shifting bitstreams into slots.
    pub reconfig_cycles: u64,
    pub switch_cycles: u64,
    pub execute_cycles: u64,
    pub overhead_cycles: u64,
    pub config_bits_loaded: u64,
    /// Configuration bits per second while loading, in GB/s.
    pub achieved_bandwidth_gbs: f64,
}

impl RunStats {
    /// Whether the cycle components add up to the total.
    pub fn is_conserved(&self) -> bool {
        self.bl1_cycles
            + self.reconfig_cycles
            + self.switch_cycles
            + self.execute_cycles
            + self.overhead_cycles
            == self.total_cycles
    }

    pub fn reconfig_cycles_per_miss(&self) -> Option<u64> {
        (self.slot_misses > 0).then(|| self.reconfig_cycles / self.slot_misses)
    }
}

/// Replays a trace through slots, BL1 and memory.
pub fn execute_trace(
    trace: &Trace,
    cfg: &SystemConfig,
    library: &LibraryManifest,
) -> Result<RunStats, SysError> {
    cfg.validate()?;
    let known: BTreeSet<u8> = library.entries.iter().map(|e| e.funct7).collect();
    let mut slots = Disambiguator::new(cfg.slots);
    let mut bl1 = Bl1Cache::new(cfg.bl1);
    let mut stats = RunStats::default();
    let mut previous: Option<u8> = None;
    for (i, call) in trace.calls.iter().enumerate() {
        call.validate()?;
        if !known.contains(&call.funct7) {
            return Err(SysError::Trace(format!(
                "call {i}: no library entry for funct7 {}",
                call.funct7
            )));
        }
        match slots.lookup(call.funct7) {
            SlotOutcome::Hit(_) => {
                stats.slot_hits += 1;
                // Back-to-back calls of one instruction stream through the pipeline.
                stats.execute_cycles += if previous == Some(call.funct7) {
                    1
                } else {
                    cfg.hit_latency()
                };
            }
            SlotOutcome::Miss { .. } => {
                stats.slot_misses += 1;
                let access = bl1.access(call.funct7, cfg);
                if access.hit {
                    stats.bl1_hits += 1;
                } else {
                    stats.bl1_misses += 1;
                }
                stats.bl1_cycles += access.cycles;
                stats.reconfig_cycles += cfg.reconfig_stall_cycles();
                stats.switch_cycles += cfg.slot_switch_cycles;
                stats.execute_cycles += cfg.hit_latency();
                stats.config_bits_loaded += cfg.fabric.bitstream_bits() as u64;
            }
        }
        stats.overhead_cycles += trace.overhead_cycles;
        previous = Some(call.funct7);
    }
    stats.invocations = trace.calls.len() as u64;
    stats.total_cycles = stats.bl1_cycles
        + stats.reconfig_cycles
        + stats.switch_cycles
        + stats.execute_cycles
        + stats.overhead_cycles;
    if stats.reconfig_cycles > 0 {
        let seconds = stats.reconfig_cycles as f64 / (cfg.clock_mhz * 1e6);
        stats.achieved_bandwidth_gbs = stats.config_bits_loaded as f64 / 8.0 / seconds / 1e9;
    }
    Ok(stats)
}

/// Configuration bandwidth against the reference controller and ICAP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandwidthReport {
    pub config_parallelism: usize,
    pub bits_per_cycle: usize,
    pub clock_mhz: f64,
    pub bandwidth_gbs: f64,
    pub reference_bandwidth_gbs: f64,
    pub speedup_vs_reference: f64,
    pub load_cycles: u64,
    pub load_time_us: f64,
    pub icap_cycles: u64,
    pub icap_time_us: f64,
}

pub fn bandwidth_report(cfg: &SystemConfig) -> BandwidthReport {
    let bits_per_cycle = cfg.fabric_load_width().min(cfg.core_bl1_width());
    let bandwidth_gbs = bits_per_cycle as f64 / 8.0 * cfg.clock_mhz * 1e6 / 1e9;
    let bits = cfg.fabric.bitstream_bits();
    let icap_cycles = bits.div_ceil(cfg.icap_bits_per_cycle) as u64;
    let load_cycles = cfg.reconfig_stall_cycles();
    BandwidthReport {
        config_parallelism: cfg.fabric.config_parallelism,
        bits_per_cycle,
        clock_mhz: cfg.clock_mhz,
        bandwidth_gbs,
        reference_bandwidth_gbs: cfg.reference_bandwidth_gbs,
        speedup_vs_reference: bandwidth_gbs / cfg.reference_bandwidth_gbs,
        load_cycles,
        load_time_us: load_cycles as f64 / cfg.clock_mhz,
        icap_cycles,
        icap_time_us: icap_cycles as f64 / cfg.icap_clock_mhz,
    }
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub scenario: BenchmarkKind,
    pub calls: usize,
    pub config_parallelism: usize,
    pub slots: usize,
    pub reg_spacing: usize,
    pub stats: RunStats,
}

/// Runs every (P, slots) combination in parallel; rows keep parameter order.
pub fn sweep(
    kind: BenchmarkKind,
    n: usize,
    base: &SystemConfig,
    parallelism: &[usize],
    slots: &[usize],
) -> Result<Vec<SweepRow>, SysError> {
    let points: Vec<(usize, usize)> = parallelism
        .iter()
        .flat_map(|&p| slots.iter().map(move |&s| (p, s)))
        .collect();
    points
        .par_iter()
        .map(|&(p, s)| {
            let mut cfg = base.with_parallelism(p)?;
            cfg.slots = s;
            let trace = make_benchmark_trace(kind, n, &cfg);
            let stats = execute_trace(&trace, &cfg, &benchmark_manifest(&cfg))?;
            Ok(SweepRow {
                scenario: kind,
                calls: n,
                config_parallelism: p,
                slots: s,
                reg_spacing: cfg.fabric.reg_spacing,
                stats,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: usize, slots: usize) -> SystemConfig {
        let mut c = SystemConfig::default().with_parallelism(p).unwrap();
        c.slots = slots;
        c
    }

    #[test]
    fn instruction_roundtrip() {
        let w = InstructionWord::new(CustomOpcode::Custom2, 0x45, 5, 3, 17, 31).unwrap();
        let bits = w.encode();
        assert_eq!(bits & 0x7F, 0x5B);
        assert_eq!(bits >> 25, 0x45);
        assert_eq!(InstructionWord::decode(bits).unwrap(), w);
        assert!(InstructionWord::decode(0x33).is_err());
        assert!(InstructionWord::new(CustomOpcode::Custom0, 128, 0, 0, 0, 0).is_err());
    }

    #[test]
    fn address_resolution() {
        let m = MemoryMap::default();
        assert_eq!(m.resolve_address(0x10_0000).unwrap(), 0x4010_0000);
        assert_eq!(m.resolve_address(0).unwrap(), 0x4000_0000);
        assert_eq!(m.resolve_address(0x4000_0000).unwrap_err().kind(), "range");
    }

    #[test]
    fn slot_lru() {
        let mut one = Disambiguator::new(1);
        let misses = [1, 2, 1, 2]
            .iter()
            .filter(|f| matches!(one.lookup(**f), SlotOutcome::Miss { .. }))
            .count();
        assert_eq!(misses, 4);
        let mut two = Disambiguator::new(2);
        let misses = (0..10)
            .filter(|i| matches!(two.lookup(1 + (i % 2) as u8), SlotOutcome::Miss { .. }))
            .count();
        assert_eq!(misses, 2);
        let mut lru = Disambiguator::new(2);
        lru.lookup(1);
        lru.lookup(2);
        lru.lookup(1);
        assert_eq!(lru.lookup(3), SlotOutcome::Miss { victim: 1 });
    }

    #[test]
    fn bl1_costs_and_conflicts() {
        let c = SystemConfig::default();
        let mut bl1 = Bl1Cache::new(c.bl1);
        let miss = bl1.access(3, &c);
        assert_eq!((miss.hit, miss.cycles), (false, 286));
        assert_eq!(miss.fill_address, Some(0x10_0000 + 3 * 8192));
        assert_eq!(bl1.access(3, &c).cycles, 2);
        // 3 and 19 share a set in a direct-mapped 16-set cache.
        assert!(!bl1.access(19, &c).hit);
        assert!(!bl1.access(3, &c).hit);
    }

    #[test]
    fn stall_is_512_over_p() {
        for p in [1, 2, 4, 8, 16] {
            assert_eq!(cfg(p, 1).reconfig_stall_cycles(), 512 / p as u64);
        }
    }

    #[test]
    fn single_opcode_closed_form() {
        let c = cfg(1, 2);
        let trace = make_benchmark_trace(BenchmarkKind::Popcount, 1000, &c);
        let s = execute_trace(&trace, &c, &benchmark_manifest(&c)).unwrap();
        assert_eq!(s.slot_misses, 1);
        let miss_cost = 286 + 512 + 1 + 1;
        assert_eq!(s.total_cycles, 1000 * 4 + miss_cost + 999);
        assert!(s.is_conserved());
    }

    #[test]
    fn one_slot_interleaving() {
        for p in [1, 16] {
            let c = cfg(p, 1);
            let trace = make_benchmark_trace(BenchmarkKind::Interleaved, 100, &c);
            assert_eq!(trace.calls.len(), 200);
            let s = execute_trace(&trace, &c, &benchmark_manifest(&c)).unwrap();
            assert_eq!(s.slot_misses, 200);
            assert_eq!(s.reconfig_cycles, 200 * 512 / p as u64);
            assert_eq!(s.bl1_misses, 2);
            assert!(s.is_conserved());
            let two = cfg(p, 2);
            assert_eq!(
                execute_trace(&trace, &two, &benchmark_manifest(&two))
                    .unwrap()
                    .slot_misses,
                2
            );
        }
    }

    #[test]
    fn unknown_funct7_is_a_trace_error() {
        let c = SystemConfig::default();
        let mut trace = make_benchmark_trace(BenchmarkKind::Popcount, 2, &c);
        trace.calls[1].funct7 = 99;
        assert_eq!(
            execute_trace(&trace, &c, &benchmark_manifest(&c))
                .unwrap_err()
                .kind(),
            "trace"
        );
    }

    #[test]
    fn bandwidth_numbers() {
        let r = bandwidth_report(&cfg(16, 2));
        assert_eq!(r.bits_per_cycle, 2048);
        assert!((r.bandwidth_gbs - 38.4).abs() < 1e-9);
        assert_eq!(format!("{:.1}", r.speedup_vs_reference), "27.4");
        assert_eq!(r.icap_cycles, 2048);
        assert_eq!(r.load_cycles, 32);
    }

    #[test]
    fn config_json() {
        let c = SystemConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(SystemConfig::from_json(&text).unwrap(), c);
        assert_eq!(SystemConfig::from_json(r#"{"slots": 1}"#).unwrap().slots, 1);
        assert!(SystemConfig::from_json(r#"{"slotz": 1}"#).is_err());
        assert!(SystemConfig::from_json(r#"{"slots": 0}"#).is_err());
        let mut overlap = c;
        overlap.memory.program_bytes = 0x20_0000;
        assert!(overlap.validate().is_err());
    }

    #[test]
    fn sweep_keeps_order() {
        let rows = sweep(
            BenchmarkKind::Interleaved,
            10,
            &SystemConfig::default(),
            &[1, 2, 4, 8, 16],
            &[1, 2],
        )
        .unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!((rows[3].config_parallelism, rows[3].slots), (2, 2));
        assert_eq!(rows[8].stats.reconfig_cycles_per_miss(), Some(32));
    }
}
