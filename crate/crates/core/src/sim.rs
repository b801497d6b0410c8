//! Cycle-level fabric simulation: combinational and pipelined evaluation,
//! and word-by-word bitstream loading through bypass cells.

use thiserror::Error;

use crate::bitgen::{word_target, Bitstream, WORDS_PER_COLUMN};
use crate::fabric::{
    build_topology, CellConfig, FabricConfig, FabricError, FabricParams, LanePermutation,
    WiringTopology,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("fabric parameter mismatch: state is {state}, input is {input}")]
    ParamMismatch { state: String, input: String },
    #[error("cycle {cycle}: word {word} reached programmed column {column} before its target")]
    UnsafeShift {
        cycle: usize,
        word: usize,
        column: usize,
    },
    #[error("load finished with column {column} incompletely programmed")]
    Incomplete { column: usize },
    #[error(transparent)]
    Fabric(#[from] FabricError),
}

impl SimError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::ParamMismatch { .. } => "parameter",
            Self::UnsafeShift { .. } | Self::Incomplete { .. } => "load",
            Self::Fabric(_) => "parameter",
        }
    }
}

/// One instruction's operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Operands {
    pub rs1: u64,
    pub rs2: u64,
    pub funct3: u8,
}

impl Operands {
    pub fn new(rs1: u64, rs2: u64, funct3: u8) -> Self {
        Self { rs1, rs2, funct3 }
    }
}

/// A word latched into a cell during loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatchEvent {
    pub word: usize,
    pub segment: usize,
    pub column: usize,
    pub slot: usize,
    pub nibbles: Vec<u8>,
}

/// Everything that happened in one load cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadCycle {
    pub cycle: usize,
    /// Words moving through bypass cells after the shift.
    pub in_flight: usize,
    pub latched: Vec<LatchEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadReport {
    pub cycles: usize,
    pub words: usize,
    pub word_bits: usize,
    /// FNV-1a over every latch event, in order.
    pub trace_hash: u64,
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x100_0000_01b3);
        }
    }
}

/// Live fabric: configuration plus pipeline registers.
#[derive(Debug, Clone)]
pub struct FabricState {
    params: FabricParams,
    topology: WiringTopology,
    config: FabricConfig,
    /// Inclusive column ranges of the pipeline stages.
    stages: Vec<(usize, usize)>,
    /// Output nibbles of each stage's last column; `None` is a bubble.
    regs: Vec<Option<Vec<u8>>>,
    cycle: u64,
}

impl FabricState {
    /// A fabric in its reset state (every cell in bypass).
    pub fn new(params: FabricParams) -> Result<Self, SimError> {
        let topology = build_topology(params)?;
        let mut stages = Vec::new();
        let mut start = 0;
        for c in 0..params.depth {
            if params.is_stage_boundary(c) {
                stages.push((start, c));
                start = c + 1;
            }
        }
        Ok(Self {
            params,
            topology,
            config: FabricConfig::new(params),
            regs: vec![None; stages.len()],
            stages,
            cycle: 0,
        })
    }

    pub fn with_config(config: &FabricConfig) -> Result<Self, SimError> {
        let mut state = Self::new(*config.params())?;
        state.configure_direct(config)?;
        Ok(state)
    }

    pub fn params(&self) -> &FabricParams {
        &self.params
    }

    pub fn topology(&self) -> &WiringTopology {
        &self.topology
    }

    pub fn config(&self) -> &FabricConfig {
        &self.config
    }

    /// Pipelined clock cycles run so far.
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    fn check_grid(&self, other: &FabricParams) -> Result<(), SimError> {
        if other.width != self.params.width || other.depth != self.params.depth {
            return Err(SimError::ParamMismatch {
                state: format!("{}x{}", self.params.width, self.params.depth),
                input: format!("{}x{}", other.width, other.depth),
            });
        }
        Ok(())
    }

    /// Writes a configuration without going through the load path.
    pub fn configure_direct(&mut self, config: &FabricConfig) -> Result<(), SimError> {
        self.check_grid(config.params())?;
        self.config = config.clone().with_params(self.params)?;
        self.flush();
        Ok(())
    }

    /// Returns every cell to bypass and clears the pipeline.
    pub fn reset_to_bypass(&mut self) {
        self.config = FabricConfig::new(self.params);
        self.flush();
    }

    /// Empties the pipeline registers.
    pub fn flush(&mut self) {
        self.regs.iter_mut().for_each(|r| *r = None);
    }

    fn column_outputs(&self, column: usize, inputs: &[u8], outputs: &mut [u8]) {
        for ((o, i), cell) in outputs
            .iter_mut()
            .zip(inputs)
            .zip(self.config.column(column))
        {
            *o = cell.eval(*i);
        }
    }

    /// Runs columns `first..=last` given the inputs of `first`.
    fn run_columns(&self, first: usize, last: usize, mut inputs: Vec<u8>) -> Vec<u8> {
        let mut outputs = vec![0u8; self.params.width];
        for c in first..=last {
            self.column_outputs(c, &inputs, &mut outputs);
            if c < last {
                self.topology.propagate(c, &outputs, &mut inputs);
            }
        }
        outputs
    }

    fn external_inputs(&self, ops: Operands) -> Vec<u8> {
        (0..self.params.width)
            .map(|r| {
                self.topology
                    .external_nibble(r, ops.rs1, ops.rs2, ops.funct3)
            })
            .collect()
    }

    fn result(outputs: &[u8]) -> u64 {
        outputs
            .iter()
            .enumerate()
            .fold(0u64, |acc, (r, o)| acc | (u64::from(o & 1) << r))
    }

    /// Settled result of the whole fabric, ignoring pipeline registers.
    pub fn eval_combinational(&self, ops: Operands) -> u64 {
        let out = self.run_columns(0, self.params.depth - 1, self.external_inputs(ops));
        Self::result(&out)
    }

    /// One clock edge. Returns the output register as seen before the
    /// edge, then latches every stage.
    pub fn step_pipelined(&mut self, input: Option<Operands>) -> Option<u64> {
        let out = self
            .regs
            .last()
            .and_then(|r| r.as_deref().map(Self::result));
        for j in (0..self.stages.len()).rev() {
            let (first, last) = self.stages[j];
            let inputs = if j == 0 {
                input.map(|ops| self.external_inputs(ops))
            } else {
                self.regs[j - 1].as_ref().map(|prev| {
                    let mut next = vec![0u8; self.params.width];
                    self.topology.propagate(first - 1, prev, &mut next);
                    next
                })
            };
            self.regs[j] = inputs.map(|i| self.run_columns(first, last, i));
        }
        self.cycle += 1;
        out
    }

    /// Issues every operand back to back and drains the pipeline.
    pub fn run_pipelined(&mut self, inputs: &[Operands]) -> Vec<u64> {
        let mut results = Vec::with_capacity(inputs.len());
        let mut feed = inputs.iter().copied();
        while results.len() < inputs.len() {
            if let Some(r) = self.step_pipelined(feed.next()) {
                results.push(r);
            }
        }
        results
    }

    /// Shifts a bitstream in from the reset state, one word per cycle.
    pub fn load_bitstream(&mut self, bitstream: &Bitstream) -> Result<LoadReport, SimError> {
        self.load_bitstream_traced(bitstream, |_| {})
    }

    /// Like [`FabricState::load_bitstream`], reporting every cycle.
    pub fn load_bitstream_traced(
        &mut self,
        bitstream: &Bitstream,
        mut observe: impl FnMut(&LoadCycle),
    ) -> Result<LoadReport, SimError> {
        let bp = *bitstream.params();
        self.check_grid(&bp)?;
        if bp.config_parallelism != self.params.config_parallelism {
            return Err(SimError::ParamMismatch {
                state: format!("P={}", self.params.config_parallelism),
                input: format!("P={}", bp.config_parallelism),
            });
        }
        self.reset_to_bypass();

        let (w, cols) = (self.params.width, self.params.segment_columns());
        let segments = self.params.config_parallelism;
        let perms: Vec<LanePermutation> = (0..self.params.depth)
            .map(|c| self.topology.column_permutation(c))
            .collect();
        // Input register of every column: (word index, nibbles).
        let mut regs: Vec<Option<(usize, Vec<u8>)>> = vec![None; self.params.depth];
        let mut acc = vec![0u64; self.params.cells()];
        let mut filled = vec![0usize; self.params.depth];
        let mut hash = Fnv::new();
        let total = WORDS_PER_COLUMN * cols;

        for cycle in 0..total {
            for p in 0..segments {
                let start = p * cols;
                for c in (start + 1..start + cols).rev() {
                    if let Some((word, nibbles)) = regs[c - 1].take() {
                        if !self.config.cell(c - 1, 0).is_bypass() {
                            return Err(SimError::UnsafeShift {
                                cycle,
                                word,
                                column: c - 1,
                            });
                        }
                        debug_assert!(regs[c].is_none());
                        regs[c] = Some((word, perms[c - 1].apply(&nibbles)));
                    }
                }
                regs[start] = Some((cycle, bitstream.segment_word(cycle, p).to_vec()));
            }

            let mut event = LoadCycle {
                cycle,
                in_flight: 0,
                latched: Vec::new(),
            };
            for p in 0..segments {
                for c in p * cols..(p + 1) * cols {
                    let Some((word, _)) = regs[c] else { continue };
                    let target = word_target(&self.params, p, word);
                    if target.column != c {
                        event.in_flight += 1;
                        continue;
                    }
                    let (_, nibbles) = regs[c].take().expect("checked above");
                    for (r, nib) in nibbles.iter().enumerate() {
                        acc[c * w + r] |= u64::from(*nib) << (4 * target.slot);
                    }
                    filled[c] += 1;
                    if filled[c] == WORDS_PER_COLUMN {
                        for r in 0..w {
                            *self.config.cell_mut(c, r) = CellConfig::programmed(acc[c * w + r]);
                        }
                    }
                    hash.write(&(cycle as u64).to_le_bytes());
                    hash.write(&[p as u8, c as u8, target.slot as u8]);
                    hash.write(&nibbles);
                    event.latched.push(LatchEvent {
                        word,
                        segment: p,
                        column: c,
                        slot: target.slot,
                        nibbles,
                    });
                }
            }
            observe(&event);
        }

        if let Some(column) = filled.iter().position(|f| *f != WORDS_PER_COLUMN) {
            return Err(SimError::Incomplete { column });
        }
        Ok(LoadReport {
            cycles: total,
            words: bitstream.words().len(),
            word_bits: bitstream.word_bits(),
            trace_hash: hash.0,
        })
    }
}
