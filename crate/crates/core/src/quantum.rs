//! Quantum NOF protocols: the referee prepares one blackboard per quantum player holding
//! a purified mixture of forehead views, the player writes its answer coherently, the
//! referee erases the views and measures what is left.
//!
//! Blackboard registers are named `A` (seat index, the purifying workspace), `B` (the view
//! encoding from [`ForeheadView::to_bits`]) and `C` (the answer, absent when empty).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::classical::{AnswerMap, NofProtocol, SimultaneousProtocol};
use crate::compiler::{decode_pair, PairDecoder};
use crate::error::{NofError, Result};
use crate::matrix::{seat_bits, ForeheadView, InputMatrix};
use crate::qstate::{plus_minus_basis, DensityMatrix, Povm, RegisterLayout, StateVector};
use crate::scalar::{dyadic_from_f64, format_rational, parse_rational, rational_to_real, Rational, Real};

/// Trace distance below which a prepared input counts as the declared mixture.
pub const LEGALITY_TOLERANCE: f64 = 1e-9;
/// Largest number of joint board outcomes [`QuantumNofProtocol::run_quantum`] enumerates.
pub const OUTCOME_CAP: usize = 1 << 22;

pub type QuantumAnswerFn = Arc<dyn Fn(&ForeheadView, &BitString) -> BitString + Send + Sync>;
pub type PhaseFn = Arc<dyn Fn(&ForeheadView, &BitString) -> bool + Send + Sync>;
pub type CombinerFn = Arc<dyn Fn(&BitString, &[BitString]) -> bool + Send + Sync>;

/// One seat's classical answer map inside a slotted answer register.
#[derive(Clone, Debug)]
pub struct Slot {
    pub seat: usize,
    pub map: AnswerMap,
}

/// What a quantum player does to its blackboard.
#[derive(Clone)]
pub enum AnswerAction {
    /// The answer register is the concatenation of the slots; a branch holding seat `s`
    /// writes that seat's answer into slot `s` and leaves the others zero.
    Slots(Vec<Slot>),
    /// Arbitrary answer of fixed width, may read the preamble.
    Write { width: usize, map: QuantumAnswerFn },
    /// `(-1)^bit` on the branch; the one-qubit answer register stays `|0>`.
    Phase(PhaseFn),
}

impl AnswerAction {
    pub fn width(&self) -> usize {
        match self {
            AnswerAction::Slots(slots) => slots.iter().map(|s| s.map.width()).sum(),
            AnswerAction::Write { width, .. } => *width,
            AnswerAction::Phase(_) => 1,
        }
    }
}

impl fmt::Debug for AnswerAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerAction::Slots(slots) => f.debug_tuple("Slots").field(slots).finish(),
            AnswerAction::Write { width, .. } => write!(f, "Write {{ width: {width} }}"),
            AnswerAction::Phase(_) => write!(f, "Phase"),
        }
    }
}

/// How the referee measures one erased blackboard.
#[derive(Clone, Debug)]
pub enum BoardMeasurement<T: Real> {
    /// Computational basis on the answer register; outcome is the answer.
    Computational,
    /// `(|lo> +- |hi>)/sqrt2` on the seat register; outcome `0` for plus, `1` for minus.
    PlusMinus { lo: usize, hi: usize },
    /// Single-copy pair decoder; outcome is the guessed bit.
    PairDecoder(PairDecoder),
    /// A POVM on `A` and `C`; outcome is the element index.
    Povm(Povm<T>),
}

/// How board outcomes become the output bit.
#[derive(Clone)]
pub enum Combiner {
    /// Parity of every outcome bit, optionally complemented.
    Xor { negate: bool },
    /// Truth table indexed by the concatenated outcomes.
    Table(Vec<bool>),
    Function(CombinerFn),
}

impl Combiner {
    pub fn decide(&self, preamble: &BitString, outcomes: &[BitString]) -> Result<bool> {
        match self {
            Combiner::Xor { negate } => Ok(outcomes.iter().fold(*negate, |acc, o| acc ^ o.parity())),
            Combiner::Table(table) => {
                let joined = BitString::concat(outcomes);
                if joined.len() > 63 || table.len() != 1usize << joined.len() {
                    return Err(NofError::Referee(format!(
                        "table of {} entries for {} outcome bits",
                        table.len(),
                        joined.len()
                    )));
                }
                Ok(table[joined.to_u64() as usize])
            }
            Combiner::Function(f) => Ok(f(preamble, outcomes)),
        }
    }
}

impl fmt::Debug for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Combiner::Xor { negate } => write!(f, "Xor {{ negate: {negate} }}"),
            Combiner::Table(t) => write!(f, "Table({} entries)", t.len()),
            Combiner::Function(_) => write!(f, "Function"),
        }
    }
}

/// A classical first message that every quantum player may read.
#[derive(Clone, Debug)]
pub struct Preamble {
    pub speaker: usize,
    pub message: AnswerMap,
}

#[derive(Clone, Debug)]
pub struct QuantumPlayer<T: Real> {
    distribution: Vec<(usize, Rational)>,
    action: AnswerAction,
    measurement: BoardMeasurement<T>,
}

impl<T: Real> QuantumPlayer<T> {
    pub fn new(distribution: Vec<(usize, Rational)>, action: AnswerAction, measurement: BoardMeasurement<T>) -> Self {
        Self { distribution, action, measurement }
    }

    pub fn distribution(&self) -> &[(usize, Rational)] {
        &self.distribution
    }

    pub fn action(&self) -> &AnswerAction {
        &self.action
    }

    pub fn measurement(&self) -> &BoardMeasurement<T> {
        &self.measurement
    }
}

/// Qubit and bit counts. `answer_qubits` is the communication cost; the seat registers are
/// reported separately so either accounting convention can be read off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QCostReport {
    pub answer_qubits: usize,
    pub workspace_qubits: usize,
    pub classical_bits: usize,
    /// Length of the classical transcript being simulated: the preamble plus one answer
    /// per seat in every player's support.
    pub message_units: usize,
}

impl QCostReport {
    /// Answer qubits plus classical bits.
    pub fn total(&self) -> usize {
        self.answer_qubits + self.classical_bits
    }

    /// [`QCostReport::total`] plus the seat registers.
    pub fn total_with_workspace(&self) -> usize {
        self.total() + self.workspace_qubits
    }
}

/// Exact or approximate probabilities of the two output values.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputDistribution<P> {
    pub zero: P,
    pub one: P,
}

impl<P: Clone> OutputDistribution<P> {
    pub fn probability(&self, bit: bool) -> P {
        if bit { self.one.clone() } else { self.zero.clone() }
    }
}

#[derive(Clone, Debug)]
pub struct LegalityWitness {
    pub player: usize,
    pub input: InputMatrix,
    pub trace_distance: f64,
}

#[derive(Clone, Debug)]
pub struct LegalityReport {
    pub checked: usize,
    pub witness: Option<LegalityWitness>,
}

impl LegalityReport {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }
}

/// A simultaneous quantum protocol, optionally preceded by one classical message.
#[derive(Clone, Debug)]
pub struct QuantumNofProtocol<T: Real = f64> {
    k: usize,
    n: usize,
    players: Vec<QuantumPlayer<T>>,
    preamble: Option<Preamble>,
    combiner: Combiner,
}

impl<T: Real> QuantumNofProtocol<T> {
    pub fn new(
        k: usize,
        n: usize,
        players: Vec<QuantumPlayer<T>>,
        preamble: Option<Preamble>,
        combiner: Combiner,
    ) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(NofError::Shape(format!("need k >= 1 and n >= 1, got k={k}, n={n}")));
        }
        for (i, p) in players.iter().enumerate() {
            validate_distribution(k, &p.distribution).map_err(|e| match e {
                NofError::InvalidDistribution(msg) => NofError::InvalidDistribution(format!("player {}: {msg}", i + 1)),
                other => other,
            })?;
            if let AnswerAction::Slots(slots) = &p.action {
                if let Some(s) = slots.iter().find(|s| s.seat >= k) {
                    return Err(NofError::PlayerOutOfRange { index: s.seat, players: k });
                }
                for (seat, _) in &p.distribution {
                    if !slots.iter().any(|s| s.seat == *seat) {
                        return Err(NofError::Shape(format!("player {} has no slot for seat {seat}", i + 1)));
                    }
                }
            }
            let seat_space = 1usize << seat_bits(k);
            match &p.measurement {
                BoardMeasurement::PlusMinus { lo, hi } if lo == hi || *lo >= seat_space || *hi >= seat_space => {
                    return Err(NofError::Referee(format!("player {}: bad +/- pair ({lo}, {hi})", i + 1)));
                }
                BoardMeasurement::PairDecoder(d) => {
                    if d.lo == d.hi || d.lo >= k || d.hi >= k {
                        return Err(NofError::Referee(format!("player {}: bad decoder seats", i + 1)));
                    }
                    if d.lo_width + d.hi_width != p.action.width() {
                        return Err(NofError::Referee(format!(
                            "player {}: decoder expects {} answer qubits, register has {}",
                            i + 1,
                            d.lo_width + d.hi_width,
                            p.action.width()
                        )));
                    }
                }
                _ => {}
            }
        }
        if let Some(pre) = &preamble {
            if pre.speaker >= k {
                return Err(NofError::PlayerOutOfRange { index: pre.speaker, players: k });
            }
        }
        Ok(Self { k, n, players, preamble, combiner })
    }

    pub fn players(&self) -> usize {
        self.k
    }

    pub fn input_width(&self) -> usize {
        self.n
    }

    pub fn quantum_players(&self) -> &[QuantumPlayer<T>] {
        &self.players
    }

    pub fn preamble(&self) -> Option<&Preamble> {
        self.preamble.as_ref()
    }

    pub fn combiner(&self) -> &Combiner {
        &self.combiner
    }

    pub fn qcost(&self) -> QCostReport {
        let classical_bits = self.preamble.as_ref().map_or(0, |p| p.message.width());
        let simulated: usize = self
            .players
            .iter()
            .map(|p| match &p.action {
                AnswerAction::Slots(slots) => slots
                    .iter()
                    .filter(|s| p.distribution.iter().any(|(seat, q)| *seat == s.seat && !q.is_zero()))
                    .map(|s| s.map.width())
                    .sum(),
                action => action.width() * p.distribution.iter().filter(|(_, q)| !q.is_zero()).count(),
            })
            .sum();
        QCostReport {
            answer_qubits: self.players.iter().map(|p| p.action.width()).sum(),
            workspace_qubits: self.players.len() * seat_bits(self.k),
            classical_bits,
            message_units: classical_bits + simulated,
        }
    }

    /// Dyadic resolution at which every board probability is exact, when one is known:
    /// each distribution is a point or an even pair and no board uses a general POVM.
    pub fn exact_resolution(&self) -> Option<u32> {
        let half = Rational::new(1.into(), 2.into());
        let mut bits = 0;
        for p in &self.players {
            let support: Vec<&Rational> = p.distribution.iter().map(|(_, q)| q).filter(|q| !q.is_zero()).collect();
            let even = support.len() == 1 || (support.len() == 2 && support.iter().all(|q| **q == half));
            if !even {
                return None;
            }
            bits = bits.max(match &p.measurement {
                BoardMeasurement::Povm(_) => return None,
                BoardMeasurement::PairDecoder(d) => d.t() as u32 + 1,
                _ => 1,
            });
        }
        Some(bits)
    }

    fn check_shape(&self, m: &InputMatrix) -> Result<()> {
        if m.players() != self.k {
            return Err(NofError::PlayerCountMismatch { expected: self.k, actual: m.players() });
        }
        if m.width() != self.n {
            return Err(NofError::RowWidthMismatch { expected: self.n, actual: m.width() });
        }
        Ok(())
    }

    fn player(&self, i: usize) -> Result<&QuantumPlayer<T>> {
        self.players.get(i).ok_or(NofError::PlayerOutOfRange { index: i, players: self.players.len() })
    }

    /// Registers of player `i`'s blackboard.
    pub fn layout(&self, i: usize) -> Result<RegisterLayout> {
        let width = self.player(i)?.action.width();
        let mut spec = vec![("A", seat_bits(self.k)), ("B", ForeheadView::encoded_width(self.k, self.n))];
        if width > 0 {
            spec.push(("C", width));
        }
        RegisterLayout::new(&spec)
    }

    /// The classical first message on input `m` (empty without a preamble).
    pub fn preamble_message(&self, m: &InputMatrix) -> Result<BitString> {
        self.check_shape(m)?;
        match &self.preamble {
            None => Ok(BitString::new()),
            Some(p) => p.message.apply(p.speaker, &m.forehead_view(p.speaker)?),
        }
    }

    /// `sum_j sqrt(p_j) |j>_A |P_j(M)>_B |0>_C`.
    pub fn prepare_input(&self, i: usize, m: &InputMatrix) -> Result<StateVector<T>> {
        self.check_shape(m)?;
        let player = self.player(i)?;
        let layout = self.layout(i)?;
        let amps = player
            .distribution
            .iter()
            .filter(|(_, p)| !p.is_zero())
            .map(|(seat, p)| {
                let view = m.forehead_view(*seat)?.to_bits();
                let label = layout.label_bits(&[("A", &BitString::from_u64(*seat as u64, seat_bits(self.k))), ("B", &view)])?;
                Ok((label, Complex::new(rational_to_real::<T>(p).sqrt(), T::zero())))
            })
            .collect::<Result<Vec<_>>>()?;
        StateVector::from_amplitudes(layout, amps)
    }

    /// Apply player `i`'s answer action, controlled on the view register only.
    pub fn player_step(&self, i: usize, state: &StateVector<T>, preamble: &BitString) -> Result<StateVector<T>> {
        let player = self.player(i)?;
        let layout = state.layout().clone();
        let b = layout.register("B")?.clone();
        let c = layout.register("C").ok().cloned();
        let (k, n) = (self.k, self.n);
        state.apply_basis_map(|label| {
            let view = ForeheadView::from_bits(k, n, &label.get_bits(&b))?;
            if let Some(c) = &c {
                if !label.is_zero_in(c) {
                    return Err(NofError::AnswerRegisterNotClear);
                }
            }
            let mut out = label.clone();
            let answer = match &player.action {
                AnswerAction::Phase(f) => {
                    let sign = if f(&view, preamble) { -T::one() } else { T::one() };
                    return Ok((out, Complex::new(sign, T::zero())));
                }
                AnswerAction::Write { width, map } => {
                    let a = map(&view, preamble);
                    if a.len() != *width {
                        return Err(NofError::AnswerWidth { player: i, declared: *width, actual: a.len() });
                    }
                    a
                }
                AnswerAction::Slots(slots) => {
                    let seat = view.owner();
                    let mut parts = Vec::with_capacity(slots.len());
                    let mut found = false;
                    for s in slots {
                        if s.seat == seat && !found {
                            parts.push(s.map.apply(seat, &view)?);
                            found = true;
                        } else {
                            parts.push(BitString::zeros(s.map.width()));
                        }
                    }
                    if !found {
                        return Err(NofError::Shape(format!("player {} has no slot for seat {seat}", i + 1)));
                    }
                    BitString::concat(&parts)
                }
            };
            if let Some(c) = &c {
                out.set_bits(c, &answer);
            }
            Ok((out, Complex::one()))
        })
    }

    /// Undo the input preparation: `|j>|P_j(M)> -> |j>|0>`, then drop `B`.
    pub fn erase_inputs(&self, i: usize, state: &StateVector<T>, m: &InputMatrix) -> Result<StateVector<T>> {
        self.check_shape(m)?;
        self.player(i)?;
        let layout = state.layout().clone();
        let a = layout.register("A")?.clone();
        let b = layout.register("B")?.clone();
        let erased = state.apply_basis_map(|label| {
            let seat = label.get(&a) as usize;
            if seat >= self.k {
                return Err(NofError::InconsistentErasure { seat });
            }
            if label.get_bits(&b) != m.forehead_view(seat)?.to_bits() {
                return Err(NofError::InconsistentErasure { seat });
            }
            let mut out = label.clone();
            out.set_bits(&b, &BitString::zeros(b.width));
            Ok((out, Complex::one()))
        })?;
        erased.drop_register("B")
    }

    /// Outcome distribution of player `i`'s erased blackboard.
    pub fn measure_board(&self, i: usize, state: &StateVector<T>) -> Result<Vec<(BitString, T)>> {
        let player = self.player(i)?;
        let tiny = T::TOLERANCE * T::TOLERANCE;
        let mut out = match &player.measurement {
            BoardMeasurement::Computational => {
                if state.layout().contains("C") {
                    state.register_distribution("C")?
                } else {
                    vec![(BitString::new(), T::one())]
                }
            }
            BoardMeasurement::PlusMinus { lo, hi } => {
                let dim = 1usize << seat_bits(self.k);
                let family = plus_minus_basis::<T>(dim, *lo, *hi)?;
                let outcomes = state.measure_projective(&["A"], &family)?;
                if let Some(stray) = outcomes.iter().skip(2).find(|o| o.probability > T::TOLERANCE) {
                    return Err(NofError::Referee(format!(
                        "+/- measurement left the pair subspace (outcome {})",
                        stray.index
                    )));
                }
                vec![
                    (BitString::from_u64(0, 1), outcomes[0].probability),
                    (BitString::from_u64(1, 1), outcomes[1].probability),
                ]
            }
            BoardMeasurement::PairDecoder(d) => {
                let [p0, p1] = decode_pair(state, d)?;
                vec![(BitString::from_u64(0, 1), p0), (BitString::from_u64(1, 1), p1)]
            }
            BoardMeasurement::Povm(povm) => {
                let probs = state.apply_povm(povm)?;
                let width = seat_bits(probs.len());
                probs.into_iter().enumerate().map(|(j, p)| (BitString::from_u64(j as u64, width), p)).collect()
            }
        };
        out.retain(|(_, p)| *p > tiny);
        Ok(out)
    }

    /// Prepare, answer, erase and measure player `i`'s blackboard.
    pub fn board_outcomes(&self, i: usize, m: &InputMatrix, preamble: &BitString) -> Result<Vec<(BitString, T)>> {
        let s = self.prepare_input(i, m)?;
        let s = self.player_step(i, &s, preamble)?;
        let s = self.erase_inputs(i, &s, m)?;
        self.measure_board(i, &s)
    }

    /// Exact output distribution: every joint outcome of the independent boards is
    /// enumerated and combined.
    pub fn run_quantum(&self, m: &InputMatrix) -> Result<OutputDistribution<T>> {
        let preamble = self.preamble_message(m)?;
        let boards = (0..self.players.len())
            .map(|i| self.board_outcomes(i, m, &preamble))
            .collect::<Result<Vec<_>>>()?;
        self.combine(&preamble, &boards, T::one(), |acc, p| acc * *p)
    }

    /// Like [`QuantumNofProtocol::run_quantum`], with every board probability snapped to a
    /// multiple of `2^-bits` and the combination done in exact arithmetic.
    pub fn run_quantum_exact(&self, m: &InputMatrix, bits: u32) -> Result<OutputDistribution<Rational>> {
        let preamble = self.preamble_message(m)?;
        let boards = (0..self.players.len())
            .map(|i| {
                self.board_outcomes(i, m, &preamble)?
                    .into_iter()
                    .map(|(o, p)| Ok((o, dyadic_from_f64(p.to_f64().unwrap_or(f64::NAN), bits)?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        self.combine(&preamble, &boards, Rational::one(), |acc, p| acc * p)
    }

    fn combine<P: Clone + Zero + std::ops::Add<Output = P>>(
        &self,
        preamble: &BitString,
        boards: &[Vec<(BitString, P)>],
        one: P,
        mul: impl Fn(P, &P) -> P,
    ) -> Result<OutputDistribution<P>> {
        let total = boards.iter().try_fold(1usize, |acc, b| acc.checked_mul(b.len()).filter(|&x| x <= OUTCOME_CAP));
        if total.is_none() {
            return Err(NofError::DimensionCap { width: usize::MAX, cap: OUTCOME_CAP });
        }
        let mut dist = OutputDistribution { zero: P::zero(), one: P::zero() };
        if boards.iter().any(Vec::is_empty) {
            return Ok(dist);
        }
        let mut digits = vec![0usize; boards.len()];
        loop {
            let outcomes: Vec<BitString> = digits.iter().zip(boards).map(|(&d, b)| b[d].0.clone()).collect();
            let p = digits.iter().zip(boards).fold(one.clone(), |acc, (&d, b)| mul(acc, &b[d].1));
            if self.combiner.decide(preamble, &outcomes)? {
                dist.one = dist.one + p;
            } else {
                dist.zero = dist.zero + p;
            }
            let mut pos = 0;
            loop {
                if pos == digits.len() {
                    return Ok(dist);
                }
                digits[pos] += 1;
                if digits[pos] < boards[pos].len() {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
        }
    }

    /// Every player's prepared input, reduced to its view register, must equal the declared
    /// classical mixture of views on each sampled input.
    pub fn validate_legality(&self, samples: &[InputMatrix]) -> Result<LegalityReport> {
        let mut checked = 0;
        for m in samples {
            for i in 0..self.players.len() {
                let witness = self.check_input_state(i, m, &self.prepare_input(i, m)?)?;
                checked += 1;
                if witness.is_some() {
                    return Ok(LegalityReport { checked, witness });
                }
            }
        }
        Ok(LegalityReport { checked, witness: None })
    }

    /// Embed a classical simultaneous protocol: player `i` always receives view `i`.
    /// Compare an arbitrary state on player `i`'s board against the declared mixture of
    /// views for input `m`. `Some` when they differ beyond the tolerance.
    pub fn check_input_state(&self, i: usize, m: &InputMatrix, state: &StateVector<T>) -> Result<Option<LegalityWitness>> {
        let player = self.players.get(i).ok_or(NofError::PlayerOutOfRange { index: i, players: self.players.len() })?;
        let expected = player
            .distribution
            .iter()
            .map(|(seat, p)| Ok((p.clone(), m.forehead_view(*seat)?)))
            .collect::<Result<Vec<_>>>()?;
        let distance = input_distance(state, &expected)?;
        Ok((distance > LEGALITY_TOLERANCE).then(|| LegalityWitness { player: i, input: m.clone(), trace_distance: distance }))
    }

    pub fn from_classical_point(proto: &SimultaneousProtocol) -> Result<Self> {
        let k = proto.answer_maps().len();
        let players = proto
            .answer_maps()
            .iter()
            .enumerate()
            .map(|(i, map)| {
                QuantumPlayer::new(
                    vec![(i, Rational::one())],
                    AnswerAction::Slots(vec![Slot { seat: i, map: map.clone() }]),
                    BoardMeasurement::Computational,
                )
            })
            .collect();
        let cost = proto.widths().iter().sum();
        let table = proto.referee().truth_table(cost)?;
        Self::new(k, proto.input_width(), players, None, Combiner::Table(table))
    }
}

fn validate_distribution(k: usize, dist: &[(usize, Rational)]) -> Result<()> {
    if dist.is_empty() {
        return Err(NofError::InvalidDistribution("empty distribution".into()));
    }
    let mut total = Rational::zero();
    for (idx, (seat, p)) in dist.iter().enumerate() {
        if *seat >= k {
            return Err(NofError::InvalidDistribution(format!("seat {seat} out of range for k = {k}")));
        }
        if dist[..idx].iter().any(|(s, _)| s == seat) {
            return Err(NofError::InvalidDistribution(format!("seat {seat} listed twice")));
        }
        if p < &Rational::zero() {
            return Err(NofError::InvalidDistribution(format!("negative weight {}", format_rational(p))));
        }
        total += p;
    }
    if total != Rational::one() {
        return Err(NofError::InvalidDistribution(format!("weights sum to {}", format_rational(&total))));
    }
    Ok(())
}

/// Trace distance between the view register of `state` and `sum_j p_j |P_j><P_j|`.
pub fn input_distance<T: Real>(state: &StateVector<T>, expected: &[(Rational, ForeheadView)]) -> Result<f64> {
    let reduced = state.partial_trace(&["B"])?;
    let layout = reduced.layout().clone();
    let mixture = expected
        .iter()
        .map(|(p, view)| Ok((rational_to_real::<T>(p), layout.label_bits(&[("B", &view.to_bits())])?)))
        .collect::<Result<Vec<_>>>()?;
    reduced.trace_distance(&DensityMatrix::classical_mixture(layout, &mixture))
}

/// `sum_j |P_j(M)>` over `seats`, normalized, with no seat register to purify it.
pub fn unpurified_input<T: Real>(m: &InputMatrix, seats: &[usize]) -> Result<StateVector<T>> {
    let layout = RegisterLayout::new(&[("B", ForeheadView::encoded_width(m.players(), m.width()))])?;
    let amps = seats
        .iter()
        .map(|&s| Ok((layout.label_bits(&[("B", &m.forehead_view(s)?.to_bits())])?, Complex::one())))
        .collect::<Result<Vec<_>>>()?;
    StateVector::normalized(layout, amps)
}

/// JSON description of a slotted quantum protocol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantumSpec {
    pub k: usize,
    pub n: usize,
    pub players: Vec<QuantumPlayerSpec>,
    pub combiner: CombinerSpec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantumPlayerSpec {
    pub distribution: Vec<DistributionEntry>,
    pub slots: Vec<SlotSpec>,
    pub measurement: MeasurementSpec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionEntry {
    pub seat: usize,
    /// Reduced fraction, e.g. `"1/2"`.
    pub probability: String,
}

/// Table keyed by [`ForeheadView::index`] of the seat's view.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub seat: usize,
    pub width: usize,
    pub table: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasurementSpec {
    Computational,
    PlusMinus { lo: usize, hi: usize },
    PairDecoder { lo: usize, hi: usize, lo_width: usize, hi_width: usize, lo_subset: u64, hi_subset: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CombinerSpec {
    Xor { negate: bool },
    /// Bit string indexed by the concatenated board outcomes.
    Table { table: String },
}

impl QuantumSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| NofError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

impl QuantumNofProtocol<f64> {
    /// Serializable form; only slotted answers, the built-in measurements and table or
    /// parity combiners without a preamble can be written.
    pub fn to_spec(&self) -> Result<QuantumSpec> {
        if self.preamble.is_some() {
            return Err(NofError::Shape("protocols with a preamble have no spec form".into()));
        }
        let players = self
            .players
            .iter()
            .map(|p| {
                let AnswerAction::Slots(slots) = &p.action else {
                    return Err(NofError::Shape("only slotted answers have a spec form".into()));
                };
                let measurement = match &p.measurement {
                    BoardMeasurement::Computational => MeasurementSpec::Computational,
                    BoardMeasurement::PlusMinus { lo, hi } => MeasurementSpec::PlusMinus { lo: *lo, hi: *hi },
                    BoardMeasurement::PairDecoder(d) => MeasurementSpec::PairDecoder {
                        lo: d.lo,
                        hi: d.hi,
                        lo_width: d.lo_width,
                        hi_width: d.hi_width,
                        lo_subset: d.lo_subset,
                        hi_subset: d.hi_subset,
                    },
                    BoardMeasurement::Povm(_) => return Err(NofError::Shape("POVM boards have no spec form".into())),
                };
                let slots = slots
                    .iter()
                    .map(|s| {
                        Ok(SlotSpec {
                            seat: s.seat,
                            width: s.map.width(),
                            table: s.map.tabulate(s.seat, self.k, self.n)?.iter().map(|b| b.to_string()).collect(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let distribution = p
                    .distribution
                    .iter()
                    .map(|(seat, q)| DistributionEntry { seat: *seat, probability: format_rational(q) })
                    .collect();
                Ok(QuantumPlayerSpec { distribution, slots, measurement })
            })
            .collect::<Result<Vec<_>>>()?;
        let combiner = match &self.combiner {
            Combiner::Xor { negate } => CombinerSpec::Xor { negate: *negate },
            Combiner::Table(t) => CombinerSpec::Table { table: t.iter().map(|&b| if b { '1' } else { '0' }).collect() },
            Combiner::Function(_) => return Err(NofError::Shape("closure combiners have no spec form".into())),
        };
        Ok(QuantumSpec { k: self.k, n: self.n, players, combiner })
    }

    pub fn from_spec(spec: &QuantumSpec) -> Result<Self> {
        let players = spec
            .players
            .iter()
            .map(|p| {
                let distribution = p
                    .distribution
                    .iter()
                    .map(|e| Ok((e.seat, parse_rational(&e.probability)?)))
                    .collect::<Result<Vec<_>>>()?;
                let slots = p
                    .slots
                    .iter()
                    .map(|s| {
                        let table = s
                            .table
                            .iter()
                            .map(|t| t.parse::<BitString>())
                            .collect::<Result<Vec<_>>>()
                            .map_err(|e| NofError::Parse(e.to_string()))?;
                        let expected = 1usize << ((spec.k - 1) * spec.n);
                        if table.len() != expected {
                            return Err(NofError::Parse(format!(
                                "slot for seat {} has {} entries, expected {expected}",
                                s.seat,
                                table.len()
                            )));
                        }
                        Ok(Slot { seat: s.seat, map: AnswerMap::from_table(s.width, table).map_err(|e| NofError::Parse(e.to_string()))? })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let measurement = match &p.measurement {
                    MeasurementSpec::Computational => BoardMeasurement::Computational,
                    MeasurementSpec::PlusMinus { lo, hi } => BoardMeasurement::PlusMinus { lo: *lo, hi: *hi },
                    MeasurementSpec::PairDecoder { lo, hi, lo_width, hi_width, lo_subset, hi_subset } => {
                        BoardMeasurement::PairDecoder(PairDecoder::new(*lo, *hi, *lo_width, *hi_width, *lo_subset, *hi_subset)?)
                    }
                };
                Ok(QuantumPlayer::new(distribution, AnswerAction::Slots(slots), measurement))
            })
            .collect::<Result<Vec<_>>>()?;
        let combiner = match &spec.combiner {
            CombinerSpec::Xor { negate } => Combiner::Xor { negate: *negate },
            CombinerSpec::Table { table } => Combiner::Table(
                table
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(NofError::Parse(format!("bad combiner character `{other}`"))),
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Self::new(spec.k, spec.n, players, None, combiner)
    }
}
