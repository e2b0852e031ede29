//! Classical Number-on-the-Forehead protocols in the referee formulation.
//!
//! The referee hands player `i` its forehead view, each player writes an answer of a
//! fixed width on its own blackboard, and the referee applies a fixed function to the
//! concatenated answers (player 0's answer first, first bit most significant).

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{NofError, Result};
use crate::fourier::ParityReferee;
use crate::matrix::{ForeheadView, InputMatrix, ENUMERATION_CAP};
use crate::scalar::Probability;

pub type AnswerFn = Arc<dyn Fn(&ForeheadView) -> BitString + Send + Sync>;
pub type DependentFn = Arc<dyn Fn(&ForeheadView, &BitString) -> BitString + Send + Sync>;
pub type RefereeFn = Arc<dyn Fn(&BitString) -> bool + Send + Sync>;

/// A player's answer function together with its declared output width.
#[derive(Clone)]
pub struct AnswerMap {
    width: usize,
    map: AnswerFn,
}

impl AnswerMap {
    pub fn new(width: usize, map: impl Fn(&ForeheadView) -> BitString + Send + Sync + 'static) -> Self {
        Self { width, map: Arc::new(map) }
    }

    pub fn constant(bits: BitString) -> Self {
        let width = bits.len();
        Self::new(width, move |_| bits.clone())
    }

    /// Truth table keyed by [`ForeheadView::index`].
    pub fn from_table(width: usize, table: Vec<BitString>) -> Result<Self> {
        if let Some(bad) = table.iter().find(|b| b.len() != width) {
            return Err(NofError::Parse(format!(
                "table entry `{bad}` has {} bits, expected {width}",
                bad.len()
            )));
        }
        let table = Arc::new(table);
        Ok(Self::new(width, move |view| table[view.index() as usize].clone()))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn apply(&self, player: usize, view: &ForeheadView) -> Result<BitString> {
        let out = (self.map)(view);
        if out.len() != self.width {
            return Err(NofError::AnswerWidth { player, declared: self.width, actual: out.len() });
        }
        Ok(out)
    }

    /// Evaluate on every possible view of `owner`, in view-index order.
    pub fn tabulate(&self, owner: usize, k: usize, n: usize) -> Result<Vec<BitString>> {
        let bits = (k - 1) * n;
        if bits > ENUMERATION_CAP {
            return Err(NofError::EnumerationCap { kn: bits, cap: ENUMERATION_CAP });
        }
        (0..1u64 << bits)
            .map(|idx| self.apply(owner, &ForeheadView::from_index(owner, k, n, idx)?))
            .collect()
    }
}

impl fmt::Debug for AnswerMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AnswerMap(width={})", self.width)
    }
}

/// The referee's final decision on the concatenated answers.
#[derive(Clone)]
pub enum Referee {
    /// Truth table of length `2^C`, indexed by the answers read as an integer.
    Table(Vec<bool>),
    Parity(ParityReferee),
    Function(RefereeFn),
}

impl Referee {
    pub fn function(f: impl Fn(&BitString) -> bool + Send + Sync + 'static) -> Self {
        Referee::Function(Arc::new(f))
    }

    pub fn decide(&self, answers: &BitString) -> bool {
        match self {
            Referee::Table(t) => t[answers.to_u64() as usize],
            Referee::Parity(p) => p.evaluate(answers),
            Referee::Function(f) => f(answers),
        }
    }

    /// The referee as a truth table over `{0,1}^cost`.
    pub fn truth_table(&self, cost: usize) -> Result<Vec<bool>> {
        if cost > ENUMERATION_CAP {
            return Err(NofError::EnumerationCap { kn: cost, cap: ENUMERATION_CAP });
        }
        if let Referee::Table(t) = self {
            return Ok(t.clone());
        }
        Ok((0..1u64 << cost).map(|a| self.decide(&BitString::from_u64(a, cost))).collect())
    }
}

impl fmt::Debug for Referee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Referee::Table(t) => write!(f, "Referee::Table(len={})", t.len()),
            Referee::Parity(p) => write!(f, "Referee::Parity({p:?})"),
            Referee::Function(_) => f.write_str("Referee::Function"),
        }
    }
}

/// Outcome of one protocol execution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub output: bool,
    /// Answer of each player, indexed by player.
    pub transcript: Vec<BitString>,
}

/// Common surface of the classical protocol shapes.
pub trait NofProtocol: Send + Sync {
    fn players(&self) -> usize;

    /// Row width `n` the protocol is defined for.
    fn input_width(&self) -> usize;

    /// Total number of answer bits written, independent of the input.
    fn cost(&self) -> usize;

    fn run(&self, m: &InputMatrix) -> Result<Run>;

    fn check_shape(&self, m: &InputMatrix) -> Result<()> {
        if m.players() != self.players() {
            return Err(NofError::PlayerCountMismatch {
                expected: self.players(),
                actual: m.players(),
            });
        }
        if m.width() != self.input_width() {
            return Err(NofError::RowWidthMismatch {
                expected: self.input_width(),
                actual: m.width(),
            });
        }
        Ok(())
    }
}

/// One round: every player answers from its view alone.
#[derive(Clone, Debug)]
pub struct SimultaneousProtocol {
    n: usize,
    answer_maps: Vec<AnswerMap>,
    referee: Referee,
}

impl SimultaneousProtocol {
    pub fn new(n: usize, answer_maps: Vec<AnswerMap>, referee: Referee) -> Result<Self> {
        if answer_maps.is_empty() || n == 0 {
            return Err(NofError::Shape("protocol needs at least one player and n >= 1".into()));
        }
        let cost: usize = answer_maps.iter().map(AnswerMap::width).sum();
        if let Referee::Table(t) = &referee {
            if cost >= 64 || t.len() != 1usize << cost {
                return Err(NofError::Referee(format!(
                    "truth table has {} entries, expected 2^{cost}",
                    t.len()
                )));
            }
        }
        if let Referee::Parity(p) = &referee {
            let widths: Vec<usize> = answer_maps.iter().map(AnswerMap::width).collect();
            if p.widths() != widths.as_slice() {
                return Err(NofError::Referee(format!(
                    "parity referee widths {:?} do not match answer widths {widths:?}",
                    p.widths()
                )));
            }
        }
        Ok(Self { n, answer_maps, referee })
    }

    pub fn answer_maps(&self) -> &[AnswerMap] {
        &self.answer_maps
    }

    pub fn referee(&self) -> &Referee {
        &self.referee
    }

    pub fn widths(&self) -> Vec<usize> {
        self.answer_maps.iter().map(AnswerMap::width).collect()
    }

    /// Same answer maps, different referee.
    pub fn with_referee(&self, referee: Referee) -> Result<Self> {
        Self::new(self.n, self.answer_maps.clone(), referee)
    }

    /// The answers only, without applying the referee.
    pub fn answers(&self, m: &InputMatrix) -> Result<Vec<BitString>> {
        self.check_shape(m)?;
        self.answer_maps
            .iter()
            .enumerate()
            .map(|(i, map)| map.apply(i, &m.forehead_view(i)?))
            .collect()
    }

    /// Add a player with an empty answer who sits on an extra last row. Existing players
    /// ignore that row, so on `(k+1)`-row inputs the protocol behaves exactly as before on
    /// the first `k` rows.
    pub fn with_silent_player(&self) -> Result<Self> {
        let k = self.players();
        let maps = self
            .answer_maps
            .iter()
            .map(|map| {
                let inner = map.clone();
                AnswerMap::new(map.width(), move |view: &ForeheadView| {
                    let reduced = drop_last_row(view).expect("owner below the silent seat");
                    (inner.map)(&reduced)
                })
            })
            .chain(std::iter::once(AnswerMap::constant(BitString::new())))
            .collect();
        let referee = match &self.referee {
            Referee::Parity(p) => Referee::Parity(p.with_silent_player()),
            other => other.clone(),
        };
        let padded = Self::new(self.n, maps, referee)?;
        debug_assert_eq!(padded.players(), k + 1);
        Ok(padded)
    }

    /// Tabulate into the JSON spec format.
    pub fn to_spec(&self) -> Result<ClassicalSpec> {
        let k = self.players();
        let players = self
            .answer_maps
            .iter()
            .enumerate()
            .map(|(i, map)| {
                Ok(PlayerSpec {
                    width: map.width(),
                    table: map.tabulate(i, k, self.n)?.iter().map(ToString::to_string).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let table = self.referee.truth_table(self.cost())?;
        Ok(ClassicalSpec {
            k,
            n: self.n,
            players,
            referee: table.iter().map(|&b| if b { '1' } else { '0' }).collect(),
        })
    }

    pub fn from_spec(spec: &ClassicalSpec) -> Result<Self> {
        if spec.players.len() != spec.k {
            return Err(NofError::Parse(format!(
                "header says k = {} but {} players are listed",
                spec.k,
                spec.players.len()
            )));
        }
        let view_bits = (spec.k - 1) * spec.n;
        if view_bits > ENUMERATION_CAP {
            return Err(NofError::Parse(format!("views of {view_bits} bits are too large to tabulate")));
        }
        let maps = spec
            .players
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if p.table.len() != 1usize << view_bits {
                    return Err(NofError::Parse(format!(
                        "player {} table has {} entries, expected 2^{view_bits}",
                        i + 1,
                        p.table.len()
                    )));
                }
                let table = p.table.iter().map(|s| s.parse()).collect::<Result<Vec<BitString>>>()?;
                AnswerMap::from_table(p.width, table)
            })
            .collect::<Result<Vec<_>>>()?;
        let referee: BitString = spec.referee.parse()?;
        Self::new(spec.n, maps, Referee::Table(referee.bits().to_vec()))
            .map_err(|e| NofError::Parse(e.to_string()))
    }
}

fn drop_last_row(view: &ForeheadView) -> Result<ForeheadView> {
    let k = view.players();
    let n = view.width();
    let mut m = InputMatrix::zeros(k - 1, n)?;
    for row in view.visible_rows().filter(|&r| r < k - 1) {
        for col in 0..n {
            m.set(row, col, view.bit(row, col).expect("visible"));
        }
    }
    m.forehead_view(view.owner())
}

impl NofProtocol for SimultaneousProtocol {
    fn players(&self) -> usize {
        self.answer_maps.len()
    }

    fn input_width(&self) -> usize {
        self.n
    }

    fn cost(&self) -> usize {
        self.answer_maps.iter().map(AnswerMap::width).sum()
    }

    fn run(&self, m: &InputMatrix) -> Result<Run> {
        let transcript = self.answers(m)?;
        let output = self.referee.decide(&BitString::concat(&transcript));
        Ok(Run { output, transcript })
    }
}

/// A dependent player: answers from its view and the first speaker's message.
#[derive(Clone)]
pub struct DependentAnswer {
    pub width: usize,
    pub map: DependentFn,
}

/// The first speaker answers alone; everyone else may read that answer.
#[derive(Clone)]
pub struct TwoRoundProtocol {
    n: usize,
    first_speaker: usize,
    first_answer: AnswerMap,
    /// Indexed by player; the entry at `first_speaker` is ignored.
    dependent: Vec<Option<DependentAnswer>>,
    referee: Referee,
}

impl TwoRoundProtocol {
    pub fn new(
        n: usize,
        first_speaker: usize,
        first_answer: AnswerMap,
        dependent: Vec<Option<DependentAnswer>>,
        referee: Referee,
    ) -> Result<Self> {
        let k = dependent.len();
        if first_speaker >= k {
            return Err(NofError::PlayerOutOfRange { index: first_speaker, players: k });
        }
        for (i, d) in dependent.iter().enumerate() {
            if (i == first_speaker) != d.is_none() {
                return Err(NofError::Shape(format!(
                    "player {} must {}have a dependent answer map",
                    i + 1,
                    if i == first_speaker { "not " } else { "" }
                )));
            }
        }
        Ok(Self { n, first_speaker, first_answer, dependent, referee })
    }

    pub fn first_speaker(&self) -> usize {
        self.first_speaker
    }
}

impl fmt::Debug for TwoRoundProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TwoRoundProtocol")
            .field("k", &self.dependent.len())
            .field("n", &self.n)
            .field("first_speaker", &self.first_speaker)
            .field("cost", &self.cost())
            .finish()
    }
}

impl NofProtocol for TwoRoundProtocol {
    fn players(&self) -> usize {
        self.dependent.len()
    }

    fn input_width(&self) -> usize {
        self.n
    }

    fn cost(&self) -> usize {
        self.first_answer.width() + self.dependent.iter().flatten().map(|d| d.width).sum::<usize>()
    }

    fn run(&self, m: &InputMatrix) -> Result<Run> {
        self.check_shape(m)?;
        let first = self.first_answer.apply(self.first_speaker, &m.forehead_view(self.first_speaker)?)?;
        let transcript = self
            .dependent
            .iter()
            .enumerate()
            .map(|(i, d)| match d {
                None => Ok(first.clone()),
                Some(d) => {
                    let out = (d.map)(&m.forehead_view(i)?, &first);
                    if out.len() != d.width {
                        return Err(NofError::AnswerWidth { player: i, declared: d.width, actual: out.len() });
                    }
                    Ok(out)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let output = self.referee.decide(&BitString::concat(&transcript));
        Ok(Run { output, transcript })
    }
}

/// How a [`CorrectnessReport`] was obtained.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EvaluationMode {
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

/// Worst-case and average-case success of a protocol against a target function.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectnessReport<P> {
    pub worst_case: P,
    pub average_case: P,
    pub mode: EvaluationMode,
    pub inputs: u64,
}

impl<P: Probability> CorrectnessReport<P> {
    /// Advantage over a coin flip: `average_case - 1/2`.
    pub fn delta(&self) -> P {
        self.average_case.clone() - P::half()
    }
}

fn tally<F>(proto: &(impl NofProtocol + ?Sized), f: &F, m: &InputMatrix) -> Result<bool>
where
    F: Fn(&InputMatrix) -> bool + Sync,
{
    Ok(proto.run(m)?.output == f(m))
}

/// Exact success over all `2^{kn}` inputs. Refuses when `kn` exceeds the cap.
pub fn correctness_exhaustive<P, F>(proto: &(impl NofProtocol + ?Sized), f: F) -> Result<CorrectnessReport<P>>
where
    P: Probability,
    F: Fn(&InputMatrix) -> bool + Sync,
{
    let (k, n) = (proto.players(), proto.input_width());
    let total = InputMatrix::enumeration_size(k, n)?;
    let correct = (0..total)
        .into_par_iter()
        .map(|idx| tally(proto, &f, &InputMatrix::from_index(k, n, idx)?).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(CorrectnessReport {
        worst_case: P::from_ratio((correct == total) as i64, 1),
        average_case: P::from_ratio(correct as i64, total),
        mode: EvaluationMode::Exhaustive,
        inputs: total,
    })
}

const SAMPLE_CHUNK: u64 = 4096;

/// Draw `samples` uniform `k x n` inputs, deterministically from `seed`, independent of
/// thread count. Chunk `c` uses ChaCha stream `c`.
pub fn sampled_inputs(k: usize, n: usize, samples: u64, seed: u64) -> impl ParallelIterator<Item = InputMatrix> {
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    (0..chunks).into_par_iter().flat_map_iter(move |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c);
        let len = SAMPLE_CHUNK.min(samples - c * SAMPLE_CHUNK);
        (0..len).map(move |_| InputMatrix::random(k, n, &mut rng).expect("nonempty shape"))
    })
}

/// Estimate of the average-case success from uniform samples.
pub fn correctness_sampled<P, F>(
    proto: &(impl NofProtocol + ?Sized),
    f: F,
    samples: u64,
    seed: u64,
) -> Result<CorrectnessReport<P>>
where
    P: Probability,
    F: Fn(&InputMatrix) -> bool + Sync,
{
    if samples == 0 {
        return Err(NofError::Shape("sampled mode needs at least one sample".into()));
    }
    let (k, n) = (proto.players(), proto.input_width());
    let correct = sampled_inputs(k, n, samples, seed)
        .map(|m| tally(proto, &f, &m).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(CorrectnessReport {
        worst_case: P::from_ratio((correct == samples) as i64, 1),
        average_case: P::from_ratio(correct as i64, samples),
        mode: EvaluationMode::Sampled { samples, seed },
        inputs: samples,
    })
}

/// JSON protocol description. Player tables are keyed by [`ForeheadView::index`] (the
/// visible rows in ascending order, column 1 first, first bit most significant); the
/// referee table is a `2^C` character bit string indexed by the concatenated answers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalSpec {
    pub k: usize,
    pub n: usize,
    pub players: Vec<PlayerSpec>,
    pub referee: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerSpec {
    pub width: usize,
    pub table: Vec<String>,
}

impl ClassicalSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| NofError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}
