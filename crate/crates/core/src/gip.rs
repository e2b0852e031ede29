//! Protocols for the generalized inner product.
//!
//! Columns are cut into blocks of at most `2^{k-1} - 1`. Per block, player 1 sees rows
//! `2..k` and announces a pattern `w` missing from the block's column patterns, plus a flag
//! set when the all-ones pattern itself is missing (then the block contributes 0).
//! Otherwise, for every column `u != w`,
//!
//! `[u = 1...1] = xor_r [w_r = 0] [u_{<r} = 1...1] [u_{>r} = w_{>r}]`,
//!
//! and the `r`-th term ignores coordinate `r`, so the player without row `r + 1` can weigh
//! it by row 1 and announce the parity over the block. The XOR of those bits is GIP.

use std::sync::Arc;

use num_traits::One;

use crate::bits::BitString;
use crate::classical::{AnswerMap, DependentAnswer, Referee, TwoRoundProtocol};
use crate::error::{NofError, Result};
use crate::matrix::{ForeheadView, InputMatrix};
use crate::quantum::{AnswerAction, BoardMeasurement, Combiner, PhaseFn, Preamble, QuantumNofProtocol, QuantumPlayer};
use crate::scalar::{Probability, Rational, Real};

/// Largest block one round of missing-pattern announcements can handle.
pub fn block_capacity(k: usize) -> usize {
    if k >= usize::BITS as usize {
        usize::MAX
    } else {
        (1usize << (k - 1)) - 1
    }
}

pub fn block_count(k: usize, n: usize) -> usize {
    n.div_ceil(block_capacity(k))
}

/// `(2k - 1) * ceil(n / (2^{k-1} - 1))`.
pub fn grolmusz_cost(k: usize, n: usize) -> usize {
    (2 * k - 1) * block_count(k, n)
}

fn check_players(k: usize) -> Result<()> {
    if k < 2 {
        return Err(NofError::Shape(format!("need at least 2 players, got {k}")));
    }
    if k > 64 {
        return Err(NofError::Shape(format!("column patterns limited to 64 rows, got {k}")));
    }
    Ok(())
}

fn block_range(k: usize, n: usize, b: usize) -> std::ops::Range<usize> {
    let cap = block_capacity(k);
    b * cap..((b + 1) * cap).min(n)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockTranscript {
    /// Pattern over rows `2..k` (row 2 first) that no column of the block has.
    pub missing: BitString,
    /// Set when the all-ones pattern is missing; the block then contributes 0.
    pub flag: bool,
    /// One bit from each of players `2..k`.
    pub bits: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrolmuszTranscript {
    pub blocks: Vec<BlockTranscript>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrolmuszRun {
    pub output: bool,
    pub cost: usize,
    pub transcript: GrolmuszTranscript,
}

/// Missing pattern for one block: all-ones if absent (flagged), else the smallest absent.
fn missing_pattern(k: usize, patterns: impl Iterator<Item = u64>) -> (u64, bool) {
    let width = k - 1;
    let ones = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
    let mut seen: Vec<u64> = patterns.collect();
    seen.sort_unstable();
    seen.dedup();
    if seen.binary_search(&ones).is_err() {
        return (ones, true);
    }
    let w = seen.iter().enumerate().find(|&(i, &p)| p != i as u64).map_or(seen.len() as u64, |(i, _)| i as u64);
    (w, false)
}

/// Player 1's message: `w` then the flag, for every block.
pub fn first_message(view: &ForeheadView) -> Result<BitString> {
    let (k, n) = (view.players(), view.width());
    check_players(k)?;
    if view.owner() != 0 {
        return Err(NofError::Shape(format!("the first message is sent by player 1, not {}", view.owner() + 1)));
    }
    let mut out = BitString::new();
    for b in 0..block_count(k, n) {
        let patterns = block_range(k, n, b).map(|col| {
            (1..k).fold(0u64, |acc, row| (acc << 1) | view.bit(row, col).expect("row visible to player 1") as u64)
        });
        let (w, flag) = missing_pattern(k, patterns);
        out.extend(&BitString::from_u64(w, k - 1));
        out.push(flag);
    }
    Ok(out)
}

/// Per-block bits of the player who cannot see row `r + 1` (`r >= 1`, 0-based row `r`).
pub fn player_bits(view: &ForeheadView, message: &BitString) -> Result<BitString> {
    let (k, n) = (view.players(), view.width());
    check_players(k)?;
    let r = view.owner();
    if r == 0 {
        return Err(NofError::Shape("player 1 sends the first message, not a block bit".into()));
    }
    let blocks = block_count(k, n);
    if message.len() != k * blocks {
        return Err(NofError::Shape(format!("first message has {} bits, expected {}", message.len(), k * blocks)));
    }
    let mut out = BitString::new();
    for b in 0..blocks {
        let w = message.slice(b * k, k - 1);
        let flag = message.get(b * k + k - 1);
        // Coordinate c of w is row c (0-based), stored at index c - 1.
        if flag || w.get(r - 1) {
            out.push(false);
            continue;
        }
        let bit = block_range(k, n, b).fold(false, |acc, col| {
            let bit = |row: usize| view.bit(row, col).expect("visible row");
            let below = (1..r).all(bit);
            let above = (r + 1..k).all(|c| bit(c) == w.get(c - 1));
            acc ^ (bit(0) && below && above)
        });
        out.push(bit);
    }
    Ok(out)
}

/// One block (`n <= 2^{k-1} - 1`).
pub fn grolmusz_block(m: &InputMatrix) -> Result<(bool, BlockTranscript)> {
    let (k, n) = (m.players(), m.width());
    check_players(k)?;
    if n > block_capacity(k) {
        return Err(NofError::BlockCapacity { columns: n, capacity: block_capacity(k), k });
    }
    let run = grolmusz(m)?;
    let block = run.transcript.blocks.into_iter().next().expect("n >= 1 gives one block");
    Ok((run.output, block))
}

/// The full protocol: per-block announcements, output the XOR of all player bits.
pub fn grolmusz(m: &InputMatrix) -> Result<GrolmuszRun> {
    let k = m.players();
    check_players(k)?;
    let message = first_message(&m.forehead_view(0)?)?;
    let per_player = (1..k).map(|r| player_bits(&m.forehead_view(r)?, &message)).collect::<Result<Vec<_>>>()?;
    let blocks = (0..block_count(k, m.width()))
        .map(|b| BlockTranscript {
            missing: message.slice(b * k, k - 1),
            flag: message.get(b * k + k - 1),
            bits: per_player.iter().map(|bits| bits.get(b)).collect(),
        })
        .collect();
    let output = per_player.iter().fold(false, |acc, bits| acc ^ bits.parity());
    Ok(GrolmuszRun { output, cost: grolmusz_cost(k, m.width()), transcript: GrolmuszTranscript { blocks } })
}

/// [`grolmusz`] as a two-round protocol: player 1 speaks first, everyone else reads it.
pub fn grolmusz_two_round(k: usize, n: usize) -> Result<TwoRoundProtocol> {
    check_players(k)?;
    let blocks = block_count(k, n);
    let first = AnswerMap::new(k * blocks, |v: &ForeheadView| first_message(v).expect("shape fixed by the protocol"));
    let dependent = (0..k)
        .map(|i| {
            (i > 0).then(|| DependentAnswer {
                width: blocks,
                map: Arc::new(|v: &ForeheadView, msg: &BitString| player_bits(v, msg).expect("shape fixed by the protocol")),
            })
        })
        .collect();
    let skip = k * blocks;
    let referee = Referee::function(move |a: &BitString| a.slice(skip, a.len() - skip).parity());
    TwoRoundProtocol::new(n, 0, first, dependent, referee)
}

/// Quantum protocol for odd `k`: player 1's message is classical; players `(2,3), (4,5),
/// ...` share blackboards, each seat kicks its bit back as a phase, and a `+-` measurement
/// of each pair reveals the XOR of the pair's bits.
pub fn build_quantum_gip<T: Real>(k: usize, n: usize) -> Result<QuantumNofProtocol<T>> {
    check_players(k)?;
    if k.is_multiple_of(2) {
        return Err(NofError::EvenPlayerCount(k));
    }
    let blocks = block_count(k, n);
    let preamble = Preamble {
        speaker: 0,
        message: AnswerMap::new(k * blocks, |v: &ForeheadView| first_message(v).expect("shape fixed by the protocol")),
    };
    let half = Rational::half();
    let players = (1..k)
        .step_by(2)
        .map(|lo| {
            let phase: PhaseFn = Arc::new(|v: &ForeheadView, msg: &BitString| {
                player_bits(v, msg).expect("shape fixed by the protocol").parity()
            });
            QuantumPlayer::new(
                vec![(lo, half.clone()), (lo + 1, half.clone())],
                AnswerAction::Phase(phase),
                BoardMeasurement::PlusMinus { lo, hi: lo + 1 },
            )
        })
        .collect();
    QuantumNofProtocol::new(k, n, players, Some(preamble), Combiner::Xor { negate: false })
}

/// Exact success of [`build_quantum_gip`] on one input (probability of the GIP value).
pub fn quantum_gip_success(q: &QuantumNofProtocol<f64>, m: &InputMatrix) -> Result<Rational> {
    let d = q.run_quantum_exact(m, 1)?;
    let target = crate::matrix::gip_eval(m);
    let p = d.probability(target);
    debug_assert!(p <= Rational::one());
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::NofProtocol;
    use crate::matrix::gip_eval;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn k2_single_column() {
        for idx in 0..4 {
            let m = InputMatrix::from_index(2, 1, idx).unwrap();
            let (out, t) = grolmusz_block(&m).unwrap();
            assert_eq!(out, m.get(0, 0) && m.get(1, 0));
            assert_ne!(t.missing.get(0), m.get(1, 0));
        }
    }

    #[test]
    fn absent_all_ones_sets_the_flag() {
        let m: InputMatrix = "111\n010\n101".parse().unwrap();
        let (out, t) = grolmusz_block(&m).unwrap();
        assert!(t.flag && !out);
        assert_eq!(t.missing, "11".parse().unwrap());
    }

    #[test]
    fn exhaustive_small_shapes() {
        for (k, n) in [(2, 1), (2, 5), (3, 3), (3, 5), (4, 4)] {
            for m in InputMatrix::enumerate(k, n).unwrap() {
                let run = grolmusz(&m).unwrap();
                assert_eq!(run.output, gip_eval(&m), "{m:?}");
                for (b, block) in run.transcript.blocks.iter().enumerate() {
                    let w = block.missing.to_u64();
                    assert!(block_range(k, n, b).all(|c| m.column_pattern(c, 1..k) != w));
                    assert_eq!(block.bits.len(), k - 1);
                }
            }
        }
    }

    #[test]
    fn capacity_enforced() {
        assert!(matches!(
            grolmusz_block(&InputMatrix::zeros(3, 4).unwrap()),
            Err(NofError::BlockCapacity { columns: 4, capacity: 3, k: 3 })
        ));
        assert!(grolmusz(&InputMatrix::zeros(1, 4).unwrap()).is_err());
    }

    #[test]
    fn cost_formula() {
        assert_eq!(grolmusz_cost(3, 3), 5);
        assert_eq!(grolmusz_cost(3, 7), 15);
        for k in 2..=8usize {
            for n in 1..=64usize {
                let blocks = (n + (1 << (k - 1)) - 2) / ((1 << (k - 1)) - 1);
                assert_eq!(grolmusz_cost(k, n), (2 * k - 1) * blocks);
                let run = grolmusz(&InputMatrix::ones(k, n).unwrap()).unwrap();
                assert_eq!(run.cost, grolmusz_cost(k, n));
                let bits: usize = run.transcript.blocks.iter().map(|b| b.missing.len() + 1 + b.bits.len()).sum();
                assert_eq!(bits, run.cost);
            }
        }
        for k in [3usize, 5, 9, 17] {
            assert_eq!(grolmusz_cost(k, (1 << (k - 1)) - 1), 2 * k - 1);
        }
    }

    #[test]
    fn two_round_form_agrees() {
        let p = grolmusz_two_round(3, 3).unwrap();
        assert_eq!(p.cost(), 5);
        for m in InputMatrix::enumerate(3, 3).unwrap() {
            assert_eq!(p.run(&m).unwrap().output, gip_eval(&m));
        }
        let p = grolmusz_two_round(3, 7).unwrap();
        assert_eq!(p.cost(), 15);
    }

    #[test]
    fn quantum_gip_is_exact_for_three_players() {
        let q = build_quantum_gip::<f64>(3, 3).unwrap();
        let cost = q.qcost();
        assert_eq!((cost.classical_bits, cost.answer_qubits, cost.message_units), (3, 1, 5));
        for m in InputMatrix::enumerate(3, 3).unwrap() {
            assert_eq!(quantum_gip_success(&q, &m).unwrap(), Rational::one());
        }
        assert!(matches!(build_quantum_gip::<f64>(4, 3), Err(NofError::EvenPlayerCount(4))));
    }

    #[test]
    fn quantum_gip_sampled_five_players() {
        let q = build_quantum_gip::<f64>(5, 15).unwrap();
        assert_eq!(q.qcost().total(), 5 + 2);
        assert_eq!(q.qcost().message_units, 9);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let m = InputMatrix::random(5, 15, &mut rng).unwrap();
            assert_eq!(quantum_gip_success(&q, &m).unwrap(), Rational::one());
        }
    }

    #[test]
    fn even_k_via_padding() {
        let q = build_quantum_gip::<f64>(5, 2).unwrap();
        for m in InputMatrix::enumerate(4, 2).unwrap() {
            let padded = m.pad_to_k(5).unwrap();
            assert!((q.run_quantum(&padded).unwrap().probability(gip_eval(&m)) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn plus_minus_reads_the_pair_xor() {
        // Phase bits fixed per seat, independent of the input.
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            let phase: PhaseFn = Arc::new(move |v: &ForeheadView, _: &BitString| if v.owner() == 1 { a } else { b });
            let player = QuantumPlayer::new(
                vec![(1, Rational::half()), (2, Rational::half())],
                AnswerAction::Phase(phase),
                BoardMeasurement::PlusMinus { lo: 1, hi: 2 },
            );
            let q = QuantumNofProtocol::<f64>::new(3, 2, vec![player], None, Combiner::Xor { negate: false }).unwrap();
            for m in InputMatrix::enumerate(3, 2).unwrap() {
                assert_eq!(q.run_quantum_exact(&m, 1).unwrap().probability(a ^ b), Rational::one());
            }
        }
    }

    proptest! {
        #[test]
        fn random_shapes_are_exact(k in 2usize..=7, n in 1usize..=40, seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = InputMatrix::random(k, n, &mut rng).unwrap();
            prop_assert_eq!(grolmusz(&m).unwrap().output, gip_eval(&m));
        }

        #[test]
        fn dense_ones_are_exact(k in 2usize..=6, n in 1usize..=20, flips in proptest::collection::vec((0usize..6, 0usize..20), 0..4)) {
            // Mostly-ones inputs exercise the unflagged path.
            let mut m = InputMatrix::ones(k, n).unwrap();
            for (r, c) in flips {
                if r < k && c < n {
                    m.set(r, c, false);
                }
            }
            prop_assert_eq!(grolmusz(&m).unwrap().output, gip_eval(&m));
        }
    }
}
