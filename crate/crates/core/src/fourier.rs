//! Boolean Fourier analysis of referee functions.
//!
//! Bits map to signs as `b -> (-1)^b`. A subset `S` of the `C` answer bits is a mask in
//! the same layout as the concatenated answers (player 0's first bit most significant),
//! and `chi_S(a) = (-1)^{|S & a|}`.

use num_traits::Signed;
use rayon::prelude::*;

use crate::bits::{dot, BitString};
use crate::classical::{NofProtocol, Referee, SimultaneousProtocol};
use crate::error::{NofError, Result};
use crate::matrix::{InputMatrix, ENUMERATION_CAP};
use crate::scalar::{Probability, Rational};

/// In-place unnormalized Walsh-Hadamard transform. `data.len()` must be a power of two.
pub fn walsh_hadamard(data: &mut [i64]) {
    debug_assert!(data.len().is_power_of_two());
    let mut h = 1;
    while h < data.len() {
        for block in data.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
        }
        h *= 2;
    }
}

/// Fourier coefficients of a boolean function, stored as integers scaled by `2^C`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FourierTable {
    arity: usize,
    scaled: Vec<i64>,
}

impl FourierTable {
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// `2^C * g_hat(S)`, an integer.
    pub fn scaled_coefficient(&self, subset: u64) -> i64 {
        self.scaled[subset as usize]
    }

    /// `g_hat(S) = E_a[(-1)^{g(a)} chi_S(a)]`.
    pub fn coefficient<P: Probability>(&self, subset: u64) -> P {
        P::dyadic(self.scaled[subset as usize], self.arity as u32)
    }

    /// Recover the truth table.
    pub fn inverse(&self) -> Vec<bool> {
        let mut signs = self.scaled.clone();
        walsh_hadamard(&mut signs);
        // Each entry is now 4^C * (-1)^{g(a)} / 2^C.
        signs.into_iter().map(|v| v < 0).collect()
    }

    /// `sum_S g_hat(S)^2`, exactly.
    pub fn parseval_sum(&self) -> Rational {
        let total: i128 = self.scaled.iter().map(|&c| (c as i128) * (c as i128)).sum();
        Rational::new(total.into(), num_bigint::BigInt::from(1) << (2 * self.arity))
    }
}

/// Exact Fourier transform of a truth table of length `2^C`, `C <= 24`.
pub fn fourier_transform(truth: &[bool]) -> Result<FourierTable> {
    if !truth.len().is_power_of_two() {
        return Err(NofError::Shape(format!("truth table length {} is not a power of two", truth.len())));
    }
    let arity = truth.len().trailing_zeros() as usize;
    if arity > ENUMERATION_CAP {
        return Err(NofError::EnumerationCap { kn: arity, cap: ENUMERATION_CAP });
    }
    let mut scaled: Vec<i64> = truth.iter().map(|&b| if b { -1 } else { 1 }).collect();
    walsh_hadamard(&mut scaled);
    Ok(FourierTable { arity, scaled })
}

/// A referee that outputs the XOR of one subset of each player's answer bits, optionally
/// negated.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParityReferee {
    widths: Vec<usize>,
    /// Per player, a mask over its answer; bit `width - 1 - p` selects answer bit `p`.
    subsets: Vec<u64>,
    negated: bool,
}

impl ParityReferee {
    pub fn new(widths: Vec<usize>, subsets: Vec<u64>, negated: bool) -> Result<Self> {
        if widths.len() != subsets.len() {
            return Err(NofError::Referee("one subset per player required".into()));
        }
        for (i, (&w, &s)) in widths.iter().zip(&subsets).enumerate() {
            if w > 63 || s >> w != 0 {
                return Err(NofError::Referee(format!(
                    "subset {s:#b} of player {} exceeds its {w} answer bits",
                    i + 1
                )));
            }
        }
        Ok(Self { widths, subsets, negated })
    }

    /// Split a global mask over the concatenated answers.
    pub fn from_global_mask(widths: Vec<usize>, mask: u64, negated: bool) -> Result<Self> {
        let total: usize = widths.iter().sum();
        let mut shift = total;
        let subsets = widths
            .iter()
            .map(|&w| {
                shift -= w;
                (mask >> shift) & ((1u64 << w) - 1)
            })
            .collect();
        Self::new(widths, subsets, negated)
    }

    pub fn global_mask(&self) -> u64 {
        self.widths
            .iter()
            .zip(&self.subsets)
            .fold(0, |acc, (&w, &s)| (acc << w) | s)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn subset(&self, player: usize) -> u64 {
        self.subsets[player]
    }

    pub fn negated(&self) -> bool {
        self.negated
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.iter().all(|&s| s == 0)
    }

    /// The parity `S_i . A_i` contributed by one player.
    pub fn player_parity(&self, player: usize, answer: &BitString) -> bool {
        dot(self.subsets[player], answer.to_u64())
    }

    pub fn evaluate(&self, answers: &BitString) -> bool {
        let mut offset = 0;
        let mut acc = self.negated;
        for (&w, &s) in self.widths.iter().zip(&self.subsets) {
            acc ^= dot(s, answers.slice(offset, w).to_u64());
            offset += w;
        }
        acc
    }

    pub(crate) fn with_silent_player(&self) -> Self {
        let mut out = self.clone();
        out.widths.push(0);
        out.subsets.push(0);
        out
    }
}

/// Result of searching for the best parity referee.
#[derive(Clone, Debug)]
pub struct ParityExtraction {
    pub parity: ParityReferee,
    /// `E_x[chi_S(answers(x)) (-1)^{f(x)}]` for the chosen family, before negation.
    pub correlation: Rational,
    /// Average-case advantage of the original protocol, `avg - 1/2`.
    pub delta: Rational,
    /// Exact average success of the derived parity protocol: `1/2 + |correlation| / 2`.
    pub derived_success: Rational,
    /// Original answer maps with the parity referee.
    pub protocol: SimultaneousProtocol,
}

impl ParityExtraction {
    /// `|correlation| >= 2 delta / 2^C`, compared exactly.
    pub fn meets_lemma_bound(&self) -> bool {
        let c = self.parity.widths().iter().sum::<usize>() as u32;
        let bound = self.delta.clone() * Rational::dyadic(2, c);
        self.correlation.abs() >= bound
    }
}

/// Signed sums `sum_x (-1)^{f(x)} [answers(x) = a]` over all inputs, indexed by `a`.
fn joint_histogram<F>(proto: &SimultaneousProtocol, f: &F) -> Result<Vec<i64>>
where
    F: Fn(&InputMatrix) -> bool + Sync,
{
    let (k, n) = (proto.players(), proto.input_width());
    let total = InputMatrix::enumeration_size(k, n)?;
    let cost = proto.cost();
    if cost > ENUMERATION_CAP {
        return Err(NofError::EnumerationCap { kn: cost, cap: ENUMERATION_CAP });
    }
    const CHUNK: u64 = 1 << 14;
    let partials = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            (c * CHUNK..((c + 1) * CHUNK).min(total))
                .map(|idx| {
                    let m = InputMatrix::from_index(k, n, idx)?;
                    let a = BitString::concat(&proto.answers(&m)?).to_u64();
                    Ok((a, if f(&m) { -1i64 } else { 1 }))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hist = vec![0i64; 1 << cost];
    for (a, s) in partials.into_iter().flatten() {
        hist[a as usize] += s;
    }
    Ok(hist)
}

/// Find the subset family whose parity correlates best with `f` over uniform inputs.
///
/// Maximizes `|E_x[chi_S(answers) (-1)^f]|`, breaking ties toward the smallest global
/// mask; the derived referee is negated when the best correlation is negative.
pub fn extract_parity_referee<F>(proto: &SimultaneousProtocol, f: F) -> Result<ParityExtraction>
where
    F: Fn(&InputMatrix) -> bool + Sync,
{
    let (k, n) = (proto.players(), proto.input_width());
    let cost = proto.cost();
    let mut spectrum = joint_histogram(proto, &f)?;

    // Referee correlation, before the transform overwrites the histogram.
    let referee = proto.referee().truth_table(cost)?;
    let agree: i64 = spectrum
        .iter()
        .zip(&referee)
        .map(|(&h, &g)| if g { -h } else { h })
        .sum();

    walsh_hadamard(&mut spectrum);
    let (best_mask, best) = spectrum
        .iter()
        .enumerate()
        .fold((0usize, spectrum[0]), |(bm, bv), (m, &v)| {
            if v.abs() > bv.abs() { (m, v) } else { (bm, bv) }
        });

    let log_inputs = (k * n) as u32;
    let correlation = Rational::dyadic(best, log_inputs);
    let delta = Rational::dyadic(agree, log_inputs) / Rational::from_ratio(2, 1);
    let derived_success = Rational::half() + correlation.abs() / Rational::from_ratio(2, 1);
    let parity = ParityReferee::from_global_mask(proto.widths(), best_mask as u64, best < 0)?;
    let protocol = proto.with_referee(Referee::Parity(parity.clone()))?;
    Ok(ParityExtraction { parity, correlation, delta, derived_success, protocol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{correctness_exhaustive, AnswerMap, CorrectnessReport};
    use crate::matrix::{gip_eval, ForeheadView};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct expectation: 2^{-C} sum_a (-1)^{g(a)} chi_S(a).
    fn coefficient_oracle(truth: &[bool], subset: u64) -> Rational {
        let c = truth.len().trailing_zeros();
        let sum: i64 = truth
            .iter()
            .enumerate()
            .map(|(a, &g)| if g ^ dot(subset, a as u64) { -1 } else { 1 })
            .sum();
        Rational::dyadic(sum, c)
    }

    fn random_protocol(rng: &mut ChaCha8Rng, k: usize, n: usize, widths: &[usize]) -> SimultaneousProtocol {
        let view_bits = (k - 1) * n;
        let maps = widths
            .iter()
            .map(|&w| {
                let table = (0..1u64 << view_bits).map(|_| BitString::from_u64(rng.gen::<u64>() & ((1 << w) - 1), w)).collect();
                AnswerMap::from_table(w, table).unwrap()
            })
            .collect();
        let cost: usize = widths.iter().sum();
        let referee = (0..1u64 << cost).map(|_| rng.gen()).collect();
        SimultaneousProtocol::new(n, maps, Referee::Table(referee)).unwrap()
    }

    #[test]
    fn parity_and_constant_spectra() {
        for c in 1..=5 {
            let parity: Vec<bool> = (0..1u64 << c).map(|a| a.count_ones() % 2 == 1).collect();
            let t = fourier_transform(&parity).unwrap();
            let full = (1u64 << c) - 1;
            for s in 0..1u64 << c {
                let expected = if s == full { 1 } else { 0 };
                assert_eq!(t.coefficient::<Rational>(s), Rational::from_ratio(expected, 1));
            }
            let zero = fourier_transform(&vec![false; 1 << c]).unwrap();
            assert_eq!(zero.coefficient::<Rational>(0), Rational::from_ratio(1, 1));
            assert!((1..1u64 << c).all(|s| zero.scaled_coefficient(s) == 0));
        }
    }

    #[test]
    fn and_coefficients_match_direct_expectation() {
        let and = vec![false, false, false, true];
        let t = fourier_transform(&and).unwrap();
        for s in 0..4 {
            assert_eq!(t.coefficient::<Rational>(s), coefficient_oracle(&and, s));
            assert_eq!(t.coefficient::<Rational>(s).abs(), Rational::from_ratio(1, 2));
        }
        assert_eq!(t.coefficient::<f64>(3), -0.5);
    }

    #[test]
    fn inverse_parseval_and_bounds_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for c in 0..=12 {
            let truth: Vec<bool> = (0..1usize << c).map(|_| rng.gen()).collect();
            let t = fourier_transform(&truth).unwrap();
            assert_eq!(t.inverse(), truth);
            assert_eq!(t.parseval_sum(), Rational::from_ratio(1, 1));
            assert!((0..1u64 << c).all(|s| t.scaled_coefficient(s).unsigned_abs() <= 1 << c));
            if c <= 6 {
                for s in 0..1u64 << c {
                    assert_eq!(t.coefficient::<Rational>(s), coefficient_oracle(&truth, s));
                }
            }
        }
        assert!(fourier_transform(&[true, false, true]).is_err());
    }

    #[test]
    fn global_mask_split() {
        let p = ParityReferee::from_global_mask(vec![2, 3], 0b10_011, false).unwrap();
        assert_eq!(p.subset(0), 0b10);
        assert_eq!(p.subset(1), 0b011);
        assert_eq!(p.global_mask(), 0b10011);
        assert!(p.evaluate(&"10000".parse().unwrap()));
        assert!(p.evaluate(&"10011".parse().unwrap()));
        assert!(!p.evaluate(&"10010".parse().unwrap()));
        assert!(ParityReferee::new(vec![1], vec![0b10], false).is_err());
    }

    #[test]
    fn parity_referee_is_its_own_maximizer() {
        // f = x0[0] xor x1[0]; each player forwards the other's bit, the referee XORs.
        let maps = (0..2)
            .map(|i| AnswerMap::new(1, move |v: &ForeheadView| BitString::from(vec![v.bit(1 - i, 0).unwrap()])))
            .collect();
        let parity = ParityReferee::new(vec![1, 1], vec![1, 1], false).unwrap();
        let p = SimultaneousProtocol::new(1, maps, Referee::Parity(parity.clone())).unwrap();
        let f = |m: &InputMatrix| m.get(0, 0) ^ m.get(1, 0);
        let e = extract_parity_referee(&p, f).unwrap();
        assert_eq!(e.parity, parity);
        assert_eq!(e.correlation, Rational::from_ratio(1, 1));
        assert_eq!(e.correlation, e.delta.clone() * Rational::from_ratio(2, 1));
        assert!(e.meets_lemma_bound());
    }

    #[test]
    fn constant_referee_extracts_empty_family() {
        let maps = (0..2).map(|_| AnswerMap::constant("01".parse().unwrap())).collect();
        let p = SimultaneousProtocol::new(1, maps, Referee::function(|_| false)).unwrap();
        let e = extract_parity_referee(&p, gip_eval).unwrap();
        assert!(e.parity.is_empty());
        assert!(!e.parity.negated());
        assert_eq!(e.delta, Rational::from_ratio(1, 4));
        assert_eq!(e.derived_success, Rational::from_ratio(3, 4));
        let r: CorrectnessReport<Rational> = correctness_exhaustive(&e.protocol, gip_eval).unwrap();
        assert_eq!(r.average_case, e.derived_success);
    }

    #[test]
    fn extraction_matches_brute_force_over_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let p = random_protocol(&mut rng, 2, 2, &[2, 2]);
            let e = extract_parity_referee(&p, gip_eval).unwrap();
            // Brute force over all 16 families: evaluate each derived protocol directly.
            let mut best: Option<(Rational, u64)> = None;
            for mask in 0..16u64 {
                let par = ParityReferee::from_global_mask(vec![2, 2], mask, false).unwrap();
                let derived = p.with_referee(Referee::Parity(par)).unwrap();
                let r: CorrectnessReport<Rational> = correctness_exhaustive(&derived, gip_eval).unwrap();
                let corr = (r.average_case * Rational::from_ratio(2, 1) - Rational::from_ratio(1, 1)).abs();
                if best.as_ref().is_none_or(|(b, _)| corr > *b) {
                    best = Some((corr, mask));
                }
            }
            let (corr, mask) = best.unwrap();
            assert_eq!(e.correlation.abs(), corr);
            assert_eq!(e.parity.global_mask(), mask);
            let r: CorrectnessReport<Rational> = correctness_exhaustive(&e.protocol, gip_eval).unwrap();
            assert_eq!(r.average_case, e.derived_success);
            assert!(e.meets_lemma_bound());
        }
    }

    #[test]
    fn plancherel_term_by_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for widths in [[1usize, 2], [2, 2], [3, 3], [4, 4]] {
            let p = random_protocol(&mut rng, 2, 2, &widths);
            let cost = p.cost();
            let g = p.referee().truth_table(cost).unwrap();
            let table = fourier_transform(&g).unwrap();
            let hist = joint_histogram(&p, &gip_eval).unwrap();
            // Left side: E_x[(-1)^{g(a)} (-1)^f].
            let lhs: i64 = hist.iter().zip(&g).map(|(&h, &b)| if b { -h } else { h }).sum();
            let lhs = Rational::dyadic(lhs, 4);
            // Right side: sum_S g_hat(S) E_x[chi_S(a) (-1)^f], each term by direct summation.
            let mut rhs = Rational::from_ratio(0, 1);
            for s in 0..1u64 << cost {
                let term: i64 = hist.iter().enumerate().map(|(a, &h)| if dot(s, a as u64) { -h } else { h }).sum();
                rhs += table.coefficient::<Rational>(s) * Rational::dyadic(term, 4);
            }
            assert_eq!(lhs, rhs);
        }
    }
}
