//! Turning a `k`-player simultaneous protocol with a parity referee into a `k/2`-player
//! quantum protocol of the same communication.
//!
//! Seats `2p` and `2p + 1` share quantum player `p`. Its blackboard holds the two views in
//! superposition and an answer register with one slot per seat, so the register width is
//! the sum of the two classical answer widths. The referee decodes each pair with a
//! single copy of the erased state and XORs the pair guesses.

use num_bigint::BigInt;
use num_complex::Complex;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::bits::{dot, BitString};
use crate::classical::{correctness_exhaustive, NofProtocol, SimultaneousProtocol};
use crate::error::{NofError, Result};
use crate::fourier::{extract_parity_referee, ParityReferee};
use crate::matrix::{seat_bits, InputMatrix};
use crate::qstate::{plus_minus_basis, RegisterLayout, StateVector};
use crate::quantum::{AnswerAction, BoardMeasurement, Combiner, QuantumNofProtocol, QuantumPlayer, Slot};
use crate::scalar::{format_rational, Probability, Rational, Real};

/// Decoder for the erased pair state `(|lo>|A_lo, 0> + |hi>|0, A_hi>)/sqrt2`, targeting
/// `S_lo.A_lo xor S_hi.A_hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairDecoder {
    pub lo: usize,
    pub hi: usize,
    pub lo_width: usize,
    pub hi_width: usize,
    /// Subset of the low seat's answer bits, first answer bit most significant.
    pub lo_subset: u64,
    pub hi_subset: u64,
}

impl PairDecoder {
    pub fn new(lo: usize, hi: usize, lo_width: usize, hi_width: usize, lo_subset: u64, hi_subset: u64) -> Result<Self> {
        let fits = |s: u64, w: usize| w < 64 && s >> w == 0;
        if lo == hi {
            return Err(NofError::Shape("decoder seats must differ".into()));
        }
        if !fits(lo_subset, lo_width) || !fits(hi_subset, hi_width) {
            return Err(NofError::Shape(format!(
                "subsets {lo_subset:#b}/{hi_subset:#b} exceed widths {lo_width}/{hi_width}"
            )));
        }
        Ok(Self { lo, hi, lo_width, hi_width, lo_subset, hi_subset })
    }

    /// Common answer width after aligning both slots.
    pub fn t(&self) -> usize {
        self.lo_width.max(self.hi_width)
    }

    /// The bit this pair tries to predict.
    pub fn target(&self, lo_answer: &BitString, hi_answer: &BitString) -> bool {
        dot(self.lo_subset, lo_answer.to_u64()) ^ dot(self.hi_subset, hi_answer.to_u64())
    }

    /// Success probability the decoder achieves on every input.
    pub fn success<P: Probability>(&self) -> P {
        if self.lo_subset == 0 && self.hi_subset == 0 {
            P::one()
        } else {
            P::half() + P::dyadic(1, self.t() as u32 + 1)
        }
    }
}

/// Output distribution `[Pr[0], Pr[1]]` of the pair decoder on an erased pair state over
/// registers `A` (seat) and `C` (slotted answers).
///
/// The high slot is rotated to the front so both branches carry their answer in the
/// leading `t` qubits. The branches then pick up `(-1)^{S.A}`, the answer is measured in
/// the character basis, and on the trivial character the seat qubit is measured in the
/// `+-` basis, whose outcome is exactly the target. Any other character gives no usable
/// interference, and a fair coin is output instead.
pub fn decode_pair<T: Real>(state: &StateVector<T>, d: &PairDecoder) -> Result<[T; 2]> {
    if d.lo_subset == 0 && d.hi_subset == 0 {
        return Ok([T::one(), T::zero()]);
    }
    let layout = state.layout().clone();
    let a = layout.register("A")?.clone();
    let c = layout.register("C")?.clone();
    if c.width != d.lo_width + d.hi_width {
        return Err(NofError::Referee(format!(
            "answer register has {} qubits, decoder expects {}",
            c.width,
            d.lo_width + d.hi_width
        )));
    }
    let aligned = state.apply_basis_map(|label| {
        let seat = label.get(&a) as usize;
        let mut out = label.clone();
        if seat == d.hi {
            let bits = label.get_bits(&c);
            out.set_bits(&c, &BitString::concat([&bits.slice(d.lo_width, d.hi_width), &bits.slice(0, d.lo_width)]));
        } else if seat != d.lo {
            return Err(NofError::Referee(format!("seat {seat} outside the decoded pair")));
        }
        Ok((out, Complex::one()))
    })?;
    let t = d.t();
    let split = layout.split("C", t, "answer", "pad")?;
    let aligned = aligned.with_layout(split.clone())?;
    let answer = split.register("answer")?.clone();
    let s_lo = d.lo_subset << (t - d.lo_width);
    let s_hi = d.hi_subset << (t - d.hi_width);
    let phased = aligned.apply_basis_map(|label| {
        let subset = if label.get(&a) as usize == d.lo { s_lo } else { s_hi };
        let sign = if dot(subset, label.get(&answer)) { -T::one() } else { T::one() };
        Ok((label.clone(), Complex::new(sign, T::zero())))
    })?;
    let two = T::one() + T::one();
    let mut dist = [T::zero(), T::zero()];
    for outcome in phased.measure_fourier_basis("answer")? {
        if outcome.index != 0 {
            dist[0] = dist[0] + outcome.probability / two;
            dist[1] = dist[1] + outcome.probability / two;
            continue;
        }
        let Some(post) = outcome.state else { continue };
        let family = plus_minus_basis::<T>(1 << a.width, d.lo, d.hi)?;
        let pm = post.measure_projective(&["A"], &family)?;
        dist[0] = dist[0] + outcome.probability * pm[0].probability;
        dist[1] = dist[1] + outcome.probability * pm[1].probability;
    }
    Ok(dist)
}

/// The erased pair state for given answers, with a seat register of `seat_width` qubits.
pub fn pair_state<T: Real>(d: &PairDecoder, seat_width: usize, lo_answer: &BitString, hi_answer: &BitString) -> Result<StateVector<T>> {
    if lo_answer.len() != d.lo_width || hi_answer.len() != d.hi_width {
        return Err(NofError::Shape("answers do not match the decoder widths".into()));
    }
    let width = d.lo_width + d.hi_width;
    let layout = if width > 0 {
        RegisterLayout::new(&[("A", seat_width), ("C", width)])?
    } else {
        RegisterLayout::new(&[("A", seat_width)])?
    };
    let seat = |s: usize| BitString::from_u64(s as u64, seat_width);
    let lo_c = BitString::concat([lo_answer, &BitString::zeros(d.hi_width)]);
    let hi_c = BitString::concat([&BitString::zeros(d.lo_width), hi_answer]);
    let label = |s: usize, c: &BitString| {
        if width > 0 {
            layout.label_bits(&[("A", &seat(s)), ("C", c)])
        } else {
            layout.label_bits(&[("A", &seat(s))])
        }
    };
    let r = Complex::new(T::FRAC_1_SQRT_2(), T::zero());
    StateVector::from_amplitudes(layout.clone(), [(label(d.lo, &lo_c)?, r), (label(d.hi, &hi_c)?, r)])
}

/// Probability that [`decode_pair`] outputs the target on the given answers.
pub fn pair_success<T: Real>(d: &PairDecoder, lo_answer: &BitString, hi_answer: &BitString) -> Result<T> {
    let seat_width = seat_bits(d.lo.max(d.hi) + 1);
    let dist = decode_pair(&pair_state::<T>(d, seat_width, lo_answer, hi_answer)?, d)?;
    Ok(dist[d.target(lo_answer, hi_answer) as usize])
}

/// XOR of independent guesses. Returns the combined guess and its success probability
/// `1/2 + 2^{m-1} prod_p (s_p - 1/2)`.
pub fn xor_combine<P: Probability>(guesses: &[bool], successes: &[P]) -> (bool, P) {
    let guess = guesses.iter().fold(false, |acc, &g| acc ^ g);
    let m = successes.len();
    let product = successes.iter().fold(P::one(), |acc, s| acc * (s.clone() - P::half()));
    let scale = if m == 0 { P::half() } else { P::dyadic(1 << (m - 1), 0) };
    (guess, P::half() + scale * product)
}

/// Combined success when every one of the `k/2` pairs carries `C/k` answer bits per seat
/// and decodes at the single-copy rate.
pub fn xor_chain_success(cost: usize, k: usize) -> Result<Rational> {
    if k == 0 || k % 2 == 1 || !cost.is_multiple_of(k) {
        return Err(NofError::Shape(format!("need even k dividing C, got C={cost}, k={k}")));
    }
    let t = (cost / k) as u32;
    let per_pair = Rational::half() + Rational::dyadic(1, t + 1);
    let m = k / 2;
    Ok(xor_combine(&vec![false; m], &vec![per_pair; m]).1)
}

/// A compiled protocol and what it came from.
#[derive(Clone, Debug)]
pub struct CompiledProtocol<T: Real = f64> {
    source: SimultaneousProtocol,
    parity: ParityReferee,
    decoders: Vec<PairDecoder>,
    quantum: QuantumNofProtocol<T>,
}

impl<T: Real> CompiledProtocol<T> {
    pub fn source(&self) -> &SimultaneousProtocol {
        &self.source
    }

    pub fn parity(&self) -> &ParityReferee {
        &self.parity
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.decoders.iter().map(|d| (d.lo, d.hi)).collect()
    }

    pub fn decoders(&self) -> &[PairDecoder] {
        &self.decoders
    }

    pub fn quantum(&self) -> &QuantumNofProtocol<T> {
        &self.quantum
    }

    /// Dyadic resolution of every board probability (`max_p t_p + 1`).
    pub fn exact_resolution(&self) -> u32 {
        self.decoders.iter().map(|d| d.t() as u32 + 1).max().unwrap_or(0)
    }
}

/// Pair up the seats of an even-`k` protocol and build the quantum protocol.
pub fn compile<T: Real>(src: &SimultaneousProtocol, parity: &ParityReferee) -> Result<CompiledProtocol<T>> {
    let k = src.players();
    if k % 2 == 1 {
        return Err(NofError::OddPlayerCount(k));
    }
    if parity.widths() != src.widths().as_slice() {
        return Err(NofError::Shape(format!(
            "parity referee widths {:?} do not match answer widths {:?}",
            parity.widths(),
            src.widths()
        )));
    }
    let maps = src.answer_maps();
    let half = Rational::half();
    let mut decoders = Vec::with_capacity(k / 2);
    let mut players = Vec::with_capacity(k / 2);
    for p in 0..k / 2 {
        let (lo, hi) = (2 * p, 2 * p + 1);
        let d = PairDecoder::new(lo, hi, maps[lo].width(), maps[hi].width(), parity.subset(lo), parity.subset(hi))?;
        players.push(QuantumPlayer::new(
            vec![(lo, half.clone()), (hi, half.clone())],
            AnswerAction::Slots(vec![Slot { seat: lo, map: maps[lo].clone() }, Slot { seat: hi, map: maps[hi].clone() }]),
            BoardMeasurement::PairDecoder(d),
        ));
        decoders.push(d);
    }
    let quantum = QuantumNofProtocol::new(k, src.input_width(), players, None, Combiner::Xor { negate: parity.negated() })?;
    Ok(CompiledProtocol { source: src.clone(), parity: parity.clone(), decoders, quantum })
}

/// `1/2 + delta / 2^{3C/2}`; irrational for odd `C`, so comparisons square both sides.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoremBound {
    pub delta: Rational,
    pub cost: usize,
}

impl TheoremBound {
    /// The bound when it is rational (even `C`).
    pub fn exact(&self) -> Option<Rational> {
        self.cost.is_multiple_of(2).then(|| Rational::half() + self.delta.clone() * Rational::dyadic(1, (3 * self.cost / 2) as u32))
    }

    pub fn to_f64(&self) -> f64 {
        0.5 + self.delta.as_f64() * (-(3.0 * self.cost as f64) / 2.0).exp2()
    }

    /// Whether `x >= 1/2 + delta / 2^{3C/2}`, decided exactly.
    pub fn is_met_by(&self, x: &Rational) -> bool {
        if let Some(b) = self.exact() {
            return x >= &b;
        }
        // Odd C: bound = 1/2 + e / sqrt2 with e = delta / 2^{(3C - 1)/2}.
        let e = self.delta.clone() * Rational::dyadic(1, ((3 * self.cost - 1) / 2) as u32);
        let d = x.clone() - Rational::half();
        let two = Rational::from_integer(BigInt::from(2));
        if e.is_positive() {
            d.is_positive() && two * d.clone() * d >= e.clone() * e
        } else {
            !d.is_negative() || two * d.clone() * d <= e.clone() * e
        }
    }
}

impl std::fmt::Display for TheoremBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.exact() {
            Some(b) => write!(f, "{}", format_rational(&b)),
            None => {
                let e = self.delta.clone() * Rational::dyadic(1, (3 * self.cost).div_ceil(2) as u32);
                write!(f, "1/2 + {}*sqrt(2)", format_rational(&e))
            }
        }
    }
}

/// End-to-end check of the compiled protocol against `1/2 + delta / 2^{3C/2}`.
#[derive(Clone, Debug)]
pub struct Theorem1Report {
    pub k: usize,
    pub n: usize,
    pub cost: usize,
    pub answer_qubits: usize,
    /// Average success of the source protocol.
    pub classical_success: Rational,
    pub delta: Rational,
    /// Correlation of the extracted parity family with the target.
    pub correlation: Rational,
    /// Exact average success of the compiled protocol.
    pub measured: Rational,
    /// Smallest per-input success of the compiled protocol.
    pub worst: Rational,
    pub bound: TheoremBound,
    pub holds: bool,
}

/// Extract the parity referee, compile, and average the compiled protocol's exact
/// per-input success over every input.
pub fn verify_theorem1<F>(src: &SimultaneousProtocol, f: F) -> Result<Theorem1Report>
where
    F: Fn(&InputMatrix) -> bool + Sync,
{
    let (k, n) = (src.players(), src.input_width());
    let total = InputMatrix::enumeration_size(k, n)?;
    let classical = correctness_exhaustive::<Rational, _>(src, &f)?;
    let extraction = extract_parity_referee(src, &f)?;
    let compiled = compile::<f64>(src, &extraction.parity)?;
    let bits = compiled.exact_resolution();
    let quantum = compiled.quantum();
    let (sum, worst) = (0..total)
        .into_par_iter()
        .map(|idx| {
            let m = InputMatrix::from_index(k, n, idx)?;
            let p = quantum.run_quantum_exact(&m, bits)?.probability(f(&m));
            Ok((p.clone(), p))
        })
        .try_reduce(
            || (Rational::zero(), Rational::one()),
            |(s1, w1), (s2, w2)| Ok((s1 + s2, if w1 < w2 { w1 } else { w2 })),
        )?;
    let measured = sum / Rational::from_integer(BigInt::from(total));
    let cost = src.cost();
    let delta = classical.delta();
    let bound = TheoremBound { delta: delta.clone(), cost };
    let holds = bound.is_met_by(&measured);
    Ok(Theorem1Report {
        k,
        n,
        cost,
        answer_qubits: quantum.qcost().answer_qubits,
        classical_success: classical.average_case,
        delta,
        correlation: extraction.correlation,
        measured,
        worst,
        bound,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{AnswerMap, Referee};
    use crate::matrix::{gip_eval, ForeheadView};
    use proptest::prelude::*;

    fn r(num: i64, den: u64) -> Rational {
        Rational::from_ratio(num, den)
    }

    fn all(width: usize) -> impl Iterator<Item = BitString> {
        (0..1u64 << width).map(move |v| BitString::from_u64(v, width))
    }

    #[test]
    fn decoder_rates() {
        for t in 1..=3usize {
            let d = PairDecoder::new(0, 1, t, t, 1, 1).unwrap();
            let a = BitString::from_u64(0, t);
            let b = BitString::from_u64(1, t);
            let s: f64 = pair_success(&d, &a, &b).unwrap();
            assert!((s - (0.5 + (-(t as f64) - 1.0).exp2())).abs() < 1e-12, "t={t}");
        }
        // Equal answers still decode at the same single-copy rate.
        let d = PairDecoder::new(0, 1, 1, 1, 1, 1).unwrap();
        let one = BitString::from_u64(1, 1);
        assert!((pair_success::<f64>(&d, &one, &one).unwrap() - 0.75).abs() < 1e-12);
        let d = PairDecoder::new(0, 1, 2, 2, 0, 0).unwrap();
        assert_eq!(pair_success::<f64>(&d, &BitString::from_u64(1, 2), &BitString::from_u64(2, 2)).unwrap(), 1.0);
    }

    #[test]
    fn decoder_rate_is_uniform_over_inputs() {
        for (wl, wh) in [(1, 1), (2, 2), (1, 2), (3, 1)] {
            for sl in 0..1u64 << wl {
                for sh in 0..1u64 << wh {
                    let d = PairDecoder::new(2, 3, wl, wh, sl, sh).unwrap();
                    let expected: f64 = d.success();
                    for a in all(wl) {
                        for b in all(wh) {
                            let s: f64 = pair_success(&d, &a, &b).unwrap();
                            assert!((s - expected).abs() < 1e-9, "{d:?} {a} {b}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn decoder_rejects_malformed_states() {
        let d = PairDecoder::new(0, 1, 1, 1, 1, 1).unwrap();
        let other = PairDecoder::new(2, 1, 1, 1, 1, 1).unwrap();
        let s = pair_state::<f64>(&other, 2, &BitString::from_u64(1, 1), &BitString::from_u64(0, 1)).unwrap();
        assert!(matches!(decode_pair(&s, &d), Err(NofError::Referee(_))));
        assert!(PairDecoder::new(0, 1, 1, 1, 2, 0).is_err());
    }

    /// Independent oracle: enumerate all `2^m` correctness patterns.
    fn xor_by_enumeration(successes: &[Rational]) -> Rational {
        let m = successes.len();
        (0..1u32 << m)
            .filter(|pattern| pattern.count_ones() % 2 == 0)
            .map(|pattern| {
                (0..m).fold(Rational::one(), |acc, p| {
                    acc * if pattern >> p & 1 == 0 { successes[p].clone() } else { Rational::one() - successes[p].clone() }
                })
            })
            .fold(Rational::zero(), |a, b| a + b)
    }

    #[test]
    fn xor_combiner_examples() {
        assert_eq!(xor_combine(&[true], &[r(3, 4)]), (true, r(3, 4)));
        assert_eq!(xor_combine(&[true, true], &[r(3, 4), r(3, 4)]).1, r(5, 8));
        let s = [Rational::one(), r(5, 8), r(9, 16)];
        assert_eq!(xor_combine(&[false; 3], &s).1, xor_by_enumeration(&s));
    }

    #[test]
    fn derivation_chain() {
        for (c, k) in [(2, 2), (4, 2), (4, 4), (8, 4), (6, 6)] {
            assert_eq!(xor_chain_success(c, k).unwrap(), Rational::half() + Rational::dyadic(1, (c / 2 + 1) as u32));
        }
        assert!(xor_chain_success(3, 2).is_err());
    }

    fn exact_gip_k2(n: usize) -> SimultaneousProtocol {
        // Player 1 sends row 2, player 2 sends row 1; both widths n.
        let maps = (0..2)
            .map(|i| AnswerMap::new(n, move |v: &ForeheadView| (0..n).map(|c| v.bit(1 - i, c).unwrap()).collect()))
            .collect();
        SimultaneousProtocol::new(n, maps, Referee::function(move |a: &BitString| {
            (0..n).filter(|&c| a.get(c) && a.get(n + c)).count() % 2 == 1
        }))
        .unwrap()
    }

    #[test]
    fn compile_shapes() {
        let p = exact_gip_k2(1);
        let parity = ParityReferee::new(vec![1, 1], vec![1, 1], false).unwrap();
        let c = compile::<f64>(&p, &parity).unwrap();
        assert_eq!(c.pairs(), vec![(0, 1)]);
        assert_eq!(c.quantum().qcost().answer_qubits, 2);
        let three = SimultaneousProtocol::new(1, vec![AnswerMap::constant(BitString::zeros(1)); 3], Referee::function(|_| false)).unwrap();
        let parity3 = ParityReferee::new(vec![1; 3], vec![0; 3], false).unwrap();
        assert!(matches!(compile::<f64>(&three, &parity3), Err(NofError::OddPlayerCount(3))));
        let padded = three.with_silent_player().unwrap();
        let parity4 = ParityReferee::new(padded.widths(), vec![0; 4], false).unwrap();
        assert_eq!(compile::<f64>(&padded, &parity4).unwrap().quantum().qcost().answer_qubits, 3);
    }

    #[test]
    fn exact_k2_protocol_meets_the_bound() {
        let rep = verify_theorem1(&exact_gip_k2(1), gip_eval).unwrap();
        assert_eq!(rep.delta, Rational::half());
        assert_eq!(rep.cost, 2);
        assert_eq!(rep.bound.exact().unwrap(), r(9, 16));
        assert!(rep.holds, "{rep:?}");
        assert!(rep.measured >= r(9, 16));
    }

    #[test]
    fn constant_protocol_keeps_its_success() {
        let p = SimultaneousProtocol::new(2, vec![AnswerMap::constant(BitString::zeros(1)); 2], Referee::function(|_| false)).unwrap();
        let rep = verify_theorem1(&p, gip_eval).unwrap();
        assert_eq!(rep.measured, rep.classical_success);
        assert!(rep.holds);
    }

    #[test]
    fn odd_cost_bound_comparison() {
        let b = TheoremBound { delta: r(1, 2), cost: 1 };
        // 1/2 + (1/2) 2^{-3/2} = 0.6767...
        assert!(b.is_met_by(&r(68, 100)));
        assert!(!b.is_met_by(&r(67, 100)));
        assert!((b.to_f64() - (0.5 + 0.5 * 2f64.powf(-1.5))).abs() < 1e-15);
        let neg = TheoremBound { delta: r(-1, 2), cost: 1 };
        assert!(neg.is_met_by(&r(33, 100)));
        assert!(!neg.is_met_by(&r(32, 100)));
    }

    #[test]
    fn point_embedding_of_the_source_matches_the_classical_run() {
        let p = exact_gip_k2(2);
        let q = QuantumNofProtocol::<f64>::from_classical_point(&p).unwrap();
        for m in InputMatrix::enumerate(2, 2).unwrap() {
            assert_eq!(q.run_quantum_exact(&m, 0).unwrap().probability(gip_eval(&m)), Rational::one());
        }
    }

    proptest! {
        #[test]
        fn xor_formula_matches_enumeration(raw in proptest::collection::vec(0u64..=16, 1..=5)) {
            let s: Vec<Rational> = raw.iter().map(|&x| r(x as i64, 16)).collect();
            prop_assert_eq!(xor_combine(&vec![false; s.len()], &s).1, xor_by_enumeration(&s));
        }

        #[test]
        fn compilation_preserves_communication(widths in proptest::collection::vec(0usize..=3, 1..=3)) {
            let mut widths = widths;
            if widths.len() % 2 == 1 {
                widths.push(1);
            }
            let maps = widths.iter().map(|&w| AnswerMap::constant(BitString::zeros(w))).collect();
            let p = SimultaneousProtocol::new(1, maps, Referee::function(|_| false)).unwrap();
            let parity = ParityReferee::new(widths.clone(), vec![0; widths.len()], false).unwrap();
            let c = compile::<f64>(&p, &parity).unwrap();
            prop_assert_eq!(c.quantum().qcost().answer_qubits, p.cost());
        }
    }
}
