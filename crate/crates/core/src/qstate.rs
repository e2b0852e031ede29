//! Minimal exact statevector machinery over named registers.
//!
//! Amplitudes are stored sparsely, keyed by packed basis labels, so that registers as
//! wide as a full forehead view can be carried along while only a handful of branches
//! are populated. Anything dense (measurement families, POVM elements, the character
//! basis) is limited to [`DENSE_CAP`] qubits.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::{One, Zero};

use crate::bits::BitString;
use crate::error::{NofError, Result};
use crate::scalar::Real;

/// Largest register group that dense operations accept.
pub const DENSE_CAP: usize = 20;
/// Largest number of nonzero amplitudes a state may carry.
pub const SUPPORT_CAP: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub width: usize,
    offset: usize,
}

/// Ordered named registers. Register values are integers whose bit `b` sits at label
/// position `offset + b`; as bit strings they read most significant bit first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    registers: Vec<Register>,
    total: usize,
}

impl RegisterLayout {
    pub fn new(spec: &[(&str, usize)]) -> Result<Self> {
        let mut registers: Vec<Register> = Vec::with_capacity(spec.len());
        let mut offset = 0;
        for &(name, width) in spec {
            if width == 0 {
                return Err(NofError::Layout(format!("register `{name}` has zero width")));
            }
            if registers.iter().any(|r| r.name == name) {
                return Err(NofError::Layout(format!("duplicate register `{name}`")));
            }
            registers.push(Register { name: name.to_string(), width, offset });
            offset += width;
        }
        Ok(Self { registers, total: offset })
    }

    pub fn width(&self) -> usize {
        self.total
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn register(&self, name: &str) -> Result<&Register> {
        self.registers
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| NofError::UnknownRegister(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.registers.iter().any(|r| r.name == name)
    }

    /// Layout of just the named registers, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let spec = names
            .iter()
            .map(|&n| self.register(n).map(|r| (n, r.width)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(&spec)
    }

    /// Layout without the named register.
    pub fn without(&self, name: &str) -> Result<Self> {
        self.register(name)?;
        let spec: Vec<(&str, usize)> = self
            .registers
            .iter()
            .filter(|r| r.name != name)
            .map(|r| (r.name.as_str(), r.width))
            .collect();
        Self::new(&spec)
    }

    /// Reinterpret register `name` as two registers: its `head_width` most significant
    /// bits become `head`, the remainder (if any) becomes `tail`. Labels are unchanged.
    pub fn split(&self, name: &str, head_width: usize, head: &str, tail: &str) -> Result<Self> {
        let reg = self.register(name)?.clone();
        if head_width == 0 || head_width > reg.width {
            return Err(NofError::Layout(format!(
                "cannot split {head_width} bits off `{name}` of width {}",
                reg.width
            )));
        }
        let mut registers = Vec::with_capacity(self.registers.len() + 1);
        for r in &self.registers {
            if r.name != name {
                registers.push(r.clone());
                continue;
            }
            let tail_width = reg.width - head_width;
            registers.push(Register { name: head.into(), width: head_width, offset: reg.offset + tail_width });
            if tail_width > 0 {
                registers.push(Register { name: tail.into(), width: tail_width, offset: reg.offset });
            }
        }
        let names: Vec<&str> = registers.iter().map(|r| r.name.as_str()).collect();
        if (1..names.len()).any(|i| names[..i].contains(&names[i])) {
            return Err(NofError::Layout("split introduces a duplicate register".into()));
        }
        Ok(Self { registers, total: self.total })
    }

    pub fn zero_label(&self) -> BasisLabel {
        BasisLabel(vec![0; self.total.div_ceil(64).max(1)])
    }

    /// Label with the given integer register values; unspecified registers are zero.
    pub fn label(&self, values: &[(&str, u64)]) -> Result<BasisLabel> {
        let mut label = self.zero_label();
        for &(name, v) in values {
            let reg = self.register(name)?;
            if reg.width < 64 && v >> reg.width != 0 {
                return Err(NofError::Layout(format!("value {v} does not fit register `{name}`")));
            }
            label.set(reg, v);
        }
        Ok(label)
    }

    /// Label with the given bit-string register values (for registers wider than 64 bits).
    pub fn label_bits(&self, values: &[(&str, &BitString)]) -> Result<BasisLabel> {
        let mut label = self.zero_label();
        for &(name, v) in values {
            let reg = self.register(name)?;
            if v.len() != reg.width {
                return Err(NofError::Layout(format!(
                    "{} bits given for register `{name}` of width {}",
                    v.len(),
                    reg.width
                )));
            }
            label.set_bits(reg, v);
        }
        Ok(label)
    }

    /// Copy every register of `to` out of a label of `self`.
    pub fn project(&self, label: &BasisLabel, to: &RegisterLayout) -> Result<BasisLabel> {
        let mut out = to.zero_label();
        for r in &to.registers {
            let src = self.register(&r.name)?;
            out.set_bits(r, &label.get_bits(src));
        }
        Ok(out)
    }

    /// Combined value of several registers, first listed most significant.
    fn group_value(&self, label: &BasisLabel, regs: &[&Register]) -> u64 {
        regs.iter().fold(0, |acc, r| (acc << r.width) | label.get(r))
    }

    fn set_group_value(&self, label: &mut BasisLabel, regs: &[&Register], mut value: u64) {
        for r in regs.iter().rev() {
            label.set(r, value & ((1u64 << r.width) - 1));
            value >>= r.width;
        }
    }
}

/// A computational basis state, bits packed little-endian into words.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisLabel(Vec<u64>);

impl BasisLabel {
    fn bit(&self, pos: usize) -> bool {
        (self.0[pos / 64] >> (pos % 64)) & 1 == 1
    }

    fn set_bit(&mut self, pos: usize, b: bool) {
        let w = &mut self.0[pos / 64];
        if b {
            *w |= 1 << (pos % 64);
        } else {
            *w &= !(1 << (pos % 64));
        }
    }

    /// Integer value of a register of width at most 64.
    pub fn get(&self, reg: &Register) -> u64 {
        debug_assert!(reg.width <= 64);
        (0..reg.width).fold(0, |acc, b| acc | ((self.bit(reg.offset + b) as u64) << b))
    }

    pub fn set(&mut self, reg: &Register, value: u64) {
        debug_assert!(reg.width <= 64);
        for b in 0..reg.width {
            self.set_bit(reg.offset + b, (value >> b) & 1 == 1);
        }
    }

    pub fn get_bits(&self, reg: &Register) -> BitString {
        (0..reg.width).rev().map(|b| self.bit(reg.offset + b)).collect()
    }

    pub fn set_bits(&mut self, reg: &Register, value: &BitString) {
        debug_assert_eq!(value.len(), reg.width);
        for (i, &b) in value.bits().iter().enumerate() {
            self.set_bit(reg.offset + reg.width - 1 - i, b);
        }
    }

    pub fn is_zero_in(&self, reg: &Register) -> bool {
        (0..reg.width).all(|b| !self.bit(reg.offset + b))
    }
}

impl fmt::Debug for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BasisLabel({:x?})", self.0)
    }
}

/// One outcome of a measurement, with the post-measurement state when it can occur.
#[derive(Clone, Debug)]
pub struct Outcome<T: Real> {
    pub index: usize,
    pub probability: T,
    pub state: Option<StateVector<T>>,
}

/// A normalized pure state over a [`RegisterLayout`].
#[derive(Clone, Debug)]
pub struct StateVector<T: Real> {
    layout: RegisterLayout,
    amps: BTreeMap<BasisLabel, Complex<T>>,
}

fn negligible<T: Real>(a: &Complex<T>) -> bool {
    a.norm_sqr() < T::TOLERANCE * T::TOLERANCE * T::TOLERANCE
}

impl<T: Real> StateVector<T> {
    /// `|0...0>`.
    pub fn zero(layout: RegisterLayout) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(layout.zero_label(), Complex::one());
        Self { layout, amps }
    }

    pub fn basis(layout: RegisterLayout, label: BasisLabel) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(label, Complex::one());
        Self { layout, amps }
    }

    /// Build from explicit amplitudes (duplicates add); the norm must be 1 within tolerance.
    pub fn from_amplitudes(
        layout: RegisterLayout,
        amplitudes: impl IntoIterator<Item = (BasisLabel, Complex<T>)>,
    ) -> Result<Self> {
        let mut amps: BTreeMap<BasisLabel, Complex<T>> = BTreeMap::new();
        for (l, a) in amplitudes {
            let e = amps.entry(l).or_insert_with(Complex::zero);
            *e = *e + a;
        }
        amps.retain(|_, a| !negligible(a));
        let state = Self { layout, amps };
        let norm = state.norm_sqr();
        if (norm - T::one()).abs() > T::TOLERANCE {
            return Err(NofError::NotNormalized(norm.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(state)
    }

    /// Like [`StateVector::from_amplitudes`] but rescales to unit norm first.
    pub fn normalized(
        layout: RegisterLayout,
        amplitudes: impl IntoIterator<Item = (BasisLabel, Complex<T>)>,
    ) -> Result<Self> {
        let raw: Vec<_> = amplitudes.into_iter().collect();
        let norm = raw.iter().map(|(_, a)| a.norm_sqr()).fold(T::zero(), |x, y| x + y).sqrt();
        if norm <= T::TOLERANCE {
            return Err(NofError::NotNormalized(0.0));
        }
        Self::from_amplitudes(layout, raw.into_iter().map(|(l, a)| (l, a / norm)))
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitude(&self, label: &BasisLabel) -> Complex<T> {
        self.amps.get(label).copied().unwrap_or_else(Complex::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BasisLabel, &Complex<T>)> {
        self.amps.iter()
    }

    pub fn support_size(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.values().map(Complex::norm_sqr).fold(T::zero(), |a, b| a + b)
    }

    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amps
            .iter()
            .map(|(l, a)| a.conj() * other.amplitude(l))
            .fold(Complex::zero(), |x, y| x + y)
    }

    /// Same amplitudes under a reinterpreting layout (see [`RegisterLayout::split`]).
    pub fn with_layout(mut self, layout: RegisterLayout) -> Result<Self> {
        if layout.width() != self.layout.width() {
            return Err(NofError::Layout("relabeling must keep the total width".into()));
        }
        self.layout = layout;
        Ok(self)
    }

    /// Apply `|l> -> phase(l) |map(l)>` on the support. The map must be injective on the
    /// support and the phases unit-modulus.
    pub fn apply_basis_map<F>(&self, map: F) -> Result<Self>
    where
        F: Fn(&BasisLabel) -> Result<(BasisLabel, Complex<T>)>,
    {
        let mut amps = BTreeMap::new();
        for (l, a) in &self.amps {
            let (target, phase) = map(l)?;
            if (phase.norm_sqr() - T::one()).abs() > T::TOLERANCE {
                return Err(NofError::NonInjective);
            }
            if amps.insert(target, *a * phase).is_some() {
                return Err(NofError::NonInjective);
            }
        }
        Ok(Self { layout: self.layout.clone(), amps })
    }

    /// Remove a register that holds `|0>` on every branch.
    pub fn drop_register(&self, name: &str) -> Result<Self> {
        let reg = self.layout.register(name)?;
        let layout = self.layout.without(name)?;
        let mut amps = BTreeMap::new();
        for (l, a) in &self.amps {
            if !l.is_zero_in(reg) {
                return Err(NofError::Layout(format!("register `{name}` is not cleared")));
            }
            amps.insert(self.layout.project(l, &layout)?, *a);
        }
        Ok(Self { layout, amps })
    }

    /// Group amplitudes by the value of `regs` and by everything else.
    fn grouped(&self, regs: &[&Register]) -> BTreeMap<BasisLabel, Vec<(u64, Complex<T>)>> {
        let mut groups: BTreeMap<BasisLabel, Vec<(u64, Complex<T>)>> = BTreeMap::new();
        for (l, a) in &self.amps {
            let value = self.layout.group_value(l, regs);
            let mut rest = l.clone();
            self.layout.set_group_value(&mut rest, regs, 0);
            groups.entry(rest).or_default().push((value, *a));
        }
        groups
    }

    fn dense_registers(&self, names: &[&str]) -> Result<(Vec<&Register>, usize)> {
        let regs = names.iter().map(|n| self.layout.register(n)).collect::<Result<Vec<_>>>()?;
        let width: usize = regs.iter().map(|r| r.width).sum();
        if width > DENSE_CAP {
            return Err(NofError::DimensionCap { width, cap: DENSE_CAP });
        }
        Ok((regs, width))
    }

    /// Projective measurement of `registers` in the orthonormal basis `family` (each vector
    /// dense over the combined register value, first listed register most significant).
    pub fn measure_projective(&self, registers: &[&str], family: &[Vec<Complex<T>>]) -> Result<Vec<Outcome<T>>> {
        let (regs, width) = self.dense_registers(registers)?;
        check_orthonormal_basis(family, 1usize << width)?;
        let groups = self.grouped(&regs);
        family
            .iter()
            .enumerate()
            .map(|(index, vector)| self.project_onto(&regs, &groups, vector, index))
            .collect()
    }

    fn project_onto(
        &self,
        regs: &[&Register],
        groups: &BTreeMap<BasisLabel, Vec<(u64, Complex<T>)>>,
        vector: &[Complex<T>],
        index: usize,
    ) -> Result<Outcome<T>> {
        let mut rest_amps = Vec::new();
        let mut probability = T::zero();
        for (rest, entries) in groups {
            let amp = entries
                .iter()
                .map(|&(v, a)| vector[v as usize].conj() * a)
                .fold(Complex::zero(), |x, y| x + y);
            probability = probability + amp.norm_sqr();
            rest_amps.push((rest, amp));
        }
        let state = if probability > T::TOLERANCE {
            let scale = probability.sqrt();
            let mut amps = BTreeMap::new();
            for (rest, amp) in rest_amps {
                if negligible(&amp) {
                    continue;
                }
                for (v, &c) in vector.iter().enumerate() {
                    if negligible(&c) {
                        continue;
                    }
                    let mut label = rest.clone();
                    self.layout.set_group_value(&mut label, regs, v as u64);
                    amps.insert(label, c * amp / scale);
                }
                if amps.len() > SUPPORT_CAP {
                    return Err(NofError::DimensionCap { width: amps.len(), cap: SUPPORT_CAP });
                }
            }
            Some(Self { layout: self.layout.clone(), amps })
        } else {
            None
        };
        Ok(Outcome { index, probability, state })
    }

    /// Probability of projecting onto one normalized vector and the collapsed state.
    pub fn collapse(&self, registers: &[&str], vector: &[Complex<T>]) -> Result<(T, Option<Self>)> {
        let (regs, width) = self.dense_registers(registers)?;
        if vector.len() != 1 << width {
            return Err(NofError::NotOrthonormal(format!(
                "vector has {} entries, register space has {}",
                vector.len(),
                1usize << width
            )));
        }
        let norm: T = vector.iter().map(Complex::norm_sqr).fold(T::zero(), |a, b| a + b);
        if (norm - T::one()).abs() > T::TOLERANCE {
            return Err(NofError::NotOrthonormal("vector is not normalized".into()));
        }
        let groups = self.grouped(&regs);
        let out = self.project_onto(&regs, &groups, vector, 0)?;
        Ok((out.probability, out.state))
    }

    /// Measure `register` in the character basis `|chi_T> = 2^{-t/2} sum_a (-1)^{T.a} |a>`.
    pub fn measure_fourier_basis(&self, register: &str) -> Result<Vec<Outcome<T>>> {
        let (regs, width) = self.dense_registers(&[register])?;
        let dim = 1usize << width;
        let scale = T::from_f64((-(width as f64) / 2.0).exp2());
        // Transformed amplitudes per rest-group: amp[T] = <chi_T| psi_rest>.
        let mut transformed: Vec<(BasisLabel, Vec<Complex<T>>)> = Vec::new();
        for (rest, entries) in self.grouped(&regs) {
            let mut dense = vec![Complex::zero(); dim];
            for (v, a) in entries {
                dense[v as usize] = a;
            }
            complex_walsh_hadamard(&mut dense);
            dense.iter_mut().for_each(|a| *a = *a * scale);
            transformed.push((rest, dense));
        }
        let character = |t: usize| -> Vec<Complex<T>> {
            (0..dim)
                .map(|a| {
                    let sign = if (t & a).count_ones() % 2 == 1 { -T::one() } else { T::one() };
                    Complex::new(sign * scale, T::zero())
                })
                .collect()
        };
        (0..dim)
            .map(|t| {
                let probability = transformed.iter().map(|(_, d)| d[t].norm_sqr()).fold(T::zero(), |a, b| a + b);
                let state = if probability > T::TOLERANCE {
                    let norm = probability.sqrt();
                    let chi = character(t);
                    let mut amps = BTreeMap::new();
                    for (rest, d) in &transformed {
                        if negligible(&d[t]) {
                            continue;
                        }
                        for (v, c) in chi.iter().enumerate() {
                            let mut label = rest.clone();
                            regs[0..1].iter().for_each(|r| label.set(r, v as u64));
                            amps.insert(label, *c * d[t] / norm);
                        }
                    }
                    Some(Self { layout: self.layout.clone(), amps })
                } else {
                    None
                };
                Ok(Outcome { index: t, probability, state })
            })
            .collect()
    }

    /// Distribution of a computational-basis measurement of one register (any width).
    pub fn register_distribution(&self, name: &str) -> Result<Vec<(BitString, T)>> {
        let reg = self.layout.register(name)?;
        let mut dist: BTreeMap<BitString, T> = BTreeMap::new();
        for (l, a) in &self.amps {
            let e = dist.entry(l.get_bits(reg)).or_insert_with(T::zero);
            *e = *e + a.norm_sqr();
        }
        Ok(dist.into_iter().collect())
    }

    /// Outcome probabilities `<psi|E_i|psi>` of a POVM acting on some registers.
    pub fn apply_povm(&self, povm: &Povm<T>) -> Result<Vec<T>> {
        let names: Vec<&str> = povm.registers.iter().map(String::as_str).collect();
        let (regs, width) = self.dense_registers(&names)?;
        if povm.dim() != 1 << width {
            return Err(NofError::InvalidPovm(format!(
                "elements act on dimension {}, registers span {}",
                povm.dim(),
                1usize << width
            )));
        }
        let groups = self.grouped(&regs);
        let probs: Vec<T> = povm
            .elements
            .iter()
            .map(|e| {
                groups
                    .values()
                    .map(|entries| {
                        let mut acc = Complex::zero();
                        for &(r, ar) in entries {
                            for &(c, ac) in entries {
                                acc = acc + ar.conj() * e.get(r as usize, c as usize) * ac;
                            }
                        }
                        acc.re
                    })
                    .fold(T::zero(), |a, b| a + b)
            })
            .collect();
        Ok(probs)
    }

    /// Reduced density matrix on `keep`, restricted to its support.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityMatrix<T>> {
        let kept = self.layout.select(keep)?;
        let rest_names: Vec<&str> = self
            .layout
            .registers
            .iter()
            .map(|r| r.name.as_str())
            .filter(|n| !keep.contains(n))
            .collect();
        let rest_layout = if rest_names.is_empty() { None } else { Some(self.layout.select(&rest_names)?) };
        let mut groups: BTreeMap<BasisLabel, Vec<(BasisLabel, Complex<T>)>> = BTreeMap::new();
        for (l, a) in &self.amps {
            let k = self.layout.project(l, &kept)?;
            let r = match &rest_layout {
                Some(rl) => self.layout.project(l, rl)?,
                None => BasisLabel(vec![0]),
            };
            groups.entry(r).or_default().push((k, *a));
        }
        let mut basis: Vec<BasisLabel> = groups.values().flatten().map(|(k, _)| k.clone()).collect();
        basis.sort();
        basis.dedup();
        let pos: BTreeMap<&BasisLabel, usize> = basis.iter().enumerate().map(|(i, l)| (l, i)).collect();
        let mut matrix = Operator::zeros(basis.len());
        for entries in groups.values() {
            for (k1, a1) in entries {
                for (k2, a2) in entries {
                    let (i, j) = (pos[k1], pos[k2]);
                    matrix.set(i, j, matrix.get(i, j) + *a1 * a2.conj());
                }
            }
        }
        Ok(DensityMatrix { layout: kept, basis, matrix })
    }
}

fn complex_walsh_hadamard<T: Real>(data: &mut [Complex<T>]) {
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

fn check_orthonormal_basis<T: Real>(family: &[Vec<Complex<T>>], dim: usize) -> Result<()> {
    if family.len() != dim {
        return Err(NofError::NotOrthonormal(format!("{} vectors for dimension {dim}", family.len())));
    }
    if let Some(v) = family.iter().find(|v| v.len() != dim) {
        return Err(NofError::NotOrthonormal(format!("vector of length {} in dimension {dim}", v.len())));
    }
    for (i, u) in family.iter().enumerate() {
        for (j, v) in family.iter().enumerate().skip(i) {
            let ip: Complex<T> = u.iter().zip(v).map(|(a, b)| a.conj() * b).fold(Complex::zero(), |x, y| x + y);
            let expected = if i == j { T::one() } else { T::zero() };
            if (ip.re - expected).abs() > T::TOLERANCE || ip.im.abs() > T::TOLERANCE {
                return Err(NofError::NotOrthonormal(format!("<v{i}|v{j}> = {ip}")));
            }
        }
    }
    Ok(())
}

/// The computational basis of a `dim`-dimensional register group.
pub fn computational_basis<T: Real>(dim: usize) -> Vec<Vec<Complex<T>>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { Complex::one() } else { Complex::zero() }).collect())
        .collect()
}

/// Basis with `(|lo> + |hi>)/sqrt2` first, `(|lo> - |hi>)/sqrt2` second, and the remaining
/// computational states after.
pub fn plus_minus_basis<T: Real>(dim: usize, lo: usize, hi: usize) -> Result<Vec<Vec<Complex<T>>>> {
    if lo == hi || lo >= dim || hi >= dim {
        return Err(NofError::NotOrthonormal(format!("bad pair ({lo}, {hi}) in dimension {dim}")));
    }
    let r = T::FRAC_1_SQRT_2();
    let mut plus = vec![Complex::zero(); dim];
    let mut minus = vec![Complex::zero(); dim];
    plus[lo] = Complex::new(r, T::zero());
    plus[hi] = Complex::new(r, T::zero());
    minus[lo] = Complex::new(r, T::zero());
    minus[hi] = Complex::new(-r, T::zero());
    let mut family = vec![plus, minus];
    family.extend(computational_basis::<T>(dim).into_iter().enumerate().filter(|&(i, _)| i != lo && i != hi).map(|(_, v)| v));
    Ok(family)
}

/// Dense square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator<T: Real> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Operator<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![Complex::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        (0..dim).for_each(|i| m.set(i, i, Complex::one()));
        m
    }

    pub fn scaled_identity(dim: usize, scale: T) -> Self {
        let mut m = Self::identity(dim);
        m.data.iter_mut().for_each(|a| *a = *a * scale);
        m
    }

    /// `|v><v|`.
    pub fn projector(v: &[Complex<T>]) -> Self {
        Self::outer(v, v)
    }

    /// `|u><v|`.
    pub fn outer(u: &[Complex<T>], v: &[Complex<T>]) -> Self {
        let dim = u.len();
        let mut m = Self::zeros(dim);
        for (i, a) in u.iter().enumerate() {
            for (j, b) in v.iter().enumerate() {
                m.set(i, j, *a * b.conj());
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex<T>) {
        self.data[i * self.dim + j] = v;
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| *a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| *a - b).collect() }
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).map(|i| self.get(i, i)).fold(Complex::zero(), |a, b| a + b)
    }

    pub fn is_hermitian(&self) -> bool {
        (0..self.dim).all(|i| {
            (0..self.dim).all(|j| (self.get(i, j) - self.get(j, i).conj()).norm() <= T::TOLERANCE)
        })
    }

    fn to_nalgebra(&self) -> DMatrix<Complex<f64>> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            let c = self.get(i, j);
            Complex::new(c.re.to_f64().unwrap_or(f64::NAN), c.im.to_f64().unwrap_or(f64::NAN))
        })
    }

    /// Eigen-decomposition of a Hermitian operator (in `f64`), eigenvalues ascending.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, Vec<Vec<Complex<f64>>>) {
        let eig = self.to_nalgebra().symmetric_eigen();
        let mut pairs: Vec<(f64, Vec<Complex<f64>>)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, eig.eigenvectors.column(i).iter().copied().collect()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.hermitian_eigen().0
    }
}

/// A POVM on a group of registers.
#[derive(Clone, Debug)]
pub struct Povm<T: Real> {
    registers: Vec<String>,
    elements: Vec<Operator<T>>,
}

impl<T: Real> Povm<T> {
    /// Validates that every element is Hermitian PSD and that they sum to the identity.
    pub fn new(registers: &[&str], elements: Vec<Operator<T>>) -> Result<Self> {
        let dim = elements.first().map(Operator::dim).ok_or_else(|| NofError::InvalidPovm("no elements".into()))?;
        let tol = T::TOLERANCE.to_f64().unwrap_or(1e-9);
        let mut sum = Operator::zeros(dim);
        for (i, e) in elements.iter().enumerate() {
            if e.dim() != dim {
                return Err(NofError::InvalidPovm(format!("element {i} has dimension {}", e.dim())));
            }
            if !e.is_hermitian() {
                return Err(NofError::InvalidPovm(format!("element {i} is not Hermitian")));
            }
            if let Some(&min) = e.eigenvalues().first() {
                if min < -tol {
                    return Err(NofError::InvalidPovm(format!("element {i} has eigenvalue {min}")));
                }
            }
            sum = sum.add(e);
        }
        let id = Operator::identity(dim);
        if sum.sub(&id).data.iter().any(|d| d.norm() > T::TOLERANCE) {
            return Err(NofError::InvalidPovm("elements do not sum to the identity".into()));
        }
        Ok(Self { registers: registers.iter().map(|s| s.to_string()).collect(), elements })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn elements(&self) -> &[Operator<T>] {
        &self.elements
    }

    pub fn registers(&self) -> &[String] {
        &self.registers
    }
}

/// A density matrix over the kept registers, restricted to its support basis.
#[derive(Clone, Debug)]
pub struct DensityMatrix<T: Real> {
    layout: RegisterLayout,
    basis: Vec<BasisLabel>,
    matrix: Operator<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// `sum_i p_i |l_i><l_i|` (duplicate labels add).
    pub fn classical_mixture(layout: RegisterLayout, mixture: &[(T, BasisLabel)]) -> Self {
        let mut basis: Vec<BasisLabel> = mixture.iter().map(|(_, l)| l.clone()).collect();
        basis.sort();
        basis.dedup();
        let mut matrix = Operator::zeros(basis.len());
        for (p, l) in mixture {
            let i = basis.binary_search(l).expect("present");
            matrix.set(i, i, matrix.get(i, i) + Complex::new(*p, T::zero()));
        }
        Self { layout, basis, matrix }
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn basis(&self) -> &[BasisLabel] {
        &self.basis
    }

    pub fn entry(&self, row: &BasisLabel, col: &BasisLabel) -> Complex<T> {
        match (self.basis.binary_search(row), self.basis.binary_search(col)) {
            (Ok(i), Ok(j)) => self.matrix.get(i, j),
            _ => Complex::zero(),
        }
    }

    pub fn trace(&self) -> T {
        self.matrix.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.eigenvalues()
    }

    /// `1/2 ||self - other||_1`.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        if self.layout != other.layout {
            return Err(NofError::Layout("density matrices over different registers".into()));
        }
        let mut basis: Vec<BasisLabel> = self.basis.iter().chain(&other.basis).cloned().collect();
        basis.sort();
        basis.dedup();
        let mut diff = Operator::<T>::zeros(basis.len());
        for (i, r) in basis.iter().enumerate() {
            for (j, c) in basis.iter().enumerate() {
                diff.set(i, j, self.entry(r, c) - other.entry(r, c));
            }
        }
        Ok(diff.eigenvalues().iter().map(|l| l.abs()).sum::<f64>() / 2.0)
    }
}
