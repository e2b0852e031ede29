//! Boolean input matrices, forehead views and the Generalized Inner Product.
//!
//! Row `i` is player `i`'s input `x_i`; entry `(i, j)` is the `j`-th bit of `x_i`.
//! Player and column indices are 0-based throughout the API. The text format and the
//! CLI speak 1-based player numbers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::bits::BitString;
use crate::error::{NofError, Result};

/// Largest `k * n` that exhaustive enumeration will accept (2^24 inputs).
pub const ENUMERATION_CAP: usize = 24;

fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

fn last_word_mask(n: usize) -> u64 {
    match n % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// The `k x n` boolean input, rows packed into machine words.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InputMatrix {
    k: usize,
    n: usize,
    rows: Vec<Vec<u64>>,
}

impl InputMatrix {
    pub fn zeros(k: usize, n: usize) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(NofError::Shape(format!("need k >= 1 and n >= 1, got {k}x{n}")));
        }
        Ok(Self { k, n, rows: vec![vec![0; words_for(n)]; k] })
    }

    pub fn ones(k: usize, n: usize) -> Result<Self> {
        let mut m = Self::zeros(k, n)?;
        for i in 0..k {
            m.fill_row(i, true);
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let k = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(k, n)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(NofError::Shape(format!(
                    "row {} has {} bits, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &b) in row.iter().enumerate() {
                m.set(i, j, b);
            }
        }
        Ok(m)
    }

    /// The `index`-th matrix in enumeration order: bit `i * n + j` of `index` is entry `(i, j)`.
    pub fn from_index(k: usize, n: usize, index: u64) -> Result<Self> {
        if k * n > 64 {
            return Err(NofError::EnumerationCap { kn: k * n, cap: 64 });
        }
        let mut m = Self::zeros(k, n)?;
        let mask = last_word_mask(n);
        for i in 0..k {
            m.rows[i][0] = (index >> (i * n)) & mask;
        }
        Ok(m)
    }

    /// All `2^{kn}` matrices, refusing beyond [`ENUMERATION_CAP`].
    pub fn enumerate(k: usize, n: usize) -> Result<impl Iterator<Item = InputMatrix>> {
        let total = Self::enumeration_size(k, n)?;
        Ok((0..total).map(move |idx| Self::from_index(k, n, idx).expect("shape checked")))
    }

    /// Number of inputs of shape `k x n`, or the cap error.
    pub fn enumeration_size(k: usize, n: usize) -> Result<u64> {
        if k == 0 || n == 0 {
            return Err(NofError::Shape(format!("need k >= 1 and n >= 1, got {k}x{n}")));
        }
        if k * n > ENUMERATION_CAP {
            return Err(NofError::EnumerationCap { kn: k * n, cap: ENUMERATION_CAP });
        }
        Ok(1u64 << (k * n))
    }

    pub fn random<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(k, n)?;
        let mask = last_word_mask(n);
        let words = words_for(n);
        for row in &mut m.rows {
            for (w, word) in row.iter_mut().enumerate() {
                *word = rng.gen::<u64>();
                if w + 1 == words {
                    *word &= mask;
                }
            }
        }
        Ok(m)
    }

    pub fn players(&self) -> usize {
        self.k
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        (self.rows[row][col / 64] >> (col % 64)) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize, bit: bool) {
        let word = &mut self.rows[row][col / 64];
        if bit {
            *word |= 1 << (col % 64);
        } else {
            *word &= !(1 << (col % 64));
        }
    }

    fn fill_row(&mut self, row: usize, bit: bool) {
        let words = words_for(self.n);
        let mask = last_word_mask(self.n);
        for (w, word) in self.rows[row].iter_mut().enumerate() {
            *word = if bit { if w + 1 == words { mask } else { u64::MAX } } else { 0 };
        }
    }

    /// Packed words of row `i`; column `j` is bit `j % 64` of word `j / 64`.
    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.rows[row]
    }

    pub fn row_bits(&self, row: usize) -> BitString {
        (0..self.n).map(|j| self.get(row, j)).collect()
    }

    /// Column `j` restricted to `rows`, first listed row as the most significant bit.
    pub fn column_pattern(&self, col: usize, rows: std::ops::Range<usize>) -> u64 {
        rows.fold(0, |acc, i| (acc << 1) | self.get(i, col) as u64)
    }

    /// Columns `range` as a new matrix.
    pub fn columns(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let mut out = Self::zeros(self.k, range.len())?;
        for i in 0..self.k {
            for (dst, j) in range.clone().enumerate() {
                out.set(i, dst, self.get(i, j));
            }
        }
        Ok(out)
    }

    /// Player `i`'s forehead view: every row except row `i`.
    pub fn forehead_view(&self, owner: usize) -> Result<ForeheadView> {
        if owner >= self.k {
            return Err(NofError::PlayerOutOfRange { index: owner, players: self.k });
        }
        let rows = self
            .rows
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != owner)
            .map(|(_, r)| r.clone())
            .collect();
        Ok(ForeheadView { owner, k: self.k, n: self.n, rows })
    }

    /// Append all-ones rows until there are `k` rows. GIP is unchanged.
    pub fn pad_to_k(&self, k: usize) -> Result<Self> {
        if k < self.k {
            return Err(NofError::Shape(format!(
                "cannot pad {} rows down to {k}",
                self.k
            )));
        }
        let mut out = self.clone();
        let ones = InputMatrix::ones(1, self.n)?.rows.remove(0);
        out.rows.resize(k, ones);
        out.k = k;
        Ok(out)
    }

    /// Drop trailing rows, keeping the first `k`.
    pub fn truncate_rows(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k {
            return Err(NofError::Shape(format!("cannot keep {k} of {} rows", self.k)));
        }
        let mut out = self.clone();
        out.rows.truncate(k);
        out.k = k;
        Ok(out)
    }
}

/// Generalized Inner Product: the parity of the number of all-ones columns.
pub fn gip_eval(m: &InputMatrix) -> bool {
    let words = words_for(m.n);
    let mask = last_word_mask(m.n);
    let mut ones = 0u32;
    for w in 0..words {
        let mut acc = if w + 1 == words { mask } else { u64::MAX };
        for row in &m.rows {
            acc &= row[w];
        }
        ones += acc.count_ones();
    }
    ones % 2 == 1
}

impl fmt::Display for InputMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.k {
            writeln!(f, "{}", self.row_bits(i))?;
        }
        Ok(())
    }
}

impl fmt::Debug for InputMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = (0..self.k).map(|i| self.row_bits(i).to_string()).collect();
        write!(f, "InputMatrix[{}]", rows.join(","))
    }
}

impl FromStr for InputMatrix {
    type Err = NofError;

    /// `k` lines of `n` characters from `{0,1}`; blank lines are ignored.
    fn from_str(s: &str) -> Result<Self> {
        let rows = s
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| l.parse::<BitString>().map(|b| b.bits().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Err(NofError::Parse("matrix file has no rows".into()));
        }
        Self::from_rows(&rows).map_err(|e| NofError::Parse(e.to_string()))
    }
}

/// What player `owner` sees: the other `k - 1` rows in ascending order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ForeheadView {
    owner: usize,
    k: usize,
    n: usize,
    rows: Vec<Vec<u64>>,
}

impl ForeheadView {
    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn players(&self) -> usize {
        self.k
    }

    pub fn width(&self) -> usize {
        self.n
    }

    /// The visible rows, in ascending original order.
    pub fn visible_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.k).filter(move |&i| i != self.owner)
    }

    fn slot(&self, row: usize) -> Option<usize> {
        match row.cmp(&self.owner) {
            std::cmp::Ordering::Less => Some(row),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater if row < self.k => Some(row - 1),
            std::cmp::Ordering::Greater => None,
        }
    }

    /// Packed words of original row `row`, or `None` for the owner's own row.
    pub fn row_words(&self, row: usize) -> Option<&[u64]> {
        self.slot(row).map(|s| self.rows[s].as_slice())
    }

    pub fn bit(&self, row: usize, col: usize) -> Option<bool> {
        self.row_words(row).map(|r| (r[col / 64] >> (col % 64)) & 1 == 1)
    }

    /// Visible rows concatenated, first bit most significant. Used to key truth tables.
    pub fn index(&self) -> u64 {
        debug_assert!((self.k - 1) * self.n <= 64);
        let mut acc = 0u64;
        for row in &self.rows {
            for col in 0..self.n {
                acc = (acc << 1) | ((row[col / 64] >> (col % 64)) & 1);
            }
        }
        acc
    }

    /// Build the view of `owner` from its table index (inverse of [`ForeheadView::index`]).
    pub fn from_index(owner: usize, k: usize, n: usize, index: u64) -> Result<Self> {
        if owner >= k {
            return Err(NofError::PlayerOutOfRange { index: owner, players: k });
        }
        let mut full = InputMatrix::zeros(k, n)?;
        let len = (k - 1) * n;
        let mut pos = 0;
        for row in (0..k).filter(|&r| r != owner) {
            for col in 0..n {
                full.set(row, col, (index >> (len - 1 - pos)) & 1 == 1);
                pos += 1;
            }
        }
        full.forehead_view(owner)
    }

    /// Width of [`ForeheadView::to_bits`] for `k` players and rows of `n` bits.
    pub fn encoded_width(k: usize, n: usize) -> usize {
        seat_bits(k) + (k - 1) * n
    }

    /// Register encoding: the owner's seat number followed by the visible rows.
    pub fn to_bits(&self) -> BitString {
        let mut out = BitString::from_u64(self.owner as u64, seat_bits(self.k));
        for row in &self.rows {
            for col in 0..self.n {
                out.push((row[col / 64] >> (col % 64)) & 1 == 1);
            }
        }
        out
    }

    /// Decode [`ForeheadView::to_bits`].
    pub fn from_bits(k: usize, n: usize, bits: &BitString) -> Result<Self> {
        let seat_width = seat_bits(k);
        if bits.len() != Self::encoded_width(k, n) {
            return Err(NofError::Shape(format!(
                "view encoding has {} bits, expected {}",
                bits.len(),
                Self::encoded_width(k, n)
            )));
        }
        let owner = bits.slice(0, seat_width).to_u64() as usize;
        if owner >= k {
            return Err(NofError::PlayerOutOfRange { index: owner, players: k });
        }
        let mut full = InputMatrix::zeros(k, n)?;
        let mut pos = seat_width;
        for row in (0..k).filter(|&r| r != owner) {
            for col in 0..n {
                full.set(row, col, bits.get(pos));
                pos += 1;
            }
        }
        full.forehead_view(owner)
    }
}

impl fmt::Debug for ForeheadView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ForeheadView(owner={}, bits={})", self.owner, self.to_bits())
    }
}

/// Bits needed to name one of `k` seats (at least one).
pub fn seat_bits(k: usize) -> usize {
    (usize::BITS - k.saturating_sub(1).leading_zeros()).max(1) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(text: &str) -> InputMatrix {
        text.parse().unwrap()
    }

    /// Independent per-column loop.
    fn gip_oracle(m: &InputMatrix) -> bool {
        let mut count = 0;
        for j in 0..m.width() {
            if (0..m.players()).all(|i| m.get(i, j)) {
                count += 1;
            }
        }
        count % 2 == 1
    }

    #[test]
    fn gip_examples() {
        assert!(gip_eval(&InputMatrix::ones(3, 3).unwrap()));
        assert!(!gip_eval(&m("101\n000\n111")));
        assert!(!gip_eval(&m("101\n111")));
    }

    #[test]
    fn forehead_views() {
        let mat = m("10\n01\n11");
        let v = mat.forehead_view(0).unwrap();
        assert_eq!(v.visible_rows().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(v.row_words(0), None);
        let v = mat.forehead_view(1).unwrap();
        assert_eq!(v.row_words(0).unwrap(), mat.row_words(0));
        assert_eq!(v.row_words(2).unwrap(), mat.row_words(2));
        let v = mat.forehead_view(2).unwrap();
        assert_eq!(v.visible_rows().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(v.index(), 0b1001);
        assert!(matches!(
            mat.forehead_view(3),
            Err(NofError::PlayerOutOfRange { index: 3, players: 3 })
        ));
        let two = m("1\n0");
        assert_eq!(two.forehead_view(0).unwrap().visible_rows().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn view_index_round_trip() {
        for idx in 0..64 {
            let mat = InputMatrix::from_index(3, 3, idx * 7).unwrap();
            for owner in 0..3 {
                let v = mat.forehead_view(owner).unwrap();
                assert_eq!(ForeheadView::from_index(owner, 3, 3, v.index()).unwrap(), v);
                assert_eq!(ForeheadView::from_bits(3, 3, &v.to_bits()).unwrap(), v);
            }
        }
    }

    #[test]
    fn padding_examples() {
        let one = m("10");
        let padded = one.pad_to_k(3).unwrap();
        assert_eq!(padded, m("10\n11\n11"));
        assert!(gip_eval(&padded));
        assert!(gip_eval(&one));
        assert_eq!(one.pad_to_k(1).unwrap(), one);
        let zeros = m("000\n000");
        assert!(!gip_eval(&zeros.pad_to_k(4).unwrap()));
        assert!(padded.pad_to_k(2).is_err());
    }

    #[test]
    fn padding_is_gip_preserving_exhaustively() {
        for k in 1..=5 {
            for n in 1..=4 {
                for mat in InputMatrix::enumerate(k, n).unwrap() {
                    assert_eq!(gip_eval(&mat.pad_to_k(k + 2).unwrap()), gip_eval(&mat));
                }
            }
        }
    }

    #[test]
    fn parser_rejects_ragged_and_bad_chars() {
        assert!("101\n11".parse::<InputMatrix>().is_err());
        assert!("1x1".parse::<InputMatrix>().is_err());
        assert!("".parse::<InputMatrix>().is_err());
        assert_eq!(m("101\n011\n").to_string(), "101\n011\n");
    }

    #[test]
    fn enumeration_cap() {
        assert!(matches!(
            InputMatrix::enumerate(5, 5),
            Err(NofError::EnumerationCap { kn: 25, cap: 24 })
        ));
        assert_eq!(InputMatrix::enumerate(2, 2).unwrap().count(), 16);
    }

    #[test]
    fn seat_bits_values() {
        assert_eq!(seat_bits(1), 1);
        assert_eq!(seat_bits(2), 1);
        assert_eq!(seat_bits(3), 2);
        assert_eq!(seat_bits(4), 2);
        assert_eq!(seat_bits(5), 3);
    }

    fn arb_matrix() -> impl Strategy<Value = InputMatrix> {
        (1usize..6, 1usize..130, any::<u64>()).prop_map(|(k, n, seed)| {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            InputMatrix::random(k, n, &mut rng).unwrap()
        })
    }

    proptest! {
        #[test]
        fn gip_matches_column_loop(mat in arb_matrix()) {
            prop_assert_eq!(gip_eval(&mat), gip_oracle(&mat));
        }

        #[test]
        fn gip_invariant_under_column_permutation(mat in arb_matrix(), shift in 0usize..200) {
            let n = mat.width();
            let mut rotated = mat.clone();
            for i in 0..mat.players() {
                for j in 0..n {
                    rotated.set(i, (j + shift) % n, mat.get(i, j));
                }
            }
            prop_assert_eq!(gip_eval(&rotated), gip_eval(&mat));
        }

        #[test]
        fn text_round_trip(mat in arb_matrix()) {
            prop_assert_eq!(mat.to_string().parse::<InputMatrix>().unwrap(), mat);
        }
    }
}
