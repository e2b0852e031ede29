//! Parameter sweeps over `(k, n)` and their CSV/JSON rows.

use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use nof::classical::sampled_inputs;
use nof::gip::{grolmusz_cost, quantum_gip_success};
use nof::scalar::format_rational;
use nof::{build_quantum_gip, gip_eval, grolmusz, verify_theorem1, ClassicalSpec, InputMatrix, NofProtocol};
use nof::{Probability, Rational, SimultaneousProtocol};
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Inclusive range written `a..b`, or a single value `a`.
pub fn parse_range(text: &str) -> Result<RangeInclusive<usize>> {
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| HarnessError::Usage(format!("bad range `{text}`")));
    let range = match text.split_once("..") {
        Some((a, b)) => parse(a)?..=parse(b.trim_start_matches('='))?,
        None => parse(text)?..=parse(text)?,
    };
    if range.is_empty() {
        return Err(HarnessError::Usage(format!("empty range `{text}`")));
    }
    Ok(range)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProtocolSelector {
    Grolmusz,
    /// Even `k` runs the `k + 1` player protocol on inputs padded with an all-ones row.
    QuantumGip,
    /// A classical spec file, compiled and checked against 1/2 + delta / 2^{3C/2}.
    Compiled(PathBuf),
}

impl FromStr for ProtocolSelector {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grolmusz" => Ok(ProtocolSelector::Grolmusz),
            "quantum-gip" => Ok(ProtocolSelector::QuantumGip),
            _ => match s.strip_prefix("compiled:") {
                Some(path) if !path.is_empty() => Ok(ProtocolSelector::Compiled(path.into())),
                _ => Err(HarnessError::Usage(format!(
                    "unknown protocol `{s}`; expected grolmusz, quantum-gip or compiled:<file>"
                ))),
            },
        }
    }
}

impl std::fmt::Display for ProtocolSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProtocolSelector::Grolmusz => f.write_str("grolmusz"),
            ProtocolSelector::QuantumGip => f.write_str("quantum-gip"),
            ProtocolSelector::Compiled(p) => write!(f, "compiled:{}", p.display()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMode {
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepConfig {
    pub k: RangeInclusive<usize>,
    pub n: RangeInclusive<usize>,
    pub protocol: ProtocolSelector,
    pub mode: SweepMode,
    /// Fill `wall_ms`. Off by default so repeated runs produce identical files.
    pub timing: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k.is_empty() || self.n.is_empty() {
            return Err(HarnessError::Usage("k and n ranges must be nonempty".into()));
        }
        if *self.k.start() < 2 || *self.n.start() < 1 {
            return Err(HarnessError::Usage("sweeps need k >= 2 and n >= 1".into()));
        }
        if let SweepMode::Sampled { samples: 0, .. } = self.mode {
            return Err(HarnessError::Usage("sampled mode needs --samples >= 1".into()));
        }
        Ok(())
    }
}

/// One sweep point. Exact probabilities are reduced fractions; `avg_success` is the same
/// value as a float.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub k: usize,
    pub n: usize,
    pub protocol: String,
    pub classical_bits: usize,
    pub answer_qubits: usize,
    pub avg_success_exact: String,
    pub avg_success: f64,
    pub worst_success: String,
    /// Empty unless the protocol carries a proven bound.
    pub bound_exact: String,
    pub wall_ms: Option<u64>,
}

/// Sum and minimum of per-input success over the inputs chosen by `mode`.
fn success_stats<F>(k: usize, n: usize, mode: SweepMode, f: F) -> Result<(Rational, Rational)>
where
    F: Fn(&InputMatrix) -> nof::Result<Rational> + Sync,
{
    let identity = || (Rational::zero(), Rational::one());
    let merge = |(s1, w1): (Rational, Rational), (s2, w2): (Rational, Rational)| -> nof::Result<_> {
        Ok((s1 + s2, if w1 < w2 { w1 } else { w2 }))
    };
    let score = |m: &InputMatrix| f(m).map(|p| (p.clone(), p));
    let (sum, worst, total) = match mode {
        SweepMode::Exhaustive => {
            let total = InputMatrix::enumeration_size(k, n)?;
            let (s, w) = (0..total)
                .into_par_iter()
                .map(|i| score(&InputMatrix::from_index(k, n, i)?))
                .try_reduce(identity, merge)?;
            (s, w, total)
        }
        SweepMode::Sampled { samples, seed } => {
            let (s, w) = sampled_inputs(k, n, samples, seed).map(|m| score(&m)).try_reduce(identity, merge)?;
            (s, w, samples)
        }
    };
    Ok((sum / Rational::from_integer(total.into()), worst))
}

fn indicator(b: bool) -> Rational {
    if b {
        Rational::one()
    } else {
        Rational::zero()
    }
}

fn row(k: usize, n: usize, protocol: String, bits: (usize, usize), stats: (Rational, Rational), bound: String) -> ResultRow {
    ResultRow {
        k,
        n,
        protocol,
        classical_bits: bits.0,
        answer_qubits: bits.1,
        avg_success_exact: format_rational(&stats.0),
        avg_success: stats.0.as_f64(),
        worst_success: format_rational(&stats.1),
        bound_exact: bound,
        wall_ms: None,
    }
}

fn point(cfg: &SweepConfig, k: usize, n: usize) -> Result<ResultRow> {
    let label = cfg.protocol.to_string();
    match &cfg.protocol {
        ProtocolSelector::Grolmusz => {
            let stats = success_stats(k, n, cfg.mode, |m| Ok(indicator(grolmusz(m)?.output == gip_eval(m))))?;
            Ok(row(k, n, label, (grolmusz_cost(k, n), 0), stats, String::new()))
        }
        ProtocolSelector::QuantumGip => {
            let players = k | 1;
            let q = build_quantum_gip::<f64>(players, n)?;
            let stats = success_stats(k, n, cfg.mode, |m| quantum_gip_success(&q, &m.pad_to_k(players)?))?;
            let cost = q.qcost();
            Ok(row(k, n, label, (cost.classical_bits, cost.answer_qubits), stats, String::new()))
        }
        ProtocolSelector::Compiled(_) => unreachable!("compiled sweeps have a single point"),
    }
}

pub(crate) fn load_classical(path: &std::path::Path) -> Result<SimultaneousProtocol> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path.display(), e))?;
    Ok(SimultaneousProtocol::from_spec(&ClassicalSpec::from_json(&text)?)?)
}

fn compiled_point(cfg: &SweepConfig, path: &std::path::Path) -> Result<ResultRow> {
    if cfg.mode != SweepMode::Exhaustive {
        return Err(HarnessError::Usage("compiled protocols are verified exhaustively; use --mode exhaustive".into()));
    }
    let src = load_classical(path)?;
    let (k, n) = (src.players(), src.input_width());
    if !cfg.k.contains(&k) || !cfg.n.contains(&n) {
        return Err(HarnessError::Usage(format!("spec has k = {k}, n = {n}, outside the requested ranges")));
    }
    let report = verify_theorem1(&src, gip_eval)?;
    let stats = (report.measured, report.worst);
    Ok(row(k, n, cfg.protocol.to_string(), (0, report.answer_qubits), stats, report.bound.to_string()))
}

/// Rows in `(k, n)` order. Each point is reduced exactly, so the result does not depend
/// on the thread count.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let timed = |f: &dyn Fn() -> Result<ResultRow>| -> Result<ResultRow> {
        let start = Instant::now();
        let mut r = f()?;
        if cfg.timing {
            r.wall_ms = Some(start.elapsed().as_millis() as u64);
        }
        Ok(r)
    };
    if let ProtocolSelector::Compiled(path) = &cfg.protocol {
        return Ok(vec![timed(&|| compiled_point(cfg, path))?]);
    }
    let mut rows = Vec::new();
    for k in cfg.k.clone() {
        for n in cfg.n.clone() {
            rows.push(timed(&|| point(cfg, k, n))?);
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "k", "n", "protocol", "classical_bits", "answer_qubits", "avg_success_exact", "avg_success",
            "worst_success", "bound_exact", "wall_ms",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io("csv output", e))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<ResultRow>, _>>()?)
}

pub fn to_json(rows: &[ResultRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}

pub fn from_json(text: &str) -> Result<Vec<ResultRow>> {
    Ok(serde_json::from_str(text)?)
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sampled(protocol: ProtocolSelector, k: &str, n: &str) -> SweepConfig {
        SweepConfig {
            k: parse_range(k).unwrap(),
            n: parse_range(n).unwrap(),
            protocol,
            mode: SweepMode::Sampled { samples: 200, seed: 7 },
            timing: false,
        }
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("3..5").unwrap(), 3..=5);
        assert_eq!(parse_range("3..=5").unwrap(), 3..=5);
        assert_eq!(parse_range("4").unwrap(), 4..=4);
        assert!(parse_range("5..3").is_err());
        assert!(parse_range("a..3").is_err());
    }

    #[test]
    fn selectors() {
        assert_eq!("grolmusz".parse::<ProtocolSelector>().unwrap(), ProtocolSelector::Grolmusz);
        assert_eq!("compiled:p.json".parse::<ProtocolSelector>().unwrap(), ProtocolSelector::Compiled("p.json".into()));
        assert!("compiled:".parse::<ProtocolSelector>().is_err());
        assert!("other".parse::<ProtocolSelector>().is_err());
    }

    #[test]
    fn grolmusz_rows_are_exact() {
        let rows = run_sweep(&sampled(ProtocolSelector::Grolmusz, "2..4", "1..7")).unwrap();
        assert_eq!(rows.len(), 21);
        for r in &rows {
            assert_eq!((r.avg_success_exact.as_str(), r.worst_success.as_str(), r.avg_success), ("1", "1", 1.0));
            let cap = (1 << (r.k - 1)) - 1;
            assert_eq!(r.classical_bits, (2 * r.k - 1) * r.n.div_ceil(cap));
            assert_eq!(r.wall_ms, None);
        }
    }

    #[test]
    fn quantum_gip_pads_even_k() {
        let mut cfg = sampled(ProtocolSelector::QuantumGip, "3..4", "2..3");
        cfg.mode = SweepMode::Exhaustive;
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.avg_success_exact == "1"));
        assert_eq!((rows[2].k, rows[2].classical_bits, rows[2].answer_qubits), (4, 5, 2));
    }

    #[test]
    fn exhaustive_cap_is_reported() {
        let mut cfg = sampled(ProtocolSelector::Grolmusz, "5", "5");
        cfg.mode = SweepMode::Exhaustive;
        let err = run_sweep(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = sampled(ProtocolSelector::Grolmusz, "3", "3");
        cfg.mode = SweepMode::Sampled { samples: 0, seed: 0 };
        assert_eq!(run_sweep(&cfg).unwrap_err().exit_code(), 1);
        let cfg = sampled(ProtocolSelector::Grolmusz, "1", "3");
        assert!(run_sweep(&cfg).is_err());
    }

    #[test]
    fn reproducible_bytes() {
        let cfg = sampled(ProtocolSelector::QuantumGip, "3..5", "3..4");
        let emit = || {
            let mut buf = Vec::new();
            write_csv(&run_sweep(&cfg).unwrap(), &mut buf).unwrap();
            buf
        };
        assert_eq!(emit(), emit());
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(to_json(&rows), to_json(&run_sweep(&cfg).unwrap()));
    }

    #[test]
    fn empty_csv_has_header() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim(),
            "k,n,protocol,classical_bits,answer_qubits,avg_success_exact,avg_success,worst_success,bound_exact,wall_ms"
        );
        assert!(read_csv(&b"k,n,protocol,classical_bits,answer_qubits,avg_success_exact,avg_success,worst_success,bound_exact,wall_ms\n"[..]).unwrap().is_empty());
    }

    #[test]
    fn malformed_csv_is_a_parse_error() {
        let err = read_csv(&b"k,n\nx,1\n"[..]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    fn arb_row() -> impl Strategy<Value = ResultRow> {
        (
            (2usize..20, 1usize..5000, "[a-z:/._-]{1,20}"),
            (0usize..100, 0usize..50),
            (0u64..1 << 40, 1u64..1 << 40),
            ("|1/2 \\+ [0-9]{1,3}/[0-9]{1,4}\\*sqrt\\(2\\)|[0-9]/[1-9]", proptest::option::of(any::<u64>())),
        )
            .prop_map(|((k, n, protocol), (classical_bits, answer_qubits), (a, b), (bound_exact, wall_ms))| {
                let (num, den) = (a.min(b), b.max(a).max(1));
                let avg = Rational::new(num.into(), den.into());
                ResultRow {
                    k,
                    n,
                    protocol,
                    classical_bits,
                    answer_qubits,
                    avg_success_exact: format_rational(&avg),
                    avg_success: avg.as_f64(),
                    worst_success: format_rational(&Rational::new((num / 2).into(), den.into())),
                    bound_exact,
                    wall_ms,
                }
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in proptest::collection::vec(arb_row(), 0..8)) {
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf).unwrap();
            prop_assert_eq!(read_csv(&buf[..]).unwrap(), rows);
        }

        #[test]
        fn json_round_trip(rows in proptest::collection::vec(arb_row(), 0..8)) {
            prop_assert_eq!(from_json(&to_json(&rows)).unwrap(), rows);
        }
    }
}
