//! Cost of the quantum GIP protocol against the classical √n lower bound, which is quoted
//! and never measured.

use nof::gip::{grolmusz_cost, quantum_gip_success};
use nof::scalar::format_rational;
use nof::{build_quantum_gip, InputMatrix, Rational};
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Inputs above this many matrix bits are costed but not simulated.
pub const SIMULATION_LIMIT: usize = 4096;
const EXHAUSTIVE_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub n_requested: u64,
    pub n: u64,
    pub k: usize,
    /// Preamble bits plus one simulated answer bit per paired seat; equals `2k - 1`.
    pub quantum_cost: usize,
    /// Cost of the classical protocol being simulated, for comparison.
    pub grolmusz_cost: usize,
    pub classical_bits: usize,
    pub answer_qubits: usize,
    pub workspace_qubits: usize,
    #[serde(rename = "cited lower bound")]
    pub cited_lower_bound: f64,
    /// Inputs actually simulated; zero at sizes where only the cost is computed.
    pub simulated_inputs: u64,
    /// Smallest probability of the correct GIP value over the simulated inputs.
    pub worst_success: String,
}

/// Nearest `2^{k-1} - 1` with `k` odd and at least 3; ties go to the smaller `n`.
pub fn adjust_n(n: u64) -> (u64, usize) {
    (3..64usize)
        .step_by(2)
        .map(|k| ((1u64 << (k - 1)) - 1, k))
        .min_by_key(|&(m, _)| (m.abs_diff(n), m))
        .expect("candidate list is nonempty")
}

pub fn separation_table(ns: &[u64], samples: u64, seed: u64) -> Result<Vec<SeparationRow>> {
    ns.iter().map(|&requested| separation_row(requested, samples, seed)).collect()
}

fn separation_row(requested: u64, samples: u64, seed: u64) -> Result<SeparationRow> {
    let (n, k) = adjust_n(requested);
    let width = n as usize;
    let q = build_quantum_gip::<f64>(k, width)?;
    let cost = q.qcost();
    let bits = k * width;
    let (simulated, worst) = if bits <= EXHAUSTIVE_LIMIT {
        let total = InputMatrix::enumeration_size(k, width)?;
        let worst = (0..total)
            .into_par_iter()
            .map(|i| quantum_gip_success(&q, &InputMatrix::from_index(k, width, i)?))
            .try_reduce(Rational::one, |a, b| Ok(a.min(b)))?;
        (total, worst)
    } else if bits <= SIMULATION_LIMIT && samples > 0 {
        let worst = nof::classical::sampled_inputs(k, width, samples, seed)
            .map(|m| quantum_gip_success(&q, &m))
            .try_reduce(Rational::one, |a, b| Ok(a.min(b)))?;
        (samples, worst)
    } else {
        (0, Rational::zero())
    };
    Ok(SeparationRow {
        n_requested: requested,
        n,
        k,
        quantum_cost: cost.message_units,
        grolmusz_cost: grolmusz_cost(k, width),
        classical_bits: cost.classical_bits,
        answer_qubits: cost.answer_qubits,
        workspace_qubits: cost.workspace_qubits,
        cited_lower_bound: (n as f64).sqrt(),
        simulated_inputs: simulated,
        worst_success: if simulated == 0 { String::new() } else { format_rational(&worst) },
    })
}

pub fn write_csv<W: std::io::Write>(rows: &[SeparationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| crate::error::HarnessError::io("csv output", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjusts_to_odd_k() {
        assert_eq!(adjust_n(3), (3, 3));
        assert_eq!(adjust_n(15), (15, 5));
        assert_eq!(adjust_n(7), (3, 3));
        assert_eq!(adjust_n(10), (15, 5));
        assert_eq!(adjust_n(65535), (65535, 17));
        assert_eq!(adjust_n(1), (3, 3));
    }

    #[test]
    fn costs_follow_2k_minus_1() {
        let rows = separation_table(&[3, 15, 255, 65535], 0, 0).unwrap();
        let costs: Vec<_> = rows.iter().map(|r| (r.k, r.quantum_cost, r.grolmusz_cost)).collect();
        assert_eq!(costs, vec![(3, 5, 5), (5, 9, 9), (9, 17, 17), (17, 33, 33)]);
        assert_eq!(rows[0].simulated_inputs, 512);
        assert_eq!(rows[0].worst_success, "1");
        assert_eq!(rows[3].simulated_inputs, 0);
        assert!((rows[2].cited_lower_bound - 15.968719).abs() < 1e-6);
    }
}
