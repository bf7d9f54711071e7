//! Capacity of the occupancy-to-count channel.
//!
//! The input is the receiver occupancy `p0` on a uniform grid over
//! `[0, p_max]`; the output is the normalized count `y = Y / (nN)`, Gaussian
//! with mean `p0` and std `p0(1 - p0)·σ0/sqrt(n)`, binned on a uniform grid.
//! Capacity and the optimal input law come from Blahut-Arimoto.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::error::{ensure, Error, Result};
use crate::kinetics::{concentration_for_probability, steady_binding_probability, KineticParams};
use crate::special::{gaussian_cdf, Tolerance};
use crate::transmitter::NodeParams;

pub const DEFAULT_INPUT_LEVELS: usize = 201;
pub const DEFAULT_OUTPUT_BINS: usize = 2001;
/// Output support padding, in conditional standard deviations at the
/// noisiest input.
pub const SUPPORT_PADDING: f64 = 4.0;
/// Half-width, in standard deviations, of the band of bins stored per row.
/// Mass beyond it is folded into the outermost stored bins.
const BAND_HALF_WIDTH: f64 = 12.0;
/// Input weights are kept above this so that no output bin loses all of its
/// probability to underflow.
const WEIGHT_FLOOR: f64 = 1e-300;

/// Default Blahut-Arimoto controls: stop when the capacity bound gap drops
/// to 1e-6 bits.
pub fn default_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-6,
        rel: 1e-12,
        max_iter: 1_000_000,
    }
}

/// Row-stochastic matrix stored as one contiguous band of columns per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    cols: usize,
    starts: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl TransitionMatrix {
    fn with_capacity(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            starts: Vec::with_capacity(rows),
            offsets: {
                let mut v = Vec::with_capacity(rows + 1);
                v.push(0);
                v
            },
            values: Vec::new(),
        }
    }

    fn push_row(&mut self, start: usize, probs: &[f64]) {
        self.starts.push(start);
        self.values.extend_from_slice(probs);
        self.offsets.push(self.values.len());
    }

    /// Builds from dense rows, each of which must sum to 1 within 1e-9.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        ensure(!rows.is_empty(), "rows", 0.0, ">= 1")?;
        let cols = rows[0].len();
        ensure(cols >= 1, "cols", 0.0, ">= 1")?;
        let mut m = Self::with_capacity(rows.len(), cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::LengthMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            ensure(row.iter().all(|&w| w >= 0.0), "transition probability", -1.0, ">= 0")?;
            let sum: f64 = row.iter().sum();
            ensure((sum - 1.0).abs() <= 1e-9, "row sum", sum, "1 +- 1e-9")?;
            // trim leading and trailing zeros
            let first = row.iter().position(|&w| w > 0.0).unwrap_or(0);
            let last = row.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            m.push_row(first, &row[first..=last]);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.starts.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// First column and stored probabilities of row `i`.
    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        (self.starts[i], &self.values[self.offsets[i]..self.offsets[i + 1]])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (start, probs) = self.row(i);
        if j < start {
            return 0.0;
        }
        probs.get(j - start).copied().unwrap_or(0.0)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }
}

/// Discretized channel from the occupancy grid to output bins.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChannel {
    pub input_levels: Vec<f64>,
    /// `K_out + 1` bin boundaries on the normalized output.
    pub output_edges: Vec<f64>,
    pub matrix: TransitionMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub capacity_bits: f64,
    pub input_distribution: Vec<f64>,
    pub iterations: usize,
    /// `max_i D(W_i || q) - I` in bits: how far the capacity can lie above
    /// `capacity_bits`.
    pub upper_bound_gap: f64,
    pub converged: bool,
}

impl CapacityResult {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.upper_bound_gap,
            })
        }
    }
}

/// One point of a capacity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityPoint {
    pub a_max: f64,
    pub p_max: f64,
    pub result: CapacityResult,
}

/// Occupancy reached at the largest allowed concentration.
pub fn p_max_from_amax(a_max: f64, k: &KineticParams) -> Result<f64> {
    ensure(a_max >= 0.0, "a_max", a_max, ">= 0")?;
    steady_binding_probability(a_max, k)
}

/// Normalized output std `p(1 - p)·σ0/sqrt(n)`.
pub fn conditional_std(p: f64, node: &NodeParams, sigma0_sq: f64) -> f64 {
    p * (1.0 - p) * libm::sqrt(sigma0_sq / node.bacteria as f64)
}

pub fn uniform_levels(count: usize, p_max: f64) -> Vec<f64> {
    let last = (count - 1) as f64;
    (0..count)
        .map(|i| if i == count - 1 { p_max } else { p_max * i as f64 / last })
        .collect()
}

pub fn build_discrete_channel(
    p_max: f64,
    k_in: usize,
    k_out: usize,
    node: &NodeParams,
    sigma0_sq: f64,
) -> Result<DiscreteChannel> {
    ensure(k_in >= 2, "k_in", k_in as f64, ">= 2")?;
    ensure(k_out >= 8, "k_out", k_out as f64, ">= 8")?;
    ensure(p_max > 0.0 && p_max <= 1.0, "p_max", p_max, "0 < p_max <= 1")?;
    ensure(sigma0_sq >= 0.0 && sigma0_sq.is_finite(), "sigma0_sq", sigma0_sq, ">= 0")?;
    node.validate()?;
    build_on_levels(uniform_levels(k_in, p_max), k_out, node, sigma0_sq)
}

/// Channel on arbitrary increasing levels in `[0, 1]`.
pub fn build_on_levels(
    levels: Vec<f64>,
    k_out: usize,
    node: &NodeParams,
    sigma0_sq: f64,
) -> Result<DiscreteChannel> {
    ensure(k_out >= 8, "k_out", k_out as f64, ">= 8")?;
    ensure(!levels.is_empty(), "levels", 0.0, "nonempty")?;
    for w in levels.windows(2) {
        ensure(w[1] > w[0], "input level", w[1], "strictly increasing")?;
    }
    ensure(levels[0] >= 0.0, "input level", levels[0], ">= 0")?;
    let top = levels[levels.len() - 1];
    ensure(top <= 1.0, "input level", top, "<= 1")?;

    let stds: Vec<f64> = levels.iter().map(|&p| conditional_std(p, node, sigma0_sq)).collect();
    let s_max = stds.iter().copied().fold(0.0, f64::max);
    let lo = -SUPPORT_PADDING * s_max;
    let hi = 1.0 + SUPPORT_PADDING * s_max;
    let width = (hi - lo) / k_out as f64;
    let edges: Vec<f64> = (0..=k_out)
        .map(|j| if j == k_out { hi } else { lo + width * j as f64 })
        .collect();
    let bin_of = |y: f64| -> usize {
        let j = libm::floor((y - lo) / width);
        if j < 0.0 {
            0
        } else if j >= k_out as f64 {
            k_out - 1
        } else {
            j as usize
        }
    };

    let mut matrix = TransitionMatrix::with_capacity(levels.len(), k_out);
    let mut row = Vec::new();
    for (&p, &s) in levels.iter().zip(&stds) {
        if s == 0.0 {
            matrix.push_row(bin_of(p), &[1.0]);
            continue;
        }
        let first = bin_of(p - BAND_HALF_WIDTH * s);
        let last = bin_of(p + BAND_HALF_WIDTH * s);
        row.clear();
        // Mass below edge first+1 goes to the first stored bin and mass above
        // edge last goes to the last one, so the row telescopes to one.
        let mut prev = 0.0;
        for j in first..last {
            let c = gaussian_cdf(edges[j + 1], p, s);
            row.push(c - prev);
            prev = c;
        }
        row.push(1.0 - prev);
        matrix.push_row(first, &row);
    }
    Ok(DiscreteChannel {
        input_levels: levels,
        output_edges: edges,
        matrix,
    })
}

/// `Σ_i W_ij ln W_ij` for every row.
fn neg_row_entropies(w: &TransitionMatrix) -> Vec<f64> {
    (0..w.rows())
        .map(|i| {
            w.row(i)
                .1
                .iter()
                .filter(|&&v| v > 0.0)
                .map(|&v| v * libm::log(v))
                .sum()
        })
        .collect()
}

fn output_law(w: &TransitionMatrix, weights: &[f64], q: &mut [f64]) {
    q.iter_mut().for_each(|v| *v = 0.0);
    for (i, &r) in weights.iter().enumerate() {
        let (start, probs) = w.row(i);
        for (qj, &wij) in q[start..].iter_mut().zip(probs) {
            *qj += r * wij;
        }
    }
}

/// `D(W_i || q)` in nats for every row, given `ln q`.
fn divergences(w: &TransitionMatrix, neg_h: &[f64], ln_q: &[f64], out: &mut [f64]) {
    for (i, d) in out.iter_mut().enumerate() {
        let (start, probs) = w.row(i);
        let cross: f64 = probs
            .iter()
            .zip(&ln_q[start..])
            .filter(|(&wij, _)| wij > 0.0)
            .map(|(&wij, &lq)| wij * lq)
            .sum();
        *d = neg_h[i] - cross;
    }
}

/// Mutual information in bits between the input law `weights` and the
/// channel output.
pub fn mutual_information(w: &TransitionMatrix, weights: &[f64]) -> Result<f64> {
    if weights.len() != w.rows() {
        return Err(Error::LengthMismatch {
            expected: w.rows(),
            found: weights.len(),
        });
    }
    let mut q = vec![0.0; w.cols()];
    output_law(w, weights, &mut q);
    let ln_q: Vec<f64> = q.iter().map(|&v| if v > 0.0 { libm::log(v) } else { 0.0 }).collect();
    let mut d = vec![0.0; w.rows()];
    divergences(w, &neg_row_entropies(w), &ln_q, &mut d);
    let nats: f64 = weights.iter().zip(&d).map(|(r, d)| r * d).sum();
    Ok((nats / LN_2).max(0.0))
}

/// One Blahut-Arimoto step as seen by a trace callback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationState {
    pub iteration: usize,
    /// Mutual information of the current input law, bits.
    pub information_bits: f64,
    pub gap_bits: f64,
}

pub fn blahut_arimoto(w: &TransitionMatrix, tol: Tolerance) -> Result<CapacityResult> {
    blahut_arimoto_traced(w, tol, |_| {})
}

/// Blahut-Arimoto from the uniform input law. Stops once the Arimoto gap
/// `max_i D(W_i || q) - I` is at most `tol.abs` bits or after `tol.max_iter`
/// iterations, in which case `converged` is false.
pub fn blahut_arimoto_traced<F>(w: &TransitionMatrix, tol: Tolerance, mut trace: F) -> Result<CapacityResult>
where
    F: FnMut(IterationState),
{
    let k = w.rows();
    ensure(k >= 1, "rows", 0.0, ">= 1")?;
    let neg_h = neg_row_entropies(w);
    let mut r = vec![1.0 / k as f64; k];
    let mut q = vec![0.0; w.cols()];
    let mut ln_q = vec![0.0; w.cols()];
    let mut d = vec![0.0; k];
    let mut iteration = 0;
    loop {
        output_law(w, &r, &mut q);
        for (l, &v) in ln_q.iter_mut().zip(&q) {
            *l = if v > 0.0 { libm::log(v) } else { 0.0 };
        }
        divergences(w, &neg_h, &ln_q, &mut d);
        let info: f64 = r.iter().zip(&d).map(|(r, d)| r * d).sum();
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let info_bits = info.max(0.0) / LN_2;
        let gap_bits = ((upper - info) / LN_2).max(0.0);
        trace(IterationState {
            iteration,
            information_bits: info_bits,
            gap_bits,
        });
        let converged = gap_bits <= tol.abs;
        if converged || iteration >= tol.max_iter {
            return Ok(CapacityResult {
                capacity_bits: info_bits,
                input_distribution: r,
                iterations: iteration,
                upper_bound_gap: gap_bits,
                converged,
            });
        }
        let mut total = 0.0;
        for (ri, &di) in r.iter_mut().zip(&d) {
            *ri = (*ri * libm::exp(di - upper)).max(WEIGHT_FLOOR);
            total += *ri;
        }
        r.iter_mut().for_each(|v| *v /= total);
        iteration += 1;
    }
}

/// Capacity with inputs limited to concentrations up to `a_max`.
///
/// `a_max = 0` leaves a single usable input and returns zero bits.
pub fn capacity_at_amax(
    a_max: f64,
    node: &NodeParams,
    sigma0_sq: f64,
    k_in: usize,
    k_out: usize,
    tol: Tolerance,
) -> Result<CapacityPoint> {
    let p_max = p_max_from_amax(a_max, &node.kinetics)?;
    if p_max == 0.0 {
        return Ok(CapacityPoint {
            a_max,
            p_max,
            result: CapacityResult {
                capacity_bits: 0.0,
                input_distribution: vec![1.0],
                iterations: 0,
                upper_bound_gap: 0.0,
                converged: true,
            },
        });
    }
    let ch = build_discrete_channel(p_max, k_in, k_out, node, sigma0_sq)?;
    Ok(CapacityPoint {
        a_max,
        p_max,
        result: blahut_arimoto(&ch.matrix, tol)?,
    })
}

pub fn capacity_vs_amax(
    grid: &[f64],
    node: &NodeParams,
    sigma0_sq: f64,
    k_in: usize,
    k_out: usize,
    tol: Tolerance,
) -> Result<Vec<CapacityPoint>> {
    check_grid(grid)?;
    grid.iter()
        .map(|&a| capacity_at_amax(a, node, sigma0_sq, k_in, k_out, tol))
        .collect()
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    ensure(!grid.is_empty(), "grid length", 0.0, ">= 1")?;
    for w in grid.windows(2) {
        ensure(w[1] > w[0], "grid point", w[1], "strictly increasing")?;
    }
    Ok(())
}

/// Concentrations `A0` corresponding to the occupancy levels.
pub fn input_concentrations(levels: &[f64], k: &KineticParams) -> Result<Vec<f64>> {
    levels.iter().map(|&p| concentration_for_probability(p, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn node(n: u32) -> NodeParams {
        NodeParams::with_relative_noise(n, KineticParams::default(), 0.1 / 3.0)
    }

    fn h2(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    fn tight() -> Tolerance {
        Tolerance { abs: 1e-9, rel: 1e-12, max_iter: 100_000 }
    }

    #[test]
    fn p_max_examples() {
        let k = KineticParams::default();
        assert_eq!(p_max_from_amax(0.0, &k).unwrap(), 0.0);
        assert!((p_max_from_amax(250.0, &k).unwrap() - 0.5).abs() < 1e-15);
        assert!((p_max_from_amax(400.0, &k).unwrap() - 0.615_385).abs() < 1e-6);
        assert!(p_max_from_amax(-1.0, &k).is_err());
    }

    #[test]
    fn noiseless_two_input_channel() {
        let w = TransitionMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = blahut_arimoto(&w, default_tolerance()).unwrap();
        assert!((r.capacity_bits - 1.0).abs() < 1e-12);
        assert!(r.converged && r.upper_bound_gap <= 1e-6);
        assert!((r.input_distribution[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn noiseless_k_input_channel_is_log2_k() {
        for k in [3usize, 5, 8, 13] {
            let rows: Vec<Vec<f64>> = (0..k)
                .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let w = TransitionMatrix::from_dense(&rows).unwrap();
            let r = blahut_arimoto(&w, default_tolerance()).unwrap();
            assert!((r.capacity_bits - (k as f64).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_symmetric_channel() {
        let e = 0.11;
        let w = TransitionMatrix::from_dense(&[vec![1.0 - e, e], vec![e, 1.0 - e]]).unwrap();
        let r = blahut_arimoto(&w, default_tolerance()).unwrap();
        assert!((r.capacity_bits - (1.0 - h2(e))).abs() < 1e-4);
        assert!((r.capacity_bits - 0.5).abs() < 1e-3);
        assert!(r.upper_bound_gap <= 1e-6);
    }

    /// Closed-form capacity of the Z channel as an asymmetric oracle.
    #[test]
    fn z_channel_matches_closed_form() {
        let f: f64 = 0.3;
        let w = TransitionMatrix::from_dense(&[vec![1.0, 0.0], vec![f, 1.0 - f]]).unwrap();
        let r = blahut_arimoto(&w, tight()).unwrap();
        let s = h2(f) / (1.0 - f);
        let closed = (1.0 + (1.0 - f) * f.powf(f / (1.0 - f))).log2();
        assert!((r.capacity_bits - closed).abs() < 1e-8);
        let p1 = 1.0 / ((1.0 - f) * (1.0 + 2f64.powf(s)));
        assert!((r.input_distribution[1] - p1).abs() < 1e-4);
    }

    #[test]
    fn useless_channel_has_zero_capacity() {
        let row = vec![0.2, 0.3, 0.5];
        let w = TransitionMatrix::from_dense(&[row.clone(), row.clone(), row]).unwrap();
        let r = blahut_arimoto(&w, default_tolerance()).unwrap();
        assert!(r.capacity_bits.abs() < 1e-12);
    }

    #[test]
    fn from_dense_rejects_bad_rows() {
        assert!(TransitionMatrix::from_dense(&[vec![0.5, 0.4]]).is_err());
        assert!(matches!(
            TransitionMatrix::from_dense(&[vec![1.0], vec![0.5, 0.5]]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn not_converged_is_reported() {
        let e = 0.11;
        let w = TransitionMatrix::from_dense(&[vec![1.0 - e, e], vec![e, 1.0 - e], vec![0.5, 0.5]]).unwrap();
        let tol = Tolerance { abs: 1e-15, rel: 1e-12, max_iter: 3 };
        let r = blahut_arimoto(&w, tol).unwrap();
        assert!(!r.converged && r.iterations == 3);
        assert!(matches!(r.require_converged(), Err(Error::NotConverged { iterations: 3, .. })));
    }

    #[test]
    fn discrete_channel_examples() {
        let nd = node(100);
        let ch = build_discrete_channel(0.5, 2, 64, &nd, 0.1).unwrap();
        assert_eq!(ch.input_levels, vec![0.0, 0.5]);
        assert_eq!(ch.output_edges.len(), 65);
        let s = conditional_std(0.5, &nd, 0.1);
        assert!((s - 0.007_906).abs() < 1e-6);
        // delta row for the zero-variance input
        let (start, probs) = ch.matrix.row(0);
        assert_eq!(probs, &[1.0]);
        assert!(ch.output_edges[start] <= 0.0 && 0.0 < ch.output_edges[start + 1]);
        for i in 0..2 {
            assert!((ch.matrix.row_sum(i) - 1.0).abs() < 1e-9);
        }
        assert!(build_discrete_channel(0.5, 1, 64, &nd, 0.1).is_err());
        assert!(build_discrete_channel(0.5, 2, 7, &nd, 0.1).is_err());
        assert!(build_discrete_channel(0.0, 2, 64, &nd, 0.1).is_err());
    }

    /// Every banded row agrees with the dense CDF-difference row computed
    /// over the full output grid.
    #[test]
    fn banded_rows_match_dense_construction() {
        let nd = node(100);
        let ch = build_discrete_channel(0.615, 21, 400, &nd, 0.1).unwrap();
        let e = &ch.output_edges;
        for (i, &p) in ch.input_levels.iter().enumerate() {
            let s = conditional_std(p, &nd, 0.1);
            if s == 0.0 {
                continue;
            }
            for j in 0..400 {
                let lo = if j == 0 { 0.0 } else { gaussian_cdf(e[j], p, s) };
                let hi = if j == 399 { 1.0 } else { gaussian_cdf(e[j + 1], p, s) };
                assert!((ch.matrix.get(i, j) - (hi - lo)).abs() < 1e-12, "row {i} bin {j}");
            }
        }
    }

    #[test]
    fn zero_amax_has_zero_capacity() {
        let p = capacity_at_amax(0.0, &node(100), 0.1, 201, 2001, default_tolerance()).unwrap();
        assert_eq!(p.result.capacity_bits, 0.0);
    }

    #[test]
    fn input_concentrations_invert_levels() {
        let k = KineticParams::default();
        let a = input_concentrations(&[0.0, 0.5, 1.0], &k).unwrap();
        assert_eq!(a[0], 0.0);
        assert!((a[1] - 250.0).abs() < 1e-9);
        assert!(a[2].is_infinite());
    }

    #[test]
    fn information_is_monotone_across_iterations() {
        let ch = build_discrete_channel(0.615, 41, 400, &node(100), 0.1).unwrap();
        let mut prev = f64::NEG_INFINITY;
        let tol = Tolerance { abs: 1e-5, rel: 1e-12, max_iter: 5000 };
        blahut_arimoto_traced(&ch.matrix, tol, |s| {
            assert!(s.information_bits >= prev - 1e-12, "iteration {}", s.iteration);
            assert!(s.gap_bits >= 0.0);
            prev = s.information_bits;
        })
        .unwrap();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn capacity_bounded_by_log_inputs(rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 4), 2..6)) {
            let dense: Vec<Vec<f64>> = rows.iter().map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|v| v / s).collect()
            }).collect();
            let w = TransitionMatrix::from_dense(&dense).unwrap();
            let r = blahut_arimoto(&w, tight()).unwrap();
            prop_assert!(r.capacity_bits >= 0.0);
            prop_assert!(r.capacity_bits <= (dense.len() as f64).log2() + 1e-12);
            let sum: f64 = r.input_distribution.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            let mi = mutual_information(&w, &r.input_distribution).unwrap();
            prop_assert!((mi - r.capacity_bits).abs() < 1e-12);
        }

        #[test]
        fn rows_are_stochastic(p_max in 0.01f64..=1.0, k_in in 2usize..30, n in 1u32..400, s0 in 0.0f64..0.5) {
            let nd = NodeParams::with_relative_noise(n, KineticParams::default(), 0.05);
            let ch = build_discrete_channel(p_max, k_in, 200, &nd, s0).unwrap();
            prop_assert_eq!(ch.input_levels[0], 0.0);
            prop_assert_eq!(ch.input_levels[k_in - 1], p_max);
            for i in 0..k_in {
                prop_assert!((ch.matrix.row_sum(i) - 1.0).abs() < 1e-9);
            }
        }
    }
}
