//! A contrario statistics for histogram bins: binomial tail probabilities,
//! number-of-false-alarms scores, and the exact / closed-form clamping
//! thresholds derived from them.
//!
//! The null model treats a descriptor's M samples as i.i.d. uniform over its
//! L bins. A bin holding k of those samples is scored by
//! NFA = tests · P[Bin(M, 1/L) ≥ k]; bins with NFA below ε are too full to
//! be noise. The smallest such k is the exact clamping threshold; a
//! closed-form approximation follows from a large-deviation lower bound on
//! the tail (valid under the Slud conditions checked by
//! [`slud_conditions_hold`]).

use crate::descriptor::HistogramGrid;
use crate::special::ln_betainc_reg;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AContrarioError {
    #[error("probability must lie in (0,1), got {0}")]
    ProbabilityOutOfRange(f64),
    #[error("tail query needs 0 <= k <= M, got k={k}, m={m}")]
    CountOutOfRange { k: f64, m: f64 },
    #[error("negative or non-finite input: {0}")]
    BadInput(f64),
    #[error("test count must be >= 1, got {0}")]
    BadTestCount(f64),
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
}

/// Arguments of one binomial upper-tail evaluation: P[Bin(M, p) ≥ k].
///
/// M may be fractional (descriptor masses are weighted sums); the tail is
/// then the regularized-incomplete-beta continuation, which coincides with
/// the pmf sum at integer M and k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailQuery {
    pub m: f64,
    pub k: f64,
    pub p: f64,
}

impl TailQuery {
    pub fn new(m: f64, k: f64, p: f64) -> Self {
        Self { m, k, p }
    }

    fn validate(&self) -> Result<(), AContrarioError> {
        if !self.m.is_finite() || self.m < 0.0 || !self.k.is_finite() || self.k < 0.0 {
            return Err(AContrarioError::BadInput(if self.m.is_finite() && self.m >= 0.0 {
                self.k
            } else {
                self.m
            }));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(AContrarioError::ProbabilityOutOfRange(self.p));
        }
        if self.k > self.m {
            return Err(AContrarioError::CountOutOfRange { k: self.k, m: self.m });
        }
        Ok(())
    }
}

/// How many statistical tests back an NFA score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestCountMode {
    /// Count axis-aligned bin rectangles of the grid: the set of candidate
    /// structures a clamping decision implicitly searches.
    Rectangular,
    /// Fixed externally supplied test count.
    Explicit(f64),
}

/// Configuration of the a contrario decision: the ε meaningfulness level
/// and how the test count is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AContrarioConfig {
    pub epsilon: f64,
    pub test_count_mode: TestCountMode,
}

impl Default for AContrarioConfig {
    fn default() -> Self {
        Self { epsilon: 1.0, test_count_mode: TestCountMode::Rectangular }
    }
}

impl AContrarioConfig {
    pub fn validate(&self) -> Result<(), AContrarioError> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(AContrarioError::BadEpsilon(self.epsilon));
        }
        if let TestCountMode::Explicit(n) = self.test_count_mode {
            if !n.is_finite() || n < 1.0 {
                return Err(AContrarioError::BadTestCount(n));
            }
        }
        Ok(())
    }

    /// Resolve the effective test count for a grid.
    pub fn resolve_tests(&self, grid: &HistogramGrid) -> f64 {
        match self.test_count_mode {
            TestCountMode::Rectangular => n_rect(grid),
            TestCountMode::Explicit(n) => n,
        }
    }

    /// ε-meaningfulness decision for one bin count: NFA(q) < ε.
    pub fn is_meaningful(&self, tests: f64, q: TailQuery) -> Result<bool, AContrarioError> {
        self.validate()?;
        if !tests.is_finite() || tests < 1.0 {
            return Err(AContrarioError::BadTestCount(tests));
        }
        q.validate()?;
        Ok(tests.ln() + ln_binomial_tail_unchecked(q) < self.epsilon.ln())
    }
}

/// ln P[Bin(M, p) ≥ k].
///
/// Sign-exact for k ≥ 1: the true tail is strictly below 1, and the
/// returned log is strictly negative even where the linear value rounds
/// to 1 (counts far below the mean of a large-M binomial).
pub fn ln_binomial_tail(q: TailQuery) -> Result<f64, AContrarioError> {
    q.validate()?;
    Ok(ln_binomial_tail_unchecked(q))
}

fn ln_binomial_tail_unchecked(q: TailQuery) -> f64 {
    if q.k <= 0.0 {
        return 0.0;
    }
    if q.k == q.m {
        // P[X ≥ M] = p^M; shortcut keeps the saturation check exact.
        return q.m * q.p.ln();
    }
    // P[X ≥ k] = I_p(k, M − k + 1).
    ln_betainc_reg(q.k, q.m - q.k + 1.0, q.p)
}

/// P[Bin(M, p) ≥ k] in linear domain.
pub fn binomial_tail(q: TailQuery) -> Result<f64, AContrarioError> {
    Ok(ln_binomial_tail(q)?.exp())
}

/// Number of false alarms: tests · P[Bin(M, p) ≥ k].
pub fn nfa(tests: f64, q: TailQuery) -> Result<f64, AContrarioError> {
    if !tests.is_finite() || tests < 1.0 {
        return Err(AContrarioError::BadTestCount(tests));
    }
    Ok(tests * binomial_tail(q)?)
}

/// Number of axis-aligned bin rectangles in a grid:
/// n(x)·n(y)·n(θ)·(n(x)+1)·(n(y)+1)·(n(θ)+1) / 8.
pub fn n_rect(grid: &HistogramGrid) -> f64 {
    let nx = grid.n_x as f64;
    let ny = grid.n_y as f64;
    let nt = grid.n_theta as f64;
    nx * ny * nt * (nx + 1.0) * (ny + 1.0) * (nt + 1.0) / 8.0
}

/// Result of the exact threshold search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactThreshold {
    /// Smallest integer count whose NFA is below ε (⌈M⌉ when saturated).
    pub value: u64,
    /// True when even k = ⌈M⌉ is not meaningful; clamping at the returned
    /// value is then a no-op.
    pub saturated: bool,
}

/// Smallest integer k with tests · P[Bin(M, p) ≥ k] < ε.
///
/// The tail is non-increasing in k, so the predicate is monotone and the
/// minimum is found by bisection over [0, ⌈M⌉]. If no count qualifies the
/// search saturates at ⌈M⌉.
pub fn exact_threshold(
    cfg: &AContrarioConfig,
    tests: f64,
    m: f64,
    p: f64,
) -> Result<ExactThreshold, AContrarioError> {
    cfg.validate()?;
    if !tests.is_finite() || tests < 1.0 {
        return Err(AContrarioError::BadTestCount(tests));
    }
    if !m.is_finite() || m < 0.0 {
        return Err(AContrarioError::BadInput(m));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(AContrarioError::ProbabilityOutOfRange(p));
    }
    let ln_tests = tests.ln();
    let ln_eps = cfg.epsilon.ln();
    let top = m.ceil() as u64;
    let meaningful = |k: u64| -> bool {
        let kf = (k as f64).min(m);
        ln_tests + ln_binomial_tail_unchecked(TailQuery::new(m, kf, p)) < ln_eps
    };
    if !meaningful(top) {
        return Ok(ExactThreshold { value: top, saturated: true });
    }
    // Bisection invariant: meaningful(hi), !meaningful(lo − 1) via lo = 0
    // sentinel handling (k = 0 has tail 1, meaningful only when ε > tests).
    let mut lo = 0u64;
    let mut hi = top;
    if meaningful(0) {
        return Ok(ExactThreshold { value: 0, saturated: false });
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if meaningful(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ExactThreshold { value: hi, saturated: false })
}

/// Closed-form threshold M·p + α·sqrt(M·p·(1−p)) with α = sqrt(ln tests).
pub fn approx_threshold(tests: f64, m: f64, p: f64) -> Result<f64, AContrarioError> {
    if !tests.is_finite() || tests < 1.0 {
        return Err(AContrarioError::BadTestCount(tests));
    }
    if !m.is_finite() || m < 0.0 {
        return Err(AContrarioError::BadInput(m));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(AContrarioError::ProbabilityOutOfRange(p));
    }
    let alpha = tests.ln().sqrt();
    Ok(m * p + alpha * (m * p * (1.0 - p)).sqrt())
}

/// Validity region of the large-deviation lower bound behind
/// [`approx_threshold`]: (a) p ≤ 1/4 and p ≤ r, or (b) p ≤ r ≤ 1−p,
/// where r is the tested rate k/M.
pub fn slud_conditions_hold(p: f64, r: f64) -> bool {
    debug_assert!(p > 0.0 && p < 1.0, "p must lie in (0,1)");
    debug_assert!((0.0..=1.0).contains(&r), "r must lie in [0,1]");
    (p <= 0.25 && p <= r) || (p <= r && r <= 1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::HistogramGrid;

    fn grid(nx: usize, ny: usize, nt: usize) -> HistogramGrid {
        HistogramGrid::new(nx, ny, nt, 12.0, 12.0).unwrap()
    }

    /// Independent route: upper-tail by recursive pmf log-summation.
    fn oracle_ln_tail(m: u64, k: u64, p: f64) -> f64 {
        assert!(k <= m);
        if k == 0 {
            return 0.0;
        }
        let (lnp, lnq) = (p.ln(), (-p).ln_1p());
        let mut ln_pmf = m as f64 * lnq;
        let mut terms = Vec::new();
        for j in 0..=m {
            if j >= k {
                terms.push(ln_pmf);
            }
            if j < m {
                ln_pmf += ((m - j) as f64 / (j + 1) as f64).ln() + lnp - lnq;
            }
        }
        let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
    }

    #[test]
    fn tail_full_range_is_one() {
        let t = binomial_tail(TailQuery::new(10.0, 0.0, 0.1)).unwrap();
        assert_eq!(t, 1.0);
    }

    #[test]
    fn tail_hand_values() {
        // P[Bin(4, 1/2) ≥ 2] = 11/16; P[Bin(10, 1/2) ≥ 10] = 2^−10.
        let t = binomial_tail(TailQuery::new(4.0, 2.0, 0.5)).unwrap();
        assert!((t - 0.6875).abs() < 1e-12);
        let t = binomial_tail(TailQuery::new(10.0, 10.0, 0.5)).unwrap();
        assert!((t - 9.765_625e-4).abs() < 1e-16);
    }

    #[test]
    fn tail_rejects_bad_domains() {
        assert!(binomial_tail(TailQuery::new(10.0, 11.0, 0.5)).is_err());
        assert!(binomial_tail(TailQuery::new(10.0, 1.0, 0.0)).is_err());
        assert!(binomial_tail(TailQuery::new(10.0, 1.0, 1.0)).is_err());
        assert!(binomial_tail(TailQuery::new(-1.0, 0.0, 0.5)).is_err());
        assert!(binomial_tail(TailQuery::new(10.0, -2.0, 0.5)).is_err());
    }

    #[test]
    fn tail_matches_pmf_summation() {
        // Spot grid; the full randomized sweep lives in the acceptance suite.
        for &(m, p) in &[(50u64, 0.125), (500, 1.0 / 128.0), (1999, 0.25)] {
            for &k in &[0u64, 1, m / 4, m / 2, m - 1, m] {
                let got = binomial_tail(TailQuery::new(m as f64, k as f64, p)).unwrap();
                let want = oracle_ln_tail(m, k, p).exp();
                assert!(
                    (got - want).abs() <= 1e-10 * want.max(f64::MIN_POSITIVE),
                    "m={m} k={k} p={p}: got {got}, oracle {want}"
                );
            }
        }
    }

    #[test]
    fn tail_sign_exact_below_the_mean() {
        // True tail is 1 − (7/8)^1000, one ulp below 1; the ln must be
        // strictly negative so ε = 1, tests = 1 thresholds stay correct.
        let v = ln_binomial_tail(TailQuery::new(1000.0, 1.0, 0.125)).unwrap();
        assert!(v < 0.0);
        let v = ln_binomial_tail(TailQuery::new(5000.0, 2.0, 0.125)).unwrap();
        assert!(v < 0.0);
    }

    #[test]
    fn nfa_scales_the_tail() {
        let q = TailQuery::new(4.0, 2.0, 0.5);
        assert!((nfa(1.0, q).unwrap() - 0.6875).abs() < 1e-12);
        assert!((nfa(16.0, q).unwrap() - 11.0).abs() < 1e-11);
        // Tail 1 pins NFA to the test count.
        let q0 = TailQuery::new(9.0, 0.0, 0.2);
        assert_eq!(nfa(3600.0, q0).unwrap(), 3600.0);
        assert!(nfa(0.5, q).is_err());
    }

    #[test]
    fn n_rect_values() {
        assert_eq!(n_rect(&grid(1, 1, 1)), 1.0);
        assert_eq!(n_rect(&grid(2, 2, 2)), 27.0);
        assert_eq!(n_rect(&grid(4, 4, 8)), 3600.0);
    }

    #[test]
    fn n_rect_integral_for_integer_grids() {
        for nx in 1..=6 {
            for ny in 1..=6 {
                for nt in 1..=12 {
                    let v = n_rect(&grid(nx, ny, nt));
                    assert_eq!(v.fract(), 0.0, "n_rect({nx},{ny},{nt}) = {v}");
                    assert!(v >= 1.0);
                }
            }
        }
    }

    #[test]
    fn exact_threshold_enumerated_cases() {
        let cfg = AContrarioConfig::default();
        let t = exact_threshold(&cfg, 1.0, 3.0, 0.5).unwrap();
        assert_eq!((t.value, t.saturated), (1, false));
        let t = exact_threshold(&cfg, 2.0, 3.0, 0.5).unwrap();
        assert_eq!((t.value, t.saturated), (3, false));
        // Independently computed by brute-force summation: smallest k with
        // 27 · P[Bin(100, 1/8) ≥ k] < 1 is 20 (and 20 ≥ 18.504, the
        // closed-form approximation at the same point).
        let t = exact_threshold(&cfg, 27.0, 100.0, 0.125).unwrap();
        assert_eq!((t.value, t.saturated), (20, false));
    }

    #[test]
    fn exact_threshold_saturates_on_tiny_mass() {
        let cfg = AContrarioConfig::default();
        // 3600 · p^M ≥ 1 for M = 2, p = 1/8: no count is meaningful.
        let t = exact_threshold(&cfg, 3600.0, 2.0, 0.125).unwrap();
        assert_eq!((t.value, t.saturated), (2, true));
        // Fractional mass saturates at the ceiling.
        let t = exact_threshold(&cfg, 3600.0, 2.3, 0.125).unwrap();
        assert_eq!((t.value, t.saturated), (3, true));
    }

    #[test]
    fn exact_threshold_definition_check() {
        let cfg = AContrarioConfig::default();
        for &(tests, m, p) in
            &[(27.0, 100.0, 0.125), (3600.0, 1000.0, 1.0 / 128.0), (27.0, 4999.0, 1.0 / 64.0)]
        {
            let t = exact_threshold(&cfg, tests, m, p).unwrap();
            assert!(!t.saturated);
            let at = |k: f64| tests * binomial_tail(TailQuery::new(m, k, p)).unwrap();
            assert!(at(t.value as f64) < cfg.epsilon);
            assert!(at(t.value as f64 - 1.0) >= cfg.epsilon);
        }
    }

    #[test]
    fn exact_threshold_is_one_for_a_single_test() {
        // With one test and ε = 1 any nonempty bin is already meaningful:
        // the tail at k = 1 is 1 − (1−p)^M < 1 strictly.
        let cfg = AContrarioConfig::default();
        for &(m, p) in &[(100.0, 0.125), (1000.0, 0.125), (5000.0, 1.0 / 256.0)] {
            let t = exact_threshold(&cfg, 1.0, m, p).unwrap();
            assert_eq!((t.value, t.saturated), (1, false), "m={m} p={p}");
        }
    }

    #[test]
    fn approx_threshold_values() {
        let t = approx_threshold(1.0, 1000.0, 1.0 / 128.0).unwrap();
        assert_eq!(t, 7.8125);
        let t = approx_threshold(3600.0, 1000.0, 1.0 / 128.0).unwrap();
        assert!((t - 15.779_578_251_437_423).abs() < 1e-9);
        assert!((t - 15.7799).abs() < 1e-3);
        let t = approx_threshold(27.0, 100.0, 0.125).unwrap();
        assert!((t - 18.504_016_632_382_22).abs() < 1e-9);
        assert!(approx_threshold(0.99, 100.0, 0.125).is_err());
    }

    #[test]
    fn slud_condition_cases() {
        assert!(slud_conditions_hold(1.0 / 128.0, 0.1));
        assert!(slud_conditions_hold(0.3, 0.5));
        assert!(!slud_conditions_hold(0.3, 0.1));
        // Condition (b) upper edge.
        assert!(slud_conditions_hold(0.3, 0.7));
        assert!(!slud_conditions_hold(0.3, 0.71));
    }

    #[test]
    fn approx_stays_below_exact_at_grid_scale_test_counts() {
        let cfg = AContrarioConfig::default();
        for &tests in &[27.0, 3600.0] {
            for &l in &[8.0, 64.0, 128.0, 256.0] {
                let p = 1.0 / l;
                for &m in &[100.0, 250.0, 1000.0, 2500.0, 5000.0] {
                    let approx = approx_threshold(tests, m, p).unwrap();
                    if !slud_conditions_hold(p, approx / m) {
                        continue;
                    }
                    let exact = exact_threshold(&cfg, tests, m, p).unwrap();
                    assert!(
                        approx <= exact.value as f64,
                        "tests={tests} L={l} M={m}: approx {approx} > exact {}",
                        exact.value
                    );
                }
            }
        }
    }

    #[test]
    fn approx_exceeds_exact_past_the_bound_validity() {
        // Known boundary of the ordering: with only 27 tests,
        // 27·(1 − Φ(sqrt(ln 27))) < 1, so once the binomial is close enough
        // to its normal limit the floor of the closed-form threshold is
        // already meaningful. First inversion for L = 8 sits at M = 6392.
        let cfg = AContrarioConfig::default();
        let p = 0.125;
        let approx = approx_threshold(27.0, 6392.0, p).unwrap();
        assert!(slud_conditions_hold(p, approx / 6392.0));
        let exact = exact_threshold(&cfg, 27.0, 6392.0, p).unwrap();
        assert!(approx > exact.value as f64);
    }

    #[test]
    fn tail_monotone_in_k_and_p() {
        for &(m, p) in &[(100.0, 0.125), (777.0, 0.03), (2000.0, 1.0 / 256.0)] {
            let mut prev = f64::INFINITY;
            for k in 0..=20 {
                let k = k as f64 * m / 20.0;
                let t = ln_binomial_tail(TailQuery::new(m, k, p)).unwrap();
                assert!(t <= prev + 1e-12, "k={k}");
                prev = t;
            }
        }
        for &(m, k) in &[(100.0, 20.0), (1500.0, 100.0)] {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..=30 {
                let p = i as f64 / 40.0;
                let t = ln_binomial_tail(TailQuery::new(m, k, p)).unwrap();
                assert!(t >= prev - 1e-12, "p={p}");
                prev = t;
            }
        }
    }
}
