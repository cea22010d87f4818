//! Balls-into-bins math for sizing the spare and bounding the error rates.
//!
//! Binomial probabilities use the saddle-point expansion of Loader (2000):
//! the PMF is built from Stirling-series corrections and a deviance term, so
//! it keeps full relative precision for `n` in the billions. Tail sums start
//! at the index nearest the mode's far side and walk outward with the PMF
//! ratio recurrence, accumulated with Neumaier summation.

use std::f64::consts::PI;

use crate::error::AnalysisError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(n!) - [(n + 1/2) ln n - n + ln sqrt(2 pi)]`.
fn stirlerr(n: f64) -> f64 {
    if n <= 30.0 {
        let mut log_fact = 0.0;
        let mut i = 2.0;
        while i <= n {
            log_fact += f64::ln(i);
            i += 1.0;
        }
        return log_fact - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// Deviance term `x ln(x / np) + np - x`, accurate when `x` is near `np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        let mut j = 1.0;
        loop {
            ej *= v2;
            let next = s + ej / (2.0 * j + 1.0);
            if next == s {
                return s;
            }
            s = next;
            j += 1.0;
        }
    }
    x * (x / np).ln() + np - x
}

fn pmf_raw(n: u64, p: f64, j: u64) -> f64 {
    let q = 1.0 - p;
    if p == 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if j == n { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if j == 0 {
        return (nf * (-p).ln_1p()).exp();
    }
    if j == n {
        return (nf * p.ln()).exp();
    }
    let x = j as f64;
    let lc = stirlerr(nf) - stirlerr(x) - stirlerr(nf - x) - bd0(x, nf * p) - bd0(nf - x, nf * q);
    let lf = (2.0 * PI).ln() + x.ln() + (-x / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `floor((n + 1) p)`, clamped to `[0, n]`.
fn mode(n: u64, p: f64) -> u64 {
    (((n as f64 + 1.0) * p).floor() as u64).min(n)
}

/// `sum_{i <= j} w(i) pmf(i)` for `j` below the mode, walking downward.
fn lower_tail(n: u64, p: f64, j: u64, w: impl Fn(u64) -> f64) -> f64 {
    let ratio = (1.0 - p) / p;
    let mut acc = Neumaier::default();
    let mut term = pmf_raw(n, p, j);
    let mut i = j;
    loop {
        acc.add(w(i) * term);
        if i == 0 || term == 0.0 || term * n as f64 <= acc.total().abs() * 1e-18 {
            break;
        }
        term *= i as f64 / (n - i + 1) as f64 * ratio;
        i -= 1;
    }
    acc.total()
}

/// `sum_{i >= j} w(i) pmf(i)` for `j` above the mode, walking upward.
fn upper_tail(n: u64, p: f64, j: u64, w: impl Fn(u64) -> f64) -> f64 {
    if j > n {
        return 0.0;
    }
    let ratio = p / (1.0 - p);
    let mut acc = Neumaier::default();
    let mut term = pmf_raw(n, p, j);
    let mut i = j;
    loop {
        acc.add(w(i) * term);
        if i == n || term == 0.0 || term * n as f64 <= acc.total().abs() * 1e-18 {
            break;
        }
        term *= (n - i) as f64 / (i + 1) as f64 * ratio;
        i += 1;
    }
    acc.total()
}

fn check_p(p: f64) -> Result<(), AnalysisError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(AnalysisError::Probability(p))
    }
}

fn check_index(n: u64, j: u64) -> Result<(), AnalysisError> {
    if j <= n {
        Ok(())
    } else {
        Err(AnalysisError::IndexOutOfRange { n, j })
    }
}

/// `Pr[Bin(n, p) = j]`.
pub fn binom_pmf(n: u64, p: f64, j: u64) -> Result<f64, AnalysisError> {
    check_p(p)?;
    check_index(n, j)?;
    Ok(pmf_raw(n, p, j))
}

fn cdf_raw(n: u64, p: f64, j: u64) -> f64 {
    if j >= n || p == 0.0 {
        return 1.0;
    }
    if p == 1.0 {
        return 0.0;
    }
    if j < mode(n, p) {
        lower_tail(n, p, j, |_| 1.0).min(1.0)
    } else {
        (1.0 - upper_tail(n, p, j + 1, |_| 1.0)).max(0.0)
    }
}

fn sf_raw(n: u64, p: f64, j: u64) -> f64 {
    if j >= n || p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    if j < mode(n, p) {
        (1.0 - lower_tail(n, p, j, |_| 1.0)).max(0.0)
    } else {
        upper_tail(n, p, j + 1, |_| 1.0).min(1.0)
    }
}

/// `Pr[Bin(n, p) <= j]`.
pub fn binom_cdf(n: u64, p: f64, j: u64) -> Result<f64, AnalysisError> {
    check_p(p)?;
    check_index(n, j)?;
    Ok(cdf_raw(n, p, j))
}

/// `Pr[Bin(n, p) > j]`.
pub fn binom_sf(n: u64, p: f64, j: u64) -> Result<f64, AnalysisError> {
    check_p(p)?;
    check_index(n, j)?;
    Ok(sf_raw(n, p, j))
}

/// `E[max(Bin(n, p) - k, 0)]`, summed over whichever side of `k` lies away
/// from the mode.
fn truncated_excess(n: u64, p: f64, k: u64) -> f64 {
    if k >= n {
        return 0.0;
    }
    let kf = k as f64;
    if k + 1 >= mode(n, p) {
        upper_tail(n, p, k + 1, |i| (i - k) as f64)
    } else {
        // E[(B-k)+] = E[B] - k + E[(k-B)+]
        n as f64 * p - kf + lower_tail(n, p, k, |i| (k - i) as f64)
    }
}

/// Expected number of balls forwarded to the spare when `n` balls are thrown
/// into `m` bins of capacity `k`: `m * E[max(Bin(n, 1/m) - k, 0)]`.
///
/// Valid for any bin count. Equivalent to
/// `n * Pr[Bin(n-1, p) >= k] - m * k * Pr[Bin(n, p) > k]`.
pub fn expected_spare_exact(n: u64, m: u64, k: u64) -> Result<f64, AnalysisError> {
    if m == 0 {
        return Err(AnalysisError::Domain("bin count must be positive"));
    }
    if k == 0 {
        return Err(AnalysisError::Domain("bin capacity must be positive"));
    }
    Ok(m as f64 * truncated_excess(n, 1.0 / m as f64, k))
}

/// Closed form for the fully loaded table (`p = k/n`) and its cap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedForm {
    /// `n (1 - p) Pr[Bin(n, p) = k]`.
    pub expected: f64,
    /// `n / sqrt(2 pi k)`.
    pub cap: f64,
}

/// Expected spare occupancy when `m = n/k`, and the `n/sqrt(2 pi k)` cap.
pub fn expected_spare_closed(n: u64, k: u64) -> Result<ClosedForm, AnalysisError> {
    if k == 0 || k > n {
        return Err(AnalysisError::Domain("closed form needs 1 <= k <= n"));
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    Ok(ClosedForm {
        expected: nf * (1.0 - p) * pmf_raw(n, p, k),
        cap: nf / (2.0 * PI * k as f64).sqrt(),
    })
}

/// Robbins-Stirling bracket around `Pr[Bin(n, p) = k]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StirlingEnvelope {
    pub t0: f64,
    pub t1: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `lower = exp(t0)/sqrt(2 pi k (1-p))`, `upper = exp(t1)/sqrt(2 pi k (1-p))`;
/// at `p = k/n` these strictly bracket the PMF at `k`.
pub fn stirling_envelope(n: u64, p: f64, k: u64) -> Result<StirlingEnvelope, AnalysisError> {
    check_p(p)?;
    if k == 0 || k >= n {
        return Err(AnalysisError::Domain("envelope needs 0 < k < n"));
    }
    let (nf, kf) = (n as f64, k as f64);
    let rest = nf - kf;
    let t0 = 1.0 / (12.0 * nf + 1.0) - (1.0 / (12.0 * kf) + 1.0 / (12.0 * rest));
    let t1 = 1.0 / (12.0 * nf) - (1.0 / (12.0 * kf + 1.0) + 1.0 / (12.0 * rest + 1.0));
    let base = (2.0 * PI * kf * (1.0 - p)).sqrt();
    Ok(StirlingEnvelope {
        t0,
        t1,
        lower: t0.exp() / base,
        upper: t1.exp() / base,
    })
}

/// Probability that the spare receives more than `(1 + delta) E[X]` balls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FailureBound {
    pub cantelli: f64,
    pub hoeffding: f64,
    pub min: f64,
    /// False when `n < 5k` or `k < 20`; the values are then not guaranteed.
    pub in_regime: bool,
}

pub fn failure_bound(n: u64, k: u64, delta: f64) -> FailureBound {
    let (nf, kf) = (n as f64, k as f64);
    let p = kf / nf;
    let m = nf / kf;
    let d2 = delta * delta;
    let clamp = |v: f64| if v.is_nan() { 1.0 } else { v.clamp(0.0, 1.0) };
    let cantelli = clamp(2.0 * PI * kf / (d2 * 0.99 * nf));
    let hoeffding = clamp((-d2 * m * 0.99 * (1.0 - p) / (PI * kf)).exp());
    FailureBound {
        cantelli,
        hoeffding,
        min: cantelli.min(hoeffding),
        in_regime: k >= 20 && n >= 5 * k,
    }
}

/// Recommended spare size `n' = ceil(1.1 E[X])`.
pub fn spare_capacity(n: u64, m: u64, k: u64) -> Result<u64, AnalysisError> {
    Ok((1.1 * expected_spare_exact(n, m, k)?).ceil() as u64)
}

/// `alpha k / s + eps_spare / sqrt(2 pi k)`.
pub fn fpr_bound(alpha: f64, k: u64, s: u64, eps_spare: f64) -> f64 {
    alpha * k as f64 / s as f64 + eps_spare / (2.0 * PI * k as f64).sqrt()
}

/// Probability that a query reaches the spare:
/// `min(Pr[Bin(n, 1/m) = k + 1], 1/sqrt(2 pi k))`.
pub fn spare_access_bound(n: u64, m: u64, k: u64) -> Result<f64, AnalysisError> {
    if m == 0 {
        return Err(AnalysisError::Domain("bin count must be positive"));
    }
    let gamma = 1.0 / (2.0 * PI * k as f64).sqrt();
    let pmf = if k + 1 > n { 0.0 } else { pmf_raw(n, 1.0 / m as f64, k + 1) };
    Ok(pmf.min(gamma))
}

/// Exact probability that a query for a key outside the set reaches the
/// spare. The query's mini-fingerprint falls above the `k`-th smallest of the
/// bin's `B` with probability `(B - k + 1)/(B + 1)` once `B > k`; averaging
/// over `B ~ Bin(n, p)` gives `(E[max(B' - k, 0)] - Pr[B' = k + 1]) / ((n + 1) p)`
/// with `B' ~ Bin(n + 1, p)`.
pub fn negative_spare_access_exact(n: u64, m: u64, k: u64) -> Result<f64, AnalysisError> {
    if m == 0 {
        return Err(AnalysisError::Domain("bin count must be positive"));
    }
    let p = 1.0 / m as f64;
    let excess = truncated_excess(n + 1, p, k) - pmf_raw(n + 1, p, k + 1);
    Ok(excess / ((n + 1) as f64 * p))
}

/// Every analytic quantity for one configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundsResult {
    pub expected_spare: f64,
    pub spare_capacity: u64,
    pub delta: f64,
    pub cantelli: f64,
    pub hoeffding: f64,
    pub failure_bound: f64,
    pub failure_in_regime: bool,
    pub t0: f64,
    pub t1: f64,
    pub fpr_bound: f64,
    pub spare_access_bound: f64,
}

impl BoundsResult {
    /// `s` is the mini-fingerprint range and `eps_spare` the spare's FPR.
    pub fn compute(
        n: u64,
        m: u64,
        k: u64,
        s: u64,
        delta: f64,
        eps_spare: f64,
    ) -> Result<Self, AnalysisError> {
        let expected_spare = expected_spare_exact(n, m, k)?;
        let fb = failure_bound(n, k, delta);
        let env = stirling_envelope(n.max(k + 1), 1.0 / m as f64, k)?;
        let alpha = n as f64 / (m * k) as f64;
        Ok(BoundsResult {
            expected_spare,
            spare_capacity: (1.1 * expected_spare).ceil() as u64,
            delta,
            cantelli: fb.cantelli,
            hoeffding: fb.hoeffding,
            failure_bound: fb.min,
            failure_in_regime: fb.in_regime,
            t0: env.t0,
            t1: env.t1,
            fpr_bound: fpr_bound(alpha.min(1.0), k, s, eps_spare),
            spare_access_bound: spare_access_bound(n, m, k)?,
        })
    }
}
