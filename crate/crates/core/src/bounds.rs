//! Scalar budget calculus for the approximation schemes: envelopes of the
//! Bergman-type approximants, the `delta = m^-2D` schedule, the choice of
//! `m` against the separation, and the exponent bootstrap.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Points per decade of the separation grid.
pub const GRID_PER_DECADE: usize = 40;

/// Which gradient estimate drives the third envelope term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Exponential factor `e^{m (B + 1)}`, `m ~ gamma |log t| / (3 (B + 1))`.
    Direct,
    /// Exponential factor `e^{C m^{1/(1 + gamma)}}`, `m ~ (gamma |log t| / 3C)^{1 + gamma}`.
    Improved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxSchedule {
    /// Complex dimension.
    pub n: u32,
    pub m0: u32,
    /// Sup-norm bound of the potential.
    pub b: f64,
    pub d: f64,
    /// Exponent of the integral-to-pointwise step.
    pub gamma0: f64,
    pub gamma: f64,
    /// Integrability threshold in `(0, 1/2)`.
    pub a0: f64,
    /// Envelope constants `C` and `A`.
    pub generic_c: f64,
    pub generic_a: f64,
    pub route: Route,
}

impl ApproxSchedule {
    /// Schedule built from the integrability exponent `p > 1`.
    pub fn from_p(n: u32, p: f64, b: f64, d: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid("p must exceed 1"));
        }
        let nn = f64::from(n);
        Self::build(n, p / (p + 2.0 * nn + 1.0), p / (p + 2.0 * nn + 2.0), b, d)
    }

    /// Schedule for a target exponent `gamma`, solving for `p`.
    pub fn from_gamma(n: u32, gamma: f64, b: f64, d: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid("gamma must lie in (0, 1)"));
        }
        let nn = f64::from(n);
        let p = gamma * (2.0 * nn + 2.0) / (1.0 - gamma);
        Self::build(n, p / (p + 2.0 * nn + 1.0), gamma, b, d)
    }

    fn build(n: u32, gamma0: f64, gamma: f64, b: f64, d: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(invalid("B must be nonnegative"));
        }
        if !(d >= 1.0 && d.is_finite()) {
            return Err(invalid("D must be at least 1"));
        }
        Ok(ApproxSchedule {
            n,
            m0: 2 * n + 3,
            b,
            d,
            gamma0,
            gamma,
            a0: 0.25,
            generic_c: 1.0,
            generic_a: 1.0,
            route: Route::Direct,
        })
    }

    pub fn with_constants(mut self, c: f64, a: f64) -> Result<Self> {
        if !(c > 0.0 && a > 0.0) {
            return Err(invalid("envelope constants must be positive"));
        }
        self.generic_c = c;
        self.generic_a = a;
        Ok(self)
    }

    pub fn with_a0(mut self, a0: f64) -> Result<Self> {
        if !(a0 > 0.0 && a0 < 0.5) {
            return Err(invalid("a0 must lie in (0, 1/2)"));
        }
        self.a0 = a0;
        Ok(self)
    }

    pub fn with_route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }

    /// `delta(m) = m^-2D`; `m` must exceed `m0` and satisfy `delta < a0 / m`.
    pub fn delta(&self, m: u64) -> Result<f64> {
        if m <= u64::from(self.m0) {
            return Err(Error::Precondition(format!("m = {m} must exceed m0 = {}", self.m0)));
        }
        let mf = m as f64;
        let delta = mf.powf(-2.0 * self.d);
        if !(delta < self.a0 / mf) {
            return Err(Error::Precondition(format!("delta = {delta:e} is not below a0 / m")));
        }
        Ok(delta)
    }

    /// Upper envelope `((m - m0)/m) osc + C r + C |log r| / m`.
    pub fn upper_envelope(&self, m: u64, r: f64, osc: f64) -> f64 {
        let mf = m as f64;
        let c = self.generic_c;
        (mf - f64::from(self.m0)) / mf * osc + c * r + c * r.ln().abs() / mf
    }

    /// Lower envelope `-(C + |log delta|) / (2m)`.
    pub fn lower_envelope(&self, m: u64, delta: f64) -> f64 {
        -(self.generic_c + delta.ln().abs()) / (2.0 * m as f64)
    }

    /// Gradient envelope
    /// `C + C / (m delta^1/2 r^{n+1}) exp((m - m0) osc + C (m - m0) r)`.
    pub fn gradient_envelope(&self, m: u64, delta: f64, r: f64, osc: f64) -> f64 {
        let c = self.generic_c;
        let k = m as f64 - f64::from(self.m0);
        c + c / (m as f64 * delta.sqrt() * r.powi(self.n as i32 + 1)) * (k * osc + c * k * r).exp()
    }

    /// The three terms of the weak log-continuity envelope at separation `t`.
    pub fn weak_terms(&self, t: f64, m: u64) -> Result<[f64; 3]> {
        if !(t > 0.0 && t < 0.5) {
            return Err(invalid("separation must lie in (0, 1/2)"));
        }
        let (mf, d, c) = (m as f64, self.d, self.generic_c);
        let lt = t.ln().abs();
        let gain = match self.route {
            Route::Improved => c * mf.powf(1.0 / (1.0 + self.gamma)),
            Route::Direct => mf * (self.b + 1.0),
        };
        let term1 = c * mf.powf(-self.gamma);
        let term2 = c * d * mf.powf(-2.0 * d) * lt;
        // t m^D e^{gain} t^{-A D m^{1 - 2D}}, in logs to avoid overflow
        let log3 = t.ln() + d * mf.ln() + gain + self.generic_a * d * mf.powf(1.0 - 2.0 * d) * lt;
        Ok([term1, term2, c * log3.exp()])
    }

    pub fn weak_logmod_envelope(&self, t: f64, m: u64) -> Result<f64> {
        Ok(self.weak_terms(t, m)?.iter().sum())
    }

    /// Real-valued optimum of the `m` rule, before flooring.
    pub fn choose_m_real(&self, t: f64) -> f64 {
        let lt = t.ln().abs();
        let floor = f64::from(self.m0 + 1);
        let raw = match self.route {
            Route::Improved => (self.gamma * lt / (3.0 * self.generic_c)).powf(1.0 + self.gamma),
            Route::Direct => self.gamma * lt / (3.0 * (self.b + 1.0)),
        };
        raw.max(floor)
    }

    /// `m` rule floored to an integer, never below `m0 + 1`.
    pub fn choose_m(&self, t: f64) -> u64 {
        (self.choose_m_real(t).floor() as u64).max(u64::from(self.m0) + 1)
    }
}

/// Rule of the direct route as a pure function.
pub fn choose_m(t: f64, gamma: f64, b: f64, m0: u32) -> u64 {
    let raw = (gamma * t.ln().abs() / (3.0 * (b + 1.0))).floor();
    (raw as u64).max(u64::from(m0) + 1)
}

/// One sample of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub m: u64,
    pub m_real: f64,
    pub terms: [f64; 3],
    pub envelope: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakCertificate {
    /// `max envelope(t) |log t|^gamma` over the grid.
    pub constant: f64,
    pub argmax_t: f64,
    /// Least-squares slope of `log envelope` against `log |log t|`.
    pub slope: f64,
    /// Largest ratio between the envelope at the floored `m` and at the
    /// real optimum.
    pub floor_factor: f64,
    pub rows: Vec<SweepRow>,
}

/// Log-spaced grid on `[lo, hi]` with `per_decade` points per decade.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || per_decade == 0 {
        return Err(invalid("grid needs 0 < lo < hi and a positive density"));
    }
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).round() as usize).max(1);
    Ok((0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect())
}

/// Sweep the envelope with `m = choose_m(t)` over `[t_lo, t_hi]` and
/// certify the weighted constant.
pub fn certify_weak_logmod(schedule: &ApproxSchedule, t_lo: f64, t_hi: f64) -> Result<WeakCertificate> {
    let grid = log_grid(t_lo, t_hi, GRID_PER_DECADE)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut floor_factor: f64 = 1.0;
    for &t in &grid {
        let m = schedule.choose_m(t);
        let m_real = schedule.choose_m_real(t);
        let terms = schedule.weak_terms(t, m)?;
        let envelope: f64 = terms.iter().sum();
        // envelope at the real optimum, for the flooring record
        let real = interpolate_envelope(schedule, t, m_real)?;
        floor_factor = floor_factor.max(envelope / real).max(real / envelope);
        let weighted = envelope * t.ln().abs().powf(schedule.gamma);
        rows.push(SweepRow { t, m, m_real, terms, envelope, weighted });
    }
    let (argmax, constant) =
        rows.iter().map(|r| (r.t, r.weighted)).fold((t_lo, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    if !constant.is_finite() {
        return Err(Error::Degenerate("envelope is not finite on the grid".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.t.ln().abs().ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.envelope.ln()).collect();
    Ok(WeakCertificate { constant, argmax_t: argmax, slope: fit_slope(&xs, &ys), floor_factor, rows })
}

fn interpolate_envelope(schedule: &ApproxSchedule, t: f64, m: f64) -> Result<f64> {
    let (lo, hi) = (m.floor() as u64, m.ceil() as u64);
    let a = schedule.weak_logmod_envelope(t, lo)?;
    if hi == lo {
        return Ok(a);
    }
    let b = schedule.weak_logmod_envelope(t, hi)?;
    let w = m - lo as f64;
    Ok((1.0 - w) * a + w * b)
}

/// Ordinary least-squares slope.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Write the sweep as CSV:
/// `t,m,term1,term2,term3,envelope,weighted`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "t,m,term1,term2,term3,envelope,envelope_times_logt_gamma")?;
    for r in rows {
        writeln!(
            out,
            "{:e},{},{:e},{:e},{:e},{:e},{:e}",
            r.t, r.m, r.terms[0], r.terms[1], r.terms[2], r.envelope, r.weighted
        )?;
    }
    Ok(())
}

/// Iterate `gamma -> gamma (1 + gamma)` from `start` until the value
/// exceeds `target`. The returned list starts with `start` and ends with
/// the first value above `target`.
pub fn bootstrap_exponents(start: f64, target: f64) -> Result<Vec<f64>> {
    const MAX_STEPS: usize = 100_000;
    if !(start > 0.0 && start.is_finite()) {
        return Err(invalid("initial exponent must be positive"));
    }
    if !target.is_finite() {
        return Err(invalid("target must be finite"));
    }
    let mut seq = vec![start];
    let mut g = start;
    while g <= target {
        if seq.len() > MAX_STEPS {
            return Err(Error::Degenerate("bootstrap did not reach the target".into()));
        }
        g *= 1.0 + g;
        seq.push(g);
    }
    Ok(seq)
}

/// Exponent of the stability estimate, `beta r / (n + beta (n + r))`.
pub fn stability_exponent(n: f64, beta: f64, r: f64) -> Result<f64> {
    if !(n > 0.0 && beta > 0.0 && r > 0.0) {
        return Err(invalid("n, beta and r must be positive"));
    }
    Ok(beta * r / (n + beta * (n + r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sched(n: u32, gamma: f64, b: f64, d: f64) -> ApproxSchedule {
        ApproxSchedule::from_gamma(n, gamma, b, d).unwrap()
    }

    #[test]
    fn choose_m_examples() {
        assert_eq!(choose_m(1e-30, 0.9, 2.0, 7), 8);
        assert_eq!(choose_m(0.4, 0.9, 2.0, 7), 8);
        let t = 1e-3000f64.max(f64::MIN_POSITIVE);
        let raw = 0.9 * t.ln().abs() / 9.0;
        assert_eq!(choose_m(t, 0.9, 2.0, 7), raw.floor() as u64);
        let s = sched(2, 0.9, 2.0, 2.0);
        assert_eq!(s.choose_m(1e-30), 8);
    }

    #[test]
    fn envelope_examples() {
        let s = sched(2, 0.5, 1.0, 1.0);
        assert_relative_eq!(s.lower_envelope(100, 1.0), -1.0 / 200.0);
        let d = s.delta(100).unwrap();
        assert_relative_eq!(s.lower_envelope(100, d), -(1.0 + 2.0 * 100f64.ln()) / 200.0, max_relative = 1e-14);
        let up = s.upper_envelope(10, 1e-3, 0.0);
        assert_relative_eq!(up, 1e-3 + 1e-3f64.ln().abs() / 10.0, max_relative = 1e-14);
        let up = s.upper_envelope(10, 1e-3, 0.3);
        assert_relative_eq!(up, 0.3 * 3.0 / 10.0 + 1e-3 + 1e-3f64.ln().abs() / 10.0, max_relative = 1e-14);
        let g = s.gradient_envelope(20, 1e-2, 0.1, 0.05);
        let direct = 1.0 + 1.0 / (20.0 * 0.1 * 1e-3) * (13.0f64 * 0.05 + 13.0 * 0.1).exp();
        assert_relative_eq!(g, direct, max_relative = 1e-14);
        let big = s.upper_envelope(1_000_000, (-1.0f64).exp(), 0.0);
        assert!((big - (-1.0f64).exp()).abs() < 1e-5);
    }

    #[test]
    fn gradient_growth_without_oscillation() {
        // osc = 0, delta = m^-2D: envelope - C = m^{D-1} e^{C (m - m0) r} / r^{n+1}
        let s = sched(1, 0.5, 1.0, 2.0);
        for m in [10u64, 20, 40] {
            let d = s.delta(m).unwrap();
            let g = s.gradient_envelope(m, d, 0.1, 0.0) - 1.0;
            let expected = (m as f64).powf(1.0) * ((m - 5) as f64 * 0.1).exp() / 0.1f64.powi(2);
            assert_relative_eq!(g, expected, max_relative = 1e-12);
        }
        assert!(s.gradient_envelope(10, 1e-2, 1e-30, 0.0) > 1e50);
    }

    #[test]
    fn weak_terms_examples() {
        let s = sched(1, 0.5, 1.0, 1.0);
        let [_, t2, _] = s.weak_terms(1e-6, 10).unwrap();
        assert_relative_eq!(t2, 1e-2 * 6.0 * 10f64.ln(), max_relative = 1e-12);
        assert!(s.weak_terms(0.5, 10).is_err());
        // at fixed m the second term grows without bound as t -> 0
        let [_, a2, a3] = s.weak_terms(1e-200, 10).unwrap();
        let [_, b2, b3] = s.weak_terms(1e-300, 10).unwrap();
        assert!(b2 > a2 && b3 < a3);
        assert!(s.weak_logmod_envelope(1e-300, 10).unwrap() > s.weak_logmod_envelope(1e-200, 10).unwrap());
    }

    #[test]
    fn schedule_admissibility() {
        let s = sched(2, 0.9, 2.0, 1.0);
        assert_eq!(s.m0, 7);
        assert!(s.delta(7).is_err());
        assert!(s.delta(8).is_ok());
        let p = ApproxSchedule::from_p(2, 3.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(p.gamma0, 3.0 / 8.0);
        assert_relative_eq!(p.gamma, 3.0 / 9.0);
        let back = sched(2, p.gamma, 1.0, 1.0);
        assert_relative_eq!(back.gamma0, p.gamma0, max_relative = 1e-12);
    }

    #[test]
    fn envelopes_converge_like_log_m_over_m() {
        let s = sched(1, 0.5, 1.0, 2.0);
        for m in [100u64, 1000, 10_000, 100_000] {
            let d = s.delta(m).unwrap();
            let rate = (m as f64).ln() / m as f64;
            let up = s.upper_envelope(m, 1.0 / m as f64, 0.0);
            let lo = s.lower_envelope(m, d);
            assert!(up / rate < 3.0 && -lo / rate < 3.0);
        }
    }

    #[test]
    fn weak_certificate_slope() {
        for &(g, d, b, n) in &[(0.5, 1.0, 1.0, 1), (0.9, 2.0, 2.0, 2), (0.9, 1.0, 1.0, 2)] {
            let s = sched(n, g, b, d);
            let c = certify_weak_logmod(&s, 1e-12, 1e-2).unwrap();
            assert!(c.constant.is_finite());
            assert!(c.slope <= -g + 0.05, "slope {} for {:?}", c.slope, (g, d, b, n));
            assert!(c.floor_factor.is_finite());
        }
    }

    #[test]
    fn improved_route_decays_faster_asymptotically() {
        let s = sched(1, 0.5, 1.0, 1.0).with_route(Route::Improved);
        let c = certify_weak_logmod(&s, 1e-300, 1e-100).unwrap();
        assert!(c.slope < -0.5, "slope {}", c.slope);
        assert_eq!(s.choose_m(1e-2), 6);
    }

    #[test]
    fn larger_gamma_weights_more() {
        let lo = certify_weak_logmod(&sched(1, 0.5, 1.0, 2.0).with_route(Route::Direct), 1e-12, 1e-2).unwrap();
        let hi = certify_weak_logmod(&sched(1, 0.9, 1.0, 2.0).with_route(Route::Direct), 1e-12, 1e-2).unwrap();
        assert!(hi.constant >= lo.constant);
    }

    #[test]
    fn sweep_csv_shape() {
        let c = certify_weak_logmod(&sched(1, 0.5, 1.0, 2.0), 1e-4, 1e-2).unwrap();
        assert_eq!(c.rows.len(), 81);
        let mut buf = Vec::new();
        write_sweep_csv(&c.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 82);
        assert!(text.lines().skip(1).all(|l| l.split(',').count() == 7));
    }

    #[test]
    fn bootstrap_examples() {
        assert_eq!(bootstrap_exponents(0.5, 3.0).unwrap(), vec![0.5, 0.75, 1.3125, 3.03515625]);
        assert_eq!(bootstrap_exponents(1.0, 5.0).unwrap(), vec![1.0, 2.0, 6.0]);
        assert!(bootstrap_exponents(0.0, 1.0).is_err());
        for m in [10.0, 1e3, 1e6] {
            assert!(bootstrap_exponents(0.5, m).unwrap().len() <= 61);
        }
    }

    #[test]
    fn stability_examples() {
        assert_relative_eq!(stability_exponent(2.0, 1.0, 2.0).unwrap(), 1.0 / 3.0);
        assert!(stability_exponent(2.0, 1e9, 1e9).unwrap() > 0.999);
        assert!(stability_exponent(0.0, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn bootstrap_increases(g in 0.01f64..1.0, m in 1.0f64..1e6) {
            let seq = bootstrap_exponents(g, m).unwrap();
            prop_assert!(seq.windows(2).all(|w| w[1] > w[0] && (w[1] - w[0] * (1.0 + w[0])).abs() <= 1e-15 * w[1]));
            prop_assert!(*seq.last().unwrap() > m);
        }

        #[test]
        fn stability_bounds(n in 0.5f64..10.0, beta in 0.01f64..100.0, r in 0.01f64..100.0, db in 0.0f64..1.0, dr in 0.0f64..1.0) {
            let e = stability_exponent(n, beta, r).unwrap();
            prop_assert!(e < 1.0 && e < beta * r / (n + beta * n));
            prop_assert!(stability_exponent(n, beta + db, r).unwrap() >= e);
            prop_assert!(stability_exponent(n, beta, r + dr).unwrap() >= e);
        }

        #[test]
        fn lower_envelope_monotone(m in 8u64..10_000, d in 1.0f64..3.0) {
            let s = ApproxSchedule::from_gamma(2, 0.5, 1.0, d).unwrap();
            let a = s.lower_envelope(m, (m as f64).powf(-2.0 * d));
            let b = s.lower_envelope(m + 1, ((m + 1) as f64).powf(-2.0 * d));
            prop_assert!(a < 0.0 && b >= a);
        }
    }
}
