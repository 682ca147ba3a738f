//! Numeric check of the structural assumptions A1-A6 on sampled points.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelCoefficients, SymTensor, DIM};
use crate::error::{Error, Result};
use crate::fragmentation::gauss_legendre_panels;

/// Relative slack applied to every sampled inequality.
pub const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Assumption {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
}

impl Assumption {
    pub const ALL: [Assumption; 6] = [
        Assumption::A1,
        Assumption::A2,
        Assumption::A3,
        Assumption::A4,
        Assumption::A5,
        Assumption::A6,
    ];

    pub fn describe(self) -> &'static str {
        match self {
            Assumption::A1 => "diffusion rate positive, nonincreasing, vanishing at infinity",
            Assumption::A2 => "polymerization rate bounds",
            Assumption::A3 => "fragmentation rate bounds and log-derivative envelope",
            Assumption::A4 => "uniform fragmentation kernel",
            Assumption::A5 => "growth of the averaging weight",
            Assumption::A6 => "growth, coercivity and monotonicity of the stress",
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Sampling resolution of the validator.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    /// Number of points of the geometric r-grid on `[r0, r_max]`.
    pub n_r: usize,
    pub r_max: f64,
    /// Random symmetric tensor pairs `(xi, xi~)`.
    pub n_pairs: usize,
    pub psi_tilde: Vec<f64>,
    pub velocities: Vec<[f64; 2]>,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            n_r: 512,
            r_max: 1e4,
            n_pairs: 50,
            psi_tilde: vec![0.0, 0.5, 4.0, 30.0, 100.0, 1e4],
            velocities: vec![[0.0, 0.0], [1.0, 0.0], [-3.0, 4.0], [100.0, -50.0]],
            seed: 0x5eed,
        }
    }
}

/// Worst sample of one assumption: the check with the smallest relative margin.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstSample {
    pub check: &'static str,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub assumption: Assumption,
    pub passed: bool,
    pub checks: usize,
    pub worst: Option<WorstSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub reports: Vec<AssumptionReport>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn failed(&self) -> Vec<Assumption> {
        self.reports
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.assumption)
            .collect()
    }

    pub fn get(&self, a: Assumption) -> &AssumptionReport {
        self.reports
            .iter()
            .find(|r| r.assumption == a)
            .expect("report covers every assumption")
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.reports {
            write!(
                f,
                "{} {:<4} {:>7} checks  {}",
                r.assumption,
                if r.passed { "pass" } else { "FAIL" },
                r.checks,
                r.assumption.describe()
            )?;
            if let Some(w) = &r.worst {
                write!(f, "\n     worst: {} margin {:.3e} at {}", w.check, w.margin, w.detail)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

struct Tracker {
    checks: usize,
    passed: bool,
    worst: Option<WorstSample>,
}

impl Tracker {
    fn new() -> Self {
        Tracker {
            checks: 0,
            passed: true,
            worst: None,
        }
    }

    /// Records `lhs <= rhs` with relative slack.
    fn le(&mut self, check: &'static str, lhs: f64, rhs: f64, at: impl FnOnce() -> String) {
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        self.record(check, (rhs - lhs) / scale, at);
    }

    /// Records a strict `lhs < rhs`: equality fails regardless of slack.
    fn lt(&mut self, check: &'static str, lhs: f64, rhs: f64, at: impl FnOnce() -> String) {
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        let margin = (rhs - lhs) / scale;
        self.checks += 1;
        let ok = lhs < rhs;
        if !ok {
            self.passed = false;
        }
        self.keep_worst(check, if ok { margin } else { margin.min(-0.0) }, at);
    }

    fn record(&mut self, check: &'static str, margin: f64, at: impl FnOnce() -> String) {
        self.checks += 1;
        if margin < -SLACK {
            self.passed = false;
        }
        self.keep_worst(check, margin, at);
    }

    fn keep_worst(&mut self, check: &'static str, margin: f64, at: impl FnOnce() -> String) {
        if self.worst.as_ref().is_none_or(|w| margin < w.margin) {
            self.worst = Some(WorstSample {
                check,
                margin,
                detail: at(),
            });
        }
    }

    fn fail(&mut self, check: &'static str, detail: String) {
        self.checks += 1;
        self.passed = false;
        self.keep_worst(check, f64::NEG_INFINITY, || detail);
    }

    fn finish(self, assumption: Assumption) -> AssumptionReport {
        AssumptionReport {
            assumption,
            passed: self.passed,
            checks: self.checks,
            worst: self.worst,
        }
    }
}

fn finite(name: &str, v: f64, at: impl Fn() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("{name} = {v} at {}", at())))
    }
}

fn random_tensor(rng: &mut ChaCha8Rng) -> SymTensor {
    let mag = 10f64.powf(rng.gen_range(-3.0..3.0));
    let t = SymTensor::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    let n = t.norm().max(1e-300);
    t.scale(mag / n)
}

/// Evaluates every sampled inequality of A1-A6. The result depends only on
/// the inputs (the tensor samples come from a seeded generator).
pub fn validate_coefficients(c: &ModelCoefficients, spec: &SampleSpec) -> Result<ValidationReport> {
    if !(c.r0 > 0.0) {
        return Err(Error::constraint("r0 > 0", format!("r0 = {}", c.r0)));
    }
    if spec.n_r < 2 || !(spec.r_max > c.r0) {
        return Err(Error::invalid("sample grid needs n_r >= 2 and r_max > r0"));
    }
    let k = c.k_const;
    let r0 = c.r0;
    let rs: Vec<f64> = (0..spec.n_r)
        .map(|i| r0 * (spec.r_max / r0).powf(i as f64 / (spec.n_r - 1) as f64))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tensors: Vec<SymTensor> = (0..2 * spec.n_pairs).map(|_| random_tensor(&mut rng)).collect();

    let mut reports = Vec::with_capacity(6);

    // A1
    let mut t = Tracker::new();
    let a: Vec<f64> = rs
        .iter()
        .map(|&r| finite("A", (c.diffusion)(r), || format!("r = {r}")))
        .collect::<Result<_>>()?;
    for (i, &r) in rs.iter().enumerate() {
        t.lt("A > 0", 0.0, a[i], || format!("r = {r}"));
        if i > 0 {
            t.le("A nonincreasing", a[i], a[i - 1], || format!("r = {r}"));
        }
    }
    let far = r0 + 1e12;
    let a_far = finite("A", (c.diffusion)(far), || format!("r = {far}"))?;
    t.le("A -> 0", a_far, 1e-6 * a[0], || format!("r = {far}"));
    reports.push(t.finish(Assumption::A1));

    // A2
    let mut t = Tracker::new();
    let tau: Vec<f64> = rs
        .iter()
        .map(|&r| finite("tau", (c.tau)(r), || format!("r = {r}")))
        .collect::<Result<_>>()?;
    let tau_scale = tau.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    t.le("tau(r0) = 0", tau[0].abs(), SLACK * tau_scale, || format!("r = {r0}"));
    let tp0 = finite("tau'", (c.tau_prime)(r0), || format!("r = {r0}"))?;
    t.lt("tau'(r0) > 0", 0.0, tp0, || format!("r = {r0}"));
    for (i, &r) in rs.iter().enumerate() {
        let tp = finite("tau'", (c.tau_prime)(r), || format!("r = {r}"))?;
        if i > 0 {
            t.le("tau nondecreasing", tau[i - 1], tau[i], || format!("r = {r}"));
        }
        t.le("tau bounded", tau[i].abs(), k, || format!("r = {r}"));
        let s = tau[i] + r * tp;
        t.le("r0/K <= tau + r tau'", r0 / k, s, || format!("r = {r}"));
        t.le(
            "tau + tau' + r tau' + tau/r <= K",
            tau[i] + tp + r * tp + tau[i] / r,
            k,
            || format!("r = {r}"),
        );
    }
    reports.push(t.finish(Assumption::A2));

    // A3
    let mut t = Tracker::new();
    let mut ds: Vec<SymTensor> = vec![SymTensor::ZERO];
    ds.extend(tensors.iter().take(10).copied());
    for v in &spec.velocities {
        for d in &ds {
            let at = |r: f64| format!("r = {r}, v = {v:?}, |D| = {:.3e}", d.norm());
            let mut prev = f64::NAN;
            for &r in &rs {
                let b = finite("beta", (c.beta)(r, *v, d), || at(r))?;
                t.lt("beta > 0", 0.0, b, || at(r));
                t.le("beta <= K", b, k, || at(r));
                if !prev.is_nan() {
                    t.lt("beta increasing in r", prev, b, || at(r));
                }
                prev = b;
                // central difference of log beta against the envelope; the
                // difference quotient carries O(h^2) error, hence the extra slack
                let h = 1e-5 * r;
                let bp = (c.beta)(r + h, *v, d);
                let bm = (c.beta)((r - h).max(r0 * (1.0 - 1e-12)), *v, d);
                if bp > 0.0 && bm > 0.0 {
                    let dlog = (bp.ln() - bm.ln()) / (r + h - (r - h).max(r0 * (1.0 - 1e-12)));
                    let eta = (c.eta)(r);
                    let scale = dlog.abs().max(eta.abs()).max(1e-300);
                    t.record("d_r log beta <= eta", (eta - dlog) / scale + 1e-6, || at(r));
                }
            }
        }
    }
    let mut eta_int = 0.0;
    for (i, &r) in rs.iter().enumerate() {
        let e = finite("eta", (c.eta)(r), || format!("r = {r}"))?;
        t.le("eta >= 0", 0.0, e, || format!("r = {r}"));
        t.le("(1+r) eta <= K", (1.0 + r) * e, k, || format!("r = {r}"));
        if i > 0 {
            let (rl, el) = (rs[i - 1], (c.eta)(rs[i - 1]));
            eta_int += 0.5 * (r - rl) * (e + el);
        }
    }
    t.le("int eta <= K", eta_int, k, || format!("r in [{r0}, {}]", spec.r_max));
    reports.push(t.finish(Assumption::A3));

    // A4
    let mut t = Tracker::new();
    let r_tildes: Vec<f64> = (0..20).map(|_| r0 * (1.0 + rng.gen_range(1e-3..50.0))).collect();
    for &rt in &r_tildes {
        for &alpha in &[1.0, 2.0, 2.5, 3.0] {
            // support is probed by integrating past r~, with r~ a panel edge
            let q = gauss_legendre_panels(0.0, rt, 400, |r| r.powf(alpha - 1.0) * (c.kernel)(r, rt))
                + gauss_legendre_panels(rt, 2.0 * rt, 400, |r| r.powf(alpha - 1.0) * (c.kernel)(r, rt));
            let exact = rt.powf(alpha - 1.0) / alpha;
            let err = (q - exact).abs() / exact;
            t.le("int r^(a-1) kappa dr = r~^(a-1)/a", err, 1e-10, || {
                format!("alpha = {alpha}, r~ = {rt}")
            });
        }
        for &r in &[0.25 * rt, 0.5 * rt, 0.999 * rt] {
            t.le("kappa >= 0", 0.0, (c.kernel)(r, rt), || format!("r = {r}, r~ = {rt}"));
        }
        for &r in &[rt, 1.001 * rt, 3.0 * rt] {
            let kv = (c.kernel)(r, rt);
            if kv != 0.0 {
                t.fail("kappa = 0 for r >= r~", format!("kappa({r}, {rt}) = {kv}"));
            } else {
                t.checks += 1;
            }
        }
    }
    for &rt in &[0.5 * r0, r0] {
        let kv = (c.kernel)(0.25 * rt, rt);
        if kv != 0.0 {
            t.fail("kappa = 0 for r~ <= r0", format!("kappa({}, {rt}) = {kv}", 0.25 * rt));
        } else {
            t.checks += 1;
        }
    }
    reports.push(t.finish(Assumption::A4));

    // A5
    let mut t = Tracker::new();
    if !(c.theta > 0.0) {
        t.fail("theta > 0", format!("theta = {}", c.theta));
    }
    for &r in &rs {
        let g = finite("gamma", (c.gamma)(r), || format!("r = {r}"))?;
        t.le("gamma >= 0", 0.0, g, || format!("r = {r}"));
        t.le("gamma <= K (1+r)^theta", g, k * (1.0 + r).powf(c.theta), || {
            format!("r = {r}")
        });
    }
    reports.push(t.finish(Assumption::A5));

    // A6
    let mut t = Tracker::new();
    let p = c.p;
    let p_min = 2.0 * DIM as f64 / (DIM as f64 + 2.0);
    if !(p > p_min) {
        t.fail("p > 2d/(d+2)", format!("p = {p}"));
    }
    for &pt in &spec.psi_tilde {
        let mut s = Vec::with_capacity(tensors.len());
        for xi in &tensors {
            let nu = finite("nu", c.nu(pt, xi.norm())?, || format!("psi~ = {pt}"))?;
            t.lt("nu > 0", 0.0, nu, || format!("psi~ = {pt}, |xi| = {:.3e}", xi.norm()));
            s.push(xi.scale(nu));
        }
        for (xi, si) in tensors.iter().zip(&s) {
            let n = xi.norm();
            let at = || format!("psi~ = {pt}, |xi| = {n:.3e}");
            t.le("|S| <= K (1+|xi|)^(p-1)", si.norm(), k * (1.0 + n).powf(p - 1.0), at);
            t.le("S.xi >= |xi|^p / K - K", n.powf(p) / k - k, si.dot(xi), at);
        }
        for i in 0..tensors.len() {
            for j in (i + 1)..tensors.len() {
                let dxi = tensors[i].sub(&tensors[j]);
                if dxi.norm_sq() == 0.0 {
                    continue;
                }
                let prod = s[i].sub(&s[j]).dot(&dxi);
                t.lt("(S - S~).(xi - xi~) > 0", 0.0, prod, || {
                    format!(
                        "psi~ = {pt}, |xi| = {:.3e}, |xi~| = {:.3e}",
                        tensors[i].norm(),
                        tensors[j].norm()
                    )
                });
            }
        }
    }
    reports.push(t.finish(Assumption::A6));

    Ok(ValidationReport { reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ScalarFn, ViscosityClosure};
    use std::sync::Arc;

    #[test]
    fn default_family_passes() {
        let report = validate_coefficients(&ModelCoefficients::default(), &SampleSpec::default()).unwrap();
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn constant_tau_fails_only_a2() {
        let c = ModelCoefficients {
            tau: Arc::new(|_| 1.0),
            tau_prime: Arc::new(|_| 0.0),
            ..Default::default()
        };
        let report = validate_coefficients(&c, &SampleSpec::default()).unwrap();
        assert_eq!(report.failed(), vec![Assumption::A2], "{report}");
    }

    #[test]
    fn shear_thickening_inverse_viscosity_fails_a6() {
        let c = ModelCoefficients {
            viscosity: ViscosityClosure::Custom(Arc::new(|_, s| 1.0 / (1.0 + s * s))),
            ..Default::default()
        };
        let report = validate_coefficients(&c, &SampleSpec::default()).unwrap();
        assert_eq!(report.failed(), vec![Assumption::A6], "{report}");
    }

    #[test]
    fn report_is_deterministic() {
        let c = ModelCoefficients::default();
        let a = validate_coefficients(&c, &SampleSpec::default()).unwrap();
        let b = validate_coefficients(&c, &SampleSpec::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_diffusion_is_an_error() {
        let mut c = ModelCoefficients::default();
        let f: ScalarFn = Arc::new(|r| if r > 100.0 { f64::NAN } else { 1.0 / r });
        c.diffusion = f;
        assert!(matches!(
            validate_coefficients(&c, &SampleSpec::default()),
            Err(Error::NonFinite(_))
        ));
    }
}
