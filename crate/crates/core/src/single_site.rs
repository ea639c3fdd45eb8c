//! One monitored site: detector-based Kraus measurements, the non-Hermitian
//! protocol and the master equations their trajectory averages obey.
//!
//! Matrices use the basis order (|1>, |0>), so `n = diag(1, 0)`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::sign_of;
use crate::rng::{Purpose, RngPolicy};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// `alpha |1> + beta |0>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Qubit {
    pub alpha: C64,
    pub beta: C64,
}

impl Qubit {
    /// Normalizes the given amplitudes.
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidParameter("qubit amplitudes must not both vanish".into()));
        }
        Ok(Self { alpha: alpha / n, beta: beta / n })
    }

    /// Real amplitudes with occupation probability `p`.
    pub fn with_occupation(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("occupation {p} outside [0, 1]")));
        }
        Ok(Self { alpha: C64::new(p.sqrt(), 0.0), beta: C64::new((1.0 - p).sqrt(), 0.0) })
    }

    pub fn occupation(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    pub fn density(&self) -> SingleSiteState {
        SingleSiteState { a: self.alpha.norm_sqr(), b: self.alpha * self.beta.conj() }
    }
}

/// Density matrix `[[a, b], [b*, 1 - a]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleSiteState {
    pub a: f64,
    pub b: C64,
}

impl SingleSiteState {
    pub fn new(a: f64, b: C64) -> Result<Self> {
        let s = Self { a, b };
        if !(0.0..=1.0).contains(&a) || s.positivity_violation() > 1e-12 {
            return Err(Error::InvalidParameter(format!("(a, b) = ({a}, {b}) is not a density matrix")));
        }
        Ok(s)
    }

    /// How far `|b|^2` exceeds `a (1 - a)`; zero or negative for valid states.
    pub fn positivity_violation(&self) -> f64 {
        self.b.norm_sqr() - self.a * (1.0 - self.a)
    }

    pub fn matrix(&self) -> Matrix2<C64> {
        Matrix2::new(C64::new(self.a, 0.0), self.b, self.b.conj(), C64::new(1.0 - self.a, 0.0))
    }
}

/// Unnormalized density matrix, as produced by no-click post-selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawDensity {
    pub occupied: f64,
    pub empty: f64,
    pub coherence: C64,
}

impl RawDensity {
    pub fn from_state(s: SingleSiteState) -> Self {
        Self { occupied: s.a, empty: 1.0 - s.a, coherence: s.b }
    }

    pub fn trace(&self) -> f64 {
        self.occupied + self.empty
    }

    pub fn normalized(&self) -> SingleSiteState {
        let tr = self.trace();
        SingleSiteState { a: self.occupied / tr, b: self.coherence / tr }
    }
}

/// Detector coupling per step, `lambda = M T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementChannel {
    pub lambda: f64,
}

impl MeasurementChannel {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn from_strength(m: f64, t: f64) -> Result<Self> {
        Self::new(m * t)
    }

    /// Click probability `|alpha|^2 sin^2 lambda`.
    pub fn click_probability(&self, q: &Qubit) -> f64 {
        q.occupation() * self.lambda.sin().powi(2)
    }
}

/// `(K+, K-)`: `K+ = -i sin(lambda) n`, `K- = 1 - (1 - cos lambda) n`.
pub fn kraus_ops(ch: &MeasurementChannel) -> (Matrix2<C64>, Matrix2<C64>) {
    let (s, c) = ch.lambda.sin_cos();
    let kp = Matrix2::new(C64::new(0.0, -s), ZERO, ZERO, ZERO);
    let km = Matrix2::new(C64::new(c, 0.0), ZERO, ZERO, ONE);
    (kp, km)
}

/// Largest entry of `K+^dag K+ + K-^dag K- - 1`.
pub fn completeness_error(ch: &MeasurementChannel) -> f64 {
    let (kp, km) = kraus_ops(ch);
    let sum = kp.adjoint() * kp + km.adjoint() * km - Matrix2::identity();
    sum.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Detector measurement: a click (`sigma = +1`) happens when `u` falls below
/// the click probability. Returns the renormalized conditional state.
pub fn conventional_step(q: &Qubit, ch: &MeasurementChannel, u: f64) -> (Qubit, i8) {
    let p_click = ch.click_probability(q);
    let (kp, km) = kraus_ops(ch);
    let (k, sigma) = if u < p_click { (kp, 1) } else { (km, -1) };
    let alpha = k[(0, 0)] * q.alpha + k[(0, 1)] * q.beta;
    let beta = k[(1, 0)] * q.alpha + k[(1, 1)] * q.beta;
    let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
    (Qubit { alpha: alpha / n, beta: beta / n }, sigma)
}

/// `exp(M sigma tau n)` applied to `q`, renormalized.
pub fn nonhermitian_evolve(q: &Qubit, m: f64, tau: f64, sigma: i8) -> Qubit {
    let g = (m * tau * sigma as f64).exp();
    let alpha = q.alpha * g;
    let n = (alpha.norm_sqr() + q.beta.norm_sqr()).sqrt();
    Qubit { alpha: alpha / n, beta: q.beta / n }
}

/// One step of the non-Hermitian protocol: `sigma = sgn(|alpha|^2 - m)`,
/// then `alpha -> alpha e^{M T sigma} / N`.
pub fn nonhermitian_step(q: &Qubit, m_strength: f64, t: f64, threshold: f64) -> (Qubit, i8) {
    let sigma = sign_of(q.occupation(), threshold);
    (nonhermitian_evolve(q, m_strength, t, sigma), sigma)
}

/// Default ODE step, `min(1e-3, 0.01 / (M^2 T + M))`.
pub fn default_ode_dt(m: f64, t: f64) -> f64 {
    let rate = m * m * t + m;
    if rate > 0.0 {
        (0.01 / rate).min(1e-3)
    } else {
        1e-3
    }
}

fn check_grid(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && t_end >= 0.0 && dt.is_finite() && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}")));
    }
    Ok((t_end / dt).round() as usize)
}

/// Fixed-step RK4 over a small real state vector.
fn rk4<const N: usize>(y0: [f64; N], t_end: f64, dt: f64, f: impl Fn(&[f64; N]) -> [f64; N]) -> Result<Vec<(f64, [f64; N])>> {
    let steps = check_grid(t_end, dt)?;
    let h = if steps > 0 { t_end / steps as f64 } else { 0.0 };
    let add = |y: &[f64; N], k: &[f64; N], c: f64| -> [f64; N] {
        let mut out = *y;
        for i in 0..N {
            out[i] += c * k[i];
        }
        out
    };
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y0;
    out.push((0.0, y));
    for s in 0..steps {
        let k1 = f(&y);
        let k2 = f(&add(&y, &k1, h / 2.0));
        let k3 = f(&add(&y, &k2, h / 2.0));
        let k4 = f(&add(&y, &k3, h));
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(((s + 1) as f64 * h, y));
    }
    Ok(out)
}

fn to_state(y: &[f64; 3]) -> SingleSiteState {
    SingleSiteState { a: y[0], b: C64::new(y[1], y[2]) }
}

/// Linear Lindblad equation with jump operator `M sqrt(T) n`:
/// `a` constant, `b` decays at rate `M^2 T / 2`.
pub fn lindblad_evolve(s0: SingleSiteState, m: f64, t: f64, t_end: f64, dt: f64) -> Result<Vec<(f64, SingleSiteState)>> {
    let g = m * m * t / 2.0;
    let traj = rk4([s0.a, s0.b.re, s0.b.im], t_end, dt, |y| [0.0, -g * y[1], -g * y[2]])?;
    Ok(traj.iter().map(|(t, y)| (*t, to_state(y))).collect())
}

/// Closed form of [`lindblad_evolve`].
pub fn lindblad_closed_form(s0: SingleSiteState, m: f64, t: f64, time: f64) -> SingleSiteState {
    SingleSiteState { a: s0.a, b: s0.b * (-m * m * t * time / 2.0).exp() }
}

/// No-click post-selected evolution. Unnormalized: `d rho/dt = -M^2 T {n, rho}`
/// (trace decays). Normalized: `d rho/dt = (M^2 T / 2)(2 tr(n rho) rho - {n, rho})`.
pub fn noclick_postselect_evolve(
    s0: SingleSiteState,
    m: f64,
    t: f64,
    t_end: f64,
    dt: f64,
    normalized: bool,
) -> Result<Vec<(f64, RawDensity)>> {
    let c = m * m * t;
    let y0 = [s0.a, 1.0 - s0.a, s0.b.re, s0.b.im];
    let traj = if normalized {
        rk4(y0, t_end, dt, |y| {
            let a = y[0];
            let da = -c * a * (1.0 - a);
            let k = -(c / 2.0) * (1.0 - 2.0 * a);
            [da, -da, k * y[2], k * y[3]]
        })?
    } else {
        rk4(y0, t_end, dt, |y| [-2.0 * c * y[0], 0.0, -c * y[2], -c * y[3]])?
    };
    Ok(traj
        .iter()
        .map(|(t, y)| (*t, RawDensity { occupied: y[0], empty: y[1], coherence: C64::new(y[2], y[3]) }))
        .collect())
}

fn nonlinear_rhs(m: f64, t: f64) -> impl Fn(&[f64; 3]) -> [f64; 3] {
    let mt = m * t;
    move |y| {
        let a = y[0];
        let da = -2.0 * m * a * (1.0 - a) * (1.0 - 2.0 * a) * (1.0 - mt);
        let k = -m * ((1.0 - 2.0 * a).powi(2) + 4.0 * mt * (a * (1.0 - a) - 0.5));
        [da, k * y[1], k * y[2]]
    }
}

fn unstable(traj: &[(f64, [f64; 3])]) -> bool {
    traj.iter().any(|(_, y)| {
        !y.iter().all(|v| v.is_finite()) || y[0] < -1e-9 || y[0] > 1.0 + 1e-9
    })
}

/// Nonlinear master equation of the trajectory-averaged non-Hermitian
/// protocol, reduced to `(a, b)`. Valid for `M T << 1`; a warning is logged
/// above 0.1. An unstable integration is retried once with `dt / 2`.
///
/// Pure initial states drift slightly outside `|b|^2 <= a (1 - a)`: on that
/// boundary the `M T` correction grows the excess at `2 M^2 T a (1 - a)`.
pub fn nonlinear_master_evolve(s0: SingleSiteState, m: f64, t: f64, t_end: f64, dt: f64) -> Result<Vec<(f64, SingleSiteState)>> {
    if m * t > 0.1 {
        log::warn!("nonlinear master equation used at M T = {} (derived for M T << 1)", m * t);
    }
    let y0 = [s0.a, s0.b.re, s0.b.im];
    let mut traj = rk4(y0, t_end, dt, nonlinear_rhs(m, t))?;
    if unstable(&traj) {
        traj = rk4(y0, t_end, dt / 2.0, nonlinear_rhs(m, t))?;
        if unstable(&traj) {
            return Err(Error::Numerical(format!("nonlinear master equation unstable at dt={} (M={m}, T={t})", dt / 2.0)));
        }
        // keep the caller's time grid
        traj = traj.into_iter().step_by(2).collect();
    }
    Ok(traj.iter().map(|(t, y)| (*t, to_state(y))).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingleSiteProtocol {
    Conventional,
    Nonhermitian,
}

/// Trial-averaged density matrix after each step, with standard errors
/// (sample std / sqrt(trials)) of `a` and `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct McAverage {
    pub times: Vec<f64>,
    pub mean: Vec<SingleSiteState>,
    pub stderr_a: Vec<f64>,
    pub stderr_b: Vec<f64>,
    /// Fraction of trials with a `+1` outcome, per step (length `steps`).
    pub plus_fraction: Vec<f64>,
}

/// Averages `|psi><psi|` over `trials` independent runs of `steps`
/// measurement steps of duration `t`. Draws are keyed by
/// `(seed, trial, step)`, so results do not depend on evaluation order.
pub fn monte_carlo_average(
    q0: &Qubit,
    m: f64,
    t: f64,
    steps: usize,
    trials: usize,
    protocol: SingleSiteProtocol,
    seed: u64,
) -> Result<McAverage> {
    if trials < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 trials, got {trials}")));
    }
    let ch = MeasurementChannel::from_strength(m, t)?;
    let mut sum_a = vec![0.0; steps + 1];
    let mut sum_a2 = vec![0.0; steps + 1];
    let mut sum_b = vec![ZERO; steps + 1];
    let mut sum_b2 = vec![0.0; steps + 1];
    let mut plus = vec![0usize; steps];
    for trial in 0..trials {
        let rng = RngPolicy::new(seed, trial as u64);
        let mut q = *q0;
        for j in 0..=steps {
            let s = q.density();
            sum_a[j] += s.a;
            sum_a2[j] += s.a * s.a;
            sum_b[j] += s.b;
            sum_b2[j] += s.b.norm_sqr();
            if j == steps {
                break;
            }
            let u = rng.uniform(j as u64, 0, Purpose::Threshold);
            let (next, sigma) = match protocol {
                SingleSiteProtocol::Conventional => conventional_step(&q, &ch, u),
                SingleSiteProtocol::Nonhermitian => nonhermitian_step(&q, m, t, u),
            };
            plus[j] += (sigma == 1) as usize;
            q = next;
        }
    }
    let r = trials as f64;
    let spread = |s: f64, s2: f64| ((s2 - s * s / r).max(0.0) / (r - 1.0)).sqrt() / r.sqrt();
    let mut out = McAverage {
        times: (0..=steps).map(|j| j as f64 * t).collect(),
        mean: Vec::with_capacity(steps + 1),
        stderr_a: Vec::with_capacity(steps + 1),
        stderr_b: Vec::with_capacity(steps + 1),
        plus_fraction: plus.iter().map(|&p| p as f64 / r).collect(),
    };
    for j in 0..=steps {
        out.mean.push(SingleSiteState { a: sum_a[j] / r, b: sum_b[j] / r });
        out.stderr_a.push(spread(sum_a[j], sum_a2[j]));
        // complex sample variance E|b - mean|^2 bounds the error of either component
        let var_b = ((sum_b2[j] - sum_b[j].norm_sqr() / r).max(0.0)) / (r - 1.0);
        out.stderr_b.push((var_b / r).sqrt());
    }
    Ok(out)
}
