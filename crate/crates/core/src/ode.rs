//! Dormand-Prince 5(4) integrator with continuous (dense) output.

use crate::error::{Error, Result};

/// Right-hand side of `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F> OdeSystem for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.0
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.1)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-8, h_init: None, h_max: f64::INFINITY, max_steps: 50_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    // dim * 5 coefficients, laid out as [r1 | r2 | r3 | r4 | r5]
    r: Vec<f64>,
}

/// Continuous solution over `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    segs: Vec<Segment>,
    t_end: f64,
    y_end: Vec<f64>,
}

impl DenseSolution {
    pub fn t_start(&self) -> f64 {
        self.segs.first().map(|s| s.t0).unwrap_or(self.t_end)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.segs.len()
    }

    /// Step boundaries, including both ends.
    pub fn mesh(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.segs.iter().map(|s| s.t0).collect();
        m.push(self.t_end);
        m
    }

    pub fn final_state(&self) -> &[f64] {
        &self.y_end
    }

    /// Interpolated state at `t`, clamped to the integration interval.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if self.segs.is_empty() || t >= self.t_end {
            out.copy_from_slice(&self.y_end);
            return;
        }
        let idx = match self.segs.binary_search_by(|s| s.t0.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let s = &self.segs[idx];
        let d = self.dim;
        let th = ((t - s.t0) / s.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        for i in 0..d {
            let r = |k: usize| s.r[k * d + i];
            out[i] = r(0) + th * (r(1) + th1 * (r(2) + th * (r(3) + th1 * r(4))));
        }
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], o: &OdeOptions) -> f64 {
    let n = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = o.abs_tol + o.rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Integrate from `t0` to `t1 > t0`, storing every accepted step.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &OdeOptions,
) -> Result<DenseSolution> {
    let d = sys.dim();
    assert_eq!(y0.len(), d);
    if !(t1 >= t0) {
        return Err(Error::Integration { t: t0, reason: format!("end time {t1} precedes start {t0}") });
    }
    let mut sol = DenseSolution { dim: d, segs: Vec::new(), t_end: t0, y_end: y0.to_vec() };
    if t1 == t0 {
        return Ok(sol);
    }
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut k5 = vec![0.0; d];
    let mut k6 = vec![0.0; d];
    let mut k7 = vec![0.0; d];
    let mut yt = vec![0.0; d];
    let mut ynew = vec![0.0; d];
    let mut err = vec![0.0; d];

    let mut t = t0;
    sys.rhs(t, &y, &mut k1);
    let span = t1 - t0;
    let mut h = match opts.h_init {
        Some(h) => h,
        None => {
            let sc: f64 = y.iter().map(|v| opts.abs_tol + opts.rel_tol * v.abs()).fold(f64::INFINITY, f64::min);
            let f0 = k1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if f0 > 0.0 { (0.01 * (sc / f0).powf(0.2)).min(span) } else { span * 1e-3 }
        }
    }
    .min(opts.h_max)
    .min(span);
    let mut prev_err: f64 = 1e-4;
    let mut steps = 0usize;
    let mut rejected_last = false;

    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::Integration { t, reason: format!("step budget {} exhausted", opts.max_steps) });
        }
        if t + h > t1 || t1 - (t + h) < 1e-12 * span {
            h = t1 - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::Integration { t, reason: format!("step size underflow (h = {h:e})") });
        }
        for i in 0..d {
            yt[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(t + C2 * h, &yt, &mut k2);
        for i in 0..d {
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * h, &yt, &mut k3);
        for i in 0..d {
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * h, &yt, &mut k4);
        for i in 0..d {
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * h, &yt, &mut k5);
        for i in 0..d {
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + h, &yt, &mut k6);
        for i in 0..d {
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.rhs(t + h, &ynew, &mut k7);
        for i in 0..d {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        steps += 1;
        let en = error_norm(&err, &y, &ynew, opts);
        if !en.is_finite() {
            h *= 0.1;
            rejected_last = true;
            continue;
        }
        if en <= 1.0 {
            let mut r = vec![0.0; 5 * d];
            for i in 0..d {
                let dy = ynew[i] - y[i];
                let bspl = h * k1[i] - dy;
                r[i] = y[i];
                r[d + i] = dy;
                r[2 * d + i] = bspl;
                r[3 * d + i] = dy - h * k7[i] - bspl;
                r[4 * d + i] =
                    h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            sol.segs.push(Segment { t0: t, h, r });
            t = if t1 - (t + h) < 1e-12 * span { t1 } else { t + h };
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            // PI step control.
            let fac = 0.9 * en.max(1e-10).powf(-0.7 / 5.0) * prev_err.powf(0.4 / 5.0);
            let fac = if rejected_last { fac.min(1.0) } else { fac };
            h = (h * fac.clamp(0.2, 10.0)).min(opts.h_max);
            prev_err = en.max(1e-4);
            rejected_last = false;
        } else {
            let fac = (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
            rejected_last = true;
        }
    }
    sol.t_end = t1;
    sol.y_end = y;
    Ok(sol)
}

/// Locate a sign change of `g` on `[lo, hi]` by bisection, assuming
/// `g(lo)` and `g(hi)` have opposite signs. Stops when the bracket is below
/// `rel * max(|hi|, 1)`.
pub fn bisect<G: FnMut(f64) -> f64>(mut g: G, mut lo: f64, mut hi: f64, rel: f64) -> f64 {
    let mut glo = g(lo);
    for _ in 0..200 {
        if hi - lo <= rel * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All sign changes of `g` along a dense solution, refined by bisection.
/// Each step is sampled at `sub` interior points to catch close pairs.
pub fn find_crossings<G: FnMut(f64) -> f64>(
    mesh: &[f64],
    mut g: G,
    sub: usize,
    rel: f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    if mesh.len() < 2 {
        return out;
    }
    let mut prev_t = mesh[0];
    let mut prev_g = g(prev_t);
    for w in mesh.windows(2) {
        for j in 1..=sub + 1 {
            let t = w[0] + (w[1] - w[0]) * j as f64 / (sub + 1) as f64;
            let gv = g(t);
            if prev_g != 0.0 && gv != 0.0 && (gv > 0.0) != (prev_g > 0.0) {
                out.push(bisect(&mut g, prev_t, t, rel));
            } else if gv == 0.0 && prev_g != 0.0 {
                out.push(t);
            }
            if gv != 0.0 {
                prev_g = gv;
            }
            prev_t = t;
        }
    }
    out
}
