//! Globally adaptive Gauss-Kronrod quadrature over vector-valued integrands,
//! with an optional Gauss-Jacobi first panel for `(x - a)^alpha` endpoint
//! behaviour.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

/// Absolute and relative stopping tolerances plus a panel budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64, max_panels: usize) -> Self {
        Self { abs, rel, max_panels }
    }
}

/// Result of an adaptive run. `value` has the integrand's dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: Vec<f64>,
    pub error: f64,
    pub panels: usize,
    pub converged: bool,
    pub requested: f64,
}

impl Estimate {
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Accuracy { achieved: self.error, requested: self.requested })
        }
    }
}

/// Gauss-Jacobi rules on `[-1, 1]` for the weight `(1 + x)^alpha`, used on
/// the first panel when the integrand behaves like `(x - a)^alpha`.
#[derive(Debug, Clone)]
pub struct JacobiPair {
    alpha: f64,
    coarse: (Vec<f64>, Vec<f64>),
    fine: (Vec<f64>, Vec<f64>),
}

impl JacobiPair {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, coarse: gauss_jacobi(12, alpha), fine: gauss_jacobi(24, alpha) }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Golub-Welsch nodes and weights for `(1 + x)^b` on `[-1, 1]`.
pub fn gauss_jacobi(n: usize, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(b > -1.0 && n > 0);
    let a = 0.0;
    let mut t = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let diag = if k == 0 { (b - a) / (a + b + 2.0) } else { (b * b - a * a) / (s * (s + 2.0)) };
        t[(k, k)] = diag;
        if k + 1 < n {
            let m = kf + 1.0;
            let s1 = 2.0 * m + a + b;
            let beta = 4.0 * m * (m + a) * (m + b) * (m + a + b) / (s1 * s1 * (s1 + 1.0) * (s1 - 1.0));
            let off = beta.sqrt();
            t[(k, k + 1)] = off;
            t[(k + 1, k)] = off;
        }
    }
    // mu0 = int_{-1}^{1} (1+x)^b dx
    let mu0 = 2f64.powf(b + 1.0) / (b + 1.0);
    let eig = SymmetricEigen::new(t);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs.into_iter().unzip()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi(n, 0.0)
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    singular: bool,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.a.total_cmp(&self.a))
    }
}

struct Workspace {
    dim: usize,
    fx: Vec<f64>,
    kron: Vec<f64>,
    gauss: Vec<f64>,
    absk: Vec<f64>,
    nodes: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            fx: vec![0.0; 21 * dim],
            kron: vec![0.0; dim],
            gauss: vec![0.0; dim],
            absk: vec![0.0; dim],
            nodes: vec![0.0; 21],
        }
    }
}

fn gk21<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, ws: &mut Workspace) -> (Vec<f64>, f64) {
    let d = ws.dim;
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    for (i, x) in XGK.iter().enumerate() {
        ws.nodes[i] = c - h * x;
        ws.nodes[20 - i] = c + h * x;
    }
    for i in 0..21 {
        let x = ws.nodes[i];
        f(x, &mut ws.fx[i * d..(i + 1) * d]);
    }
    ws.kron.iter_mut().for_each(|v| *v = 0.0);
    ws.gauss.iter_mut().for_each(|v| *v = 0.0);
    ws.absk.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..21 {
        let k = if i <= 10 { i } else { 20 - i };
        let wk = WGK[k];
        let wg = if k % 2 == 1 { WG[k / 2] } else { 0.0 };
        let row = &ws.fx[i * d..(i + 1) * d];
        for j in 0..d {
            ws.kron[j] += wk * row[j];
            ws.absk[j] += wk * row[j].abs();
            if wg != 0.0 {
                ws.gauss[j] += wg * row[j];
            }
        }
    }
    let mut err = 0.0f64;
    let mut out = vec![0.0; d];
    for j in 0..d {
        let mean = 0.5 * ws.kron[j];
        let mut asc = 0.0;
        for i in 0..21 {
            let k = if i <= 10 { i } else { 20 - i };
            asc += WGK[k] * (ws.fx[i * d + j] - mean).abs();
        }
        let resk = ws.kron[j] * h;
        let raw = ((ws.kron[j] - ws.gauss[j]) * h).abs();
        let resasc = asc * h.abs();
        let resabs = ws.absk[j] * h.abs();
        let mut e = raw;
        if resasc != 0.0 && e != 0.0 {
            e = resasc * (200.0 * e / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e = e.max(50.0 * f64::EPSILON * resabs);
        }
        if !resk.is_finite() {
            e = f64::INFINITY;
        }
        err = err.max(e);
        out[j] = resk;
    }
    (out, err)
}

fn jacobi_panel<F: FnMut(f64, &mut [f64])>(
    f: &mut F,
    a: f64,
    b: f64,
    rule: &JacobiPair,
    ws: &mut Workspace,
) -> (Vec<f64>, f64) {
    let d = ws.dim;
    let h = 0.5 * (b - a);
    let apply = |nodes: &[f64], weights: &[f64], f: &mut F| {
        let mut acc = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        for (xi, wi) in nodes.iter().zip(weights) {
            let x = a + h * (xi + 1.0);
            f(x, &mut tmp);
            let w = wi * h * (1.0 + xi).powf(-rule.alpha);
            for j in 0..d {
                acc[j] += w * tmp[j];
            }
        }
        acc
    };
    let coarse = apply(&rule.coarse.0, &rule.coarse.1, f);
    let fine = apply(&rule.fine.0, &rule.fine.1, f);
    let mut err = 0.0f64;
    for j in 0..d {
        let e = (fine[j] - coarse[j]).abs();
        err = err.max(if fine[j].is_finite() { e } else { f64::INFINITY });
    }
    (fine, err)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Integrate a `dim`-valued function over the partition `breaks`.
///
/// The integrand writes its value at `x` into the provided slice. When
/// `singular` is given, the first panel uses Gauss-Jacobi rules for the
/// weight `(x - breaks[0])^alpha`.
pub fn integrate_vec<F>(
    mut f: F,
    dim: usize,
    breaks: &[f64],
    singular: Option<&JacobiPair>,
    tol: &Tolerance,
) -> Estimate
where
    F: FnMut(f64, &mut [f64]),
{
    assert!(breaks.len() >= 2, "need at least one panel");
    let mut ws = Workspace::new(dim);
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Panel> = Vec::new();
    let mut total = vec![0.0; dim];
    let mut total_err = 0.0;
    let mut count = 0usize;

    let eval = |a: f64, b: f64, sing: bool, f: &mut F, ws: &mut Workspace| -> Panel {
        let (value, error) = match (sing, singular) {
            (true, Some(rule)) => jacobi_panel(f, a, b, rule, ws),
            _ => gk21(f, a, b, ws),
        };
        Panel { a, b, singular: sing, value, error }
    };

    for (i, w) in breaks.windows(2).enumerate() {
        if w[1] <= w[0] {
            continue;
        }
        let p = eval(w[0], w[1], i == 0 && singular.is_some(), &mut f, &mut ws);
        for j in 0..dim {
            total[j] += p.value[j];
        }
        total_err += p.error;
        count += 1;
        heap.push(p);
    }

    let target = |total: &[f64]| tol.abs.max(tol.rel * norm(total));
    while total_err > target(&total) && count < tol.max_panels {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        let scale = worst.a.abs().max(worst.b.abs()).max(f64::MIN_POSITIVE);
        if worst.b - worst.a <= 64.0 * f64::EPSILON * scale || mid <= worst.a || mid >= worst.b {
            frozen.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let left = eval(worst.a, mid, worst.singular, &mut f, &mut ws);
        let right = eval(mid, worst.b, false, &mut f, &mut ws);
        for j in 0..dim {
            total[j] += left.value[j] + right.value[j] - worst.value[j];
        }
        total_err += left.error + right.error - worst.error;
        count += 1;
        heap.push(left);
        heap.push(right);
    }

    let mut panels: Vec<Panel> = heap.into_vec();
    panels.extend(frozen);
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = vec![0.0; dim];
    let mut error = 0.0;
    for p in &panels {
        for j in 0..dim {
            value[j] += p.value[j];
        }
        error += p.error;
    }
    let requested = target(&value);
    Estimate { value, error, panels: panels.len(), converged: error <= requested, requested }
}

/// Scalar convenience wrapper returning `(value, error)`.
pub fn integrate<F>(mut f: F, breaks: &[f64], tol: &Tolerance) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let est = integrate_vec(|x, out: &mut [f64]| out[0] = f(x), 1, breaks, None, tol).into_result()?;
    Ok((est.value[0], est.error))
}

/// Sorted, de-duplicated set of panel boundaries clipped to `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct Breaks {
    lo: f64,
    hi: f64,
    pts: Vec<f64>,
}

impl Breaks {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(hi > lo);
        Self { lo, hi, pts: vec![lo, hi] }
    }

    pub fn point(&mut self, x: f64) -> &mut Self {
        if x > self.lo && x < self.hi {
            self.pts.push(x);
        }
        self
    }

    /// Uniform subdivision of `[lo, hi]` into panels no wider than `width`.
    pub fn uniform(&mut self, width: f64) -> &mut Self {
        self.uniform_between(self.lo, self.hi, width)
    }

    pub fn uniform_between(&mut self, a: f64, b: f64, width: f64) -> &mut Self {
        let a = a.max(self.lo);
        let b = b.min(self.hi);
        if b <= a || !(width > 0.0) {
            return self;
        }
        let n = ((b - a) / width).ceil().min(1e6) as usize;
        for i in 0..=n {
            self.point(a + (b - a) * i as f64 / n as f64);
        }
        self
    }

    /// Points `center +- w0 * factor^k` until the offset exceeds `reach`.
    pub fn graded(&mut self, center: f64, w0: f64, factor: f64, reach: f64) -> &mut Self {
        self.point(center);
        if !(w0 > 0.0) {
            return self;
        }
        let mut w = w0;
        while w < reach {
            self.point(center - w);
            self.point(center + w);
            w *= factor;
        }
        self
    }

    pub fn build(&self) -> Vec<f64> {
        let mut v = self.pts.clone();
        v.sort_by(f64::total_cmp);
        let span = self.hi - self.lo;
        v.dedup_by(|b, a| (*b - *a).abs() <= 1e-14 * span.max(a.abs()));
        v
    }
}
