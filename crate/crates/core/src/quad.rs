//! Numerical integration and interpolation primitives.
//!
//! Everything here is deterministic: the same inputs produce bit-identical
//! outputs, which the evaluators rely on for reproducible sweeps.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error(
        "quadrature did not converge on [{lo}, {hi}]: estimate {estimate:e}, error {error:e} after {segments} segments"
    )]
    NonConvergence { lo: f64, hi: f64, estimate: f64, error: f64, segments: usize },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
}

/// Accuracy target for one 1-D integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_segments: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel: 1e-7, abs: 1e-13, max_segments: 2000 }
    }
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Self {
        Self { rel, abs, ..Self::default() }
    }

    pub fn with_rel(mut self, rel: f64) -> Self {
        self.rel = rel;
        self
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }

    pub fn with_max_segments(mut self, max_segments: usize) -> Self {
        self.max_segments = max_segments;
        self
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Result<Segment, QuadError> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite(center));
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let (a, b) = (center - dx, center + dx);
        let (fa, fb) = (f(a), f(b));
        if !fa.is_finite() {
            return Err(QuadError::NonFinite(a));
        }
        if !fb.is_finite() {
            return Err(QuadError::NonFinite(b));
        }
        kronrod += wk * (fa + fb);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (fa + fb);
        }
    }
    Ok(Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Adaptive Gauss–Kronrod integration of `f` over `[lo, hi]`.
///
/// Bisects the segment with the largest error estimate until the summed
/// estimate meets `max(tol.abs, tol.rel * |I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: &Tolerance) -> Result<f64, QuadError> {
    integrate_with_breaks(&mut f, &[lo, hi], tol)
}

/// Like [`integrate`], starting from the partition given by `breaks`
/// (sorted, at least two entries). Useful when the integrand has a known
/// transition point.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    f: &mut F,
    breaks: &[f64],
    tol: &Tolerance,
) -> Result<f64, QuadError> {
    debug_assert!(breaks.len() >= 2);
    let (lo, hi) = (breaks[0], breaks[breaks.len() - 1]);
    if lo == hi {
        return Ok(0.0);
    }
    let mut segments = Vec::with_capacity(16);
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            segments.push(gk15(f, w[0], w[1])?);
        }
    }
    loop {
        let (total, error) = segments
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if error <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(total);
        }
        let (worst, seg) = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, s)| (i, *s))
            .expect("at least one segment");
        let mid = 0.5 * (seg.lo + seg.hi);
        if segments.len() >= tol.max_segments || mid <= seg.lo || mid >= seg.hi {
            return Err(QuadError::NonConvergence { lo, hi, estimate: total, error, segments: segments.len() });
        }
        segments[worst] = gk15(f, seg.lo, mid)?;
        segments.push(gk15(f, mid, seg.hi)?);
    }
}

/// ∫_lo^∞ f, via the substitution x = lo / u on (0, 1]. Requires `lo > 0`
/// and an integrand decaying faster than 1/x.
pub fn integrate_tail<F: FnMut(f64) -> f64>(mut f: F, lo: f64, tol: &Tolerance) -> Result<f64, QuadError> {
    debug_assert!(lo > 0.0);
    integrate(
        |u| {
            if u <= 0.0 {
                return 0.0;
            }
            let x = lo / u;
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v * lo / (u * u)
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, lo: f64, hi: f64) -> f64 {
        self.mapped(lo, hi).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Polynomial interpolant through Chebyshev–Lobatto points on `[lo, hi]`,
/// evaluated in barycentric form.
#[derive(Debug, Clone)]
pub struct Chebyshev {
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Chebyshev {
    /// Lobatto points for a degree-`degree` interpolant on `[lo, hi]`.
    pub fn nodes(lo: f64, hi: f64, degree: usize) -> Vec<f64> {
        let n = degree.max(1);
        (0..=n)
            .map(|j| {
                let x = (std::f64::consts::PI * j as f64 / n as f64).cos();
                0.5 * (lo + hi) + 0.5 * (hi - lo) * x
            })
            .collect()
    }

    pub fn from_values(lo: f64, hi: f64, values: Vec<f64>) -> Self {
        let nodes = Self::nodes(lo, hi, values.len() - 1);
        Self { lo, hi, nodes, values }
    }

    pub fn fit<F: FnMut(f64) -> f64>(lo: f64, hi: f64, degree: usize, mut f: F) -> Self {
        let nodes = Self::nodes(lo, hi, degree);
        let values = nodes.iter().map(|&x| f(x)).collect();
        Self { lo, hi, nodes, values }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len() - 1;
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, (&xj, &fj)) in self.nodes.iter().zip(&self.values).enumerate() {
            let diff = x - xj;
            if diff == 0.0 {
                return fj;
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            let t = w / diff;
            num += t * fj;
            den += t;
        }
        num / den
    }
}

/// Uniform-grid cubic (four-point Lagrange) interpolation table.
#[derive(Debug, Clone)]
pub struct CubicTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl CubicTable {
    pub fn fit<F: FnMut(f64) -> f64>(lo: f64, hi: f64, points: usize, mut f: F) -> Self {
        assert!(points >= 4 && hi > lo);
        let step = (hi - lo) / (points - 1) as f64;
        let values = (0..points).map(|i| f(lo + step * i as f64)).collect();
        Self { lo, step, values }
    }

    pub fn from_values(lo: f64, hi: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 4 && hi > lo);
        let step = (hi - lo) / (values.len() - 1) as f64;
        Self { lo, step, values }
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.step * (self.values.len() - 1) as f64
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, c) = lagrange4((x - self.lo) / self.step, self.values.len());
        let y = &self.values[i..i + 4];
        c[0] * y[0] + c[1] * y[1] + c[2] * y[2] + c[3] * y[3]
    }
}

/// Four-point Lagrange weights at offset `t` from the first of four uniform
/// nodes, and the index of that first node.
fn lagrange4(pos: f64, n: usize) -> (usize, [f64; 4]) {
    let i = (pos.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let t = pos - i as f64;
    let (t0, t1, t2, t3) = (t, t - 1.0, t - 2.0, t - 3.0);
    (i, [-t1 * t2 * t3 / 6.0, t0 * t2 * t3 / 2.0, -t0 * t1 * t3 / 2.0, t0 * t1 * t2 / 6.0])
}

/// Tensor-product cubic interpolation on a uniform 2-D grid.
#[derive(Debug, Clone)]
pub struct CubicGrid {
    x_lo: f64,
    x_step: f64,
    nx: usize,
    y_lo: f64,
    y_step: f64,
    ny: usize,
    /// Row-major, `values[ix * ny + iy]`.
    values: Vec<f64>,
}

impl CubicGrid {
    /// Tabulates `f` on `nx × ny` points. `f` may fail; the first failure is
    /// returned.
    pub fn try_fit<E, F: FnMut(f64, f64) -> Result<f64, E>>(
        (x_lo, x_hi, nx): (f64, f64, usize),
        (y_lo, y_hi, ny): (f64, f64, usize),
        mut f: F,
    ) -> Result<Self, E> {
        assert!(nx >= 4 && ny >= 4 && x_hi > x_lo && y_hi > y_lo);
        let x_step = (x_hi - x_lo) / (nx - 1) as f64;
        let y_step = (y_hi - y_lo) / (ny - 1) as f64;
        let mut values = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            let x = x_lo + x_step * ix as f64;
            for iy in 0..ny {
                values.push(f(x, y_lo + y_step * iy as f64)?);
            }
        }
        Ok(Self { x_lo, x_step, nx, y_lo, y_step, ny, values })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_lo
            && x <= self.x_lo + self.x_step * (self.nx - 1) as f64
            && y >= self.y_lo
            && y <= self.y_lo + self.y_step * (self.ny - 1) as f64
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (ix, wx) = lagrange4((x - self.x_lo) / self.x_step, self.nx);
        let (iy, wy) = lagrange4((y - self.y_lo) / self.y_step, self.ny);
        let mut total = 0.0;
        for (a, &cx) in wx.iter().enumerate() {
            let row = &self.values[(ix + a) * self.ny + iy..(ix + a) * self.ny + iy + 4];
            total += cx * (wy[0] * row[0] + wy[1] * row[1] + wy[2] * row[2] + wy[3] * row[3]);
        }
        total
    }
}

/// Randomly shifted Kronecker (additive recurrence) sequence in `[0,1)^dim`
/// built on the generalized golden ratio.
#[derive(Debug, Clone)]
pub struct Kronecker {
    shift: Vec<f64>,
    alpha: Vec<f64>,
}

impl Kronecker {
    pub fn new(dim: usize, seed: u64) -> Self {
        // Unique positive root of x^(d+1) = x + 1.
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
        }
        let alpha = (1..=dim).map(|i| phi.powi(-(i as i32)).fract()).collect();
        let mut state = seed;
        let shift = (0..dim)
            .map(|_| (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64)
            .collect();
        Self { shift, alpha }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// The `n`-th point, written into `out`.
    pub fn point(&self, n: u64, out: &mut [f64]) {
        for ((o, &s), &a) in out.iter_mut().zip(&self.shift).zip(&self.alpha) {
            // n * a loses precision for very large n; the fract of the product
            // of a u64 and an f64 is still within 1e-16 * n of exact, which is
            // far below the sequence's discrepancy at those sizes.
            *o = (s + (n as f64 * a).fract()).fract();
        }
    }
}

pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
