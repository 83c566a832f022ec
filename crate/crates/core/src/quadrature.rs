//! Adaptive Gauss-Kronrod (7/15) quadrature for scalar and vector integrands.
//!
//! Intervals are bisected in order of decreasing error until the summed error
//! estimate satisfies `max(abs, rel * |I|)`. Vector integrands share nodes;
//! the error norm is the largest per-component error measured against the
//! largest component magnitude.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
#[allow(clippy::excessive_precision)]
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

/// Convergence controls for the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-9,
            rel: 1e-7,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            ..Default::default()
        }
    }
}

/// Integral value with its estimated absolute error.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<V> {
    pub value: V,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
    norm: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.norm == other.norm
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.norm.total_cmp(&other.norm)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

/// One 15-point Kronrod pass over [a, b] for a `dim`-component integrand.
fn kronrod<F>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [Vec<f64>; 15]) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(f64, &mut [f64]),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    // buf[0] = center, buf[2j+1], buf[2j+2] = center -/+ half*xgk[j]
    for v in buf.iter_mut() {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    f(center, &mut buf[0]);
    for j in 0..7 {
        let dx = half * XGK[j];
        f(center - dx, &mut buf[2 * j + 1]);
        f(center + dx, &mut buf[2 * j + 2]);
    }
    let mut value = vec![0.0; dim];
    let mut error = vec![0.0; dim];
    for c in 0..dim {
        let fc = buf[0][c];
        if !fc.is_finite() {
            return Err(Error::Quadrature { a, b, error: f64::NAN });
        }
        let mut res_k = fc * WGK[7];
        let mut res_g = fc * WG[3];
        let mut res_abs = res_k.abs();
        for j in 0..7 {
            let (f1, f2) = (buf[2 * j + 1][c], buf[2 * j + 2][c]);
            if !(f1.is_finite() && f2.is_finite()) {
                return Err(Error::Quadrature { a, b, error: f64::NAN });
            }
            res_k += WGK[j] * (f1 + f2);
            res_abs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                res_g += WG[j / 2] * (f1 + f2);
            }
        }
        let mean = 0.5 * res_k;
        let mut res_asc = WGK[7] * (fc - mean).abs();
        for j in 0..7 {
            res_asc += WGK[j] * ((buf[2 * j + 1][c] - mean).abs() + (buf[2 * j + 2][c] - mean).abs());
        }
        let habs = half.abs();
        value[c] = res_k * half;
        error[c] = rescale_error((res_k - res_g) * half, res_abs * habs, res_asc * habs);
    }
    Ok((value, error))
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Integrates a vector-valued function over the finite interval [a, b].
pub fn integrate_vec<F>(mut f: F, a: f64, b: f64, dim: usize, tol: Tolerance) -> Result<Estimate<Vec<f64>>>
where
    F: FnMut(f64, &mut [f64]),
{
    if a == b {
        return Ok(Estimate {
            value: vec![0.0; dim],
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut buf: [Vec<f64>; 15] = std::array::from_fn(|_| vec![0.0; dim]);
    let mut heap = BinaryHeap::new();
    let (value, error) = kronrod(&mut f, a, b, dim, &mut buf)?;
    let mut evaluations = 15;
    let mut total = value.clone();
    let mut total_err = error.clone();
    // each component must meet its own tolerance; segments are ranked by
    // their worst error relative to that tolerance
    let targets = |total: &[f64]| -> Vec<f64> { total.iter().map(|v| tol.abs.max(tol.rel * v.abs())).collect() };
    let weight = |err: &[f64], target: &[f64]| err.iter().zip(target).map(|(e, t)| e / t).fold(0.0, f64::max);
    let norm = weight(&error, &targets(&total));
    heap.push(Segment { a, b, value, error, norm });
    // segments too narrow to split further
    let mut frozen: Vec<Segment> = Vec::new();

    loop {
        let target = targets(&total);
        if weight(&total_err, &target) <= 1.0 {
            break;
        }
        if heap.len() + frozen.len() >= tol.max_intervals {
            let err_norm = total_err.iter().cloned().fold(0.0, f64::max);
            return Err(Error::Quadrature { a, b, error: err_norm });
        }
        let Some(seg) = heap.pop() else {
            // nothing left to refine; accept what roundoff allows
            break;
        };
        let mid = 0.5 * (seg.a + seg.b);
        if (seg.b - seg.a).abs() <= 1e-13 * seg.a.abs().max(seg.b.abs()) || mid == seg.a || mid == seg.b {
            frozen.push(seg);
            continue;
        }
        let (v1, e1) = kronrod(&mut f, seg.a, mid, dim, &mut buf)?;
        let (v2, e2) = kronrod(&mut f, mid, seg.b, dim, &mut buf)?;
        evaluations += 30;
        for c in 0..dim {
            total[c] += v1[c] + v2[c] - seg.value[c];
            total_err[c] += e1[c] + e2[c] - seg.error[c];
        }
        let n1 = weight(&e1, &target);
        let n2 = weight(&e2, &target);
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1, norm: n1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2, norm: n2 });
    }

    // re-sum from the segments to shed drift from the running updates
    let mut sums = vec![CompensatedSum::default(); dim];
    let mut errs = vec![0.0; dim];
    for seg in heap.iter().chain(frozen.iter()) {
        for c in 0..dim {
            sums[c].add(seg.value[c]);
            errs[c] += seg.error[c];
        }
    }
    Ok(Estimate {
        value: sums.iter().map(CompensatedSum::value).collect(),
        error: errs.iter().cloned().fold(0.0, f64::max),
        evaluations,
    })
}

/// Scalar convenience wrapper over [`integrate_vec`].
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate<f64>>
where
    F: FnMut(f64) -> f64,
{
    let est = integrate_vec(|x, out: &mut [f64]| out[0] = f(x), a, b, 1, tol)?;
    Ok(Estimate {
        value: est.value[0],
        error: est.error,
        evaluations: est.evaluations,
    })
}

/// Integrates over [a, inf). The stretch [a, a + scale] is handled directly,
/// the tail through t = c / u with c = a + scale. The integrand must decay
/// faster than 1/t.
pub fn integrate_vec_to_infinity<F>(mut f: F, a: f64, scale: f64, dim: usize, tol: Tolerance) -> Result<Estimate<Vec<f64>>>
where
    F: FnMut(f64, &mut [f64]),
{
    let c = a + scale;
    let head = integrate_vec(&mut f, a, c, dim, tol)?;
    let tail = integrate_vec(
        |u, out: &mut [f64]| {
            let t = c / u;
            f(t, out);
            let jac = c / (u * u);
            out.iter_mut().for_each(|v| {
                *v = if *v == 0.0 { 0.0 } else { *v * jac };
            });
        },
        0.0,
        1.0,
        dim,
        tol,
    )?;
    Ok(Estimate {
        value: head.value.iter().zip(&tail.value).map(|(h, t)| h + t).collect(),
        error: head.error + tail.error,
        evaluations: head.evaluations + tail.evaluations,
    })
}

pub fn integrate_to_infinity<F>(mut f: F, a: f64, scale: f64, tol: Tolerance) -> Result<Estimate<f64>>
where
    F: FnMut(f64) -> f64,
{
    let est = integrate_vec_to_infinity(|x, out: &mut [f64]| out[0] = f(x), a, scale, 1, tol)?;
    Ok(Estimate {
        value: est.value[0],
        error: est.error,
        evaluations: est.evaluations,
    })
}
