//! Globally adaptive 15-point Gauss–Kronrod quadrature.

// Published constants, kept at their full printed precision.
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
const MAX_INTERVALS: usize = 4096;

// Kronrod abscissae on [0, 1] in decreasing order; odd indices are the 7-point
// Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
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

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let sample = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFiniteIntegrand { x })
        }
    };
    let fc = sample(center)?;
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = sample(center - dx)? + sample(center + dx)?;
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok(Segment {
        lo,
        hi,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    })
}

/// Integrates `f` over `[lo, hi]` to an absolute error estimate of `tol`.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate falls below `tol`. The procedure is deterministic.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    integrate_split(f, lo, hi, &[], tol)
}

/// Like [`integrate`], with the initial partition split at `breaks` (points
/// where the integrand has a kink). Breaks outside `(lo, hi)` are ignored.
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<f64> {
    if !(lo <= hi) {
        return Err(Error::OutOfRange {
            what: "integration lower limit",
            value: lo,
            lo: f64::NEG_INFINITY,
            hi,
        });
    }
    if !(tol > 0.0) {
        return Err(Error::OutOfRange {
            what: "tolerance",
            value: tol,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if lo == hi {
        return Ok(0.0);
    }
    let mut edges = vec![lo];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&b| b > lo && b < hi)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    edges.extend(inner);
    edges.push(hi);

    let mut segments = Vec::with_capacity(64);
    for w in edges.windows(2) {
        segments.push(kronrod(&f, w[0], w[1])?);
    }
    loop {
        let total_err: f64 = segments.iter().map(|s| s.error).sum();
        if total_err <= tol {
            break;
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNotConverged {
                tol,
                estimate: total_err,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("non-empty");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.lo + seg.hi);
        if mid <= seg.lo || mid >= seg.hi {
            // Interval cannot be split further in floating point.
            return Err(Error::QuadratureNotConverged {
                tol,
                estimate: total_err,
            });
        }
        segments.push(kronrod(&f, seg.lo, mid)?);
        segments.push(kronrod(&f, mid, seg.hi)?);
    }
    segments.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    Ok(segments.iter().map(|s| s.value).sum())
}
