//! Numerical building blocks: adaptive quadrature and reproducible summation.

use rayon::prelude::*;

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
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    abs: [f64; N],
    err: [f64; N],
}

fn gk15<const N: usize, F: Fn(f64) -> [f64; N]>(f: &F, a: f64, b: f64) -> Segment<N> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    let mut abs = [0.0; N];
    let centre = f(c);
    for k in 0..N {
        kron[k] = WGK[7] * centre[k];
        gauss[k] = WG[3] * centre[k];
        abs[k] = WGK[7] * centre[k].abs();
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let lo = f(c - dx);
        let hi = f(c + dx);
        for k in 0..N {
            let s = lo[k] + hi[k];
            kron[k] += WGK[j] * s;
            abs[k] += WGK[j] * (lo[k].abs() + hi[k].abs());
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut err = [0.0; N];
    for k in 0..N {
        value[k] = kron[k] * h;
        abs[k] *= h.abs();
        err[k] = ((kron[k] - gauss[k]) * h).abs();
    }
    Segment { a, b, value, abs, err }
}

/// Outcome of [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Quadrature<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub segments: usize,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature of a vector-valued
/// integrand over `[a, b]`.
///
/// Splits the worst segment until every component satisfies
/// `error_k <= rel_tol * ∫|f_k|`, or `max_segments` is reached.
pub fn integrate<const N: usize, F>(f: F, a: f64, b: f64, rel_tol: f64, max_segments: usize) -> Quadrature<N>
where
    F: Fn(f64) -> [f64; N],
{
    let initial = 8.min(max_segments.max(1));
    let step = (b - a) / initial as f64;
    let mut segs: Vec<Segment<N>> = (0..initial)
        .map(|i| {
            let lo = a + step * i as f64;
            let hi = if i + 1 == initial { b } else { a + step * (i + 1) as f64 };
            gk15(&f, lo, hi)
        })
        .collect();

    loop {
        let mut value = [0.0; N];
        let mut abs = [0.0; N];
        let mut err = [0.0; N];
        for s in &segs {
            for k in 0..N {
                value[k] += s.value[k];
                abs[k] += s.abs[k];
                err[k] += s.err[k];
            }
        }
        let ok = (0..N).all(|k| err[k] <= rel_tol * abs[k] || err[k] <= f64::MIN_POSITIVE);
        if ok || segs.len() >= max_segments {
            return Quadrature { value, error: err, segments: segs.len(), converged: ok };
        }
        // Worst segment by error relative to each component's scale.
        let worst = segs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let score = (0..N)
                    .map(|k| if abs[k] > 0.0 { s.err[k] / abs[k] } else { 0.0 })
                    .fold(0.0, f64::max);
                (i, score)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let s = segs.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            // Segment cannot be split further in floating point.
            return Quadrature { value, error: err, segments: segs.len() + 1, converged: false };
        }
        segs.push(gk15(&f, s.a, mid));
        segs.push(gk15(&f, mid, s.b));
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    integrate(|x| [f(x)], a, b, rel_tol, 4000).value[0]
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Elements per leaf of the fixed reduction tree used by [`reproducible_sum`].
const SUM_CHUNK: usize = 4096;

/// Parallel sum of `f(x)` whose result depends only on the input, not on the
/// thread count: leaves are fixed-size chunks, combined in order.
pub fn reproducible_sum<T: Sync, F: Fn(&T) -> f64 + Sync>(items: &[T], f: F) -> f64 {
    let partials: Vec<f64> = items
        .par_chunks(SUM_CHUNK)
        .map(|chunk| compensated_sum(chunk.iter().map(&f)))
        .collect();
    compensated_sum(partials)
}
