//! Quadrature rules on uniform grids and an adaptive Gauss–Kronrod integrator
//! used for verification-grade integrals.

/// Kronrod abscissae of the 15-point rule on [-1, 1] (non-negative half).
#[allow(clippy::excessive_precision)]
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

/// Gauss weights of the embedded 7-point rule, attached to XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Kronrod value, error estimate, and the Kronrod value of `|f|`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let (lo, hi) = (f(center - dx), f(center + dx));
        let pair = lo + hi;
        kronrod += w * pair;
        abs += w * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (
        kronrod * half,
        ((kronrod - gauss) * half).abs(),
        abs * half.abs(),
    )
}

/// Error estimates below this multiple of `ε ∫|f|` are roundoff and are not refined.
const ROUNDOFF_FACTOR: f64 = 50.0;

/// Subinterval budget of the adaptive integrator.
const MAX_INTERVALS: usize = 4000;

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    floor: f64,
}

impl Piece {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Self {
        let (value, err, abs) = gk15(f, a, b);
        Piece {
            a,
            b,
            value,
            err,
            floor: ROUNDOFF_FACTOR * f64::EPSILON * abs,
        }
    }

    fn excess(&self) -> f64 {
        if self.err <= self.floor {
            0.0
        } else {
            self.err
        }
    }
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.excess() == other.excess()
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.excess().total_cmp(&other.excess())
    }
}

/// Adaptive Gauss–Kronrod (G7/K15) integral of `f` over `[a, b]`.
///
/// The subinterval with the largest error estimate is bisected until the
/// summed estimate falls below `max(abs_tol, rel_tol * |I|)`, every remaining
/// estimate sits at the roundoff level of its subinterval, or the subinterval
/// budget is spent.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Piece::new(&f, a, b));
    loop {
        let (value, err): (f64, f64) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.excess()));
        if err == 0.0 || err <= abs_tol.max(rel_tol * value.abs()) || heap.len() >= MAX_INTERVALS {
            return value;
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(Piece { err: 0.0, ..worst });
            continue;
        }
        heap.push(Piece::new(&f, worst.a, mid));
        heap.push(Piece::new(&f, mid, worst.b));
    }
}

/// Convenience wrapper with tolerances suitable for verification oracles.
pub fn integrate_tight<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    integrate(f, a, b, 1e-15, 1e-14)
}

/// Composite trapezoid weights for `n` uniform intervals of width `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n + 1];
    w[0] = 0.5 * h;
    w[n] = 0.5 * h;
    w
}

/// Composite Simpson weights for `n` uniform intervals of width `h`.
///
/// For odd `n` the last three intervals use Simpson's 3/8 rule. Requires `n >= 2`.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2, "Simpson's rule needs at least two intervals");
    let mut w = vec![0.0; n + 1];
    let (even_part, tail) = if n.is_multiple_of(2) {
        (n, 0)
    } else {
        (n - 3, 3)
    };
    for i in (0..even_part).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if tail == 3 {
        let s = even_part;
        let c = 3.0 * h / 8.0;
        w[s] += c;
        w[s + 1] += 3.0 * c;
        w[s + 2] += 3.0 * c;
        w[s + 3] += c;
    }
    w
}

/// Weighted sum `sum_i w_i f_i g_i`.
pub fn weighted_dot(w: &[f64], f: &[f64], g: &[f64]) -> f64 {
    w.iter().zip(f).zip(g).map(|((w, f), g)| w * f * g).sum()
}
