//! Adaptive 7/15-point Gauss–Kronrod quadrature.

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

/// Gauss weights for the odd Kronrod nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = hw * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * hw, ((kronrod - gauss) * hw).abs())
}

/// Integral of `f` over `[a, b]` with estimated error, refined by bisecting the
/// panel with the largest error until `err ≤ max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> (f64, f64) {
    if !(b > a) {
        return (0.0, 0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    for _ in 0..2000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (pa, pb, _, _) = panels.swap_remove(i);
        let m = 0.5 * (pa + pb);
        if !(m > pa && m < pb) {
            panels.push((pa, pb, 0.0, 0.0));
            continue;
        }
        let (v1, e1) = gk15(&f, pa, m);
        let (v2, e2) = gk15(&f, m, pb);
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
    }
    panels.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total = crate::numeric::pairwise_sum(&panels.iter().map(|p| p.2).collect::<Vec<_>>());
    (total, panels.iter().map(|p| p.3).sum())
}

/// Sum of [`integrate`] over consecutive breakpoints.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> f64 {
    points
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], rel_tol, abs_tol).0)
        .sum()
}
