//! Dense matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant (Higham 2005).

use nalgebra::DMatrix;

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled [13/13] approximant is accurate to
/// unit roundoff.
const THETA13: f64 = 5.371_920_351_148_152;

pub(crate) fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(m)` for a square matrix.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "expm requires a square matrix");
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }

    let norm = one_norm(m);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = m * 2f64.powi(-squarings);

    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = &PADE13;

    let u_inner = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u_outer = &a6 * &u_inner + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let u = &a * u_outer;

    let v_inner = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * &v_inner + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular after scaling");

    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_matrix_gives_identity() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(expm(&z), DMatrix::identity(3, 3));
    }

    #[test]
    fn diagonal_matches_scalar_exp() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-3.0, 0.5, 12.0]));
        let e = expm(&d);
        assert_relative_eq!(e[(0, 0)], (-3f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(e[(1, 1)], 0.5f64.exp(), max_relative = 1e-14);
        assert_relative_eq!(e[(2, 2)], 12f64.exp(), max_relative = 1e-13);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn rotation_generator() {
        // exp(t [[0, w], [-w, 0]]) is a rotation by w t.
        let (w, t) = (5.0, 1.7);
        let m = DMatrix::from_row_slice(2, 2, &[0.0, w * t, -w * t, 0.0]);
        let e = expm(&m);
        let th = w * t;
        assert_relative_eq!(e[(0, 0)], th.cos(), epsilon = 1e-13);
        assert_relative_eq!(e[(0, 1)], th.sin(), epsilon = 1e-13);
        assert_relative_eq!(e[(1, 0)], -th.sin(), epsilon = 1e-13);
    }

    #[test]
    fn nilpotent_block() {
        // [[0, c], [0, 0]] exponentiates to [[1, c], [0, 1]].
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 7.5, 0.0, 0.0]);
        let e = expm(&m);
        assert_relative_eq!(e[(0, 1)], 7.5, max_relative = 1e-15);
        assert_relative_eq!(e[(0, 0)], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn agrees_with_nalgebra_exp() {
        let m =
            DMatrix::from_row_slice(3, 3, &[-1.0, 5.0, 0.3, -5.0, -1.0, 10.0, 0.0, 0.0, 0.0]) * 2.5;
        let ours = expm(&m);
        let theirs = m.clone().exp();
        assert_relative_eq!(ours, theirs, max_relative = 1e-12, epsilon = 1e-12);
    }
}
