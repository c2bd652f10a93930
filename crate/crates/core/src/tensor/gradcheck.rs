use super::matrix::Matrix;
use super::tape::{Tape, Var};
use crate::error::Result;

/// Outcome of comparing tape gradients against central differences.
#[derive(Clone, Debug, PartialEq)]
pub enum GradCheck {
    /// Some relu/hinge/max input sits within `10 h` of its kink; finite
    /// differences would straddle it, so nothing was compared. Resample the point.
    NearKink { margin: f64 },
    Checked(GradCheckReport),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// max over coordinates of `|a - n| / max(1e-8, |a| + |n|)`.
    pub max_rel_error: f64,
    pub coordinates: usize,
    /// `(param index, flat index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl GradCheck {
    pub fn report(&self) -> Option<&GradCheckReport> {
        match self {
            GradCheck::Checked(r) => Some(r),
            GradCheck::NearKink { .. } => None,
        }
    }
}

/// Relative error between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Rounding error assumed in each evaluation of `f`, in ulps of `max(1, |f|)`.
const ROUNDOFF_ULPS: f64 = 8.0;

/// [`relative_error`] after discounting `resolution`, the rounding uncertainty
/// of the numeric derivative. Differences inside it count as agreement.
pub fn relative_error_within(analytic: f64, numeric: f64, resolution: f64) -> f64 {
    ((analytic - numeric).abs() - resolution).max(0.0) / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Checks the tape gradient of the scalar `f` at `params` against central
/// differences `(f(θ + h eᵢ) − f(θ − h eᵢ)) / 2h`, coordinate by coordinate.
pub fn grad_check<F>(f: F, params: &[Matrix<f64>], h: f64) -> Result<GradCheck>
where
    F: for<'t> Fn(&'t Tape<f64>, &[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    let tape = Tape::new();
    let vars: Vec<_> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&tape, &vars)?;
    if let Some(margin) = tape.kink_margin() {
        if margin < 10.0 * h {
            return Ok(GradCheck::NearKink { margin });
        }
    }
    let grads = tape.backward(loss)?;
    let analytic: Vec<Matrix<f64>> = vars.iter().map(|&v| grads.get_or_zeros(v)).collect();
    drop(tape);

    let eval = |point: &[Matrix<f64>]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<_> = point.iter().map(|p| tape.constant(p.clone())).collect();
        Ok(f(&tape, &vars)?.value().item())
    };

    let mut point: Vec<Matrix<f64>> = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coordinates: 0,
        worst: None,
    };
    for p in 0..point.len() {
        for i in 0..point[p].data().len() {
            let orig = point[p].data()[i];
            point[p].data_mut()[i] = orig + h;
            let plus = eval(&point)?;
            point[p].data_mut()[i] = orig - h;
            let minus = eval(&point)?;
            point[p].data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let scale = plus.abs().max(minus.abs()).max(1.0);
            let resolution = ROUNDOFF_ULPS * f64::EPSILON * scale / h;
            let a = analytic[p].data()[i];
            let err = relative_error_within(a, numeric, resolution);
            report.coordinates += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((p, i, a, numeric));
            }
        }
    }
    Ok(GradCheck::Checked(report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_norm_passes_tightly() {
        let x = Matrix::from_rows(&[&[0.3, -1.7, 2.2, 0.9]]);
        let res = grad_check(|_, v| Ok(v[0].mul(&v[0])?.sum()), &[x], 1e-5).unwrap();
        let r = res.report().expect("smooth function");
        assert!(r.max_rel_error < 1e-7, "{r:?}");
        assert_eq!(r.coordinates, 4);
    }

    #[test]
    fn near_kink_is_reported_not_compared() {
        let x = Matrix::from_rows(&[&[1.0, 5e-5]]);
        let res = grad_check(|_, v| Ok(v[0].relu().sum()), &[x], 1e-5).unwrap();
        assert!(matches!(res, GradCheck::NearKink { .. }));
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rand_m = |r: usize, c: usize| {
            let data = (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Matrix::from_vec(r, c, data).unwrap()
        };
        fn f<'t>(tape: &'t Tape<f64>, v: &[Var<'t, f64>]) -> Result<Var<'t, f64>> {
            let adj = std::sync::Arc::new(crate::tensor::SparseRows::from_row_lists(
                3,
                &[vec![(1, 0.5), (2, 0.5)], vec![(0, 1.0)], vec![]],
            ));
            let y = v[0].matmul(&v[1])?; // 3x2
            let y = y.sparse_left_mul(adj)?.add(&y)?;
            let z = y.mul(&v[2])?.sub(&v[2].scale(0.3))?;
            let z = z.concat_cols(&v[2].row_normalize())?;
            let w = v[3].broadcast_rows(3)?.concat_cols(&v[3].broadcast_rows(3)?)?;
            let z = z.add(&w)?.relu();
            let a = z.col_max()?;
            let b = z.transpose().transpose().col_mean()?;
            let c = a.cosine(&b)?;
            c.neg()
                .add(&v[3].sum())?
                .add(&tape.constant(Matrix::scalar(5.0)))?
                .hinge()
        }
        let mut checked = 0;
        for _ in 0..20 {
            let params = vec![rand_m(3, 4), rand_m(4, 2), rand_m(3, 2), rand_m(1, 2)];
            if let GradCheck::Checked(r) = grad_check(f, &params, 1e-5).unwrap() {
                assert!(r.max_rel_error < 1e-4, "{r:?}");
                checked += 1;
            }
        }
        assert!(checked >= 5, "only {checked} kink-free samples");
    }
}
