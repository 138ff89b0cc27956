use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::operator_norm;
use crate::model::{separable_coefficient, NonSmoothKind, ProblemInstance};
use crate::oracles::{diameter, map_diameters, DiameterSampling};

use super::Variant;

/// Problem constants entering the rate bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryConstants {
    pub d_w: f64,
    pub d1_x: f64,
    pub dinf_x: f64,
    pub d1_a: f64,
    pub dinf_a: f64,
    pub norm_x: f64,
    pub norm_a: f64,
    pub l_f: f64,
    pub l_g: Option<f64>,
    pub n: usize,
    pub m: usize,
    pub beta0: f64,
    /// `||(1/n) f'(X w_1) - alpha_0||_1` with `alpha_0 = 0`.
    pub init_err_f: f64,
    /// `||(1/m) g'_{beta0}(A w_1) - gamma_0||_1` for separable `g`.
    pub init_err_g: Option<f64>,
    pub y_star_norm: Option<f64>,
    /// False when `D_1`/`D_inf` are sampled lower estimates.
    pub diameters_exact: bool,
}

impl TheoryConstants {
    /// `(C1, C2, C3)` for the given variant. `ExactHcgm` uses the V1 set.
    pub fn c123(&self, variant: Variant) -> (f64, f64, f64) {
        let n = self.n as f64;
        let m = self.m as f64;
        let dw2 = self.d_w * self.d_w;
        let c2 = 8.0 * self.l_f * self.d1_x * self.dinf_x + 2.0 * self.l_f * self.norm_x * dw2 / n;
        let c3_f = 2.0 * n * n * self.dinf_x * (self.init_err_f + 32.0 * self.l_f * self.d1_x);
        match variant {
            Variant::V1 | Variant::ExactHcgm => (2.0 * dw2 * self.norm_a / self.beta0, c2, c3_f),
            Variant::V2 => {
                let c1 = (2.0 * dw2 * self.norm_a + 10.0 * self.d1_a) / self.beta0;
                let c3 = c3_f + 2.0 * m * m * self.dinf_a * self.init_err_g.unwrap_or(0.0);
                (c1, c2, c3)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryBound {
    pub k: usize,
    /// Bound on the smoothed gap `S_{beta_k}(w_{k+1})`.
    pub gap_bound: f64,
    /// Upper bound on `F - F_star` (Lipschitz `g`) or `f - f_star`
    /// (indicator `g`).
    pub subopt_upper: Option<f64>,
    pub subopt_lower: Option<f64>,
    pub infeas_bound: Option<f64>,
}

/// Evaluates the rate bounds at iteration `k >= 1`. The suboptimality upper
/// bound uses `L_g` when present and the indicator form otherwise; the
/// infeasibility bound and the lower bound need `y_star_norm`.
pub fn theory_bound(tc: &TheoryConstants, k: usize, variant: Variant) -> TheoryBound {
    let kf = k.max(1) as f64;
    let sk = kf.sqrt();
    let (c1, c2, c3) = tc.c123(variant);
    let gap_bound = c1 / sk + c2 / kf + c3 / (kf * kf);
    let subopt_upper = match tc.l_g {
        Some(lg) => Some(gap_bound + tc.beta0 * lg * lg / (2.0 * sk)),
        None => Some((c1 + tc.beta0) / sk + c2 / kf + c3 / (kf * kf)),
    };
    let infeas_bound = tc.y_star_norm.map(|y| {
        let c4 = 1.5 * tc.beta0 * y + (2.0 * c1).sqrt();
        c4 / sk + (2.0 * c2).sqrt() / kf.powf(0.75) + (2.0 * c3).sqrt() / kf.powf(1.25)
    });
    TheoryBound {
        k,
        gap_bound,
        subopt_upper,
        subopt_lower: tc.y_star_norm.zip(infeas_bound).map(|(y, ib)| -y * ib),
        infeas_bound,
    }
}

/// Computes the constants for `inst` with `w1` the first iterate of the run.
/// `D_W` is exact; `D_1`/`D_inf` are exact for atom sets and sampled lower
/// estimates otherwise; `||A||`, `||X||` come from power iteration.
pub fn theory_constants(
    inst: &ProblemInstance,
    w1: &[f64],
    beta0: f64,
    sampling: DiameterSampling,
    seed: u64,
) -> Result<TheoryConstants> {
    if w1.len() != inst.dim() {
        return Err(Error::DimensionMismatch {
            expected: inst.dim(),
            got: w1.len(),
        });
    }
    if !(beta0 > 0.0) {
        return Err(Error::InvalidParameter("beta0 must be positive".into()));
    }
    let set = inst.feasible_set();
    let smooth = inst.smooth();
    let nonsmooth = inst.nonsmooth();
    let d = inst.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dx = map_diameters(set, smooth.rows(), sampling, &mut rng)?;
    let da = map_diameters(set, nonsmooth.map(), sampling, &mut rng)?;
    let init_err_f = (0..smooth.n()).map(|i| smooth.scaled_derivative(i, w1).abs()).sum();
    let init_err_g = match nonsmooth.kind() {
        NonSmoothKind::Separable(c) => {
            let m = c.len();
            Some(
                nonsmooth
                    .map()
                    .iter()
                    .zip(c)
                    .map(|(row, g)| separable_coefficient(g, row.dot(w1), beta0, m).abs())
                    .sum(),
            )
        }
        NonSmoothKind::ProxFriendly(_) => None,
    };
    Ok(TheoryConstants {
        d_w: diameter(set),
        d1_x: dx.l1,
        dinf_x: dx.linf,
        d1_a: da.l1,
        dinf_a: da.linf,
        norm_x: operator_norm(smooth.rows(), d, 1e-12, 10_000),
        norm_a: operator_norm(nonsmooth.map(), d, 1e-12, 10_000),
        l_f: smooth.lipschitz(),
        l_g: nonsmooth.lipschitz(),
        n: smooth.n(),
        m: nonsmooth.m(),
        beta0,
        init_err_f,
        init_err_g,
        y_star_norm: None,
        diameters_exact: dx.exact && da.exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeros() -> TheoryConstants {
        TheoryConstants {
            d_w: 0.0,
            d1_x: 0.0,
            dinf_x: 0.0,
            d1_a: 0.0,
            dinf_a: 0.0,
            norm_x: 0.0,
            norm_a: 0.0,
            l_f: 0.0,
            l_g: None,
            n: 1,
            m: 1,
            beta0: 1.0,
            init_err_f: 0.0,
            init_err_g: None,
            y_star_norm: None,
            diameters_exact: true,
        }
    }

    #[test]
    fn plug_in_example() {
        let tc = TheoryConstants {
            d_w: 1.0,
            norm_a: 1.0,
            ..zeros()
        };
        assert_eq!(theory_bound(&tc, 4, Variant::V1).gap_bound, 1.0);
    }

    #[test]
    fn only_c1_inputs_give_c1_over_sqrt_k() {
        let tc = TheoryConstants {
            d_w: 3.0,
            norm_a: 2.0,
            beta0: 5.0,
            ..zeros()
        };
        let c1 = 2.0 * 9.0 * 2.0 / 5.0;
        for k in [1, 7, 100, 12345] {
            assert_eq!(theory_bound(&tc, k, Variant::V1).gap_bound, c1 / (k as f64).sqrt());
        }
    }

    #[test]
    fn absent_constants_are_marked() {
        let b = theory_bound(&zeros(), 10, Variant::V2);
        assert!(b.infeas_bound.is_none() && b.subopt_lower.is_none());
        let tc = TheoryConstants {
            y_star_norm: Some(1.0),
            ..zeros()
        };
        let b = theory_bound(&tc, 4, Variant::V2);
        assert_eq!(b.infeas_bound, Some(1.5 / 2.0));
        assert_eq!(b.subopt_lower, Some(-0.75));
    }

    #[test]
    fn lipschitz_term_is_added() {
        let tc = TheoryConstants {
            l_g: Some(2.0),
            beta0: 3.0,
            ..zeros()
        };
        assert_eq!(theory_bound(&tc, 9, Variant::V1).subopt_upper, Some(3.0 * 4.0 / 6.0));
    }

    #[test]
    fn v2_constants_include_g_terms() {
        let tc = TheoryConstants {
            d1_a: 1.0,
            dinf_a: 2.0,
            m: 3,
            init_err_g: Some(0.5),
            ..zeros()
        };
        let (c1, _, c3) = tc.c123(Variant::V2);
        assert_eq!(c1, 10.0);
        assert_eq!(c3, 2.0 * 9.0 * 2.0 * 0.5);
        assert_eq!(tc.c123(Variant::V1).0, 0.0);
    }

    proptest::proptest! {
        #[test]
        fn gap_bound_is_non_increasing(
            d_w in 0.0..10.0f64, na in 0.0..10.0f64, lf in 0.0..10.0f64, d1 in 0.0..10.0f64,
            dinf in 0.0..10.0f64, e in 0.0..10.0f64, k in 1usize..100_000,
        ) {
            let tc = TheoryConstants {
                d_w, norm_a: na, l_f: lf, d1_x: d1, dinf_x: dinf, norm_x: na, init_err_f: e,
                d1_a: d1, dinf_a: dinf, init_err_g: Some(e), n: 5, m: 7, ..zeros()
            };
            for v in [Variant::V1, Variant::V2] {
                proptest::prop_assert!(theory_bound(&tc, k + 1, v).gap_bound <= theory_bound(&tc, k, v).gap_bound);
            }
        }
    }
}
