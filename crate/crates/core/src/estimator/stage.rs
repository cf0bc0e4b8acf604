//! Minimizer of `‖r − T d − K c‖²_n + μ² cᵀ K c` over `(d, c)` for a fixed
//! residual target `r`, with `a = n μ²`:
//!
//! ```text
//! W = K + a I
//! d = (Tᵀ W⁻¹ T)⁻¹ Tᵀ W⁻¹ r
//! c = W⁻¹ (r − T d)
//! ```
//!
//! The residual map `r ↦ r − T d − K c` equals
//! `R = a [W⁻¹ − W⁻¹ T (Tᵀ W⁻¹ T)⁻¹ Tᵀ W⁻¹]`, which is symmetric, and the
//! minimum value of the objective is `rᵀ R r / n`.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::{symmetrize, SpdFactor};

struct NullProjection {
    design: DMatrix<f64>,
    w_inv_design: DMatrix<f64>,
    normal: SpdFactor,
}

pub(crate) struct PenalizedStage {
    w: SpdFactor,
    null: Option<NullProjection>,
    residual_op: DMatrix<f64>,
}

pub(crate) struct StageSolution {
    pub null: Option<DVector<f64>>,
    pub coef: DVector<f64>,
}

impl PenalizedStage {
    pub fn new(kernel: &DMatrix<f64>, null_design: Option<&DMatrix<f64>>, a: f64) -> Result<Self> {
        let n = kernel.nrows();
        let mut w = kernel.clone();
        for i in 0..n {
            w[(i, i)] += a;
        }
        let w = SpdFactor::new(&w, "penalized kernel system")?;
        let mut w_inv = w.inverse();
        let null = match null_design {
            Some(t) => {
                let w_inv_design = &w_inv * t;
                let mut normal = t.transpose() * &w_inv_design;
                symmetrize(&mut normal);
                let normal = SpdFactor::strict(&normal, "null-space normal matrix")?;
                Some(NullProjection {
                    design: t.clone(),
                    w_inv_design,
                    normal,
                })
            }
            None => None,
        };
        if let Some(p) = &null {
            let proj = &p.w_inv_design * p.normal.solve_mat(&p.w_inv_design.transpose());
            w_inv -= proj;
        }
        let mut residual_op = w_inv * a;
        symmetrize(&mut residual_op);
        Ok(PenalizedStage {
            w,
            null,
            residual_op,
        })
    }

    /// The symmetric map from the target to the stage residual; the stage
    /// smoother is `I − R`.
    pub fn residual_operator(&self) -> &DMatrix<f64> {
        &self.residual_op
    }

    pub fn solve(&self, r: &DVector<f64>) -> StageSolution {
        match &self.null {
            Some(p) => {
                let d = p.normal.solve(&(p.w_inv_design.transpose() * r));
                let coef = self.w.solve(&(r - &p.design * &d));
                StageSolution {
                    null: Some(d),
                    coef,
                }
            }
            None => StageSolution {
                null: None,
                coef: self.w.solve(r),
            },
        }
    }
}
