//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates forward values, so it is independent
//! of the backward implementation it is used to verify.

use rand::seq::index::sample;
use rand::Rng;

use crate::tensor::{ParamId, ParameterStore, Tape, TensorError, Var};

pub const EPSILON: f64 = 1e-4;
pub const REL_TOLERANCE: f64 = 1e-4;
pub const ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Coordinates whose gradient magnitude exceeds [`ABS_FLOOR`].
    pub significant: usize,
    /// Largest relative error among significant coordinates.
    pub max_rel_error: f64,
    pub failures: Vec<Mismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }

    /// Counts one compared coordinate; mismatches are recorded by the caller.
    pub fn record(&mut self, analytic: f64, numeric: f64) {
        self.checked += 1;
        let scale = analytic.abs().max(numeric.abs());
        if scale > ABS_FLOOR {
            self.significant += 1;
            self.max_rel_error = self.max_rel_error.max((analytic - numeric).abs() / scale);
        }
    }
}

/// Agreement test: absolute difference under the floor, or relative
/// difference under the tolerance.
pub fn agrees(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= ABS_FLOOR || diff / analytic.abs().max(numeric.abs()) <= REL_TOLERANCE
}

/// Compares backprop gradients of the scalar built by `loss` against central
/// differences for `params`. At most `per_param` coordinates of each
/// parameter are sampled (all of them when `None`).
pub fn check<R, F>(
    store: &mut ParameterStore,
    params: &[ParamId],
    per_param: Option<usize>,
    rng: &mut R,
    loss: F,
) -> Result<GradCheckReport, TensorError>
where
    R: Rng,
    F: Fn(&mut Tape) -> Result<Var, TensorError>,
{
    let grads = {
        let mut tape = Tape::new(store);
        let out = loss(&mut tape)?;
        tape.backward(out)?
    };

    let eval = |store: &ParameterStore| -> Result<f64, TensorError> {
        let mut tape = Tape::new(store);
        let out = loss(&mut tape)?;
        Ok(tape.scalar(out))
    };

    let mut report = GradCheckReport::default();
    for &id in params {
        let analytic = grads.dense(id);
        let len = analytic.len();
        let indices: Vec<usize> = match per_param {
            Some(k) if k < len => sample(rng, len, k).into_vec(),
            _ => (0..len).collect(),
        };
        for index in indices {
            let original = store.value(id).data()[index];
            store.value_mut(id).data_mut()[index] = original + EPSILON;
            let plus = eval(store)?;
            store.value_mut(id).data_mut()[index] = original - EPSILON;
            let minus = eval(store)?;
            store.value_mut(id).data_mut()[index] = original;

            let numeric = (plus - minus) / (2.0 * EPSILON);
            let a = analytic[index];
            report.record(a, numeric);
            if !agrees(a, numeric) {
                report.failures.push(Mismatch {
                    param: store.name(id).to_owned(),
                    index,
                    analytic: a,
                    numeric,
                });
            }
        }
    }
    Ok(report)
}
