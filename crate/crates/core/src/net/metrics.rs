use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Mlp, SensitivityModel};
use crate::data::{Dataset, SensRecord};
use crate::linalg::{dist, norm};
use crate::{Error, Result};

/// Floor on `‖y‖` in the relative error.
pub const MRE_FLOOR: f64 = 1e-8;

/// Errors measured in the original (de-normalized) units.
///
/// `mse` is the mean squared error per element and `rmse` its square root;
/// `mre` is the mean of `‖ŷ − y‖ / ‖y‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub rmse: f64,
    pub mre: f64,
    pub count: usize,
}

impl Metrics {
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
    {
        let (mut se, mut re, mut elems, mut count) = (0.0, 0.0, 0usize, 0usize);
        for (pred, truth) in pairs {
            if pred.len() != truth.len() {
                return Err(Error::dim("prediction", truth.len(), pred.len()));
            }
            se += pred.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            re += dist(pred, truth) / norm(truth).max(MRE_FLOOR);
            elems += truth.len();
            count += 1;
        }
        if count == 0 {
            return Err(Error::Config("no records to evaluate".into()));
        }
        let mse = se / elems as f64;
        Ok(Metrics { mse, rmse: mse.sqrt(), mre: re / count as f64, count })
    }
}

/// Metrics of any sensitivity model on raw records.
pub fn evaluate_model(model: &dyn SensitivityModel, records: &[SensRecord]) -> Result<Metrics> {
    let preds = records
        .par_iter()
        .map(|r| model.eval(&r.x0, &r.v, r.t))
        .collect::<Result<Vec<_>>>()?;
    Metrics::from_pairs(preds.iter().map(Vec::as_slice).zip(records.iter().map(|r| r.target.as_slice())))
}

/// Metrics of a bare network under the dataset's normalization.
pub fn evaluate(m: &Mlp, data: &Dataset) -> Result<Metrics> {
    let normz = data
        .normalization
        .as_ref()
        .ok_or_else(|| Error::Config("dataset has no normalization".into()))?;
    let preds = data
        .records
        .par_iter()
        .map(|r| Ok(normz.denormalize_output(&m.forward(&normz.normalize_input(&r.input()))?)))
        .collect::<Result<Vec<_>>>()?;
    Metrics::from_pairs(
        preds.iter().map(Vec::as_slice).zip(data.records.iter().map(|r| r.target.as_slice())),
    )
}
