//! Pseudo-log-likelihood: the sum of each variable's log conditional given
//! the rest.

use super::softplus;
use crate::error::{Error, Result};
use crate::model::{DataSet, Model};

/// `Σ_n Σ_i log p(s_i⁽ⁿ⁾ | s_−i⁽ⁿ⁾, W)`, each conditional logistic in the
/// neighbour states. Multiplicities are applied.
pub fn pseudo_log_likelihood(model: &Model, data: &DataSet) -> Result<f64> {
    if data.k() != model.k() {
        return Err(Error::LengthMismatch { expected: model.k(), found: data.k() });
    }
    if !data.is_fully_observed() {
        return Err(Error::HiddenEntries);
    }
    let mut total = 0.0;
    for (row, &count) in data.rows().iter().zip(data.counts()) {
        let mut row_total = 0.0;
        for i in 0..model.k() {
            let a = model.field(i, row);
            row_total += f64::from(row[i]) * a - softplus(a);
        }
        total += count as f64 * row_total;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::sigmoid;
    use crate::exact::exact_log_z;
    use crate::model::{Layout, HIDDEN};

    #[test]
    fn zero_model() {
        let m = Model::zeros(Layout::complete(3).unwrap());
        let d = DataSet::from_rows(3, vec![vec![1, 0, 1], vec![0, 0, 0]]).unwrap();
        let pll = pseudo_log_likelihood(&m, &d).unwrap();
        assert!((pll + 2.0 * 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_node() {
        let m = Model::new(1, vec![], vec![0.8]).unwrap();
        let d = DataSet::from_rows(1, vec![vec![1]]).unwrap();
        assert!((pseudo_log_likelihood(&m, &d).unwrap() - sigmoid(0.8).ln()).abs() < 1e-14);
    }

    #[test]
    fn edgeless_model_matches_likelihood() {
        let m = Model::new(3, vec![], vec![0.4, -1.1, 2.2]).unwrap();
        let rows = vec![vec![1, 0, 1], vec![0, 1, 1], vec![1, 1, 0]];
        let d = DataSet::new(3, rows.clone(), Some(vec![2, 1, 3])).unwrap();
        let log_z = exact_log_z(&m).unwrap();
        let ll: f64 = rows
            .iter()
            .zip([2.0, 1.0, 3.0])
            .map(|(r, c)| c * (m.log_unnorm(r).unwrap() - log_z))
            .sum();
        assert!((pseudo_log_likelihood(&m, &d).unwrap() - ll).abs() < 1e-12);
    }

    #[test]
    fn hidden_entries_rejected() {
        let m = Model::zeros(Layout::complete(2).unwrap());
        let d = DataSet::from_rows(2, vec![vec![1, HIDDEN]]).unwrap();
        assert!(matches!(pseudo_log_likelihood(&m, &d), Err(Error::HiddenEntries)));
    }
}
