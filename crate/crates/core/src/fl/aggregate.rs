use super::{ClientUpdate, FlError, ModelParams};

/// Sample-count-weighted mean of client parameters.
///
/// Updates are combined in a canonical order (client id, then sample count,
/// then weights) so the floating-point result does not depend on arrival
/// order. The mean is accumulated as offsets from the first canonical update,
/// which makes aggregating identical updates return them bit-for-bit, and each
/// coordinate is clamped to the inputs' range to absorb rounding.
pub fn fedavg_aggregate(updates: &[ClientUpdate]) -> Result<ModelParams, FlError> {
    let first = updates.first().ok_or_else(|| FlError::InvalidArgument("no updates to aggregate".into()))?;
    let dim = first.params.dim();
    if let Some(bad) = updates.iter().find(|u| u.params.dim() != dim) {
        return Err(FlError::DimensionMismatch { expected: dim, actual: bad.params.dim() });
    }
    if let Some(bad) = updates.iter().find(|u| u.sample_count == 0) {
        return Err(FlError::InvalidArgument(format!("client {} reported zero samples", bad.client_id)));
    }

    let mut ordered: Vec<&ClientUpdate> = updates.iter().collect();
    ordered.sort_by(|a, b| {
        a.client_id
            .cmp(&b.client_id)
            .then(a.sample_count.cmp(&b.sample_count))
            .then_with(|| {
                a.params
                    .weights
                    .iter()
                    .zip(&b.params.weights)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });

    let total: f64 = ordered.iter().map(|u| u.sample_count as f64).sum();
    let base = &ordered[0].params.weights;
    let mut offset = vec![0.0; dim];
    for u in &ordered[1..] {
        let share = u.sample_count as f64 / total;
        for ((o, w), b) in offset.iter_mut().zip(&u.params.weights).zip(base) {
            *o += share * (w - b);
        }
    }
    // The base update's own offset term is zero.
    let weights = (0..dim)
        .map(|j| {
            let v = base[j] + offset[j];
            let (lo, hi) = ordered.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| {
                (lo.min(u.params.weights[j]), hi.max(u.params.weights[j]))
            });
            v.clamp(lo, hi)
        })
        .collect();
    Ok(ModelParams::new(weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upd(id: u32, w: &[f64], n: u32) -> ClientUpdate {
        ClientUpdate { client_id: id, params: ModelParams::new(w.to_vec()), sample_count: n, local_loss: 0.0 }
    }

    #[test]
    fn single_update_is_identity() {
        let u = upd(3, &[0.1, -2.5, 1e-300], 7);
        assert_eq!(fedavg_aggregate(std::slice::from_ref(&u)).unwrap(), u.params);
    }

    #[test]
    fn equal_counts_give_plain_mean() {
        let out = fedavg_aggregate(&[upd(0, &[1.0, 3.0], 4), upd(1, &[3.0, 5.0], 4)]).unwrap();
        assert_eq!(out.weights, vec![2.0, 4.0]);
    }

    #[test]
    fn weighted_mean() {
        let out = fedavg_aggregate(&[upd(0, &[1.0, 3.0], 1), upd(1, &[3.0, 5.0], 3)]).unwrap();
        assert_eq!(out.weights, vec![2.5, 4.5]);
    }

    #[test]
    fn identical_copies_are_exact() {
        let w = [0.1, 0.7, -1.0 / 3.0];
        let ups: Vec<_> = (0..7).map(|i| upd(i, &w, 3 + i)).collect();
        assert_eq!(fedavg_aggregate(&ups).unwrap().weights, w.to_vec());
    }

    #[test]
    fn errors() {
        assert!(fedavg_aggregate(&[]).is_err());
        assert!(matches!(
            fedavg_aggregate(&[upd(0, &[1.0], 1), upd(1, &[1.0, 2.0], 1)]),
            Err(FlError::DimensionMismatch { .. })
        ));
        assert!(fedavg_aggregate(&[upd(0, &[1.0], 0)]).is_err());
    }
}
