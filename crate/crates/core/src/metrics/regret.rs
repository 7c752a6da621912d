//! Regret accounting against the Hedge bound `ln u / eta + eta T / 2`.
//!
//! Two losses are tracked side by side. The proof-consistent loss charges,
//! for every verified transaction, the selection-weighted penalty
//! `-Σ_k p_k Δr_k`; it is the quantity the bound holds for and drives all
//! regret figures. The wasted-verification count (invalid transactions the
//! governor actually checked) is reported next to it.

use serde::{Deserialize, Serialize};

use super::log::{MetricsLog, ScreeningRecord};
use crate::types::ProviderId;

pub fn hedge_bound(slots: usize, eta: f64, transactions: u64) -> f64 {
    (slots as f64).ln() / eta + eta * transactions as f64 / 2.0
}

/// `3/2 sqrt(T ln u)`: the bound at `eta = sqrt(ln u / T)`.
pub fn tuned_bound(slots: usize, transactions: u64) -> f64 {
    1.5 * (transactions as f64 * (slots as f64).ln()).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRegret {
    pub epoch_index: u32,
    /// Epoch length `T_i` used in the bound.
    pub threshold: u64,
    pub eta: f64,
    pub screened: u64,
    pub verified: u64,
    pub loss: f64,
    pub wasted_verifications: u64,
    pub slot_losses: Vec<u64>,
    pub s_min: u64,
    pub regret: f64,
    pub bound: f64,
    /// The epoch ended with a revenue payout.
    pub complete: bool,
    pub revenue_shares: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulativePoint {
    pub t_total: u64,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub provider: ProviderId,
    pub slots: usize,
    pub epochs: Vec<EpochRegret>,
    /// One point per completed epoch: `T_total = (2^l - 1) T` and the sum of
    /// per-epoch regrets so far.
    pub cumulative: Vec<CumulativePoint>,
    pub t_total: u64,
    pub cumulative_regret: f64,
    /// Least-squares log-log slope of `cumulative`; `None` when undefined.
    pub slope: Option<f64>,
    pub wasted_verifications: u64,
}

/// Regret over a run of screening records sharing one learning rate.
pub fn epoch_regret<'a>(
    records: impl IntoIterator<Item = &'a ScreeningRecord>,
    slots: usize,
    epoch_index: u32,
    threshold: u64,
    eta: f64,
) -> EpochRegret {
    let mut slot_losses = vec![0u64; slots];
    let mut loss = 0.0;
    let (mut screened, mut verified, mut wasted) = (0u64, 0u64, 0u64);
    for r in records {
        screened += 1;
        verified += u64::from(r.verified());
        wasted += u64::from(r.wasted());
        loss += r.proof_loss;
        for (s, d) in slot_losses.iter_mut().zip(&r.deltas) {
            *s += d.unsigned_abs();
        }
    }
    let s_min = slot_losses.iter().copied().min().unwrap_or(0);
    EpochRegret {
        epoch_index,
        threshold,
        eta,
        screened,
        verified,
        loss,
        wasted_verifications: wasted,
        s_min,
        regret: loss - s_min as f64,
        bound: hedge_bound(slots, eta, threshold),
        slot_losses,
        complete: false,
        revenue_shares: None,
    }
}

pub fn compute_regret(log: &MetricsLog, provider: ProviderId) -> RegretReport {
    let slots = log.slots[provider.index()];
    let records: Vec<&ScreeningRecord> = log.screenings_for(provider).collect();
    let mut epochs = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let epoch = records[start].epoch_index;
        let end = records[start..]
            .iter()
            .position(|r| r.epoch_index != epoch)
            .map_or(records.len(), |n| start + n);
        let first = records[start];
        let mut er = epoch_regret(
            records[start..end].iter().copied(),
            slots,
            epoch,
            first.epoch_threshold,
            first.eta,
        );
        if let Some((_, report)) = log
            .revenue
            .iter()
            .find(|(p, r)| *p == provider && r.epoch_index == epoch)
        {
            er.complete = true;
            er.revenue_shares = Some(report.shares.clone());
        }
        epochs.push(er);
        start = end;
    }

    let mut cumulative = Vec::new();
    let (mut t_total, mut cum_regret) = (0u64, 0.0);
    for e in epochs.iter().filter(|e| e.complete) {
        t_total += e.threshold;
        cum_regret += e.regret;
        cumulative.push(CumulativePoint {
            t_total,
            regret: cum_regret,
        });
    }
    let points: Vec<(f64, f64)> = cumulative
        .iter()
        .map(|p| (p.t_total as f64, p.regret))
        .collect();
    RegretReport {
        provider,
        slots,
        wasted_verifications: epochs.iter().map(|e| e.wasted_verifications).sum(),
        slope: scaling_fit(&points),
        epochs,
        cumulative,
        t_total,
        cumulative_regret: cum_regret,
    }
}

/// Least-squares slope of `ln y` against `ln x`. `None` with fewer than two
/// points or any nonpositive coordinate.
pub fn scaling_fit(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::log::ScreeningOutcome;
    use crate::types::TxId;

    #[test]
    fn tuned_bound_example() {
        let t = 100;
        let eta = (2f64.ln() / t as f64).sqrt();
        let b = hedge_bound(2, eta, t);
        assert!((b - 1.5 * (100.0 * 2f64.ln()).sqrt()).abs() < 1e-12);
        assert!((b - 12.4883).abs() < 1e-4);
        assert!((tuned_bound(2, 100) - b).abs() < 1e-12);
    }

    #[test]
    fn slope_of_square_root_data_is_half() {
        let pts: Vec<(f64, f64)> = (1..=6)
            .map(|l| {
                let t = ((1u64 << l) - 1) as f64 * 500.0;
                (t, t.sqrt())
            })
            .collect();
        assert!((scaling_fit(&pts).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slope_of_linear_data_is_one() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|l| (l as f64 * 10.0, l as f64 * 10.0)).collect();
        assert!((scaling_fit(&pts).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_regret_slope_is_undefined() {
        let pts = [(1.0, 0.0), (3.0, 0.0), (7.0, 0.0)];
        assert_eq!(scaling_fit(&pts), None);
        assert_eq!(scaling_fit(&[(1.0, 1.0)]), None);
    }

    fn record(deltas: Vec<i64>, loss: f64, outcome: ScreeningOutcome) -> ScreeningRecord {
        ScreeningRecord {
            round: 0,
            provider: ProviderId(0),
            tx: TxId {
                provider: ProviderId(0),
                seq: 0,
                timestamp: 0,
            },
            epoch_index: 0,
            epoch_threshold: 10,
            eta: 0.5,
            drawn_slot: 0,
            outcome,
            proof_loss: loss,
            deltas,
        }
    }

    #[test]
    fn epoch_regret_sums_loss_and_penalties() {
        let recs = [
            record(vec![-1, 0], 0.5, ScreeningOutcome::Invalid),
            record(vec![-1, 0], 0.4, ScreeningOutcome::Valid),
            record(vec![0, 0], 0.0, ScreeningOutcome::Unchecked),
        ];
        let e = epoch_regret(recs.iter(), 2, 0, 10, 0.5);
        assert_eq!(e.slot_losses, vec![2, 0]);
        assert_eq!(e.s_min, 0);
        assert!((e.regret - 0.9).abs() < 1e-12);
        assert_eq!(e.wasted_verifications, 1);
        assert_eq!((e.screened, e.verified), (3, 2));
        assert!((e.bound - hedge_bound(2, 0.5, 10)).abs() < 1e-15);
    }
}
