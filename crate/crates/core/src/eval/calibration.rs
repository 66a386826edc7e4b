//! Observed risk at a horizon and the Integrated Calibration Index.
//!
//! Observed risk is the Kaplan-Meier complement. Per-subject observed values
//! for smoothing are leave-one-out jackknife pseudo-observations of that
//! complement, which stay unbiased under independent censoring. They are
//! smoothed against predicted risk with a local-linear tricube smoother
//! (span 0.75, no robustness iterations) and the ICI is the mean absolute gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SPAN: f64 = 0.75;
/// Number of points kept in the reported curve.
pub const CURVE_POINTS: usize = 100;

/// Product-limit survival estimate as a right-continuous step function.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeier {
    /// Distinct event times, ascending.
    pub times: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub deaths: Vec<usize>,
    pub survival: Vec<f64>,
    pub max_time: f64,
}

impl KaplanMeier {
    pub fn fit(times: &[f64], events: &[bool]) -> Result<Self> {
        if times.len() != events.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: events.len() });
        }
        if times.is_empty() {
            return Err(Error::EmptyCohort);
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("times must be finite".into()));
        }
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let mut km = KaplanMeier {
            times: vec![],
            at_risk: vec![],
            deaths: vec![],
            survival: vec![],
            max_time: times[order[order.len() - 1]],
        };
        let mut s = 1.0;
        let mut start = 0;
        while start < order.len() {
            let t = times[order[start]];
            let len = order[start..].iter().take_while(|&&i| times[i] == t).count();
            let d = order[start..start + len].iter().filter(|&&i| events[i]).count();
            if d > 0 {
                let r = order.len() - start;
                s *= 1.0 - d as f64 / r as f64;
                km.times.push(t);
                km.at_risk.push(r);
                km.deaths.push(d);
                km.survival.push(s);
            }
            start += len;
        }
        Ok(km)
    }

    /// `S(t)`; errors past the last observed time.
    pub fn survival_at(&self, t: f64) -> Result<f64> {
        if t > self.max_time {
            return Err(Error::HorizonOutOfRange { horizon: t, coverage: self.max_time });
        }
        let k = self.times.partition_point(|v| *v <= t);
        Ok(if k == 0 { 1.0 } else { self.survival[k - 1] })
    }
}

/// Running log-sum of nonzero factors plus a count of exact zeros, so range
/// products survive factors of 0.
struct PrefixProduct {
    log: Vec<f64>,
    zeros: Vec<usize>,
}

impl PrefixProduct {
    fn new(factors: impl Iterator<Item = f64>) -> Self {
        let (mut log, mut zeros) = (vec![0.0], vec![0]);
        for f in factors {
            let (l, z) = (*log.last().unwrap(), *zeros.last().unwrap());
            if f <= 0.0 {
                log.push(l);
                zeros.push(z + 1);
            } else {
                log.push(l + f.ln());
                zeros.push(z);
            }
        }
        PrefixProduct { log, zeros }
    }

    /// Product of factors `[a, b)`.
    fn range(&self, a: usize, b: usize) -> f64 {
        if b <= a {
            1.0
        } else if self.zeros[b] > self.zeros[a] {
            0.0
        } else {
            (self.log[b] - self.log[a]).exp()
        }
    }
}

/// Jackknife pseudo-observations of `1 - S(horizon)`, in `O(n log n)`.
pub fn pseudo_observations(times: &[f64], events: &[bool], horizon: f64) -> Result<Vec<f64>> {
    let km = KaplanMeier::fit(times, events)?;
    let n = times.len();
    let full = 1.0 - km.survival_at(horizon)?;
    if n == 1 {
        return Ok(vec![full]);
    }
    // event-time groups up to the horizon
    let g = km.times.partition_point(|v| *v <= horizon);
    let with_i = PrefixProduct::new((0..g).map(|k| 1.0 - km.deaths[k] as f64 / km.at_risk[k] as f64));
    let without_i = PrefixProduct::new((0..g).map(|k| {
        let r = km.at_risk[k] - 1;
        if r == 0 {
            1.0
        } else {
            1.0 - km.deaths[k] as f64 / r as f64
        }
    }));
    let nf = n as f64;
    Ok((0..n)
        .map(|i| {
            let t = times[i];
            // groups strictly before t have i in the risk set; so does t's own group
            let before = km.times[..g].partition_point(|v| *v < t);
            let own = before < g && km.times[before] == t;
            let mut s = without_i.range(0, before);
            let after = if own {
                let k = before;
                let r = km.at_risk[k] - 1;
                let d = km.deaths[k] - usize::from(events[i]);
                if r > 0 {
                    s *= 1.0 - d as f64 / r as f64;
                }
                k + 1
            } else {
                before
            };
            s *= with_i.range(after, g);
            nf * full - (nf - 1.0) * (1.0 - s)
        })
        .collect())
}

/// Local-linear tricube smoother evaluated at every `x`.
///
/// Each fit uses the `floor(span * n)` nearest neighbours (at least 2). Fits are computed at
/// points spaced at least `delta = 0.01 * range(x)` apart and linearly
/// interpolated in between.
pub fn lowess(x: &[f64], y: &[f64], span: f64) -> Result<Vec<f64>> {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    lowess_with_delta(x, y, span, 0.01 * (hi - lo).max(0.0))
}

/// [`lowess`] with an explicit interpolation distance; `delta = 0` fits at
/// every point.
pub fn lowess_with_delta(x: &[f64], y: &[f64], span: f64, delta: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n == 0 {
        return Err(Error::EmptyCohort);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("smoother inputs must be finite".into()));
    }
    if !(span > 0.0 && span <= 1.0) || !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("invalid smoother span {span} or delta {delta}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let fitted = lowess_sorted(&xs, &ys, span, delta);
    let mut out = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        out[i] = fitted[k];
    }
    Ok(out)
}

fn lowess_sorted(x: &[f64], y: &[f64], span: f64, delta: f64) -> Vec<f64> {
    let n = x.len();
    let range = x[n - 1] - x[0];
    let ns = ((span * n as f64 + 1e-7) as usize).clamp(2.min(n), n);
    let mut fit = vec![0.0; n];
    let (mut left, mut right) = (0usize, ns - 1);
    let mut i = 0usize;
    let mut last: Option<usize> = None;
    loop {
        while right + 1 < n && x[i] - x[left] > x[right + 1] - x[i] {
            left += 1;
            right += 1;
        }
        fit[i] = local_fit(x, y, i, left, right, range);
        if let Some(l) = last {
            if i > l + 1 {
                let (x0, x1, f0, f1) = (x[l], x[i], fit[l], fit[i]);
                for j in l + 1..i {
                    let a = if x1 > x0 { (x[j] - x0) / (x1 - x0) } else { 0.0 };
                    fit[j] = a * f1 + (1.0 - a) * f0;
                }
            }
        }
        let mut l = i;
        let cut = x[l] + delta;
        let mut j = l + 1;
        while j < n && x[j] <= cut {
            if x[j] == x[l] {
                fit[j] = fit[l];
                l = j;
            }
            j += 1;
        }
        last = Some(l);
        if l + 1 >= n {
            break;
        }
        i = (l + 1).max(j - 1);
    }
    fit
}

fn local_fit(x: &[f64], y: &[f64], i: usize, left: usize, right: usize, range: f64) -> f64 {
    let xi = x[i];
    let h = (xi - x[left]).max(x[right] - xi);
    let (lo, hi) = (0.001 * h, 0.999 * h);
    // neighbours tied at the window edge are included, as in classic lowess
    let mut end = right;
    while end + 1 < x.len() && x[end + 1] - xi <= hi {
        end += 1;
    }
    let mut start = left;
    while start > 0 && xi - x[start - 1] <= hi {
        start -= 1;
    }
    let (mut sw, mut swx) = (0.0, 0.0);
    let mut w = Vec::with_capacity(end - start + 1);
    for j in start..=end {
        let d = (x[j] - xi).abs();
        let wj = if d <= lo {
            1.0
        } else if d <= hi {
            let u = d / h;
            let c = 1.0 - u * u * u;
            c * c * c
        } else {
            0.0
        };
        w.push(wj);
        sw += wj;
        swx += wj * x[j];
    }
    if sw <= 0.0 {
        return y[i];
    }
    let xbar = swx / sw;
    let mut sxx = 0.0;
    for (k, j) in (start..=end).enumerate() {
        sxx += w[k] * (x[j] - xbar) * (x[j] - xbar);
    }
    let slope_ok = h > 0.0 && (sxx / sw).sqrt() > 0.001 * range;
    let mut fit = 0.0;
    for (k, j) in (start..=end).enumerate() {
        let mut wj = w[k] / sw;
        if slope_ok {
            wj *= 1.0 + (xi - xbar) * (x[j] - xbar) * sw / sxx;
        }
        fit += wj * y[j];
    }
    fit
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub predicted: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub horizon: f64,
    pub mean_predicted: f64,
    /// Kaplan-Meier complement at the horizon.
    pub mean_observed: f64,
    pub ici: f64,
    /// Smoothed curve at up to [`CURVE_POINTS`] quantiles of predicted risk.
    pub curve: Vec<CurvePoint>,
}

pub fn calibration(predicted: &[f64], times: &[f64], events: &[bool], horizon: f64) -> Result<Calibration> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if predicted.len() != times.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: predicted.len() });
    }
    if predicted.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("predicted risks must lie in [0, 1]".into()));
    }
    let km = KaplanMeier::fit(times, events)?;
    let mean_observed = 1.0 - km.survival_at(horizon)?;
    let pseudo = pseudo_observations(times, events, horizon)?;
    let smooth: Vec<f64> = lowess(predicted, &pseudo, DEFAULT_SPAN)?
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    let n = predicted.len() as f64;
    let ici = predicted.iter().zip(&smooth).map(|(p, s)| (p - s).abs()).sum::<f64>() / n;

    let mut order: Vec<usize> = (0..predicted.len()).collect();
    order.sort_by(|&a, &b| predicted[a].total_cmp(&predicted[b]));
    let k = CURVE_POINTS.min(order.len());
    let mut curve: Vec<CurvePoint> = (0..k)
        .map(|q| {
            let idx = if k == 1 { 0 } else { q * (order.len() - 1) / (k - 1) };
            let i = order[idx];
            CurvePoint { predicted: predicted[i], observed: smooth[i] }
        })
        .collect();
    curve.dedup_by(|a, b| a.predicted == b.predicted);

    Ok(Calibration {
        horizon,
        mean_predicted: predicted.iter().sum::<f64>() / n,
        mean_observed,
        ici,
        curve,
    })
}
