use super::HarnessError;

/// Band half-width as a share of the target, in percent.
pub fn band(target: f64, a_percent: f64) -> f64 {
    a_percent / 100.0 * target.abs()
}

/// Earliest time from which every later sample stays within `a_percent` of the
/// target, or `None` if the last sample is out of band.
///
/// Scans backward once: the answer is the sample after the last out-of-band one.
pub fn t_conv(times: &[f64], v: &[f64], target: f64, a_percent: f64) -> Result<Option<f64>, HarnessError> {
    if times.is_empty() || times.len() != v.len() {
        return Err(HarnessError::Series(format!(
            "need equal nonempty series, got {} times and {} velocities",
            times.len(),
            v.len()
        )));
    }
    if target == 0.0 || !target.is_finite() {
        return Err(HarnessError::Series(format!("target {target} leaves the percentage band undefined")));
    }
    let tol = band(target, a_percent);
    match v.iter().rposition(|x| (x - target).abs() > tol) {
        None => Ok(Some(times[0])),
        Some(k) if k + 1 == v.len() => Ok(None),
        Some(k) => Ok(Some(times[k + 1])),
    }
}

/// Headline band for a target: 20 % at low speed, 10 % from 10 km/h up.
pub fn headline_percent(target_kmh: f64) -> f64 {
    if target_kmh.abs() >= 10.0 {
        10.0
    } else {
        20.0
    }
}
