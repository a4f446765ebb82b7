use crate::error::{Error, Result};

/// Scale-invariant signal-to-distortion ratio in dB of `estimate` against
/// `reference` (both mean-removed first).
pub fn si_sdr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() || estimate.is_empty() {
        return Err(Error::param(format!(
            "SI-SDR needs equal non-empty lengths, got {} and {}",
            estimate.len(),
            reference.len()
        )));
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let (me, mr) = (mean(estimate), mean(reference));
    let e: Vec<f64> = estimate.iter().map(|v| v - me).collect();
    let r: Vec<f64> = reference.iter().map(|v| v - mr).collect();
    let rr: f64 = r.iter().map(|v| v * v).sum();
    if !(rr > 0.0) {
        return Err(Error::UndefinedRate(
            "SI-SDR reference has zero energy".into(),
        ));
    }
    let alpha = e.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / rr;
    let (mut target, mut distortion) = (0.0, 0.0);
    for (a, b) in e.iter().zip(&r) {
        let s = alpha * b;
        target += s * s;
        distortion += (a - s) * (a - s);
    }
    Ok(10.0 * (target / distortion.max(f64::MIN_POSITIVE)).log10())
}
