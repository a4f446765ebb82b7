use super::mat::Mat;
use crate::error::{Error, Result};

pub const BLANK: usize = 0;

const ROW_SUM_TOLERANCE: f64 = 1e-6;

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Row-wise log-softmax.
pub fn log_softmax_rows(x: &Mat) -> Mat {
    let mut y = x.clone();
    for r in 0..y.rows() {
        let row = y.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.iter_mut().for_each(|v| *v -= lse);
    }
    y
}

/// Minimum number of frames an alignment of `labels` needs: one per label
/// plus a blank between each pair of equal neighbours.
pub fn min_frames(labels: &[usize]) -> usize {
    labels.len() + labels.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Negative log-probability of `labels` under frame-wise log-probabilities
/// (`T x V`, blank at index 0), summed over all alignments with the
/// log-space forward recursion on the blank-interleaved label sequence.
pub fn ctc_loss(log_probs: &Mat, labels: &[usize]) -> Result<f64> {
    let (frames, vocab) = (log_probs.rows(), log_probs.cols());
    if vocab < 2 {
        return Err(Error::param("CTC needs a blank plus at least one symbol"));
    }
    for t in 0..frames {
        let row = log_probs.row(t);
        let sum: f64 = row.iter().map(|v| v.exp()).sum();
        if row.iter().any(|v| v.is_nan() || *v > 0.0) || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::param(format!(
                "frame {t} is not a log-probability distribution (sums to {sum})"
            )));
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| l == BLANK || l >= vocab) {
        return Err(Error::param(format!("label {bad} outside 1..{vocab}")));
    }
    if min_frames(labels) > frames {
        return Err(Error::InfeasibleAlignment {
            labels: labels.len(),
            frames,
        });
    }
    if labels.is_empty() && frames == 0 {
        return Ok(0.0);
    }

    let mut ext = Vec::with_capacity(2 * labels.len() + 1);
    ext.push(BLANK);
    for &l in labels {
        ext.push(l);
        ext.push(BLANK);
    }
    let s_len = ext.len();
    let mut alpha = vec![f64::NEG_INFINITY; s_len];
    alpha[0] = log_probs.get(0, ext[0]);
    if s_len > 1 {
        alpha[1] = log_probs.get(0, ext[1]);
    }
    let mut next = vec![f64::NEG_INFINITY; s_len];
    for t in 1..frames {
        for s in 0..s_len {
            let mut acc = alpha[s];
            if s >= 1 {
                acc = log_add(acc, alpha[s - 1]);
            }
            if s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2] {
                acc = log_add(acc, alpha[s - 2]);
            }
            next[s] = acc + log_probs.get(t, ext[s]);
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    let total = if s_len > 1 {
        log_add(alpha[s_len - 1], alpha[s_len - 2])
    } else {
        alpha[0]
    };
    if total == f64::NEG_INFINITY {
        return Err(Error::Numerical(
            "every alignment has zero probability".into(),
        ));
    }
    Ok((-total).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn probs(rows: &[Vec<f64>]) -> Mat {
        Mat::from_rows(rows).unwrap().map(f64::ln)
    }

    #[test]
    fn single_frame() {
        let lp = probs(&[vec![0.2, 0.5, 0.3]]);
        assert_eq!(ctc_loss(&lp, &[1]).unwrap(), -(0.5f64.ln()));
    }

    #[test]
    fn two_frames_closed_form() {
        let lp = probs(&[vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]]);
        let expected = -(0.5f64 * 0.1 + 0.5 * 0.6 + 0.2 * 0.1).ln();
        assert!((ctc_loss(&lp, &[1]).unwrap() - expected).abs() < 1e-15);
        // repeated label needs a separating blank
        assert!(matches!(
            ctc_loss(&lp, &[1, 1]),
            Err(Error::InfeasibleAlignment {
                labels: 2,
                frames: 2
            })
        ));
        let expected = -(0.5f64 * 0.3).ln();
        assert!((ctc_loss(&lp, &[1, 2]).unwrap() - expected).abs() < 1e-15);
    }

    fn collapse(path: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        let mut prev = None;
        for &p in path {
            if Some(p) != prev && p != BLANK {
                out.push(p);
            }
            prev = Some(p);
        }
        out
    }

    fn brute_force(lp: &Mat, labels: &[usize]) -> f64 {
        let (t, v) = (lp.rows(), lp.cols());
        let mut total = 0.0;
        let mut path = vec![0usize; t];
        for code in 0..v.pow(t as u32) {
            let mut c = code;
            for p in path.iter_mut() {
                *p = c % v;
                c /= v;
            }
            if collapse(&path) == labels {
                total += path
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| lp.get(i, p).exp())
                    .product::<f64>();
            }
        }
        -total.ln()
    }

    #[test]
    fn matches_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut checked = 0;
        while checked < 200 {
            let t = rng.random_range(1..=6);
            let v = rng.random_range(2..=4);
            let n = rng.random_range(0..=3usize);
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(1..v)).collect();
            if min_frames(&labels) > t {
                continue;
            }
            let logits = Mat::from_vec(
                t,
                v,
                (0..t * v).map(|_| rng.random_range(-3.0..3.0)).collect(),
            )
            .unwrap();
            let lp = log_softmax_rows(&logits);
            let got = ctc_loss(&lp, &labels).unwrap();
            let want = brute_force(&lp, &labels);
            assert!(
                (got - want).abs() < 1e-6,
                "T={t} V={v} {labels:?}: {got} vs {want}"
            );
            assert!(got >= 0.0);
            checked += 1;
        }
    }

    #[test]
    fn appended_certain_blank_keeps_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let logits =
            Mat::from_vec(5, 4, (0..20).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let lp = log_softmax_rows(&logits);
        let mut rows: Vec<Vec<f64>> = (0..5).map(|r| lp.row(r).to_vec()).collect();
        rows.push(vec![
            0.0,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ]);
        let extended = Mat::from_rows(&rows).unwrap();
        for labels in [vec![1], vec![2, 2], vec![3, 1, 2]] {
            let a = ctc_loss(&lp, &labels).unwrap();
            let b = ctc_loss(&extended, &labels).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let lp = probs(&[vec![0.5, 0.6]]);
        assert!(matches!(ctc_loss(&lp, &[1]), Err(Error::Parameter(_))));
        let lp = probs(&[vec![0.5, 0.5]]);
        assert!(ctc_loss(&lp, &[0]).is_err());
        assert!(ctc_loss(&lp, &[2]).is_err());
        assert!(matches!(
            ctc_loss(&Mat::zeros(0, 2), &[1]),
            Err(Error::InfeasibleAlignment { .. })
        ));
        assert_eq!(ctc_loss(&lp, &[]).unwrap(), -(0.5f64.ln()));
    }
}
