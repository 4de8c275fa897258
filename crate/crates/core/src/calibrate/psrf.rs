//! Multivariate potential scale reduction factor (Brooks & Gelman, 1998).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Point estimate of the multivariate PSRF.
///
/// `chains[j][t]` is draw `t` of chain `j`, a point of dimension `d`. The
/// leading `discard_fraction` of every chain is dropped first. With `m`
/// chains of `n` retained draws, within-chain covariance `W` and
/// between-chain covariance of the chain means `B/n`, the estimate is
///
/// `sqrt((n - 1) / n + (m + 1) / m * lambda_max(W^-1 B / n))`.
///
/// It is invariant under any common affine map of the parameters and tends to
/// `sqrt((n - 1) / n)` when all chains share the same mean.
pub fn psrf(chains: &[Vec<Vec<f64>>], discard_fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&discard_fraction) {
        return Err(Error::invalid(format!(
            "discard fraction must be in [0, 1), got {discard_fraction}"
        )));
    }
    let m = chains.len();
    if m < 2 {
        return Err(Error::invalid("PSRF needs at least two chains"));
    }
    let len = chains.iter().map(Vec::len).min().unwrap_or(0);
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("chains differ in length"));
    }
    let start = (len as f64 * discard_fraction).floor() as usize;
    let n = len - start;
    if n < 10 {
        return Err(Error::invalid(format!(
            "need at least 10 draws per chain after discarding, have {n}"
        )));
    }
    let d = chains[0][start].len();
    if d == 0 || chains.iter().flat_map(|c| &c[start..]).any(|x| x.len() != d) {
        return Err(Error::invalid("inconsistent draw dimension"));
    }

    let means: Vec<DVector<f64>> = chains
        .iter()
        .map(|c| {
            let mut s = DVector::zeros(d);
            for x in &c[start..] {
                s += DVector::from_column_slice(x);
            }
            s / n as f64
        })
        .collect();

    let mut w = DMatrix::zeros(d, d);
    for (c, mean) in chains.iter().zip(&means) {
        for x in &c[start..] {
            let dev = DVector::from_column_slice(x) - mean;
            w += &dev * dev.transpose();
        }
    }
    w /= (m * (n - 1)) as f64;

    let grand = means.iter().fold(DVector::zeros(d), |acc, v| acc + v) / m as f64;
    let mut b_over_n = DMatrix::zeros(d, d);
    for mean in &means {
        let dev = mean - &grand;
        b_over_n += &dev * dev.transpose();
    }
    b_over_n /= (m - 1) as f64;

    // lambda_max(W^-1 B/n) via the symmetric form L^-1 (B/n) L^-T with W = L L^T.
    let chol = w.clone().cholesky().ok_or(Error::DegenerateChains)?;
    let l = chol.l();
    let scale = w.diagonal().max();
    if !(scale > 0.0) || l.diagonal().iter().any(|&v| v <= scale.sqrt() * 1e-12) {
        return Err(Error::DegenerateChains);
    }
    let linv = l.try_inverse().ok_or(Error::DegenerateChains)?;
    let sym = &linv * &b_over_n * linv.transpose();
    let sym = (&sym + sym.transpose()) * 0.5;
    let lambda = sym.symmetric_eigenvalues().max().max(0.0);

    let nf = n as f64;
    let mf = m as f64;
    Ok(((nf - 1.0) / nf + (mf + 1.0) / mf * lambda).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_chains(seed: u64, m: usize, n: usize, offsets: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|j| {
                (0..n)
                    .map(|_| {
                        let a: f64 = StandardNormal.sample(&mut rng);
                        let b: f64 = StandardNormal.sample(&mut rng);
                        vec![a + offsets[j], 0.5 * a + b]
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn well_mixed_chains_are_near_one() {
        let chains = gaussian_chains(1, 3, 2000, &[0.0, 0.0, 0.0]);
        let r = psrf(&chains, 0.5).unwrap();
        assert!(r < 1.05, "psrf = {r}");
    }

    #[test]
    fn separated_chains_are_flagged() {
        let chains = gaussian_chains(2, 2, 2000, &[0.0, 10.0]);
        let r = psrf(&chains, 0.5).unwrap();
        assert!(r > 1.5, "psrf = {r}");
    }

    #[test]
    fn identical_chains_hit_the_lower_limit() {
        let base = gaussian_chains(3, 1, 400, &[0.0]).remove(0);
        let jitter = |c: &Vec<Vec<f64>>, eps: f64| -> Vec<Vec<f64>> {
            c.iter().map(|x| x.iter().map(|v| v + eps).collect()).collect()
        };
        let chains = vec![base.clone(), jitter(&base, 1e-12), jitter(&base, -1e-12)];
        let r = psrf(&chains, 0.5).unwrap();
        let n = 200.0_f64;
        assert!((r - ((n - 1.0) / n).sqrt()).abs() < 1e-9, "psrf = {r}");
        assert!(r <= 1.0);
    }

    #[test]
    fn affine_invariance() {
        let chains = gaussian_chains(4, 3, 600, &[0.0, 0.3, -0.2]);
        let mapped: Vec<Vec<Vec<f64>>> = chains
            .iter()
            .map(|c| {
                c.iter()
                    .map(|x| vec![3.0 * x[0] - 2.0 * x[1] + 7.0, 0.1 * x[0] + 5.0 * x[1] - 1.0])
                    .collect()
            })
            .collect();
        let a = psrf(&chains, 0.5).unwrap();
        let b = psrf(&mapped, 0.5).unwrap();
        assert!((a - b).abs() < 1e-9 * a, "{a} vs {b}");
    }

    #[test]
    fn constant_chains_are_degenerate() {
        let chains = vec![vec![vec![1.0, 2.0]; 50]; 3];
        assert!(matches!(psrf(&chains, 0.5), Err(Error::DegenerateChains)));
    }

    #[test]
    fn argument_checks() {
        let chains = gaussian_chains(5, 1, 100, &[0.0]);
        assert!(psrf(&chains, 0.5).is_err());
        let chains = gaussian_chains(5, 2, 15, &[0.0, 0.0]);
        assert!(psrf(&chains, 0.5).is_err());
    }
}
