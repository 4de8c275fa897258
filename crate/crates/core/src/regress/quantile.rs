//! Linear quantile regression by exact vertex descent.
//!
//! The average pinball loss is convex and piecewise linear in the
//! coefficients, so an optimum sits at a vertex where `k` observations are
//! interpolated (`k` = number of coefficients). Starting from a vertex close
//! to the least-squares fit shifted to the `p`-th residual quantile, the
//! solver repeatedly
//!
//! 1. evaluates the directional derivative along the `2k` edges obtained by
//!    releasing one interpolated observation above or below the fit,
//! 2. follows the steepest descending edge with an exact line search over the
//!    breakpoints where other observations cross the fit (a weighted
//!    selection, so many vertices can be passed in one step), and
//! 3. swaps the released observation for the one met at the line minimum.
//!
//! This is the primal simplex of the Barrodale-Roberts / Koenker-d'Orey
//! family. Every step strictly decreases the loss, so it terminates. At
//! degenerate vertices (more than `k` zero residuals) alternative bases are
//! examined before optimality is declared.

use nalgebra::DMatrix;

use super::{check_probability, dot, RegressionDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSolution {
    pub coefficients: Vec<f64>,
    /// Average pinball loss achieved on the training data.
    pub loss: f64,
    pub iterations: usize,
}

/// Coefficient vectors for several probabilities, fitted independently.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub fits: Vec<(f64, QuantileSolution)>,
}

impl QuantileFit {
    pub fn get(&self, p: f64) -> Option<&QuantileSolution> {
        self.fits.iter().find(|(q, _)| (q - p).abs() < 1e-12).map(|(_, s)| s)
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.fits.iter().map(|(p, _)| *p)
    }
}

/// Fits every probability in `probs` separately.
pub fn fit_quantiles(data: &RegressionDataset, probs: &[f64]) -> Result<QuantileFit> {
    let fits = probs
        .iter()
        .map(|&p| fit_quantile(data, p).map(|s| (p, s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileFit { fits })
}

/// Minimises the average pinball loss at probability `p`.
///
/// Columns that are linearly dependent on earlier ones get a zero
/// coefficient, so a constant predictor next to the intercept reduces to the
/// intercept-only problem.
pub fn fit_quantile(data: &RegressionDataset, p: f64) -> Result<QuantileSolution> {
    check_probability(p)?;
    let n = data.n_rows();
    let k = data.n_cols();
    let keep = independent_columns(data);
    let mut coefficients = vec![0.0; k];
    let mut iterations = 0;
    if !keep.is_empty() {
        let kr = keep.len();
        let mut x = Vec::with_capacity(n * kr);
        for i in 0..n {
            let row = data.row(i);
            x.extend(keep.iter().map(|&j| row[j]));
        }
        let solver = VertexSolver {
            x: &x,
            y: data.response(),
            n,
            k: kr,
            p,
        };
        let (beta, its) = solver.solve()?;
        iterations = its;
        for (j, b) in keep.iter().zip(beta) {
            coefficients[*j] = b;
        }
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Unbounded);
    }
    let loss = data.average_pinball_loss(&coefficients, p);
    Ok(QuantileSolution {
        coefficients,
        loss,
        iterations,
    })
}

/// Greedy modified Gram-Schmidt over the design columns.
fn independent_columns(data: &RegressionDataset) -> Vec<usize> {
    let n = data.n_rows();
    let k = data.n_cols();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for j in 0..k {
        let mut v: Vec<f64> = (0..n).map(|i| data.row(i)[j]).collect();
        let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            continue;
        }
        for q in &basis {
            let c = dot(&v, q);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-10 * norm0 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
            keep.push(j);
        }
    }
    keep
}

struct VertexSolver<'a> {
    x: &'a [f64],
    y: &'a [f64],
    n: usize,
    k: usize,
    p: f64,
}

/// Best edge found at a vertex.
struct Edge {
    column: usize,
    sign: f64,
    slope: f64,
}

const MAX_DEGENERATE_CANDIDATES: usize = 10;

impl VertexSolver<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }

    fn solve(&self) -> Result<(Vec<f64>, usize)> {
        let mut basis = self.initial_basis()?;
        let y_scale = self.y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let zero_tol = 1e-11 * y_scale;
        let max_iterations = 100_000 + 20 * self.n;

        let mut in_basis = vec![false; self.n];
        for &b in &basis {
            in_basis[b] = true;
        }
        let mut iterations = 0;
        loop {
            iterations += 1;
            if iterations > max_iterations {
                return Err(Error::NoConvergence(format!(
                    "quantile regression exceeded {max_iterations} iterations"
                )));
            }
            let binv = self
                .basis_inverse(&basis)
                .ok_or_else(|| Error::RankDeficient("singular interpolation basis in quantile regression".into()))?;
            let beta = self.vertex(&binv, &basis);
            let resid = self.residuals(&beta, &in_basis);
            // a[i * k + j] = x_i . d_j with d_j the j-th column of the basis inverse
            let a = self.edge_rates(&binv);

            let edge = match self.best_edge(&a, &resid, &in_basis, zero_tol) {
                Some(e) => e,
                None => match self.degenerate_escape(&basis, &resid, &in_basis, zero_tol) {
                    Some(new_basis) => {
                        for &b in &basis {
                            in_basis[b] = false;
                        }
                        basis = new_basis;
                        for &b in &basis {
                            in_basis[b] = true;
                        }
                        continue;
                    }
                    None => return Ok((beta, iterations)),
                },
            };

            let (step, entering) = self.line_search(&a, &resid, &in_basis, &edge, zero_tol)?;
            debug_assert!(step > 0.0);
            let leaving = basis[edge.column];
            in_basis[leaving] = false;
            in_basis[entering] = true;
            basis[edge.column] = entering;
        }
    }

    /// `k` rows close to the least-squares fit shifted to the `p` quantile of
    /// its residuals, chosen greedily to be linearly independent.
    fn initial_basis(&self) -> Result<Vec<usize>> {
        let data = RegressionDataset::new(self.x.to_vec(), self.k, self.y.to_vec())?;
        let ls = super::fit_ols(&data)?;
        let r: Vec<f64> = (0..self.n)
            .map(|i| self.y[i] - dot(self.row(i), &ls.coefficients))
            .collect();
        let mut sorted = r.clone();
        sorted.sort_by(f64::total_cmp);
        let shift = crate::stats::empirical_quantile(&sorted, self.p);
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| (r[a] - shift).abs().total_cmp(&(r[b] - shift).abs()).then(a.cmp(&b)));

        let mut basis = Vec::with_capacity(self.k);
        let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(self.k);
        for i in order {
            let row = self.row(i);
            let norm0 = dot(row, row).sqrt();
            if norm0 == 0.0 {
                continue;
            }
            let mut v = row.to_vec();
            for q in &ortho {
                let c = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-9 * norm0 {
                v.iter_mut().for_each(|a| *a /= norm);
                ortho.push(v);
                basis.push(i);
                if basis.len() == self.k {
                    return Ok(basis);
                }
            }
        }
        Err(Error::RankDeficient(
            "design rows do not span the coefficient space".into(),
        ))
    }

    fn basis_inverse(&self, basis: &[usize]) -> Option<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.k, self.k);
        for (r, &i) in basis.iter().enumerate() {
            for (c, v) in self.row(i).iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        let scale = m.amax();
        let lu = m.lu();
        let det = lu.determinant();
        if !det.is_finite() || det.abs() <= 1e-13 * scale.powi(self.k as i32) {
            return None;
        }
        lu.try_inverse()
    }

    fn vertex(&self, binv: &DMatrix<f64>, basis: &[usize]) -> Vec<f64> {
        (0..self.k)
            .map(|c| basis.iter().enumerate().map(|(r, &i)| binv[(c, r)] * self.y[i]).sum())
            .collect()
    }

    fn residuals(&self, beta: &[f64], in_basis: &[bool]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                if in_basis[i] {
                    0.0
                } else {
                    self.y[i] - dot(self.row(i), beta)
                }
            })
            .collect()
    }

    fn edge_rates(&self, binv: &DMatrix<f64>) -> Vec<f64> {
        let k = self.k;
        let mut a = vec![0.0; self.n * k];
        for i in 0..self.n {
            let row = self.row(i);
            for j in 0..k {
                a[i * k + j] = (0..k).map(|c| row[c] * binv[(c, j)]).sum();
            }
        }
        a
    }

    /// Steepest descending edge, or `None` at an optimal vertex.
    fn best_edge(&self, a: &[f64], resid: &[f64], in_basis: &[bool], zero_tol: f64) -> Option<Edge> {
        let (p, k) = (self.p, self.k);
        let mut best: Option<Edge> = None;
        for j in 0..k {
            let mut linear = 0.0;
            let mut zero_plus = 0.0;
            let mut zero_minus = 0.0;
            let mut scale = 1.0;
            for i in 0..self.n {
                if in_basis[i] {
                    continue;
                }
                let ai = a[i * k + j];
                scale += ai.abs();
                let r = resid[i];
                if r > zero_tol {
                    linear -= p * ai;
                } else if r < -zero_tol {
                    linear += (1.0 - p) * ai;
                } else {
                    zero_plus += p * (-ai).max(0.0) + (1.0 - p) * ai.max(0.0);
                    zero_minus += p * ai.max(0.0) + (1.0 - p) * (-ai).max(0.0);
                }
            }
            // releasing basis point j below (+d_j) costs 1 - p, above costs p
            for (sign, slope) in [(1.0, (1.0 - p) + linear + zero_plus), (-1.0, p - linear + zero_minus)] {
                if slope < -1e-12 * scale && best.as_ref().is_none_or(|b| slope < b.slope) {
                    best = Some(Edge { column: j, sign, slope });
                }
            }
        }
        best
    }

    fn line_search(
        &self,
        a: &[f64],
        resid: &[f64],
        in_basis: &[bool],
        edge: &Edge,
        zero_tol: f64,
    ) -> Result<(f64, usize)> {
        let k = self.k;
        let mut items: Vec<(f64, f64, usize)> = Vec::new();
        for i in 0..self.n {
            if in_basis[i] {
                continue;
            }
            let r = resid[i];
            if r.abs() <= zero_tol {
                continue;
            }
            let c = edge.sign * a[i * k + edge.column];
            if r * c > 0.0 {
                items.push((r / c, c.abs(), i));
            }
        }
        weighted_first_reaching(&mut items, -edge.slope).ok_or(Error::Unbounded)
    }

    /// At a vertex where more than `k` residuals vanish, looks for another
    /// interpolation basis through the same point that has a descending edge.
    fn degenerate_escape(
        &self,
        basis: &[usize],
        resid: &[f64],
        in_basis: &[bool],
        zero_tol: f64,
    ) -> Option<Vec<usize>> {
        let zeros: Vec<usize> = (0..self.n)
            .filter(|&i| !in_basis[i] && resid[i].abs() <= zero_tol)
            .collect();
        if zeros.is_empty() || zeros.len() + basis.len() > MAX_DEGENERATE_CANDIDATES {
            return None;
        }
        let candidates: Vec<usize> = basis.iter().copied().chain(zeros).collect();
        let mut chosen = Vec::with_capacity(self.k);
        let mut found = None;
        self.subsets(&candidates, 0, &mut chosen, &mut |subset| {
            if subset == basis {
                return false;
            }
            let Some(binv) = self.basis_inverse(subset) else {
                return false;
            };
            let mut mask = vec![false; self.n];
            subset.iter().for_each(|&i| mask[i] = true);
            let beta = self.vertex(&binv, subset);
            let r = self.residuals(&beta, &mask);
            let a = self.edge_rates(&binv);
            if self.best_edge(&a, &r, &mask, zero_tol).is_some() {
                found = Some(subset.to_vec());
                true
            } else {
                false
            }
        });
        found
    }

    fn subsets(
        &self,
        cands: &[usize],
        from: usize,
        chosen: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if chosen.len() == self.k {
            return visit(chosen);
        }
        for idx in from..cands.len() {
            chosen.push(cands[idx]);
            if self.subsets(cands, idx + 1, chosen, visit) {
                return true;
            }
            chosen.pop();
        }
        false
    }
}

/// Smallest breakpoint `t` at which the cumulative weight of all breakpoints
/// `<= t` reaches `target`; expected linear time by quickselect.
fn weighted_first_reaching(items: &mut [(f64, f64, usize)], target: f64) -> Option<(f64, usize)> {
    let target_tol = target * (1.0 - 1e-12);
    let mut remaining = target_tol;
    let (mut lo, mut hi) = (0, items.len());
    let cmp = |a: &(f64, f64, usize), b: &(f64, f64, usize)| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2));
    while hi - lo > 32 {
        let mid = lo + (hi - lo) / 2;
        items[lo..hi].select_nth_unstable_by(mid - lo, cmp);
        let left: f64 = items[lo..=mid].iter().map(|it| it.1).sum();
        if left >= remaining {
            hi = mid + 1;
        } else {
            remaining -= left;
            lo = mid + 1;
        }
    }
    let tail = &mut items[lo..hi];
    tail.sort_by(cmp);
    let mut acc = 0.0;
    for it in tail.iter() {
        acc += it.1;
        if acc >= remaining {
            return Some((it.0, it.2));
        }
    }
    None
}
