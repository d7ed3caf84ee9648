//! Optimisation over the probability simplex.
//!
//! Two consumers: mixture-membership tests (constrained least squares) and
//! the Renyi solver (projected gradient ascent). Everything here is
//! deterministic: fixed starting points, fixed iteration orders.

/// Euclidean projection onto `{x : x >= 0, sum x = 1}`.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    let mut rho = 0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j as f64 + 1.0);
        if uj - t > 0.0 {
            tau = t;
            rho = j + 1;
        }
    }
    if rho == 0 {
        // all mass collapses onto the largest coordinate
        let mut out = vec![0.0; v.len()];
        let imax = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        out[imax] = 1.0;
        return out;
    }
    let _ = rho;
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Least squares `min ||A w - b||` over the simplex. `a` is row-major,
/// `m x k`. Returns the weights and the max-abs residual of `A w - b`.
///
/// Accelerated projected gradient on the normal equations, then a
/// face polish: the active support is solved exactly subject to
/// `sum w = 1` and re-projected if the polish leaves the simplex.
pub fn lsq_simplex(a: &[Vec<f64>], b: &[f64], max_iter: usize) -> (Vec<f64>, f64) {
    let m = a.len();
    assert!(m > 0 && m == b.len());
    let k = a[0].len();
    assert!(k > 0);

    // Gram matrix and linear term
    let mut g = vec![vec![0.0f64; k]; k];
    let mut c = vec![0.0f64; k];
    for (row, &bj) in a.iter().zip(b) {
        for i in 0..k {
            c[i] += row[i] * bj;
            for l in 0..=i {
                g[i][l] += row[i] * row[l];
            }
        }
    }
    for i in 0..k {
        for l in 0..i {
            g[l][i] = g[i][l];
        }
    }

    let lip = spectral_bound(&g).max(1e-300);
    let step = 1.0 / lip;

    let mut x = vec![1.0 / k as f64; k];
    let mut y = x.clone();
    let mut t_acc = 1.0f64;
    for _ in 0..max_iter {
        let mut grad = vec![0.0f64; k];
        for i in 0..k {
            let mut s = -c[i];
            for l in 0..k {
                s += g[i][l] * y[l];
            }
            grad[i] = s;
        }
        let cand: Vec<f64> = y.iter().zip(&grad).map(|(&yi, &gi)| yi - step * gi).collect();
        let x_next = project_to_simplex(&cand);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_acc * t_acc).sqrt());
        let beta = (t_acc - 1.0) / t_next;
        let moved: f64 = x_next
            .iter()
            .zip(&x)
            .map(|(nx, ox)| (nx - ox) * (nx - ox))
            .sum();
        y = x_next
            .iter()
            .zip(&x)
            .map(|(nx, ox)| nx + beta * (nx - ox))
            .collect();
        x = x_next;
        t_acc = t_next;
        if moved < 1e-32 {
            break;
        }
    }

    x = polish_face(&g, &c, &x).unwrap_or(x);
    let resid = residual_inf(a, b, &x);
    (x, resid)
}

/// Feasibility of `A w >= c` over the simplex: does some mixture of the
/// columns dominate `c` row-wise, up to `slack`?
///
/// Minimises the squared hinge `sum_j max(0, c_j - (A w)_j)^2` by the same
/// accelerated projected-gradient scheme as [`lsq_simplex`], with momentum
/// restarts on objective increase (the hinge satisfies a quadratic growth
/// bound, so restarts make the rate linear; without them the worst
/// shortfall decays like 1/k and tight slacks are out of reach). Returns
/// the witness weights on success, or the index and size of the
/// worst-violated row at the best iterate seen.
pub fn dominating_weights(
    a: &[Vec<f64>],
    c: &[f64],
    slack: f64,
    max_iter: usize,
) -> std::result::Result<Vec<f64>, (usize, f64)> {
    let m = a.len();
    assert!(m == c.len());
    if m == 0 {
        return Ok(vec![]);
    }
    let k = a[0].len();
    if k == 0 {
        let (j, gap) = worst_shortfall(a, c, &[]);
        return if gap <= slack { Ok(vec![]) } else { Err((j, gap)) };
    }

    let mut g = vec![vec![0.0f64; k]; k];
    for row in a {
        for i in 0..k {
            for l in 0..=i {
                g[i][l] += row[i] * row[l];
            }
        }
    }
    for i in 0..k {
        for l in 0..i {
            g[l][i] = g[i][l];
        }
    }
    // hinge gradient is 2 A^T max(0, c - A w); curvature bounded by 2 sigma_max(A)^2
    let step = 1.0 / (2.0 * spectral_bound(&g)).max(1e-300);

    let mut x = vec![1.0 / k as f64; k];
    let mut y = x.clone();
    let mut t_acc = 1.0f64;
    let (_, gap0, mut f_x) = shortfall_and_hinge(a, c, &x);
    let mut best = x.clone();
    let mut best_gap = gap0;
    for _ in 0..max_iter {
        if best_gap <= slack {
            return Ok(best);
        }
        let mut grad = vec![0.0f64; k];
        for (row, &cj) in a.iter().zip(c) {
            let pred: f64 = row.iter().zip(&y).map(|(ai, yi)| ai * yi).sum();
            let h = cj - pred;
            if h > 0.0 {
                for (gi, ai) in grad.iter_mut().zip(row) {
                    *gi -= 2.0 * h * ai;
                }
            }
        }
        let cand: Vec<f64> = y.iter().zip(&grad).map(|(&yi, &gi)| yi - step * gi).collect();
        let x_next = project_to_simplex(&cand);
        let (_, gap, f_next) = shortfall_and_hinge(a, c, &x_next);
        let moved: f64 = x_next
            .iter()
            .zip(&x)
            .map(|(nx, ox)| (nx - ox) * (nx - ox))
            .sum();
        if f_next > f_x {
            t_acc = 1.0;
            y = x_next.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_acc * t_acc).sqrt());
            let beta = (t_acc - 1.0) / t_next;
            y = x_next
                .iter()
                .zip(&x)
                .map(|(nx, ox)| nx + beta * (nx - ox))
                .collect();
            t_acc = t_next;
        }
        x = x_next;
        f_x = f_next;
        if gap < best_gap {
            best_gap = gap;
            best = x.clone();
        }
        if moved < 1e-32 {
            break;
        }
    }
    if best_gap <= slack {
        Ok(best)
    } else {
        let (j, gap) = worst_shortfall(a, c, &best);
        Err((j, gap))
    }
}

/// Row index and size of the largest shortfall `c_j - (A w)_j` (0 when none).
fn worst_shortfall(a: &[Vec<f64>], c: &[f64], w: &[f64]) -> (usize, f64) {
    let mut arg = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for (j, (row, &cj)) in a.iter().zip(c).enumerate() {
        let pred: f64 = row.iter().zip(w).map(|(ai, wi)| ai * wi).sum();
        if cj - pred > worst {
            worst = cj - pred;
            arg = j;
        }
    }
    (arg, worst.max(0.0))
}

pub fn residual_inf(a: &[Vec<f64>], b: &[f64], w: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (row, &bj) in a.iter().zip(b) {
        let pred: f64 = row.iter().zip(w).map(|(ai, wi)| ai * wi).sum();
        worst = worst.max((pred - bj).abs());
    }
    worst
}

/// Solve the equality-constrained problem on the support of `x` exactly:
/// minimise the quadratic with `sum w = 1`, coordinates off the support
/// pinned to zero. Returns None when the face system is singular or the
/// solution leaves the nonnegative orthant.
fn polish_face(g: &[Vec<f64>], c: &[f64], x: &[f64]) -> Option<Vec<f64>> {
    let k = x.len();
    let support: Vec<usize> = (0..k).filter(|&i| x[i] > 1e-12).collect();
    let s = support.len();
    if s == 0 {
        return None;
    }
    // KKT system: [G_SS 1; 1^T 0] [w; nu] = [c_S; 1]
    let n = s + 1;
    let mut mat = vec![vec![0.0f64; n]; n];
    let mut rhs = vec![0.0f64; n];
    for (ii, &i) in support.iter().enumerate() {
        for (jj, &j) in support.iter().enumerate() {
            mat[ii][jj] = g[i][j];
        }
        mat[ii][s] = 1.0;
        mat[s][ii] = 1.0;
        rhs[ii] = c[i];
    }
    rhs[s] = 1.0;
    let sol = solve_dense(mat, rhs)?;
    let mut w = vec![0.0f64; k];
    for (ii, &i) in support.iter().enumerate() {
        if sol[ii] < -1e-12 {
            return None;
        }
        w[i] = sol[ii].max(0.0);
    }
    let total: f64 = w.iter().sum();
    if !(total.is_finite()) || (total - 1.0).abs() > 1e-6 {
        return None;
    }
    for wi in &mut w {
        *wi /= total;
    }
    Some(w)
}

/// Largest-eigenvalue upper bound for a symmetric PSD matrix by a few
/// power iterations from a fixed start.
fn spectral_bound(g: &[Vec<f64>]) -> f64 {
    let k = g.len();
    let mut v = vec![1.0 / (k as f64).sqrt(); k];
    let mut lam = 0.0;
    for _ in 0..30 {
        let mut w = vec![0.0f64; k];
        for i in 0..k {
            for l in 0..k {
                w[i] += g[i][l] * v[l];
            }
        }
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        lam = norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    lam * 1.01 + 1e-12
}

/// Dense Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for cc in col..n {
                a[row][cc] -= f * a[col][cc];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for cc in (row + 1)..n {
            s -= a[row][cc] * x[cc];
        }
        x[row] = s / a[row][row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn projection_basics() {
        assert_eq!(project_to_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.3, 0.3]);
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        let p = project_to_simplex(&[-5.0, -4.0, -3.0]);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(p[2], 1.0);
    }

    #[test]
    fn recovers_interior_mixture() {
        // b is an exact mixture of the columns: residual should vanish
        let rows = 40;
        let w_true = [0.2, 0.5, 0.3];
        let mut a = Vec::new();
        let mut b = Vec::new();
        for j in 0..rows {
            let z = j as f64 / rows as f64 * 6.0 - 3.0;
            let cols = [(-0.5 * z * z).exp(), (-0.5 * (z - 1.0) * (z - 1.0)).exp(),
                (-0.5 * (z + 1.0) * (z + 1.0)).exp()];
            b.push(cols.iter().zip(&w_true).map(|(c, w)| c * w).sum());
            a.push(cols.to_vec());
        }
        let (w, resid) = lsq_simplex(&a, &b, 5000);
        assert!(resid < 1e-10, "resid {resid}");
        for (wi, ti) in w.iter().zip(&w_true) {
            assert_abs_diff_eq!(wi, ti, epsilon = 1e-6);
        }
    }

    #[test]
    fn detects_outside_point() {
        // b cannot be written as a mixture: residual stays visibly positive
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]];
        let b = vec![0.2, 0.2, 0.6];
        let (_, resid) = lsq_simplex(&a, &b, 2000);
        assert!(resid > 0.5);
    }

    #[test]
    fn domination_accepts_scaled_down_mixture() {
        // c sits strictly inside the cone of the columns
        let a = vec![
            vec![0.4, 0.1],
            vec![0.3, 0.2],
            vec![0.3, 0.7],
        ];
        let c = vec![0.2, 0.2, 0.4];
        let w = dominating_weights(&a, &c, 1e-10, 20_000).expect("feasible");
        for (row, &cj) in a.iter().zip(&c) {
            let pred: f64 = row.iter().zip(&w).map(|(x, y)| x * y).sum();
            assert!(pred + 1e-10 >= cj);
        }
    }

    #[test]
    fn domination_reports_escaping_point() {
        // third row is outside every column's support
        let a = vec![vec![0.5, 0.2], vec![0.5, 0.8], vec![0.0, 0.0]];
        let c = vec![0.2, 0.2, 0.6];
        let err = dominating_weights(&a, &c, 1e-9, 20_000).unwrap_err();
        assert_eq!(err.0, 2);
        assert_abs_diff_eq!(err.1, 0.6, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn exact_mixtures_are_dominated(
            raw in proptest::collection::vec(0.0f64..1.0, 12),
            t in proptest::collection::vec(0.01f64..1.0, 3),
        ) {
            // rows of A are arbitrary nonnegative; c = A w0 for a simplex w0
            let a: Vec<Vec<f64>> = raw.chunks(3).map(|ch| ch.to_vec()).collect();
            let total: f64 = t.iter().sum();
            let w0: Vec<f64> = t.iter().map(|x| x / total).collect();
            let c: Vec<f64> = a
                .iter()
                .map(|row| row.iter().zip(&w0).map(|(x, y)| x * y).sum())
                .collect();
            prop_assert!(dominating_weights(&a, &c, 1e-7, 50_000).is_ok());
        }

        #[test]
        fn projection_lands_on_simplex(v in proptest::collection::vec(-10.0f64..10.0, 1..8)) {
            let p = project_to_simplex(&v);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn projection_is_idempotent(v in proptest::collection::vec(-3.0f64..3.0, 2..6)) {
            let p = project_to_simplex(&v);
            let pp = project_to_simplex(&p);
            for (a, b) in p.iter().zip(&pp) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
